use leakage_core::estimators::{jitter, plugin_discrete_entropy, plugin_discrete_mi, EstimatorConfig, SampleMatrix};
use leakage_core::rng::rng_from_seed;
use leakage_core::scores::{
    aggregate_reports, cem_align, cem_ct, cem_ic, cem_self, ctl, ctl_i, evaluate_report, icl, icl_ij, icl_pairwise,
    icl_per_concept_from, leakage_compare, s_int, ConceptData, Embeddings, LeakageReport, Outcome, ReportOptions,
    ScoreWithCI,
};
use leakage_core::Error;
use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn coins(n: usize, k: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    Array2::from_shape_simple_fn((n, k), || rng.random_bool(0.5) as u8 as f64)
}

fn jittered(col: &[f64], seed: u64) -> Vec<f64> {
    let m = SampleMatrix::from_column(col).unwrap();
    jitter(&m, &EstimatorConfig::default().with_seed(seed)).as_slice().to_vec()
}

fn noise(shape: (usize, usize, usize), seed: u64) -> Array3<f64> {
    let mut rng = rng_from_seed(seed);
    Array3::from_shape_simple_fn(shape, || StandardNormal.sample(&mut rng))
}

/// Labels y = c_0 XOR c_1 over random concepts.
fn xor_data(n: usize, k: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let c = coins(n, k, seed);
    let y = (0..n).map(|r| (c[[r, 0]] as usize) ^ (c[[r, 1]] as usize)).collect();
    (c, y)
}

#[test]
fn exact_predictions_have_no_leakage() {
    let (c, y) = xor_data(3000, 3, 1);
    let data = ConceptData::new(c.clone(), c, y).unwrap();
    let cfg = EstimatorConfig::default();
    assert!(ctl(&data, &cfg).unwrap().abs() <= 0.02);
    assert!(icl(&data, &cfg).unwrap().abs() <= 0.03);
    assert_eq!(icl_ij(&data, 1, 1, &cfg).unwrap(), 0.0);
}

#[test]
fn activation_equal_to_label_has_full_ctl() {
    // c_0 independent of y, ĉ_0 = jittered y: |I(ĉ_0,y)/H(y) − I(c_0,y)/H(y)| ≈ |1 − 0|
    let n = 4000;
    let c = coins(n, 2, 2);
    let mut rng = rng_from_seed(3);
    let y: Vec<usize> = (0..n).map(|_| rng.random_bool(0.5) as usize).collect();
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let mut chat = c.clone();
    chat.column_mut(0).assign(&ndarray::Array1::from(jittered(&yf, 4)));
    let c0: Vec<u8> = c.column(0).iter().map(|&v| v as u8).collect();
    let oracle = 1.0 - plugin_discrete_mi(&c0, &y).unwrap().value / plugin_discrete_entropy(&y).unwrap().value;
    let data = ConceptData::new(c, chat, y).unwrap();
    let v = ctl_i(&data, 0, &EstimatorConfig::default()).unwrap();
    assert!((v - oracle).abs() <= 0.05, "{v} vs {oracle}");
    assert!((v - 1.0).abs() <= 0.05);
}

#[test]
fn duplicated_activation_has_full_icl() {
    let n = 4000;
    let c = coins(n, 2, 5);
    let mut chat = c.clone();
    let dup = jittered(&c.column(0).to_vec(), 6);
    chat.column_mut(0).assign(&ndarray::Array1::from(dup.clone()));
    chat.column_mut(1).assign(&ndarray::Array1::from(dup));
    let y: Vec<usize> = (0..n).map(|r| c[[r, 0]] as usize).collect();
    let c0: Vec<u8> = c.column(0).iter().map(|&v| v as u8).collect();
    let c1: Vec<u8> = c.column(1).iter().map(|&v| v as u8).collect();
    let truth = plugin_discrete_mi(&c0, &c1).unwrap().value
        / (plugin_discrete_entropy(&c0).unwrap().value * plugin_discrete_entropy(&c1).unwrap().value).sqrt();
    let data = ConceptData::new(c, chat, y).unwrap();
    let cfg = EstimatorConfig::default();
    let v = icl_ij(&data, 0, 1, &cfg).unwrap();
    assert!((v - (1.0 - truth)).abs() <= 0.05, "{v}");
    assert_eq!(v, icl_ij(&data, 1, 0, &cfg).unwrap());
}

#[test]
fn constant_label_is_rejected() {
    let c = coins(100, 2, 1);
    let data = ConceptData::new(c.clone(), c, vec![1; 100]).unwrap();
    assert!(matches!(ctl(&data, &EstimatorConfig::default()), Err(Error::DegenerateLabel(_))));
}

#[test]
fn constant_concept_is_named() {
    let mut c = coins(200, 2, 1);
    c.column_mut(1).fill(0.0);
    let y: Vec<usize> = (0..200).map(|r| c[[r, 0]] as usize).collect();
    let data = ConceptData::new(c.clone(), c, y).unwrap();
    match icl_ij(&data, 0, 1, &EstimatorConfig::default()) {
        Err(Error::DegenerateVariable(name)) => assert!(name.contains("_1"), "{name}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn per_concept_and_average_arithmetic() {
    let mut m = Array2::zeros((3, 3));
    m[[0, 1]] = 0.3;
    m[[1, 0]] = 0.3;
    m[[0, 2]] = 0.3;
    m[[2, 0]] = 0.3;
    let per = icl_per_concept_from(&m);
    assert!((per[0] - 0.3).abs() < 1e-15);
    assert!((per[1] - 0.15).abs() < 1e-15);
    assert!((per.iter().sum::<f64>() / 3.0 - 0.2).abs() < 1e-15);
}

#[test]
fn intervention_score_is_a_difference() {
    assert_eq!(s_int(0.99, 0.99), 0.0);
    assert!((s_int(0.699, 1.0) - 0.301).abs() < 1e-12);
}

#[test]
fn embedding_scores_on_noise_are_small() {
    let n = 3000;
    let (c, y) = xor_data(n, 2, 7);
    let e = Embeddings::new(noise((n, 2, 2), 8), noise((n, 2, 2), 9), noise((n, 2, 2), 10)).unwrap();
    let data = ConceptData::new(c.clone(), c, y).unwrap().with_embeddings(e).unwrap();
    let cfg = EstimatorConfig::default();
    assert!(cem_ct(&data, &cfg).unwrap() < 0.03);
    assert!(cem_ic(&data, &cfg).unwrap() < 0.03);
    assert!(cem_self(&data, &cfg).unwrap() < 0.03);
    assert!(cem_align(&data, &cfg).unwrap().abs() < 0.05);
}

#[test]
fn embedding_scores_detect_planted_coordinates() {
    let n = 3000;
    let (c, y) = xor_data(n, 2, 11);
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let mut w = noise((n, 2, 2), 12);
    // every weighted vector carries y
    for i in 0..2 {
        w.slice_mut(ndarray::s![.., i, 0]).assign(&ndarray::Array1::from(jittered(&yf, 13 + i as u64)));
    }
    let e = Embeddings::new(noise((n, 2, 2), 14), noise((n, 2, 2), 15), w).unwrap();
    let data = ConceptData::new(c.clone(), c.clone(), y.clone()).unwrap().with_embeddings(e).unwrap();
    let cfg = EstimatorConfig::default();
    let v = cem_ct(&data, &cfg).unwrap();
    assert!(v >= 0.9, "cem_ct {v}");

    // ĉ^w_1 carries c_0 (the only j < i pair for k = 2); ĉ^w_i carries c_i for self
    let mut w = noise((n, 2, 2), 16);
    w.slice_mut(ndarray::s![.., 1, 0]).assign(&ndarray::Array1::from(jittered(&c.column(0).to_vec(), 17)));
    let e = Embeddings::new(noise((n, 2, 2), 18), noise((n, 2, 2), 19), w).unwrap();
    let data2 = ConceptData::new(c.clone(), c.clone(), y.clone()).unwrap().with_embeddings(e).unwrap();
    let v = cem_ic(&data2, &cfg).unwrap();
    assert!((v - 1.0).abs() <= 0.05, "cem_ic {v}");

    let mut w = noise((n, 2, 2), 20);
    for i in 0..2 {
        w.slice_mut(ndarray::s![.., i, 1]).assign(&ndarray::Array1::from(jittered(&c.column(i).to_vec(), 21 + i as u64)));
    }
    let e = Embeddings::new(noise((n, 2, 2), 23), noise((n, 2, 2), 24), w).unwrap();
    let data3 = ConceptData::new(c.clone(), c, y).unwrap().with_embeddings(e).unwrap();
    let v = cem_self(&data3, &cfg).unwrap();
    assert!((v - 1.0).abs() <= 0.05, "cem_self {v}");
}

#[test]
fn alignment_leakage_of_planted_aligned_vectors() {
    // aligned vectors carry y, unaligned are noise: the score is twice the
    // aligned concepts-task normalised MI, which here is ≈ 1 on every cell
    let n = 4000;
    let (c, y) = xor_data(n, 2, 25);
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let jy = jittered(&yf, 26);
    let mut pos = noise((n, 2, 1), 27);
    let mut neg = noise((n, 2, 1), 28);
    for r in 0..n {
        for i in 0..2 {
            if c[[r, i]] == 1.0 {
                pos[[r, i, 0]] = jy[r];
            } else {
                neg[[r, i, 0]] = jy[r];
            }
        }
    }
    let w = pos.clone();
    let e = Embeddings::new(pos, neg, w).unwrap();
    let data = ConceptData::new(c.clone(), c, y).unwrap().with_embeddings(e).unwrap();
    let v = cem_align(&data, &EstimatorConfig::default()).unwrap();
    assert!(v > 1.8 && v < 2.0 + 0.05, "{v}");
}

#[test]
fn alignment_needs_populated_cells() {
    let n = 50;
    let mut c = coins(n, 2, 29);
    for r in 0..n {
        c[[r, 1]] = if r < 2 { 1.0 } else { 0.0 };
    }
    let y: Vec<usize> = (0..n).map(|r| r % 2).collect();
    let e = Embeddings::new(noise((n, 2, 1), 1), noise((n, 2, 1), 2), noise((n, 2, 1), 3)).unwrap();
    let data = ConceptData::new(c.clone(), c, y).unwrap().with_embeddings(e).unwrap();
    assert!(matches!(cem_align(&data, &EstimatorConfig::default()), Err(Error::InsufficientSamples { .. })));
}

#[test]
fn exact_truth_is_a_zero_leakage_fixed_point() {
    let (c, y) = xor_data(5000, 3, 30);
    let data = ConceptData::new(c.clone(), c, y).unwrap();
    let r = evaluate_report(&data, &ReportOptions::default()).unwrap();
    for s in [r.ctl, r.icl] {
        assert_eq!((s.mean, s.width()), (0.0, 0.0));
        assert!(s.contains(0.0));
    }
}

#[test]
fn jittered_truth_scores_stay_at_estimator_noise() {
    // Each repeat is an absolute difference of two independently jittered
    // estimates, so the mean sits at the noise floor rather than at zero.
    let n = 5000;
    let (c, y) = xor_data(n, 3, 30);
    let mut chat = c.clone();
    for i in 0..3 {
        chat.column_mut(i).assign(&ndarray::Array1::from(jittered(&c.column(i).to_vec(), 40 + i as u64)));
    }
    let data = ConceptData::new(c, chat, y).unwrap();
    let r = evaluate_report(&data, &ReportOptions::default()).unwrap();
    for s in [r.ctl, r.icl] {
        assert!(s.ci95_high < 0.03, "{s:?}");
        assert!(s.width() <= 0.05);
    }
    assert_eq!(r.icl_pairwise[2][2], 0.0);
}

#[test]
fn report_round_trip_and_missing_field() {
    let (c, y) = xor_data(500, 2, 31);
    let data = ConceptData::new(c.clone(), c, y).unwrap();
    let r = evaluate_report(&data, &ReportOptions { repeats: 3, ..Default::default() }).unwrap();
    let text = r.to_json().unwrap();
    assert_eq!(LeakageReport::from_json(&text).unwrap(), r);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("icl");
    match LeakageReport::from_json(&v.to_string()) {
        Err(Error::MissingField(f)) => assert_eq!(f, "icl"),
        other => panic!("unexpected {other:?}"),
    }
    let mut csv = Vec::new();
    r.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("score,mean,ci95_low,ci95_high,repeats\nctl,"));
    assert!(text.contains("\nicl_0_1,"));
}

#[test]
fn cem_flag_without_embeddings_is_a_missing_field() {
    let (c, y) = xor_data(200, 2, 32);
    let data = ConceptData::new(c.clone(), c, y).unwrap();
    let r = evaluate_report(&data, &ReportOptions { cem: true, ..Default::default() });
    assert!(matches!(r, Err(Error::MissingField(_))));
}

fn ci(mean: f64, half: f64) -> ScoreWithCI {
    ScoreWithCI { mean, ci95_low: mean - half, ci95_high: mean + half, repeats: 5 }
}

#[test]
fn aggregated_reports_compare_by_fold_intervals() {
    let (c, y) = xor_data(400, 2, 33);
    let base = evaluate_report(&ConceptData::new(c.clone(), c, y).unwrap(), &ReportOptions { repeats: 2, ..Default::default() })
        .unwrap();
    let make = |ctl_means: [f64; 3]| -> LeakageReport {
        let folds: Vec<LeakageReport> = ctl_means
            .iter()
            .map(|&m| LeakageReport { ctl: ci(m, 0.01), icl: ci(0.1, 0.01), s_int: Some(0.0), ..base.clone() })
            .collect();
        aggregate_reports(&folds).unwrap()
    };
    let a = make([0.30, 0.32, 0.31]);
    let b = make([0.05, 0.06, 0.04]);
    assert_eq!(a.ci_over, "folds");
    assert!((a.ctl.mean - 0.31).abs() < 1e-12);
    assert_eq!(a.s_int_ci.unwrap().width(), 0.0);
    assert_eq!(leakage_compare(&a, &b).unwrap().outcome, Outcome::AHigher);
    assert_eq!(leakage_compare(&b, &a).unwrap().outcome, Outcome::BHigher);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn permuting_concepts_permutes_scores(seed in 0u64..1000, perm_idx in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[perm_idx];
        let n = 300;
        let c = coins(n, 3, seed);
        let mut rng = rng_from_seed(seed ^ 0xABCD);
        let chat = c.mapv(|v| v * 0.8 + rng.random::<f64>() * 0.2);
        let y: Vec<usize> = (0..n).map(|r| ((c[[r, 0]] + c[[r, 2]]) >= 1.0) as usize).collect();
        let data = ConceptData::new(c, chat, y).unwrap();
        let permuted = data.permute_concepts(&perm).unwrap();
        let cfg = EstimatorConfig::default().with_seed(seed);
        let a = icl_pairwise(&data, &cfg).unwrap();
        let b = icl_pairwise(&permuted, &cfg).unwrap();
        for i in 0..3 {
            prop_assert_eq!(ctl_i(&permuted, i, &cfg).unwrap(), ctl_i(&data, perm[i], &cfg).unwrap());
            for j in 0..3 {
                prop_assert_eq!(b[[i, j]], a[[perm[i], perm[j]]]);
            }
        }
    }

    #[test]
    fn verdict_is_total_and_antisymmetric(
        v in prop::collection::vec((0.0f64..1.0, 0.0f64..0.2), 4)
    ) {
        let s: Vec<ScoreWithCI> = v.iter().map(|&(m, h)| ci(m, h)).collect();
        let ab = leakage_core::scores::compare_intervals(&s[0], &s[1], &s[2], &s[3]).outcome;
        let ba = leakage_core::scores::compare_intervals(&s[2], &s[3], &s[0], &s[1]).outcome;
        let mirrored = match ab {
            Outcome::AHigher => Outcome::BHigher,
            Outcome::BHigher => Outcome::AHigher,
            o => o,
        };
        prop_assert_eq!(ba, mirrored);
    }

    #[test]
    fn ci_brackets_the_mean(values in prop::collection::vec(-1.0f64..1.0, 2..10)) {
        let s = ScoreWithCI::from_values(&values).unwrap();
        prop_assert!(s.ci95_low <= s.mean && s.mean <= s.ci95_high);
    }
}
