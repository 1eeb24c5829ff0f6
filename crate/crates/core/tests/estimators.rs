use leakage_core::data::{closed_form_gaussian, gen_gaussian_bench, GaussianBenchConfig, GaussianMode, MultivariateNormal};
use leakage_core::estimators::{
    digamma, entropy, kl_entropy, ksg_entropy, ksg_mi, normalized_mi, plugin_discrete_entropy, plugin_discrete_mi,
    EntropyMethod, EstimatorConfig, NeighborSearch, Normalization, SampleMatrix,
};
use leakage_core::rng::rng_from_seed;
use leakage_core::Error;
use ndarray::array;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal_column(n: usize, seed: u64) -> SampleMatrix {
    let mut rng = rng_from_seed(seed);
    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    SampleMatrix::from_column(&v).unwrap()
}

fn bivariate(rho: f64, n: usize, seed: u64) -> (SampleMatrix, SampleMatrix) {
    let mvn = MultivariateNormal::new(&array![[1.0, rho], [rho, 1.0]]).unwrap();
    let s = mvn.sample_n(&mut rng_from_seed(seed), n);
    (
        SampleMatrix::from_column(&s.column(0).to_vec()).unwrap(),
        SampleMatrix::from_column(&s.column(1).to_vec()).unwrap(),
    )
}

/// Draws N labels from an explicit joint pmf over small alphabets.
fn discrete_pair(pmf: &[Vec<f64>], n: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = rng_from_seed(seed);
    let flat: Vec<(u8, u8, f64)> = pmf
        .iter()
        .enumerate()
        .flat_map(|(a, row)| row.iter().enumerate().map(move |(b, &p)| (a as u8, b as u8, p)))
        .collect();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = flat.last().unwrap();
        for cell in &flat {
            acc += cell.2;
            if u < acc {
                pick = cell;
                break;
            }
        }
        xs.push(pick.0);
        ys.push(pick.1);
    }
    (xs, ys)
}

fn as_matrix(labels: &[u8]) -> SampleMatrix {
    SampleMatrix::from_column(&labels.iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap()
}

#[test]
fn digamma_reference_values() {
    assert!((digamma(1.0).unwrap() + 0.5772156649).abs() < 1e-9);
    assert!((digamma(2.0).unwrap() - 0.4227843351).abs() < 1e-9);
    assert!((digamma(0.5).unwrap() + 1.9635100260).abs() < 1e-9);
    assert!(matches!(digamma(0.0), Err(Error::Domain(_))));
}

#[test]
fn kl_entropy_matches_closed_forms() {
    let cfg = EstimatorConfig::default();
    let h = kl_entropy(&normal_column(10_000, 1), &cfg).unwrap().value;
    assert!((h - 1.4189).abs() <= 0.02, "N(0,1): {h}");

    let mut rng = rng_from_seed(2);
    let u: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let h = kl_entropy(&SampleMatrix::from_column(&u).unwrap(), &cfg).unwrap().value;
    assert!(h.abs() <= 0.02, "U(0,1): {h}");

    let a = normal_column(10_000, 3);
    let b = normal_column(10_000, 4);
    let h = kl_entropy(&a.hstack(&b).unwrap(), &cfg).unwrap().value;
    assert!((h - 2.8379).abs() <= 0.04, "N(0,I2): {h}");
}

#[test]
fn kl_entropy_of_discrete_variable_is_bounded_by_log_m() {
    let labels: Vec<u8> = (0..2000).map(|i| (i % 3) as u8).collect();
    let h = kl_entropy(&as_matrix(&labels), &EstimatorConfig::default()).unwrap().value;
    assert!(h <= 3f64.ln() + 0.05);
}

#[test]
fn too_few_samples_are_rejected() {
    let x = SampleMatrix::from_column(&[0.0, 1.0, 2.0]).unwrap();
    let cfg = EstimatorConfig::default();
    assert!(matches!(kl_entropy(&x, &cfg), Err(Error::InsufficientSamples { n: 3, k: 3, .. })));
    assert!(matches!(ksg_mi(&x, &x, &cfg), Err(Error::InsufficientSamples { .. })));
    let y = SampleMatrix::from_column(&[0.0, 1.0, 2.0, 3.0]).unwrap();
    assert!(matches!(ksg_mi(&x, &y, &cfg), Err(Error::Shape(_))));
}

#[test]
fn ksg_independent_and_correlated_normals() {
    let cfg = EstimatorConfig::default();
    let mi = ksg_mi(&normal_column(10_000, 5), &normal_column(10_000, 6), &cfg).unwrap().value;
    assert!(mi <= 0.02, "independent: {mi}");
    let (x, y) = bivariate(0.6, 10_000, 7);
    let mi = ksg_mi(&x, &y, &cfg).unwrap().value;
    assert!((mi - 0.2231).abs() <= 0.02, "rho 0.6: {mi}");
}

#[test]
fn ksg_closed_form_agreement_over_rho() {
    let cfg = EstimatorConfig::default();
    for (i, rho) in [0.0_f64, 0.3, 0.6, 0.9].into_iter().enumerate() {
        let (x, y) = bivariate(rho, 10_000, 100 + i as u64);
        let mi = ksg_mi(&x, &y, &cfg).unwrap().value;
        let exact = -0.5 * (1.0 - rho * rho).ln();
        assert!((mi - exact).abs() <= 0.02, "rho {rho}: {mi} vs {exact}");
    }
}

#[test]
fn ksg_self_information_of_a_coin_is_log_two() {
    let mut rng = rng_from_seed(8);
    let coin: Vec<u8> = (0..10_000).map(|_| rng.random_bool(0.5) as u8).collect();
    let x = as_matrix(&coin);
    let cfg = EstimatorConfig::default();
    let exact = plugin_discrete_entropy(&coin).unwrap().value;
    let mi = ksg_mi(&x, &x, &cfg).unwrap().value;
    assert!((mi - exact).abs() < 0.02, "{mi} vs {exact}");
    let h = ksg_entropy(&x, &cfg).unwrap().value;
    assert!((h - exact).abs() < 0.02);
    let nmi = normalized_mi(&x, &x, Normalization::ByGeometricMean, EntropyMethod::SelfInformation, &cfg).unwrap();
    assert!((nmi - 1.0).abs() < 0.05, "{nmi}");
}

#[test]
fn ksg_matches_plugin_on_discrete_joints() {
    let cfg = EstimatorConfig::default();
    let pmf = vec![vec![0.4, 0.1], vec![0.1, 0.4]];
    let (a, b) = discrete_pair(&pmf, 10_000, 9);
    let exact = plugin_discrete_mi(&a, &b).unwrap().value;
    let est = ksg_mi(&as_matrix(&a), &as_matrix(&b), &cfg).unwrap().value;
    assert!((est - exact).abs() <= 0.03, "{est} vs {exact}");
    let nmi = normalized_mi(&as_matrix(&a), &as_matrix(&b), Normalization::ByEntropyOfY, EntropyMethod::SelfInformation, &cfg)
        .unwrap();
    assert!((nmi - 0.27807).abs() < 0.05, "{nmi}");
}

#[test]
fn normalized_mi_rejects_constant_denominator() {
    let x = normal_column(100, 1);
    let y = SampleMatrix::from_column(&[1.0; 100]).unwrap();
    let r = normalized_mi(&x, &y, Normalization::ByEntropyOfY, EntropyMethod::SelfInformation, &EstimatorConfig::default());
    assert!(matches!(r, Err(Error::DegenerateVariable(_))));
}

#[test]
fn independent_discrete_pair_normalizes_to_zero() {
    let pmf = vec![vec![0.25, 0.25], vec![0.25, 0.25]];
    let (a, b) = discrete_pair(&pmf, 5000, 10);
    let cfg = EstimatorConfig::default();
    let v = normalized_mi(&as_matrix(&a), &as_matrix(&b), Normalization::ByGeometricMean, EntropyMethod::SelfInformation, &cfg)
        .unwrap();
    assert!(v.abs() < 0.03, "{v}");
}

#[test]
fn gaussian_normalized_mi_is_close_to_closed_form_in_one_dimension() {
    let cfg = GaussianBenchConfig { mode: GaussianMode::Interconcept, d: 1, rho: 0.6, n: 10_000, seed: 3 };
    let (x, y) = gen_gaussian_bench(&cfg).unwrap();
    let exact = closed_form_gaussian(&cfg).unwrap();
    let est = normalized_mi(&x, &y, Normalization::ByGeometricMean, EntropyMethod::KozachenkoLeonenko, &EstimatorConfig::default())
        .unwrap();
    assert!((est - exact.normalized_mi).abs() < 0.02, "{est} vs {}", exact.normalized_mi);
}

#[test]
fn tree_and_brute_force_give_identical_estimates() {
    let (x, y) = bivariate(0.5, 3000, 11);
    let xy = x.hstack(&normal_column(3000, 12)).unwrap();
    let brute = EstimatorConfig { neighbor_search: NeighborSearch::BruteForce, ..Default::default() };
    let tree = EstimatorConfig { neighbor_search: NeighborSearch::KdTree, ..Default::default() };
    assert_eq!(ksg_mi(&xy, &y, &brute).unwrap().value, ksg_mi(&xy, &y, &tree).unwrap().value);
    assert_eq!(
        entropy(&xy, EntropyMethod::KozachenkoLeonenko, &brute).unwrap().value,
        entropy(&xy, EntropyMethod::KozachenkoLeonenko, &tree).unwrap().value
    );
}

fn small_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, u64)> {
    (20usize..80).prop_flat_map(|n| {
        (prop::collection::vec(-5.0f64..5.0, n), prop::collection::vec(0u8..3, n), any::<u64>())
            .prop_map(|(x, y, s)| (x, y.into_iter().map(f64::from).collect(), s))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ksg_is_symmetric_nonnegative_and_deterministic((x, y, seed) in small_pair()) {
        let x = SampleMatrix::from_column(&x).unwrap();
        let y = SampleMatrix::from_column(&y).unwrap();
        let cfg = EstimatorConfig::default().with_seed(seed);
        let a = ksg_mi(&x, &y, &cfg).unwrap().value;
        let b = ksg_mi(&y, &x, &cfg).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9);
        prop_assert!(a >= 0.0);
        prop_assert_eq!(a.to_bits(), ksg_mi(&x, &y, &cfg).unwrap().value.to_bits());
    }

    #[test]
    fn plugin_mi_is_bounded_by_entropies(
        pairs in prop::collection::vec((0u8..4, 0u8..4), 1..200)
    ) {
        let (a, b): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let mi = plugin_discrete_mi(&a, &b).unwrap().value;
        let ha = plugin_discrete_entropy(&a).unwrap().value;
        let hb = plugin_discrete_entropy(&b).unwrap().value;
        prop_assert!(mi >= -1e-12);
        prop_assert!(mi <= ha.min(hb) + 1e-12);
    }
}
