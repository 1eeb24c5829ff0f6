//! Canned experiments on the TabularToy family and the Gaussian benchmark,
//! each checked against reference values with explicit tolerances.
//!
//! Every model class is trained on `folds` seeds. A class carries two
//! reports: the first fold's model alone, with CIs over jitter repeats
//! (`ci_over = "repeats"`), and the aggregate with CIs over folds
//! (`ci_over = "folds"`). Checks name the one they use.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use leakage_core::data::{gen_tabular_toy, write_dataset, Dataset, GaussianMode, TabularToyConfig, Variant};
use leakage_core::estimators::EntropyMethod;
use leakage_core::models::{Encoding, Metrics};
use leakage_core::scores::{aggregate_reports, evaluate_report, leakage_compare, LeakageReport, Outcome, ProbeConfig, ScoreWithCI};
use leakage_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{fold_seed, ModelSpec};
use crate::pipeline::{
    gauss_bench_rows, metric_means, reference_accuracy, report_options, run_parallel, save_fold, test_interventions,
    train_model, write_gauss_csv, write_json, write_report, FoldRun, GaussBenchOptions, GaussRow, Layout,
};

pub const IDS: [&str; 10] =
    ["table2", "table3", "table4", "fig4-tt", "fig5-tt", "fig7-tt", "fig8-tt", "fig9-tt", "fig11-tt", "fig16"];

/// Absolute tolerance on accuracies of trained models and reference heads.
pub const ACCURACY_TOL: f64 = 0.05;
/// Tolerance on the reference-head baselines.
pub const BASELINE_TOL: f64 = 0.03;
/// Tolerance on estimator values against closed forms.
pub const ESTIMATOR_TOL: f64 = 0.02;
/// Largest single drop still counted as non-decreasing.
pub const INVERSION_TOL: f64 = 0.01;

const SWEEP: [f64; 3] = [0.01, 1.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DataTag {
    Tt025,
    Tt075,
    Tt025Incomplete,
    Tt025Misspecified,
}

impl DataTag {
    pub fn name(self) -> &'static str {
        match self {
            DataTag::Tt025 => "tt025",
            DataTag::Tt075 => "tt075",
            DataTag::Tt025Incomplete => "tt025-incomplete",
            DataTag::Tt025Misspecified => "tt025-misspecified",
        }
    }

    pub fn config(self, n: usize, seed: u64) -> TabularToyConfig {
        let (delta, variant) = match self {
            DataTag::Tt025 => (0.25, Variant::Original),
            DataTag::Tt075 => (0.75, Variant::Original),
            DataTag::Tt025Incomplete => (0.25, Variant::Incomplete),
            DataTag::Tt025Misspecified => (0.25, Variant::Misspecified),
        };
        TabularToyConfig { delta, n, seed, variant, ..TabularToyConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReproduceOptions {
    pub seed: u64,
    pub folds: usize,
    pub repeats: usize,
    pub jobs: usize,
    pub n: usize,
    /// Overrides the epochs of every model (encoder and head).
    pub epochs: Option<usize>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions { seed: 0, folds: 5, repeats: 5, jobs: 0, n: 10_000, epochs: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: String,
    pub expected: String,
    pub pass: bool,
}

fn near(name: impl Into<String>, observed: f64, expected: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        observed: format!("{observed:.4}"),
        expected: format!("{expected:.3} ± {tol}"),
        pass: (observed - expected).abs() <= tol,
    }
}

fn holds(name: impl Into<String>, observed: String, expected: &str, pass: bool) -> Check {
    Check { name: name.into(), observed, expected: expected.into(), pass }
}

fn ci_text(s: &ScoreWithCI) -> String {
    format!("{:.4} [{:.4}, {:.4}]", s.mean, s.ci95_low, s.ci95_high)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub s_int: Option<f64>,
    pub ctl: f64,
    pub icl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResult {
    pub dataset: String,
    pub model: String,
    pub folds: Vec<FoldSummary>,
    pub metric_means: BTreeMap<String, f64>,
    /// First fold's model, CIs over score repeats.
    pub single: LeakageReport,
    /// All folds, CIs over folds; absent with a single fold.
    pub class: Option<LeakageReport>,
}

impl ClassResult {
    /// The fold-level report when there is one, else the single model's.
    pub fn best(&self) -> &LeakageReport {
        self.class.as_ref().unwrap_or(&self.single)
    }

    pub fn y_acc(&self) -> f64 {
        self.metric_means["y_acc"]
    }

    pub fn s_int_mean(&self) -> Option<f64> {
        let v: Vec<f64> = self.folds.iter().filter_map(|f| f.s_int).collect();
        (v.len() == self.folds.len()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub dataset: String,
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub ci: Option<ScoreWithCI>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub id: String,
    pub seed: u64,
    pub folds: usize,
    pub repeats: usize,
    pub n: usize,
    pub checks: Vec<Check>,
    pub classes: BTreeMap<String, ClassResult>,
    pub baselines: BTreeMap<String, Baseline>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaussian: Vec<GaussRow>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn class(&self, data: DataTag, spec: &ModelSpec) -> &ClassResult {
        &self.classes[&class_key(data, spec)]
    }
}

pub fn class_key(data: DataTag, spec: &ModelSpec) -> String {
    format!("{}/{}", data.name(), spec.label().expect("reproduce specs are valid"))
}

/// True when `v` never drops, or drops once by at most [`INVERSION_TOL`].
pub fn nondecreasing_with_tolerance(v: &[f64]) -> bool {
    let drops: Vec<f64> = v.windows(2).filter(|w| w[1] < w[0]).map(|w| w[0] - w[1]).collect();
    drops.is_empty() || (drops.len() == 1 && drops[0] <= INVERSION_TOL)
}

/// Model classes to train and score, and datasets whose reference-head
/// accuracy to measure.
#[derive(Debug, Clone, Default)]
pub struct Plan {
    pub classes: Vec<(DataTag, ModelSpec)>,
    pub baselines: Vec<DataTag>,
    /// Include the oracle impurity score in every report.
    pub ois: bool,
}

pub fn soft(lambda: f64) -> ModelSpec {
    ModelSpec::joint(Encoding::Soft, lambda)
}

pub fn logit(lambda: f64) -> ModelSpec {
    ModelSpec::joint(Encoding::Logit, lambda)
}

pub fn plan(id: &str) -> Result<Plan> {
    let classes = |v: Vec<(DataTag, ModelSpec)>| Plan { classes: v, baselines: vec![], ois: false };
    use DataTag::*;
    Ok(match id {
        "table2" => classes(vec![(Tt025, soft(5.0)), (Tt025, logit(5.0))]),
        "fig4-tt" => Plan { ois: true, ..classes(vec![(Tt025, soft(5.0)), (Tt025, logit(5.0))]) },
        "fig5-tt" => Plan { ois: true, ..classes(vec![(Tt025, ModelSpec::hard()), (Tt075, ModelSpec::hard())]) },
        "table3" => Plan { classes: vec![], baselines: vec![Tt025, Tt025Incomplete, Tt025Misspecified], ois: false },
        "table4" => classes(
            [Tt025, Tt025Incomplete, Tt025Misspecified, Tt075]
                .into_iter()
                .flat_map(|d| [(d, soft(10.0)), (d, ModelSpec::hard())])
                .collect(),
        ),
        "fig7-tt" => classes(SWEEP.iter().flat_map(|&l| [(Tt025, soft(l)), (Tt025, logit(l))]).collect()),
        "fig8-tt" => classes(SWEEP.iter().flat_map(|&l| [(Tt025, soft(l)), (Tt025Incomplete, soft(l))]).collect()),
        "fig9-tt" => classes(SWEEP.iter().flat_map(|&l| [(Tt025, soft(l)), (Tt025Misspecified, soft(l))]).collect()),
        "fig11-tt" => classes(vec![(Tt025, ModelSpec::cem(0.01, 0.0)), (Tt025, ModelSpec::cem(5.0, 0.5))]),
        "fig16" => classes(vec![]),
        other => return Err(Error::Config(format!("unknown reproduce id `{other}`; expected one of {}", IDS.join(", ")))),
    })
}

struct FoldOutcome {
    run: FoldRun,
    report: LeakageReport,
    s_int: Option<f64>,
}

/// Trains every class of `plan` on `opts.folds` seeds and scores the test
/// splits. Generated datasets, checkpoints and dumps go into `layout`.
pub fn run_plan(
    plan: &Plan,
    opts: &ReproduceOptions,
    layout: &Layout,
    written: &mut Vec<PathBuf>,
) -> Result<(BTreeMap<String, ClassResult>, BTreeMap<String, Baseline>)> {
    layout.create()?;
    let tags: BTreeSet<DataTag> = plan.classes.iter().map(|(d, _)| *d).chain(plan.baselines.iter().copied()).collect();
    let mut datasets: BTreeMap<DataTag, Dataset> = BTreeMap::new();
    for tag in tags {
        let ds = gen_tabular_toy(&tag.config(opts.n, opts.seed))?;
        let path = layout.dataset(tag.name());
        write_dataset(&ds, &path)?;
        written.push(path.clone());
        written.push(leakage_core::data::sidecar_path(&path));
        datasets.insert(tag, ds);
    }

    let specs: Vec<(DataTag, ModelSpec)> = plan
        .classes
        .iter()
        .map(|(d, s)| {
            let mut s = s.clone();
            if let Some(e) = opts.epochs {
                s.epochs = Some(e);
                s.head_epochs = Some(e);
            }
            (*d, s)
        })
        .collect();
    let mut work = vec![];
    for (i, _) in specs.iter().enumerate() {
        for fold in 0..opts.folds {
            work.push((i, fold));
        }
    }
    let probe = plan.ois.then(ProbeConfig::default);
    let outcomes = run_parallel(opts.jobs, work, |(i, fold)| -> Result<FoldOutcome> {
        let (tag, spec) = &specs[i];
        let ds = &datasets[tag];
        let seed = fold_seed(opts.seed, fold);
        let model = train_model(spec, ds, seed)?;
        let test = ds.split(leakage_core::data::SplitKind::Test);
        let run = FoldRun {
            label: spec.label()?,
            fold,
            seed,
            metrics: leakage_core::models::evaluate(&model, &test)?,
            dump: leakage_core::models::ActivationDump::from_split(&model, &test)?,
            model,
        };
        let cem = run.dump.embeddings.is_some();
        let mut report = evaluate_report(&run.dump.to_concept_data()?, &report_options(opts.seed, fold, opts.repeats, cem, probe))?;
        let s_int = test_interventions(&run.model, ds, seed)?.s_int;
        report.s_int = s_int;
        Ok(FoldOutcome { run, report, s_int })
    })?;

    let mut classes = BTreeMap::new();
    for (i, (tag, spec)) in specs.iter().enumerate() {
        let mine = &outcomes[i * opts.folds..(i + 1) * opts.folds];
        let tag_name = format!("{}-{}", tag.name(), spec.label()?);
        for o in mine {
            written.extend(save_fold(&o.run, &tag_name, layout)?);
        }
        let reports: Vec<LeakageReport> = mine.iter().map(|o| o.report.clone()).collect();
        let class = if reports.len() >= 2 { Some(aggregate_reports(&reports)?) } else { None };
        let result = ClassResult {
            dataset: tag.name().into(),
            model: spec.label()?,
            folds: mine
                .iter()
                .map(|o| FoldSummary {
                    fold: o.run.fold,
                    seed: o.run.seed,
                    metrics: o.run.metrics,
                    s_int: o.s_int,
                    ctl: o.report.ctl.mean,
                    icl: o.report.icl.mean,
                })
                .collect(),
            metric_means: metric_means(&mine.iter().map(|o| o.run.metrics).collect::<Vec<_>>()),
            single: reports[0].clone(),
            class,
        };
        classes.insert(class_key(*tag, &plan.classes[i].1), result);
    }

    let mut baselines = BTreeMap::new();
    for tag in &plan.baselines {
        let ds = &datasets[tag];
        let per_fold = run_parallel(opts.jobs, (0..opts.folds).collect(), |f| reference_accuracy(ds, fold_seed(opts.seed, f)))?;
        let mean = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
        let ci = if per_fold.len() >= 2 { Some(ScoreWithCI::from_values(&per_fold)?) } else { None };
        baselines.insert(tag.name().to_string(), Baseline { dataset: tag.name().into(), per_fold, mean, ci });
    }
    Ok((classes, baselines))
}

fn verdict_check(name: String, a: &LeakageReport, b: &LeakageReport, expected: Outcome) -> Result<Check> {
    let v = leakage_compare(a, b)?;
    Ok(holds(name, v.outcome.as_str().into(), expected.as_str(), v.outcome == expected))
}

fn checks_for(id: &str, r: &Reproduction) -> Result<Vec<Check>> {
    use DataTag::*;
    let mut out = vec![];
    let c = |d: DataTag, s: &ModelSpec| r.class(d, s);
    match id {
        "table2" => {
            let rows = [
                (soft(5.0), [0.993, 0.992, 0.992, 0.990, 0.990, 0.990], 0.000),
                (logit(5.0), [0.995, 0.995, 0.995, 0.991, 0.991, 0.991], 0.301),
            ];
            for (spec, values, s_int) in rows {
                let class = c(Tt025, &spec);
                for (name, v) in ["c_acc", "c_f1", "c_auc", "y_acc", "y_f1", "y_auc"].iter().zip(values) {
                    let observed = class.metric_means.get(*name).copied().unwrap_or(f64::NAN);
                    out.push(near(format!("{}:{name}", class.model), observed, v, ACCURACY_TOL));
                }
                out.push(near(format!("{}:s_int", class.model), class.s_int_mean().unwrap_or(f64::NAN), s_int, 0.05));
            }
        }
        "fig4-tt" => {
            let (s, l) = (c(Tt025, &soft(5.0)), c(Tt025, &logit(5.0)));
            out.push(verdict_check("logit-vs-soft:verdict:repeats".into(), &l.single, &s.single, Outcome::AHigher)?);
            if let (Some(lc), Some(sc)) = (&l.class, &s.class) {
                out.push(verdict_check("logit-vs-soft:verdict:folds".into(), lc, sc, Outcome::AHigher)?);
            }
            let (ls, ss) = (l.s_int_mean().unwrap_or(f64::NAN), s.s_int_mean().unwrap_or(f64::NAN));
            out.push(holds("logit-vs-soft:s_int", format!("{ls:.4} vs {ss:.4}"), "logit > soft", ls > ss));
        }
        "fig5-tt" => {
            for tag in [Tt025, Tt075] {
                let class = c(tag, &ModelSpec::hard());
                let rep = class.best();
                let at = format!("{}:{}", tag.name(), rep.ci_over);
                out.push(holds(format!("{at}:ctl_contains_0"), ci_text(&rep.ctl), "CI contains 0", rep.ctl.contains(0.0)));
                out.push(holds(format!("{at}:icl_contains_0"), ci_text(&rep.icl), "CI contains 0", rep.icl.contains(0.0)));
                if let Some(o) = &rep.ois {
                    out.push(holds(format!("{at}:ois_positive"), ci_text(o), "CI above 0", o.ci95_low > 0.0));
                }
                let zero = class.folds.iter().all(|f| f.s_int == Some(0.0));
                out.push(holds(format!("{}:s_int_zero", tag.name()), format!("{:?}", class.folds.iter().map(|f| f.s_int).collect::<Vec<_>>()), "0 on every fold", zero));
            }
        }
        "table3" => {
            for (tag, label, expected) in [(Tt025, "complete", 1.000), (Tt025Incomplete, "incomplete", 0.786), (Tt025Misspecified, "misspecified", 0.687)] {
                out.push(near(format!("{label}:y_acc"), r.baselines[tag.name()].mean, expected, BASELINE_TOL));
            }
        }
        "table4" => {
            let rows = [(Tt025, 0.988, 0.990), (Tt025Incomplete, 0.799, 0.787), (Tt025Misspecified, 0.776, 0.713), (Tt075, 0.970, 0.975)];
            for (tag, soft_acc, hard_acc) in rows {
                let s = c(tag, &soft(10.0));
                out.push(near(format!("{}:{}:y_acc", tag.name(), s.model), s.y_acc(), soft_acc, ACCURACY_TOL));
                let h = c(tag, &ModelSpec::hard());
                out.push(near(format!("{}:{}:y_acc", tag.name(), h.model), h.y_acc(), hard_acc, ACCURACY_TOL));
            }
        }
        "fig7-tt" => {
            for (name, mk) in [("soft", soft as fn(f64) -> ModelSpec), ("logit", logit)] {
                let reps: Vec<&LeakageReport> = SWEEP.iter().map(|&l| c(Tt025, &mk(l)).best()).collect();
                let means: Vec<f64> = reps.iter().map(|r| r.ctl.mean).collect();
                out.push(holds(
                    format!("{name}:ctl_decreasing_in_lambda"),
                    format!("{:.4} > {:.4} > {:.4}", means[0], means[1], means[2]),
                    "strictly decreasing means",
                    means[0] > means[1] && means[1] > means[2],
                ));
                out.push(holds(
                    format!("{name}:ctl_0.01_above_5:{}", reps[0].ci_over),
                    format!("{} vs {}", ci_text(&reps[0].ctl), ci_text(&reps[2].ctl)),
                    "non-overlapping, first above",
                    reps[0].ctl.strictly_above(&reps[2].ctl),
                ));
            }
            let (l5, s5) = (c(Tt025, &logit(5.0)).best().ctl.mean, c(Tt025, &soft(5.0)).best().ctl.mean);
            out.push(holds("logit-vs-soft:ctl_at_5", format!("{l5:.4} vs {s5:.4}"), "logit > soft", l5 > s5));
        }
        "fig8-tt" | "fig9-tt" => {
            let (other, what) = if id == "fig8-tt" { (Tt025Incomplete, "incomplete-vs-complete") } else { (Tt025Misspecified, "misspecified-vs-well-specified") };
            for &l in &SWEEP {
                let (a, b) = (c(other, &soft(l)), c(Tt025, &soft(l)));
                out.push(verdict_check(format!("{what}:{}:{}", a.model, a.best().ci_over), a.best(), b.best(), Outcome::AHigher)?);
            }
        }
        "fig11-tt" => {
            let (lo, hi) = (c(Tt025, &ModelSpec::cem(0.01, 0.0)).best(), c(Tt025, &ModelSpec::cem(5.0, 0.5)).best());
            let at = &hi.ci_over;
            for (name, a, b) in [("cem_ic", hi.cem_ic, lo.cem_ic), ("cem_self", hi.cem_self, lo.cem_self)] {
                let (a, b) = (a.ok_or_else(|| Error::MissingField(name.into()))?, b.ok_or_else(|| Error::MissingField(name.into()))?);
                out.push(holds(format!("{name}_increases:{at}"), format!("{} vs {}", ci_text(&a), ci_text(&b)), "non-overlapping, (5, 0.5) above", a.strictly_above(&b)));
            }
            for (name, a, b) in [("ctl", hi.ctl, lo.ctl), ("icl", hi.icl, lo.icl)] {
                out.push(holds(format!("{name}_decreases"), format!("{:.4} vs {:.4}", a.mean, b.mean), "(5, 0.5) mean below", a.mean < b.mean));
            }
        }
        "fig16" => {
            let means: Vec<f64> = GAUSS_DIMS
                .iter()
                .map(|&d| {
                    let v: Vec<f64> = r.gaussian.iter().filter(|g| g.d == d).map(|g| g.estimated_norm_mi).collect();
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect();
            out.push(holds(
                "norm_mi_nondecreasing_in_d",
                means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(", "),
                "non-decreasing, one drop ≤ 0.01",
                nondecreasing_with_tolerance(&means),
            ));
            for g in r.gaussian.iter().filter(|g| g.d == 1) {
                out.push(near(format!("d1:repeat{}:mi", g.repeat), g.estimated_mi, g.closed_form_mi, ESTIMATOR_TOL));
            }
        }
        _ => unreachable!("ids are validated by plan()"),
    }
    Ok(out)
}

pub const GAUSS_DIMS: [usize; 5] = [1, 2, 4, 8, 16];
pub const GAUSS_RHO: f64 = 0.3;
pub const GAUSS_REPEATS: usize = 3;

/// Runs one experiment and returns its results without writing anything
/// beyond datasets, checkpoints and dumps (which go into `layout`).
pub fn run(id: &str, opts: &ReproduceOptions, layout: &Layout, written: &mut Vec<PathBuf>) -> Result<Reproduction> {
    if opts.folds < 1 {
        return Err(Error::Config("folds must be at least 1".into()));
    }
    if opts.repeats < 2 {
        return Err(Error::Config(format!("repeats must be at least 2, got {}", opts.repeats)));
    }
    let plan = plan(id)?;
    layout.create()?;
    let (classes, baselines) = run_plan(&plan, opts, layout, written)?;
    let gaussian = if id == "fig16" {
        let g = GaussBenchOptions {
            modes: vec![GaussianMode::Interconcept],
            dims: GAUSS_DIMS.to_vec(),
            rhos: vec![GAUSS_RHO],
            n: opts.n,
            repeats: GAUSS_REPEATS,
            seed: opts.seed,
            entropy: EntropyMethod::SelfInformation,
        };
        gauss_bench_rows(&g, opts.jobs)?
    } else {
        vec![]
    };
    let mut r = Reproduction {
        id: id.into(),
        seed: opts.seed,
        folds: opts.folds,
        repeats: opts.repeats,
        n: opts.n,
        checks: vec![],
        classes,
        baselines,
        gaussian,
    };
    r.checks = checks_for(id, &r)?;
    Ok(r)
}

/// Writes `reproduce-<id>.json` (everything), `reproduce-<id>.csv` (the
/// checks) and `reproduce-<id>-scores.csv` (one row per class score).
/// No timestamps: reruns with the same seed give identical bytes.
pub fn write_reproduction(r: &Reproduction, layout: &Layout) -> Result<Vec<PathBuf>> {
    let json = layout.report(&format!("reproduce-{}.json", r.id));
    write_json(&json, r)?;
    let checks = layout.report(&format!("reproduce-{}.csv", r.id));
    let mut w = csv::Writer::from_path(&checks)?;
    w.write_record(["check", "observed", "expected", "pass"])?;
    for c in &r.checks {
        w.write_record([c.name.as_str(), &c.observed, &c.expected, if c.pass { "PASS" } else { "FAIL" }])?;
    }
    w.flush()?;
    let mut written = vec![json, checks];
    if !r.classes.is_empty() {
        let path = layout.report(&format!("reproduce-{}-scores.csv", r.id));
        write_scores(r, &path)?;
        written.push(path);
    }
    if !r.gaussian.is_empty() {
        let path = layout.report(&format!("reproduce-{}-gauss.csv", r.id));
        write_gauss_csv(&r.gaussian, &path)?;
        written.push(path);
    }
    Ok(written)
}

fn write_scores(r: &Reproduction, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["dataset", "model", "ci_over", "score", "mean", "ci95_low", "ci95_high", "n"])?;
    for class in r.classes.values() {
        for rep in std::iter::once(&class.single).chain(class.class.as_ref()) {
            let mut row = |name: &str, s: &ScoreWithCI| -> Result<()> {
                w.write_record([
                    class.dataset.clone(),
                    class.model.clone(),
                    rep.ci_over.clone(),
                    name.to_string(),
                    s.mean.to_string(),
                    s.ci95_low.to_string(),
                    s.ci95_high.to_string(),
                    s.repeats.to_string(),
                ])?;
                Ok(())
            };
            row("ctl", &rep.ctl)?;
            row("icl", &rep.icl)?;
            for (name, s) in [("cem_ct", rep.cem_ct), ("cem_ic", rep.cem_ic), ("cem_self", rep.cem_self), ("cem_align", rep.cem_align), ("ois", rep.ois), ("s_int", rep.s_int_ci)] {
                if let Some(s) = s {
                    row(name, &s)?;
                }
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

/// Runs and writes one experiment; returns the results and every file written.
pub fn reproduce(id: &str, opts: &ReproduceOptions, layout: &Layout) -> Result<(Reproduction, Vec<PathBuf>)> {
    let mut written = vec![];
    let r = run(id, opts, layout, &mut written)?;
    written.extend(write_reproduction(&r, layout)?);
    written.extend(write_class_reports(&r, layout)?);
    Ok((r, written))
}

/// Each class's reports as standalone JSON/CSV pairs.
pub fn write_class_reports(r: &Reproduction, layout: &Layout) -> Result<Vec<PathBuf>> {
    let mut out = vec![];
    for class in r.classes.values() {
        let base = format!("reproduce-{}-{}-{}", r.id, class.dataset, class.model);
        out.extend(write_report(&class.single, &layout.report(&format!("{base}-repeats.json")))?);
        if let Some(c) = &class.class {
            out.extend(write_report(c, &layout.report(&format!("{base}-folds.json")))?);
        }
    }
    Ok(out)
}
