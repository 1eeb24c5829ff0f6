use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use leakage_core::data::{
    closed_form_gaussian, gen_gaussian_bench, gen_tabular_toy, read_dataset, write_dataset, Dataset, GaussianBenchConfig,
    GaussianMode, SplitKind,
};
use leakage_core::estimators::{ksg_mi, normalized_mi, EntropyMethod, EstimatorConfig, Normalization};
use leakage_core::models::{
    embeddings_path, evaluate, intervene, is_own_reference, train_cbm, train_cem, train_reference_head, ActivationDump,
    InterventionResult, Metrics, ModelConfig, Policy, TrainedModel,
};
use leakage_core::nn::{Activation, LayerSpec, TrainConfig};
use leakage_core::rng::derive_seed;
use leakage_core::scores::{evaluate_report, leakage_compare, aggregate_reports, ComparisonVerdict, LeakageReport, ProbeConfig, ReportOptions};
use leakage_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{fold_seed, score_seed, ExperimentConfig, ModelSpec};

/// Reference heads are linear maps from ground-truth concepts to logits.
pub const REFERENCE_EPOCHS: usize = 200;
pub const REFERENCE_BATCH: usize = 512;

const POLICY_STREAM: u64 = 0x901C;
const REFERENCE_STREAM: u64 = 0x4EFE;

/// The output directory tree.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn create(&self) -> Result<()> {
        for sub in ["datasets", "checkpoints", "dumps", "reports"] {
            std::fs::create_dir_all(self.root.join(sub))?;
        }
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{name}.csv"))
    }

    pub fn checkpoint(&self, tag: &str, fold: usize) -> PathBuf {
        self.root.join("checkpoints").join(format!("{tag}-f{fold}.json"))
    }

    pub fn dump(&self, tag: &str, fold: usize) -> PathBuf {
        self.root.join("dumps").join(format!("{tag}-f{fold}.csv"))
    }

    pub fn report(&self, file: &str) -> PathBuf {
        self.root.join("reports").join(file)
    }
}

/// Runs `f` over `items` on a pool of `jobs` threads (0: one per core).
/// Results come back in input order regardless of scheduling.
pub fn run_parallel<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn write_report(report: &LeakageReport, json: &Path) -> Result<Vec<PathBuf>> {
    std::fs::write(json, report.to_json()? + "\n")?;
    let csv = json.with_extension("csv");
    let mut f = BufWriter::new(File::create(&csv)?);
    report.write_csv(&mut f)?;
    f.flush()?;
    Ok(vec![json.to_path_buf(), csv])
}

pub fn check_model_fits(model: &TrainedModel, ds: &Dataset) -> Result<()> {
    if (model.input_dim(), model.n_concepts(), model.n_classes()) != (ds.input_dim(), ds.n_concepts(), ds.n_classes) {
        return Err(Error::Shape(format!(
            "model expects {} inputs, {} concepts, {} classes; dataset has {}, {}, {}",
            model.input_dim(),
            model.n_concepts(),
            model.n_classes(),
            ds.input_dim(),
            ds.n_concepts(),
            ds.n_classes
        )));
    }
    Ok(())
}

pub fn train_model(spec: &ModelSpec, ds: &Dataset, seed: u64) -> Result<TrainedModel> {
    match spec.build(ds.input_dim(), ds.n_concepts(), ds.n_classes, seed)? {
        ModelConfig::Cbm(c) => train_cbm(&c, ds),
        ModelConfig::Cem(c) => train_cem(&c, ds),
    }
}

/// Test accuracy of a linear head trained on ground-truth concepts.
pub fn reference_accuracy(ds: &Dataset, seed: u64) -> Result<f64> {
    let head = [LayerSpec { in_dim: ds.n_concepts(), out_dim: ds.n_classes, activation: Activation::Identity }];
    let tc = TrainConfig { epochs: REFERENCE_EPOCHS, batch_size: REFERENCE_BATCH, seed, ..TrainConfig::default() };
    Ok(train_reference_head(&head, ds, &tc)?.1)
}

/// Random-order interventions on the test split. Independent CBMs are their
/// own reference; other models are compared with [`reference_accuracy`].
pub fn test_interventions(model: &TrainedModel, ds: &Dataset, seed: u64) -> Result<InterventionResult> {
    check_model_fits(model, ds)?;
    let reference = if is_own_reference(model) {
        None
    } else {
        Some(reference_accuracy(ds, derive_seed(seed, REFERENCE_STREAM))?)
    };
    intervene(model, &ds.split(SplitKind::Test), Policy::Random, derive_seed(seed, POLICY_STREAM), reference)
}

pub fn report_options(master: u64, fold: usize, repeats: usize, cem: bool, ois: Option<ProbeConfig>) -> ReportOptions {
    ReportOptions { estimator: EstimatorConfig::default(), base_seed: score_seed(master, fold), repeats, cem, ois }
}

// ---------------------------------------------------------------- gen-data

pub fn gen_data(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    layout.create()?;
    let ds = gen_tabular_toy(&cfg.dataset)?;
    let path = layout.dataset(&cfg.name);
    write_dataset(&ds, &path)?;
    Ok(vec![path.clone(), leakage_core::data::sidecar_path(&path)])
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(path).map_err(|e| match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => {
            Error::MissingDependency(format!("dataset {} does not exist; run gen-data first", path.display()))
        }
        e => e,
    })
}

// ------------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub model: String,
    pub dataset: String,
    pub folds: Vec<FoldMetrics>,
    /// Means over folds; an AUC is left out when any fold lacks it.
    pub mean: BTreeMap<String, f64>,
}

pub fn metric_means(metrics: &[Metrics]) -> BTreeMap<String, f64> {
    let n = metrics.len() as f64;
    let mut out = BTreeMap::new();
    let mut put = |name: &str, vals: Vec<Option<f64>>| {
        if vals.iter().all(Option::is_some) && !vals.is_empty() {
            out.insert(name.to_string(), vals.into_iter().flatten().sum::<f64>() / n);
        }
    };
    put("c_acc", metrics.iter().map(|m| Some(m.c_acc)).collect());
    put("c_f1", metrics.iter().map(|m| Some(m.c_f1)).collect());
    put("c_auc", metrics.iter().map(|m| m.c_auc).collect());
    put("y_acc", metrics.iter().map(|m| Some(m.y_acc)).collect());
    put("y_f1", metrics.iter().map(|m| Some(m.y_f1)).collect());
    put("y_auc", metrics.iter().map(|m| m.y_auc).collect());
    out
}

/// One trained fold, kept in memory.
pub struct FoldRun {
    pub label: String,
    pub fold: usize,
    pub seed: u64,
    pub model: TrainedModel,
    pub metrics: Metrics,
    pub dump: ActivationDump,
}

/// Trains every (model, fold) pair; output is sorted by (model order, fold).
pub fn train_folds(specs: &[ModelSpec], ds: &Dataset, folds: usize, master: u64, jobs: usize) -> Result<Vec<FoldRun>> {
    let mut work = vec![];
    for spec in specs {
        for fold in 0..folds {
            work.push((spec, fold));
        }
    }
    run_parallel(jobs, work, |(spec, fold)| {
        let seed = fold_seed(master, fold);
        let model = train_model(spec, ds, seed)?;
        let test = ds.split(SplitKind::Test);
        Ok(FoldRun {
            label: spec.label()?,
            fold,
            seed,
            metrics: evaluate(&model, &test)?,
            dump: ActivationDump::from_split(&model, &test)?,
            model,
        })
    })
}

pub fn save_fold(run: &FoldRun, tag: &str, layout: &Layout) -> Result<Vec<PathBuf>> {
    let ckpt = layout.checkpoint(tag, run.fold);
    run.model.save(&ckpt)?;
    let dump = layout.dump(tag, run.fold);
    run.dump.write(&dump)?;
    let mut out = vec![ckpt, dump.clone()];
    if run.dump.embeddings.is_some() {
        out.push(embeddings_path(&dump));
    }
    Ok(out)
}

pub fn train(cfg: &ExperimentConfig, layout: &Layout, jobs: usize) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    if cfg.models.is_empty() {
        return Err(Error::Config("the config lists no models".into()));
    }
    layout.create()?;
    let ds = load_dataset(&layout.dataset(&cfg.name))?;
    let runs = train_folds(&cfg.models, &ds, cfg.folds, cfg.seed, jobs)?;
    let mut written = vec![];
    for spec in &cfg.models {
        let label = spec.label()?;
        let tag = format!("{}-{label}", cfg.name);
        let mine: Vec<&FoldRun> = runs.iter().filter(|r| r.label == label).collect();
        for r in &mine {
            written.extend(save_fold(r, &tag, layout)?);
        }
        let summary = MetricsSummary {
            model: label.clone(),
            dataset: cfg.name.clone(),
            folds: mine.iter().map(|r| FoldMetrics { fold: r.fold, seed: r.seed, metrics: r.metrics }).collect(),
            mean: metric_means(&mine.iter().map(|r| r.metrics).collect::<Vec<_>>()),
        };
        let path = layout.report(&format!("metrics-{tag}.json"));
        write_json(&path, &summary)?;
        written.push(path);
    }
    Ok(written)
}

// ------------------------------------------------------------------- audit

/// Replaces the dump's ground truth with the dataset's rows for its ids.
/// Unknown ids, and ids whose concepts or label disagree with the dataset,
/// are reported together.
pub fn align_dump(dump: &mut ActivationDump, ds: &Dataset) -> Result<()> {
    if dump.k() != ds.n_concepts() {
        return Err(Error::Shape(format!("dump has {} concepts, dataset has {}", dump.k(), ds.n_concepts())));
    }
    let mut offending = vec![];
    for (r, &id) in dump.ids.iter().enumerate() {
        let ok = id < ds.n()
            && dump.y[r] == ds.labels[id]
            && (0..dump.k()).all(|j| dump.c[[r, j]] == f64::from(ds.concepts[[id, j]]));
        if !ok {
            offending.push(id as u64);
        }
    }
    if !offending.is_empty() {
        return Err(Error::Alignment { count: offending.len(), preview: offending.into_iter().take(10).collect() });
    }
    let rows = ds.rows(&dump.ids);
    dump.c = rows.concepts;
    dump.y = rows.labels;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AuditOptions {
    pub seed: u64,
    pub repeats: usize,
    /// Require embedding sidecars and score them.
    pub cem: bool,
    pub ois: Option<ProbeConfig>,
    pub aggregate: bool,
    pub compare: bool,
}

pub fn audit_dump(path: &Path, ds: &Dataset, opts: &AuditOptions) -> Result<LeakageReport> {
    let mut dump = ActivationDump::read(path)?;
    align_dump(&mut dump, ds)?;
    if opts.cem && dump.embeddings.is_none() {
        return Err(Error::MissingField(format!("embedding sidecar {}", embeddings_path(path).display())));
    }
    let cem = dump.embeddings.is_some();
    evaluate_report(&dump.to_concept_data()?, &report_options(opts.seed, 0, opts.repeats, cem, opts.ois))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dump".into())
}

pub fn audit(dumps: &[PathBuf], dataset: &Path, opts: &AuditOptions, layout: &Layout, jobs: usize) -> Result<Vec<PathBuf>> {
    if dumps.is_empty() {
        return Err(Error::Config("audit needs at least one dump".into()));
    }
    if opts.repeats < 2 {
        return Err(Error::Config(format!("repeats must be at least 2, got {}", opts.repeats)));
    }
    if opts.compare && dumps.len() != 2 {
        return Err(Error::Config(format!("--compare takes exactly two dumps, got {}", dumps.len())));
    }
    layout.create()?;
    let ds = load_dataset(dataset)?;
    let reports = run_parallel(jobs, dumps.iter().collect(), |p| audit_dump(p, &ds, opts))?;
    let mut written = vec![];
    for (p, r) in dumps.iter().zip(&reports) {
        written.extend(write_report(r, &layout.report(&format!("audit-{}.json", stem(p))))?);
    }
    if opts.aggregate {
        written.extend(write_report(&aggregate_reports(&reports)?, &layout.report("audit-aggregate.json"))?);
    }
    if opts.compare {
        let verdict: ComparisonVerdict = leakage_compare(&reports[0], &reports[1])?;
        let path = layout.report(&format!("compare-{}-vs-{}.json", stem(&dumps[0]), stem(&dumps[1])));
        write_json(&path, &verdict)?;
        written.push(path);
    }
    Ok(written)
}

// --------------------------------------------------------------- intervene

pub fn intervene_checkpoint(checkpoint: &Path, dataset: &Path, seed: u64, layout: &Layout) -> Result<Vec<PathBuf>> {
    layout.create()?;
    let ds = load_dataset(dataset)?;
    let model = TrainedModel::load(checkpoint)?;
    let result = test_interventions(&model, &ds, seed)?;
    let name = stem(checkpoint);
    let json = layout.report(&format!("intervene-{name}.json"));
    write_json(&json, &result)?;
    let csv_path = layout.report(&format!("intervene-{name}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(Error::from)?;
    w.write_record(["n_intervened", "y_acc"]).map_err(Error::from)?;
    for (m, acc) in result.accuracy_curve.iter().enumerate() {
        w.write_record([m.to_string(), acc.to_string()]).map_err(Error::from)?;
    }
    w.flush()?;
    Ok(vec![json, csv_path])
}

// ------------------------------------------------------------- gauss-bench

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussRow {
    pub mode: GaussianMode,
    pub d: usize,
    pub rho: f64,
    pub estimated_mi: f64,
    pub estimated_norm_mi: f64,
    pub closed_form_mi: f64,
    pub closed_form_norm_mi: f64,
    pub repeat: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussBenchOptions {
    pub modes: Vec<GaussianMode>,
    pub dims: Vec<usize>,
    pub rhos: Vec<f64>,
    pub n: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Entropy used to normalise the estimate. Self-information matches the
    /// leakage scores; Kozachenko-Leonenko puts it on the closed form's scale.
    pub entropy: EntropyMethod,
}

pub fn gauss_row(cfg: &GaussianBenchConfig, repeat: usize, entropy: EntropyMethod) -> Result<GaussRow> {
    let (x, y) = gen_gaussian_bench(cfg)?;
    let exact = closed_form_gaussian(cfg)?;
    let est = EstimatorConfig::default().with_seed(cfg.seed);
    let norm = match cfg.mode {
        GaussianMode::Interconcept => Normalization::ByGeometricMean,
        GaussianMode::ConceptsTask => Normalization::ByEntropyOfY,
    };
    Ok(GaussRow {
        mode: cfg.mode,
        d: cfg.d,
        rho: cfg.rho,
        estimated_mi: ksg_mi(&x, &y, &est)?.value,
        estimated_norm_mi: normalized_mi(&x, &y, norm, entropy, &est)?,
        closed_form_mi: exact.mi,
        closed_form_norm_mi: exact.normalized_mi,
        repeat,
    })
}

pub fn gauss_bench_rows(opts: &GaussBenchOptions, jobs: usize) -> Result<Vec<GaussRow>> {
    let mut work = vec![];
    for &mode in &opts.modes {
        for &d in &opts.dims {
            for &rho in &opts.rhos {
                for repeat in 0..opts.repeats {
                    let seed = derive_seed(opts.seed, (work.len() as u64) << 8 | repeat as u64);
                    work.push((GaussianBenchConfig { mode, d, rho, n: opts.n, seed }, repeat));
                }
            }
        }
    }
    for (c, _) in &work {
        c.validate()?;
    }
    run_parallel(jobs, work, |(c, r)| gauss_row(&c, r, opts.entropy))
}

pub fn write_gauss_csv(rows: &[GaussRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mode", "d", "rho", "estimated_mi", "estimated_norm_mi", "closed_form_mi", "closed_form_norm_mi", "repeat"])?;
    for r in rows {
        w.write_record([
            r.mode.as_str().to_string(),
            r.d.to_string(),
            r.rho.to_string(),
            r.estimated_mi.to_string(),
            r.estimated_norm_mi.to_string(),
            r.closed_form_mi.to_string(),
            r.closed_form_norm_mi.to_string(),
            r.repeat.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn gauss_bench(opts: &GaussBenchOptions, layout: &Layout, jobs: usize) -> Result<Vec<PathBuf>> {
    if opts.repeats == 0 || opts.modes.is_empty() || opts.dims.is_empty() || opts.rhos.is_empty() {
        return Err(Error::Config("gauss-bench needs at least one mode, dimension, rho and repeat".into()));
    }
    layout.create()?;
    let rows = gauss_bench_rows(opts, jobs)?;
    let path = layout.report("gauss-bench.csv");
    write_gauss_csv(&rows, &path)?;
    Ok(vec![path])
}
