use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use leakage_cli::config::ExperimentConfig;
use leakage_cli::manifest::{unix_now, verify_against, RunManifest};
use leakage_cli::pipeline::{self, AuditOptions, GaussBenchOptions, Layout};
use leakage_cli::reproduce::{self, ReproduceOptions, IDS};
use leakage_cli::{exit_code, Error, Result};
use leakage_core::data::GaussianMode;
use leakage_core::estimators::EntropyMethod;
use leakage_core::scores::ProbeConfig;
use sha2::{Digest, Sha256};

#[derive(Debug, Parser)]
#[command(name = "leakage-audit", version, about = "Measure concept leakage in concept bottleneck and concept embedding models")]
struct Cli {
    /// JSON experiment file; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, env = "AUDIT_SEED")]
    seed: Option<u64>,
    /// Output directory (datasets/, checkpoints/, dumps/, reports/, manifest.json).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Score-evaluation repeats per model.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Training folds per model class.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Fail unless every artifact already in the manifest is reproduced byte for byte.
    #[arg(long, global = true)]
    verify: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the configured TabularToy dataset.
    GenData,
    /// Train every configured model on every fold; write checkpoints, test dumps and metrics.
    Train,
    /// Score activation dumps against their dataset.
    Audit {
        #[arg(required = true)]
        dumps: Vec<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        /// Require embedding sidecars and compute the embedding scores.
        #[arg(long)]
        cem: bool,
        /// Include the oracle impurity score (trains probes).
        #[arg(long)]
        ois: bool,
        /// Also write a report with CIs across the given dumps.
        #[arg(long)]
        aggregate: bool,
        /// Compare two dumps with the leakage criterion.
        #[arg(long)]
        compare: bool,
    },
    /// Random-order interventions on the test split of a dataset.
    Intervene {
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Estimator bias on Gaussians with closed-form mutual information.
    GaussBench {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.3")]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "interconcept", value_parser = parse_mode)]
        mode: Vec<GaussianMode>,
        /// Entropy used for the normalised column: self (as in the scores) or kl.
        #[arg(long, default_value = "self", value_parser = parse_entropy)]
        entropy: EntropyMethod,
    },
    /// Rerun a table or figure and compare with reference values.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(IDS))]
        id: String,
        /// Samples per generated dataset.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Override every model's training epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<GaussianMode, String> {
    match s {
        "interconcept" => Ok(GaussianMode::Interconcept),
        "concepts_task" => Ok(GaussianMode::ConceptsTask),
        _ => Err(format!("unknown mode `{s}` (interconcept, concepts_task)")),
    }
}

fn parse_entropy(s: &str) -> std::result::Result<EntropyMethod, String> {
    match s {
        "self" => Ok(EntropyMethod::SelfInformation),
        "kl" => Ok(EntropyMethod::KozachenkoLeonenko),
        _ => Err(format!("unknown entropy `{s}` (self, kl)")),
    }
}

fn experiment(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.folds {
        cfg.folds = f;
    }
    // gauss-bench reads --repeats as the number of sample draws
    if let (Some(r), false) = (cli.repeats, matches!(cli.command, Command::GaussBench { .. })) {
        cfg.repeats = r;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = experiment(cli)?;
    let layout = Layout::new(cfg.out.clone().unwrap_or_else(|| PathBuf::from("leakage-out")));
    let previous = if cli.verify {
        Some(RunManifest::load(&layout.root)?.ok_or_else(|| {
            Error::MissingDependency(format!("--verify needs an earlier run in {}", layout.root.display()))
        })?)
    } else {
        None
    };
    let started = unix_now();
    let (name, hash, written) = match &cli.command {
        Command::GenData => ("gen-data", cfg.hash(), pipeline::gen_data(&cfg, &layout)?),
        Command::Train => ("train", cfg.hash(), pipeline::train(&cfg, &layout, cli.jobs)?),
        Command::Audit { dumps, dataset, cem, ois, aggregate, compare } => {
            let opts = AuditOptions {
                seed: cfg.seed,
                repeats: cfg.repeats,
                cem: *cem,
                ois: ois.then(ProbeConfig::default),
                aggregate: *aggregate,
                compare: *compare,
            };
            ("audit", command_hash(cli), pipeline::audit(dumps, dataset, &opts, &layout, cli.jobs)?)
        }
        Command::Intervene { checkpoint, dataset } => {
            ("intervene", command_hash(cli), pipeline::intervene_checkpoint(checkpoint, dataset, cfg.seed, &layout)?)
        }
        Command::GaussBench { d, rho, n, mode, entropy } => {
            let opts = GaussBenchOptions {
                modes: mode.clone(),
                dims: d.clone(),
                rhos: rho.clone(),
                n: *n,
                repeats: cli.repeats.unwrap_or(3),
                seed: cfg.seed,
                entropy: *entropy,
            };
            ("gauss-bench", command_hash(cli), pipeline::gauss_bench(&opts, &layout, cli.jobs)?)
        }
        Command::Reproduce { id, n, epochs } => {
            let opts = ReproduceOptions { seed: cfg.seed, folds: cfg.folds, repeats: cfg.repeats, jobs: cli.jobs, n: *n, epochs: *epochs };
            let (r, written) = reproduce::reproduce(id, &opts, &layout)?;
            for c in &r.checks {
                say(format!("{} {}: {} (expected {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.observed, c.expected));
            }
            ("reproduce", command_hash(cli), written)
        }
    };
    if let Some(prev) = previous {
        verify_against(&prev, &layout.root)?;
        say(format!("verified {} artifact(s) against the previous run", prev.artifacts.len()));
    }
    RunManifest::record(&layout.root, name, &hash, started, &written)?;
    for p in &written {
        say(p.display().to_string());
    }
    Ok(())
}

/// Progress output; a closed stdout is not an error.
fn say(line: String) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

/// Commands without an experiment file are identified by their arguments.
fn command_hash(cli: &Cli) -> String {
    hex::encode(Sha256::digest(format!("{:?}|{:?}|{:?}|{:?}", cli.command, cli.seed, cli.repeats, cli.folds).as_bytes()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
