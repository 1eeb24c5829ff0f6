use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ci::ScoreWithCI;
use super::data::ConceptData;
use super::leakage::{icl_per_concept_from, LeakageScorer};
use super::ois::{ois, ProbeConfig};
use crate::error::{Error, Result};
use crate::estimators::{EntropyMethod, EstimatorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub estimator: EstimatorConfig,
    pub base_seed: u64,
    pub repeats: usize,
    /// Also compute the embedding scores; requires embeddings.
    pub cem: bool,
    pub ois: Option<ProbeConfig>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { estimator: EstimatorConfig::default(), base_seed: 0, repeats: 5, cem: false, ois: None }
    }
}

/// All leakage scores of one model on one evaluation set, or (from
/// [`aggregate_reports`]) of a class of models across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub n_samples: usize,
    pub n_concepts: usize,
    pub ctl: ScoreWithCI,
    pub icl: ScoreWithCI,
    pub ctl_per_concept: Vec<ScoreWithCI>,
    pub icl_per_concept: Vec<ScoreWithCI>,
    /// Mean ICL_ij over repeats; zero diagonal.
    pub icl_pairwise: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cem_ct: Option<ScoreWithCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cem_ic: Option<ScoreWithCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cem_self: Option<ScoreWithCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cem_align: Option<ScoreWithCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_int: Option<f64>,
    /// Spread of S_int across folds; only set on aggregated reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_int_ci: Option<ScoreWithCI>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ois: Option<ScoreWithCI>,
    pub estimator_config: EstimatorConfig,
    pub entropy_method: EntropyMethod,
    /// Jitter seeds of the repeats, or of the first fold when aggregated.
    pub seeds: Vec<u64>,
    /// "repeats" for a single model, "folds" for an aggregate.
    pub ci_over: String,
}

struct RepeatScores {
    ctl: Vec<f64>,
    icl: ndarray::Array2<f64>,
    cem: Option<[f64; 4]>,
}

fn ci_columns(rows: &[Vec<f64>]) -> Result<Vec<ScoreWithCI>> {
    let width = rows[0].len();
    (0..width).map(|j| ScoreWithCI::from_values(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn evaluate_report(data: &ConceptData, options: &ReportOptions) -> Result<LeakageReport> {
    if options.repeats < 2 {
        return Err(Error::config(format!("repeats must be at least 2, got {}", options.repeats)));
    }
    if options.cem {
        data.embeddings()?;
    }
    let seeds: Vec<u64> = (0..options.repeats as u64).map(|r| options.base_seed.wrapping_add(r)).collect();
    let mut per_repeat = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let cfg = options.estimator.with_seed(seed);
        let scorer = LeakageScorer::new(data, &cfg)?;
        let cem = if options.cem {
            Some([scorer.cem_ct()?, scorer.cem_ic()?, scorer.cem_self()?, scorer.cem_align()?])
        } else {
            None
        };
        per_repeat.push(RepeatScores { ctl: scorer.ctl_per_concept()?, icl: scorer.icl_pairwise()?, cem });
    }
    let k = data.k();
    let ctl_rows: Vec<Vec<f64>> = per_repeat.iter().map(|r| r.ctl.clone()).collect();
    let icl_rows: Vec<Vec<f64>> = per_repeat.iter().map(|r| icl_per_concept_from(&r.icl)).collect();
    let mut pairwise = vec![vec![0.0; k]; k];
    for r in &per_repeat {
        for i in 0..k {
            for j in 0..k {
                pairwise[i][j] += r.icl[[i, j]] / per_repeat.len() as f64;
            }
        }
    }
    let cem_ci = |idx: usize| -> Result<Option<ScoreWithCI>> {
        if !options.cem {
            return Ok(None);
        }
        let v: Vec<f64> = per_repeat.iter().map(|r| r.cem.unwrap()[idx]).collect();
        Ok(Some(ScoreWithCI::from_values(&v)?))
    };
    let ois_score = match &options.ois {
        Some(probe) => Some(ois(data, probe, options.base_seed, options.repeats)?.score),
        None => None,
    };
    Ok(LeakageReport {
        n_samples: data.n(),
        n_concepts: k,
        ctl: ScoreWithCI::from_values(&ctl_rows.iter().map(|r| mean(r)).collect::<Vec<_>>())?,
        icl: ScoreWithCI::from_values(&icl_rows.iter().map(|r| mean(r)).collect::<Vec<_>>())?,
        ctl_per_concept: ci_columns(&ctl_rows)?,
        icl_per_concept: ci_columns(&icl_rows)?,
        icl_pairwise: pairwise,
        cem_ct: cem_ci(0)?,
        cem_ic: cem_ci(1)?,
        cem_self: cem_ci(2)?,
        cem_align: cem_ci(3)?,
        s_int: None,
        s_int_ci: None,
        ois: ois_score,
        estimator_config: options.estimator,
        entropy_method: EntropyMethod::SelfInformation,
        seeds,
        ci_over: "repeats".into(),
    })
}

fn fold_ci(reports: &[LeakageReport], f: impl Fn(&LeakageReport) -> Option<f64>, name: &str) -> Result<Option<ScoreWithCI>> {
    let vals: Vec<Option<f64>> = reports.iter().map(f).collect();
    match (vals.iter().all(Option::is_some), vals.iter().any(Option::is_some)) {
        (true, _) => Ok(Some(ScoreWithCI::from_values(&vals.into_iter().flatten().collect::<Vec<_>>())?)),
        (false, false) => Ok(None),
        (false, true) => Err(Error::MissingField(format!("{name} is present in only some of the reports"))),
    }
}

/// Class-level report: each score's CI is taken over the per-fold means.
pub fn aggregate_reports(reports: &[LeakageReport]) -> Result<LeakageReport> {
    if reports.len() < 2 {
        return Err(Error::config(format!("aggregation needs at least 2 reports, got {}", reports.len())));
    }
    let k = reports[0].n_concepts;
    if reports.iter().any(|r| r.n_concepts != k) {
        return Err(Error::shape("reports cover different concept counts"));
    }
    let req = |f: &dyn Fn(&LeakageReport) -> f64| ScoreWithCI::from_values(&reports.iter().map(f).collect::<Vec<_>>());
    let per = |f: &dyn Fn(&LeakageReport, usize) -> f64| -> Result<Vec<ScoreWithCI>> {
        (0..k).map(|i| req(&|r: &LeakageReport| f(r, i))).collect()
    };
    let mut pairwise = vec![vec![0.0; k]; k];
    for r in reports {
        for i in 0..k {
            for j in 0..k {
                pairwise[i][j] += r.icl_pairwise[i][j] / reports.len() as f64;
            }
        }
    }
    let s_int_ci = fold_ci(reports, |r| r.s_int, "s_int")?;
    Ok(LeakageReport {
        n_samples: reports[0].n_samples,
        n_concepts: k,
        ctl: req(&|r| r.ctl.mean)?,
        icl: req(&|r| r.icl.mean)?,
        ctl_per_concept: per(&|r, i| r.ctl_per_concept[i].mean)?,
        icl_per_concept: per(&|r, i| r.icl_per_concept[i].mean)?,
        icl_pairwise: pairwise,
        cem_ct: fold_ci(reports, |r| r.cem_ct.map(|s| s.mean), "cem_ct")?,
        cem_ic: fold_ci(reports, |r| r.cem_ic.map(|s| s.mean), "cem_ic")?,
        cem_self: fold_ci(reports, |r| r.cem_self.map(|s| s.mean), "cem_self")?,
        cem_align: fold_ci(reports, |r| r.cem_align.map(|s| s.mean), "cem_align")?,
        s_int: s_int_ci.map(|s| s.mean),
        s_int_ci,
        ois: fold_ci(reports, |r| r.ois.map(|s| s.mean), "ois")?,
        estimator_config: reports[0].estimator_config,
        entropy_method: reports[0].entropy_method,
        seeds: reports[0].seeds.clone(),
        ci_over: "folds".into(),
    })
}

impl LeakageReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a report, turning absent required fields into
    /// [`Error::MissingField`].
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if let Some(rest) = msg.strip_prefix("missing field `") {
                Error::MissingField(rest.split('`').next().unwrap_or("").to_string())
            } else {
                Error::Json(e)
            }
        })
    }

    /// One row per scalar score: score, mean, ci95_low, ci95_high, repeats.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["score", "mean", "ci95_low", "ci95_high", "repeats"])?;
        let mut row = |name: String, s: &ScoreWithCI| -> Result<()> {
            w.write_record([
                name,
                s.mean.to_string(),
                s.ci95_low.to_string(),
                s.ci95_high.to_string(),
                s.repeats.to_string(),
            ])?;
            Ok(())
        };
        row("ctl".into(), &self.ctl)?;
        row("icl".into(), &self.icl)?;
        for (i, s) in self.ctl_per_concept.iter().enumerate() {
            row(format!("ctl_{i}"), s)?;
        }
        for (i, s) in self.icl_per_concept.iter().enumerate() {
            row(format!("icl_{i}"), s)?;
        }
        for (name, s) in [
            ("cem_ct", &self.cem_ct),
            ("cem_ic", &self.cem_ic),
            ("cem_self", &self.cem_self),
            ("cem_align", &self.cem_align),
            ("ois", &self.ois),
            ("s_int", &self.s_int_ci),
        ] {
            if let Some(s) = s {
                row(name.into(), s)?;
            }
        }
        if let (Some(v), None) = (self.s_int, self.s_int_ci) {
            row("s_int".into(), &ScoreWithCI { mean: v, ci95_low: v, ci95_high: v, repeats: 1 })?;
        }
        for i in 0..self.n_concepts {
            for j in i + 1..self.n_concepts {
                let v = self.icl_pairwise[i][j];
                row(format!("icl_{i}_{j}"), &ScoreWithCI { mean: v, ci95_low: v, ci95_high: v, repeats: self.ctl.repeats })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
