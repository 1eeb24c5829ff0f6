//! Leakage and interpretability scores computed from ground-truth concepts,
//! predicted concept activations, task labels and, for embedding models,
//! the embedding tensors.

mod auc;
mod ci;
mod compare;
mod data;
mod leakage;
mod ois;
mod report;

pub use auc::auc;
pub use ci::{score_with_ci, ScoreWithCI, Z95};
pub use compare::{compare_intervals, leakage_compare, ComparisonVerdict, Outcome, Relation, ScoreComparison};
pub use data::{ConceptData, Embeddings};
pub use leakage::{
    cem_align, cem_ct, cem_ic, cem_self, ctl, ctl_i, icl, icl_i, icl_ij, icl_pairwise, icl_per_concept_from, s_int,
    LeakageScorer,
};
pub use ois::{ois, OisReport, ProbeConfig, UnreliableCell};
pub use report::{aggregate_reports, evaluate_report, LeakageReport, ReportOptions};
