use serde::{Deserialize, Serialize};

use super::ci::ScoreWithCI;
use super::report::LeakageReport;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AAbove,
    BAbove,
    Overlap,
}

impl Relation {
    pub fn of(a: &ScoreWithCI, b: &ScoreWithCI) -> Self {
        if a.strictly_above(b) {
            Relation::AAbove
        } else if b.strictly_above(a) {
            Relation::BAbove
        } else {
            Relation::Overlap
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "A_higher")]
    AHigher,
    #[serde(rename = "B_higher")]
    BHigher,
    #[serde(rename = "indistinguishable")]
    Indistinguishable,
    #[serde(rename = "criterion_inapplicable")]
    CriterionInapplicable,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::AHigher => "A_higher",
            Outcome::BHigher => "B_higher",
            Outcome::Indistinguishable => "indistinguishable",
            Outcome::CriterionInapplicable => "criterion_inapplicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreComparison {
    pub score: String,
    pub a: ScoreWithCI,
    pub b: ScoreWithCI,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub outcome: Outcome,
    pub evidence: Vec<ScoreComparison>,
}

/// Leakage Criterion on (CTL, ICL) interval pairs.
///
/// A has higher leakage if both of its scores lie strictly above B's, or
/// one does while the other pair overlaps. Opposite strict orderings make
/// the criterion inapplicable.
pub fn compare_intervals(ctl_a: &ScoreWithCI, icl_a: &ScoreWithCI, ctl_b: &ScoreWithCI, icl_b: &ScoreWithCI) -> ComparisonVerdict {
    let r_ctl = Relation::of(ctl_a, ctl_b);
    let r_icl = Relation::of(icl_a, icl_b);
    use Relation::*;
    let outcome = match (r_ctl, r_icl) {
        (AAbove, AAbove) | (AAbove, Overlap) | (Overlap, AAbove) => Outcome::AHigher,
        (BAbove, BAbove) | (BAbove, Overlap) | (Overlap, BAbove) => Outcome::BHigher,
        (AAbove, BAbove) | (BAbove, AAbove) => Outcome::CriterionInapplicable,
        (Overlap, Overlap) => Outcome::Indistinguishable,
    };
    ComparisonVerdict {
        outcome,
        evidence: vec![
            ScoreComparison { score: "ctl".into(), a: *ctl_a, b: *ctl_b, relation: r_ctl },
            ScoreComparison { score: "icl".into(), a: *icl_a, b: *icl_b, relation: r_icl },
        ],
    }
}

pub fn leakage_compare(a: &LeakageReport, b: &LeakageReport) -> Result<ComparisonVerdict> {
    Ok(compare_intervals(&a.ctl, &a.icl, &b.ctl, &b.icl))
}
