use ndarray::{Array2, Array3};

use super::data::{column, embedding_matrix, label_matrix, ConceptData};
use crate::error::{Error, Result};
use crate::estimators::{denominator, ksg_mi, EntropyMethod, EstimatorConfig, SampleMatrix};

const METHOD: EntropyMethod = EntropyMethod::SelfInformation;

/// Column matrices and label entropy for one estimator configuration.
///
/// Building this once and querying several scores avoids re-extracting the
/// same columns; results are identical to the free functions.
pub struct LeakageScorer<'a> {
    data: &'a ConceptData,
    config: EstimatorConfig,
    label: Option<(SampleMatrix, f64)>,
    c: Vec<SampleMatrix>,
    chat: Vec<SampleMatrix>,
}

impl<'a> LeakageScorer<'a> {
    pub fn new(data: &'a ConceptData, config: &EstimatorConfig) -> Result<Self> {
        let y = label_matrix(&data.labels)?;
        let h_y = denominator(&y, "y", METHOD, config).map_err(|e| match e {
            Error::DegenerateVariable(m) => Error::DegenerateLabel(m),
            other => other,
        })?;
        let mut scorer = Self::new_unlabelled(data, config)?;
        scorer.label = Some((y, h_y));
        Ok(scorer)
    }

    /// Scorer for the label-free scores (ICL, interconcept and self CEM scores).
    pub fn new_unlabelled(data: &'a ConceptData, config: &EstimatorConfig) -> Result<Self> {
        let tc = data.true_concepts.view();
        let pc = data.predicted.view();
        Ok(LeakageScorer {
            data,
            config: *config,
            label: None,
            c: (0..data.k()).map(|j| column(&tc, j)).collect::<Result<_>>()?,
            chat: (0..data.k()).map(|j| column(&pc, j)).collect::<Result<_>>()?,
        })
    }

    fn label(&self) -> Result<(&SampleMatrix, f64)> {
        self.label.as_ref().map(|(y, h)| (y, *h)).ok_or_else(|| Error::MissingField("labels".into()))
    }

    pub fn label_entropy(&self) -> Result<f64> {
        Ok(self.label()?.1)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.data.k() {
            return Err(Error::shape(format!("concept index {i} out of range for {} concepts", self.data.k())));
        }
        Ok(())
    }

    fn mi(&self, a: &SampleMatrix, b: &SampleMatrix) -> Result<f64> {
        Ok(ksg_mi(a, b, &self.config)?.value)
    }

    /// |I(ĉ_i, y) − I(c_i, y)| / H(y)
    pub fn ctl_i(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        let (y, h_y) = self.label()?;
        let learned = self.mi(&self.chat[i], y)?;
        let truth = self.mi(&self.c[i], y)?;
        Ok((learned - truth).abs() / h_y)
    }

    pub fn ctl_per_concept(&self) -> Result<Vec<f64>> {
        (0..self.data.k()).map(|i| self.ctl_i(i)).collect()
    }

    fn entropies(&self, cols: &[SampleMatrix], prefix: &str) -> Result<Vec<f64>> {
        cols.iter()
            .enumerate()
            .map(|(j, z)| denominator(z, &format!("{prefix}_{j}"), METHOD, &self.config))
            .collect()
    }

    fn icl_cell(&self, i: usize, j: usize, h_hat: &[f64], h_true: &[f64]) -> Result<f64> {
        let learned = self.mi(&self.chat[i], &self.chat[j])? / (h_hat[i] * h_hat[j]).sqrt();
        let truth = self.mi(&self.c[i], &self.c[j])? / (h_true[i] * h_true[j]).sqrt();
        Ok((learned - truth).abs())
    }

    pub fn icl_ij(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Ok(0.0);
        }
        let (a, b) = (i.min(j), i.max(j));
        let h = |cols: &[SampleMatrix], prefix: &str, t: usize| denominator(&cols[t], &format!("{prefix}_{t}"), METHOD, &self.config);
        let mut h_hat = vec![0.0; self.data.k()];
        let mut h_true = vec![0.0; self.data.k()];
        for t in [a, b] {
            h_hat[t] = h(&self.chat, "chat", t)?;
            h_true[t] = h(&self.c, "c", t)?;
        }
        self.icl_cell(a, b, &h_hat, &h_true)
    }

    /// Symmetric k×k matrix of ICL_ij with a zero diagonal.
    pub fn icl_pairwise(&self) -> Result<Array2<f64>> {
        let k = self.data.k();
        let mut m = Array2::zeros((k, k));
        if k < 2 {
            return Ok(m);
        }
        let h_hat = self.entropies(&self.chat, "chat")?;
        let h_true = self.entropies(&self.c, "c")?;
        for i in 0..k {
            for j in i + 1..k {
                let v = self.icl_cell(i, j, &h_hat, &h_true)?;
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        Ok(m)
    }

    fn embeddings(&self) -> Result<&crate::scores::Embeddings> {
        self.data.embeddings()
    }

    /// (1/k) Σ_i I(ĉ^w_i, y) / H(y)
    pub fn cem_ct(&self) -> Result<f64> {
        let w = &self.embeddings()?.weighted;
        let (y, h_y) = self.label()?;
        let k = self.data.k();
        let mut acc = 0.0;
        for i in 0..k {
            acc += self.mi(&embedding_matrix(w, i)?, y)? / h_y;
        }
        Ok(acc / k as f64)
    }

    /// 2/(k(k−1)) Σ_i Σ_{j<i} I(ĉ^w_i, c_j) / H(c_j)
    pub fn cem_ic(&self) -> Result<f64> {
        let w = &self.embeddings()?.weighted;
        let k = self.data.k();
        if k < 2 {
            return Err(Error::config("interconcept embedding score needs at least two concepts"));
        }
        let h_true = self.entropies(&self.c, "c")?;
        let mut acc = 0.0;
        for i in 0..k {
            let e = embedding_matrix(w, i)?;
            for j in 0..i {
                acc += self.mi(&e, &self.c[j])? / h_true[j];
            }
        }
        Ok(2.0 * acc / (k * (k - 1)) as f64)
    }

    /// (1/k) Σ_i I(ĉ^w_i, c_i) / H(c_i)
    pub fn cem_self(&self) -> Result<f64> {
        let w = &self.embeddings()?.weighted;
        let k = self.data.k();
        let h_true = self.entropies(&self.c, "c")?;
        let mut acc = 0.0;
        for i in 0..k {
            acc += self.mi(&embedding_matrix(w, i)?, &self.c[i])? / h_true[i];
        }
        Ok(acc / k as f64)
    }

    /// Concepts-task normalised MI of the `tensor` vectors restricted, for
    /// each concept i, to the samples whose c_i equals `value`; averaged over
    /// concepts.
    fn ct_on_partition(&self, tensor: &Array3<f64>, value: f64, which: &str) -> Result<f64> {
        let k = self.data.k();
        let mut acc = 0.0;
        for i in 0..k {
            let rows: Vec<usize> = (0..self.data.n()).filter(|&r| self.data.true_concepts[[r, i]] == value).collect();
            if rows.len() <= self.config.k_neighbors {
                return Err(Error::InsufficientSamples {
                    context: format!("{which} embeddings of concept {i} where c_{i} = {value}"),
                    n: rows.len(),
                    k: self.config.k_neighbors,
                });
            }
            let e = embedding_matrix(tensor, i)?.select_rows(&rows)?;
            let labels: Vec<usize> = rows.iter().map(|&r| self.data.labels[r]).collect();
            let y = label_matrix(&labels)
                .map_err(|_| Error::DegenerateLabel(format!("task label is constant where c_{i} = {value}")))?;
            let h = denominator(&y, &format!("y | c_{i} = {value}"), METHOD, &self.config)?;
            acc += self.mi(&e, &y)? / h;
        }
        Ok(acc / k as f64)
    }

    /// [Ĩ(ĉ⁺ aligned) − Ĩ(ĉ⁺ unaligned)] + [Ĩ(ĉ⁻ aligned) − Ĩ(ĉ⁻ unaligned)].
    /// ĉ⁺_i is aligned where c_i = 1, ĉ⁻_i where c_i = 0.
    pub fn cem_align(&self) -> Result<f64> {
        let e = self.embeddings()?;
        let pos = self.ct_on_partition(&e.positive, 1.0, "positive")? - self.ct_on_partition(&e.positive, 0.0, "positive")?;
        let neg = self.ct_on_partition(&e.negative, 0.0, "negative")? - self.ct_on_partition(&e.negative, 1.0, "negative")?;
        Ok(pos + neg)
    }
}

pub fn ctl_i(data: &ConceptData, i: usize, config: &EstimatorConfig) -> Result<f64> {
    LeakageScorer::new(data, config)?.ctl_i(i)
}

/// Mean of CTL_i over concepts.
pub fn ctl(data: &ConceptData, config: &EstimatorConfig) -> Result<f64> {
    let v = LeakageScorer::new(data, config)?.ctl_per_concept()?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

pub fn icl_ij(data: &ConceptData, i: usize, j: usize, config: &EstimatorConfig) -> Result<f64> {
    if i == j && i < data.k() {
        return Ok(0.0);
    }
    LeakageScorer::new_unlabelled(data, config)?.icl_ij(i, j)
}

pub fn icl_pairwise(data: &ConceptData, config: &EstimatorConfig) -> Result<Array2<f64>> {
    LeakageScorer::new_unlabelled(data, config)?.icl_pairwise()
}

/// Per-concept ICL_i = (1/(k−1)) Σ_{j≠i} ICL_ij from a pairwise matrix.
pub fn icl_per_concept_from(pairwise: &Array2<f64>) -> Vec<f64> {
    let k = pairwise.nrows();
    if k < 2 {
        return vec![0.0; k];
    }
    (0..k).map(|i| pairwise.row(i).sum() / (k - 1) as f64).collect()
}

pub fn icl_i(data: &ConceptData, i: usize, config: &EstimatorConfig) -> Result<f64> {
    if i >= data.k() {
        return Err(Error::shape(format!("concept index {i} out of range for {} concepts", data.k())));
    }
    Ok(icl_per_concept_from(&icl_pairwise(data, config)?)[i])
}

/// Mean of ICL_i over concepts.
pub fn icl(data: &ConceptData, config: &EstimatorConfig) -> Result<f64> {
    let per = icl_per_concept_from(&icl_pairwise(data, config)?);
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Intervention score: reference accuracy on ground-truth concepts minus
/// the model's accuracy with all k concepts intervened.
pub fn s_int(intervened_accuracy: f64, reference_accuracy: f64) -> f64 {
    reference_accuracy - intervened_accuracy
}

pub fn cem_ct(data: &ConceptData, config: &EstimatorConfig) -> Result<f64> {
    data.embeddings()?;
    LeakageScorer::new(data, config)?.cem_ct()
}

pub fn cem_ic(data: &ConceptData, config: &EstimatorConfig) -> Result<f64> {
    data.embeddings()?;
    LeakageScorer::new_unlabelled(data, config)?.cem_ic()
}

pub fn cem_self(data: &ConceptData, config: &EstimatorConfig) -> Result<f64> {
    data.embeddings()?;
    LeakageScorer::new_unlabelled(data, config)?.cem_self()
}

pub fn cem_align(data: &ConceptData, config: &EstimatorConfig) -> Result<f64> {
    data.embeddings()?;
    LeakageScorer::new(data, config)?.cem_align()
}
