use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::estimators::SampleMatrix;

/// Ground truth and model outputs for one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptData {
    /// N×k, entries 0 or 1.
    pub true_concepts: Array2<f64>,
    /// N×k activations (probabilities, logits or hard values).
    pub predicted: Array2<f64>,
    pub labels: Vec<usize>,
    pub embeddings: Option<Embeddings>,
}

/// CEM tensors, each N×k×d.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub positive: Array3<f64>,
    pub negative: Array3<f64>,
    pub weighted: Array3<f64>,
}

impl Embeddings {
    pub fn new(positive: Array3<f64>, negative: Array3<f64>, weighted: Array3<f64>) -> Result<Self> {
        if positive.dim() != negative.dim() || positive.dim() != weighted.dim() {
            return Err(Error::shape(format!(
                "embedding tensors disagree: {:?}, {:?}, {:?}",
                positive.dim(),
                negative.dim(),
                weighted.dim()
            )));
        }
        if [&positive, &negative, &weighted].iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Domain("non-finite embedding entry".into()));
        }
        Ok(Embeddings { positive, negative, weighted })
    }

    /// (N, k, d)
    pub fn dim(&self) -> (usize, usize, usize) {
        self.weighted.dim()
    }
}

impl ConceptData {
    pub fn new(true_concepts: Array2<f64>, predicted: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let (n, k) = true_concepts.dim();
        if k == 0 || n == 0 {
            return Err(Error::shape("concept data needs at least one sample and one concept"));
        }
        if predicted.dim() != (n, k) {
            return Err(Error::shape(format!(
                "predicted activations are {:?}, true concepts are {:?}",
                predicted.dim(),
                (n, k)
            )));
        }
        if labels.len() != n {
            return Err(Error::shape(format!("{} labels for {n} samples", labels.len())));
        }
        if let Some(v) = true_concepts.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain(format!("true concept entry {v} is not binary")));
        }
        if predicted.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite predicted activation".into()));
        }
        Ok(ConceptData { true_concepts, predicted, labels, embeddings: None })
    }

    pub fn with_embeddings(mut self, embeddings: Embeddings) -> Result<Self> {
        let (n, k, _) = embeddings.dim();
        if (n, k) != self.true_concepts.dim() {
            return Err(Error::shape(format!(
                "embeddings cover {n} samples × {k} concepts, data has {:?}",
                self.true_concepts.dim()
            )));
        }
        self.embeddings = Some(embeddings);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.true_concepts.nrows()
    }

    pub fn k(&self) -> usize {
        self.true_concepts.ncols()
    }

    pub fn embeddings(&self) -> Result<&Embeddings> {
        self.embeddings.as_ref().ok_or_else(|| Error::MissingField("embeddings".into()))
    }

    /// Restriction to a subset of rows.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut out = ConceptData::new(
            self.true_concepts.select(Axis(0), rows),
            self.predicted.select(Axis(0), rows),
            rows.iter().map(|&r| self.labels[r]).collect(),
        )?;
        if let Some(e) = &self.embeddings {
            out.embeddings = Some(Embeddings {
                positive: e.positive.select(Axis(0), rows),
                negative: e.negative.select(Axis(0), rows),
                weighted: e.weighted.select(Axis(0), rows),
            });
        }
        Ok(out)
    }

    /// Same data with concept columns reordered: new column j is old column perm[j].
    pub fn permute_concepts(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.k() {
            return Err(Error::shape("permutation length differs from concept count"));
        }
        let mut out = ConceptData::new(
            self.true_concepts.select(Axis(1), perm),
            self.predicted.select(Axis(1), perm),
            self.labels.clone(),
        )?;
        if let Some(e) = &self.embeddings {
            out.embeddings = Some(Embeddings {
                positive: e.positive.select(Axis(1), perm),
                negative: e.negative.select(Axis(1), perm),
                weighted: e.weighted.select(Axis(1), perm),
            });
        }
        Ok(out)
    }
}

pub(crate) fn column(m: &ArrayView2<'_, f64>, j: usize) -> Result<SampleMatrix> {
    SampleMatrix::from_column(&m.column(j).to_vec())
}

pub(crate) fn label_matrix(labels: &[usize]) -> Result<SampleMatrix> {
    if labels.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegenerateLabel("task label takes a single value".into()));
    }
    SampleMatrix::from_labels(labels)
}

pub(crate) fn embedding_matrix(t: &Array3<f64>, i: usize) -> Result<SampleMatrix> {
    SampleMatrix::from_array(t.index_axis(Axis(1), i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn construction_checks() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(ConceptData::new(c.clone(), c.clone(), vec![0, 1]).is_ok());
        assert!(matches!(ConceptData::new(c.clone(), c.clone(), vec![0]), Err(Error::Shape(_))));
        let bad = array![[0.5, 1.0], [1.0, 0.0]];
        assert!(matches!(ConceptData::new(bad, c.clone(), vec![0, 1]), Err(Error::Domain(_))));
        let d = ConceptData::new(c.clone(), c, vec![0, 1]).unwrap();
        assert!(matches!(d.embeddings(), Err(Error::MissingField(_))));
    }

    #[test]
    fn constant_label_is_degenerate() {
        assert!(matches!(label_matrix(&[1, 1, 1]), Err(Error::DegenerateLabel(_))));
    }
}
