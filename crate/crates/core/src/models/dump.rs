//! Activation dumps: the CSV `id, chat_0..chat_{k-1}, yhat, y, c_0..c_{k-1}`
//! and, for embedding models, a binary sidecar with a little-endian u64
//! header (N, k, d) followed by ĉ⁺, ĉ⁻ and ĉ^w as row-major f64 values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2};

use super::model::{mix, split_pairs, TrainedModel};
use crate::data::DataSplit;
use crate::error::{Error, Result};
use crate::nn::{argmax_rows, softmax_rows};
use crate::scores::{ConceptData, Embeddings};

/// Model outputs for a batch of inputs.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// What the head receives: binarised values (hard), probabilities (soft,
    /// CEM) or logits.
    pub activations: Array2<f64>,
    pub concept_probs: Array2<f64>,
    pub class_probs: Array2<f64>,
    pub yhat: Vec<usize>,
    pub embeddings: Option<Embeddings>,
}

pub fn predict(model: &TrainedModel, inputs: ArrayView2<'_, f64>) -> Result<Prediction> {
    let pass = model.concepts(inputs)?;
    let activations = model.activations(&pass);
    let head_input = model.head_input(&pass, &activations)?;
    let class_probs = softmax_rows(model.class_logits(head_input.view())?.view());
    let embeddings = match (model.embedding_dim(), &pass.embeddings) {
        (Some(d), Some(h)) => {
            let (pos, neg) = split_pairs(h, model.n_concepts(), d);
            let w = mix(h, &activations, d);
            let n = w.nrows();
            let weighted = w.into_shape_with_order((n, model.n_concepts(), d)).map_err(|e| Error::shape(e.to_string()))?;
            Some(Embeddings::new(pos, neg, weighted)?)
        }
        _ => None,
    };
    Ok(Prediction {
        concept_probs: TrainedModel::concept_probs(&pass),
        yhat: argmax_rows(class_probs.view()),
        activations,
        class_probs,
        embeddings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDump {
    pub ids: Vec<usize>,
    pub chat: Array2<f64>,
    pub yhat: Vec<usize>,
    pub y: Vec<usize>,
    pub c: Array2<f64>,
    pub embeddings: Option<Embeddings>,
}

pub fn embeddings_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("emb.bin")
}

impl ActivationDump {
    pub fn from_split(model: &TrainedModel, split: &DataSplit) -> Result<Self> {
        let p = predict(model, split.inputs.view())?;
        Ok(ActivationDump {
            ids: split.ids.clone(),
            chat: p.activations,
            yhat: p.yhat,
            y: split.labels.clone(),
            c: split.concepts.clone(),
            embeddings: p.embeddings,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn k(&self) -> usize {
        self.chat.ncols()
    }

    pub fn to_concept_data(&self) -> Result<ConceptData> {
        let data = ConceptData::new(self.c.clone(), self.chat.clone(), self.y.clone())?;
        match &self.embeddings {
            Some(e) => data.with_embeddings(e.clone()),
            None => Ok(data),
        }
    }

    pub fn header(k: usize) -> Vec<String> {
        let mut h = vec!["id".to_string()];
        h.extend((0..k).map(|i| format!("chat_{i}")));
        h.push("yhat".into());
        h.push("y".into());
        h.extend((0..k).map(|i| format!("c_{i}")));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(self.k()))?;
        for r in 0..self.n() {
            let mut rec = vec![self.ids[r].to_string()];
            rec.extend(self.chat.row(r).iter().map(f64::to_string));
            rec.push(self.yhat[r].to_string());
            rec.push(self.y[r].to_string());
            rec.extend(self.c.row(r).iter().map(|v| (*v as u8).to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the CSV part; embeddings are left empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 5 || (header.len() - 3) % 2 != 0 {
            return Err(Error::format(format!("unexpected dump header {header:?}")));
        }
        let k = (header.len() - 3) / 2;
        if header != Self::header(k) {
            return Err(Error::format(format!("unexpected dump header {header:?}")));
        }
        let (mut ids, mut chat, mut yhat, mut y, mut c) = (vec![], vec![], vec![], vec![], vec![]);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |j: usize| -> Result<&str> { rec.get(j).ok_or_else(|| Error::format(format!("dump row {line} is short"))) };
            let int = |j: usize| -> Result<usize> {
                field(j)?.parse().map_err(|_| Error::format(format!("dump row {line}, column {}: not an integer", header[j])))
            };
            ids.push(int(0)?);
            for j in 0..k {
                let v: f64 = field(1 + j)?
                    .parse()
                    .map_err(|_| Error::format(format!("dump row {line}, column chat_{j}: not a number")))?;
                chat.push(v);
            }
            yhat.push(int(1 + k)?);
            y.push(int(2 + k)?);
            for j in 0..k {
                match int(3 + k + j)? {
                    v @ (0 | 1) => c.push(v as f64),
                    v => return Err(Error::format(format!("dump row {line}: concept c_{j} = {v} is not binary"))),
                }
            }
        }
        let n = ids.len();
        let shape = |v: Vec<f64>| Array2::from_shape_vec((n, k), v).map_err(|e| Error::format(e.to_string()));
        Ok(ActivationDump { ids, chat: shape(chat)?, yhat, y, c: shape(c)?, embeddings: None })
    }

    /// Writes the CSV and, for embedding models, the sidecar next to it.
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(csv_path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        if let Some(e) = &self.embeddings {
            let mut f = BufWriter::new(File::create(embeddings_path(csv_path))?);
            write_embeddings(e, &mut f)?;
            f.flush()?;
        }
        Ok(())
    }

    /// Reads a dump and its sidecar if one exists.
    pub fn read(csv_path: &Path) -> Result<Self> {
        let mut dump = Self::read_csv(BufReader::new(File::open(csv_path)?))?;
        match File::open(embeddings_path(csv_path)) {
            Ok(f) => {
                let e = read_embeddings(BufReader::new(f))?;
                let (n, k, _) = e.dim();
                if (n, k) != (dump.n(), dump.k()) {
                    return Err(Error::format(format!(
                        "embedding sidecar holds {n}×{k} vectors, dump has {} rows and {} concepts",
                        dump.n(),
                        dump.k()
                    )));
                }
                dump.embeddings = Some(e);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        Ok(dump)
    }
}

pub fn write_embeddings<W: Write>(e: &Embeddings, mut out: W) -> Result<()> {
    let (n, k, d) = e.dim();
    for v in [n, k, d] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for t in [&e.positive, &e.negative, &e.weighted] {
        for v in t.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_embeddings<R: Read>(mut input: R) -> Result<Embeddings> {
    let mut word = [0u8; 8];
    let mut dims = [0usize; 3];
    for slot in &mut dims {
        input.read_exact(&mut word).map_err(|_| Error::format("embedding sidecar header is truncated"))?;
        *slot = usize::try_from(u64::from_le_bytes(word)).map_err(|_| Error::format("embedding dimension overflows"))?;
    }
    let [n, k, d] = dims;
    let len = n.checked_mul(k).and_then(|v| v.checked_mul(d)).ok_or_else(|| Error::format("embedding shape overflows"))?;
    let mut read_tensor = || -> Result<Array3<f64>> {
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            input.read_exact(&mut word).map_err(|_| Error::format("embedding sidecar is truncated"))?;
            v.push(f64::from_le_bytes(word));
        }
        Array3::from_shape_vec((n, k, d), v).map_err(|e| Error::format(e.to_string()))
    };
    let (pos, neg, w) = (read_tensor()?, read_tensor()?, read_tensor()?);
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::format(format!("{} trailing bytes after the embedding tensors", rest.len())));
    }
    Embeddings::new(pos, neg, w)
}
