//! Dataset CSV files with a JSON sidecar.
//!
//! The CSV header is `x0..x{d-1}, c0..c{k-1}, y, split`; the sample id of a
//! row is its zero-based position. The sidecar lives next to the CSV with a
//! `.json` extension.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::tabular::{Dataset, Provenance, SplitKind, Splits, TabularToyConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub generator_version: String,
    pub config: Option<TabularToyConfig>,
    pub seed: Option<u64>,
    pub column_names: Vec<String>,
    pub n_classes: usize,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_dataset(dataset: &Dataset, csv_path: &Path) -> Result<()> {
    dataset.validate()?;
    let membership = dataset.splits.membership(dataset.n())?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
    w.write_record(dataset.column_names())?;
    let mut record: Vec<String> = Vec::with_capacity(dataset.input_dim() + dataset.n_concepts() + 2);
    for i in 0..dataset.n() {
        record.clear();
        record.extend(dataset.inputs.row(i).iter().map(|v| v.to_string()));
        record.extend(dataset.concepts.row(i).iter().map(|v| v.to_string()));
        record.push(dataset.labels[i].to_string());
        record.push(membership[i].as_str().to_string());
        w.write_record(&record)?;
    }
    w.flush()?;

    let sidecar = DatasetSidecar {
        generator_version: dataset.provenance.generator_version.clone(),
        config: dataset.provenance.config,
        seed: dataset.provenance.config.map(|c| c.seed),
        column_names: dataset.column_names(),
        n_classes: dataset.n_classes,
    };
    let mut f = BufWriter::new(File::create(sidecar_path(csv_path))?);
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let sidecar: Option<DatasetSidecar> = match File::open(sidecar_path(csv_path)) {
        Ok(f) => Some(serde_json::from_reader(BufReader::new(f))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(csv_path)?));
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let d_x = header.iter().filter(|h| h.starts_with('x')).count();
    let k = header.iter().filter(|h| h.starts_with('c')).count();
    let expected: Vec<String> = (0..d_x)
        .map(|j| format!("x{j}"))
        .chain((0..k).map(|j| format!("c{j}")))
        .chain(["y".to_string(), "split".to_string()])
        .collect();
    if header != expected {
        return Err(Error::format(format!("unexpected dataset header {header:?}")));
    }

    let mut inputs = Vec::new();
    let mut concepts = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Splits::default();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).ok_or_else(|| Error::format(format!("row {i}: missing column {j}")));
        for j in 0..d_x {
            inputs.push(parse::<f64>(field(j)?, i)?);
        }
        for j in 0..k {
            concepts.push(parse::<u8>(field(d_x + j)?, i)?);
        }
        labels.push(parse::<usize>(field(d_x + k)?, i)?);
        match SplitKind::parse(field(d_x + k + 1)?)? {
            SplitKind::Train => splits.train.push(i),
            SplitKind::Val => splits.val.push(i),
            SplitKind::Test => splits.test.push(i),
        }
    }
    let n = labels.len();
    let n_classes = sidecar
        .as_ref()
        .map(|s| s.n_classes)
        .unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    let ds = Dataset {
        inputs: Array2::from_shape_vec((n, d_x), inputs).map_err(|e| Error::format(e.to_string()))?,
        concepts: Array2::from_shape_vec((n, k), concepts).map_err(|e| Error::format(e.to_string()))?,
        labels,
        n_classes,
        splits,
        provenance: Provenance {
            generator_version: sidecar.as_ref().map(|s| s.generator_version.clone()).unwrap_or_default(),
            config: sidecar.and_then(|s| s.config),
        },
    };
    ds.validate()?;
    Ok(ds)
}

fn parse<T: std::str::FromStr>(s: &str, row: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::format(format!("row {row}: cannot parse `{s}`")))
}
