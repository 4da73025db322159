//! On-disk formats: matrix text files, per-instance dataset CSVs, the
//! dataset manifest, model checkpoints and evaluation metrics.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{CampaignConfig, SCHEMA_VERSION};
use crate::datagen::{mix_seed, Response, Sequence, SplitIndices};
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::noise::{HistogramBin, NoiseModel};
use crate::pipeline::NoiseEvaluation;
use crate::regress::{Family, Hyper, Mode, RegressionModel};

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Matrix file: a `rows cols` header line, then one whitespace-separated
/// row per line.
pub fn write_matrix(path: &Path, rows: usize, cols: usize, row_major: &[f64]) -> Result<()> {
    if row_major.len() != rows * cols {
        return Err(Error::Shape(format!(
            "{} entries for a {rows}x{cols} matrix",
            row_major.len()
        )));
    }
    let mut text = format!("{rows} {cols}\n");
    for r in 0..rows {
        let line: Vec<String> = row_major[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| format!("{v:e}"))
            .collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::parse(path, format!("missing {what} in header")))?
            .parse()
            .map_err(|e| Error::parse(path, format!("bad {what}: {e}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let data = text
        .split_whitespace()
        .skip(2)
        .map(|t| t.parse::<f64>().map_err(|e| Error::parse(path, format!("bad entry '{t}': {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if data.len() != rows * cols {
        return Err(Error::parse(
            path,
            format!("{} entries for a {rows}x{cols} matrix", data.len()),
        ));
    }
    Ok((rows, cols, data))
}

pub fn dense_row_major(m: &nalgebra::DMatrix<f64>) -> (usize, usize, Vec<f64>) {
    let data = (0..m.nrows()).flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>()).collect();
    (m.nrows(), m.ncols(), data)
}

pub fn instance_file_name(index: usize) -> String {
    format!("instance_{index:04}.csv")
}

pub fn write_sequence_csv(path: &Path, coarse_indices: &[usize], seq: &Sequence) -> Result<()> {
    let n_feat = seq.features.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["coarse_index".to_string(), "fine_index".into(), "time".into()];
    header.extend((0..n_feat).map(|i| format!("feature_{i}")));
    header.extend(["delta_x".to_string(), "delta_q".into()]);
    w.write_record(&header).map_err(|e| Error::parse(path, e))?;
    for n in 0..seq.len() {
        let mut rec = vec![
            coarse_indices[n].to_string(),
            seq.fine_indices[n].to_string(),
            seq.times[n].to_string(),
        ];
        rec.extend(seq.features[n].iter().map(f64::to_string));
        rec.push(seq.delta_x[n].to_string());
        rec.push(seq.delta_q[n].to_string());
        w.write_record(&rec).map_err(|e| Error::parse(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse(path, e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn read_sequence_csv(path: &Path, mu: Vec<f64>, delta0_x: f64, delta0_q: f64) -> Result<Sequence> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let headers = r.headers().map_err(|e| Error::parse(path, e))?.clone();
    let n_cols = headers.len();
    if n_cols < 5 || &headers[0] != "coarse_index" || &headers[n_cols - 1] != "delta_q" {
        return Err(Error::parse(path, "unexpected dataset columns"));
    }
    let mut seq = Sequence {
        mu,
        fine_indices: Vec::new(),
        times: Vec::new(),
        features: Vec::new(),
        delta_x: Vec::new(),
        delta_q: Vec::new(),
        delta0_x,
        delta0_q,
    };
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::parse(path, format!("column {}: {e}", &headers[i])))
        };
        seq.fine_indices
            .push(rec[1].parse().map_err(|e| Error::parse(path, format!("fine_index: {e}")))?);
        seq.times.push(num(2)?);
        seq.features.push((3..n_cols - 2).map(num).collect::<Result<_>>()?);
        seq.delta_x.push(num(n_cols - 2)?);
        seq.delta_q.push(num(n_cols - 1)?);
    }
    Ok(seq)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub file: String,
    pub mu: Vec<f64>,
    pub delta0_x: f64,
    pub delta0_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    /// Sub-seeds of the train, validation, test and noise-split streams.
    pub streams: BTreeMap<String, u64>,
}

impl SeedRecord {
    pub fn new(master: u64) -> Self {
        let streams = [("train", 1), ("val", 2), ("test", 3), ("noise-split", 4)]
            .into_iter()
            .map(|(k, s)| (k.to_string(), mix_seed(master, s)))
            .collect();
        SeedRecord { master, streams }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub created_unix_seconds: u64,
    pub tool_version: String,
}

impl Metadata {
    pub fn now() -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Metadata {
            created_unix_seconds: secs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub feature_kind: FeatureKind,
    pub coarse_indices: Vec<usize>,
    pub seeds: SeedRecord,
    pub split: SplitIndices,
    pub instances: Vec<InstanceEntry>,
    /// Relative paths of matrix artifacts (POD basis, residual PCA, sampling).
    pub artifacts: BTreeMap<String, String>,
    pub config: CampaignConfig,
    pub metadata: Metadata,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let m: Manifest = read_json(&path)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::Compatibility(format!(
                "{} has schema version {}, expected {SCHEMA_VERSION}",
                path.display(),
                m.schema_version
            )));
        }
        Ok(m)
    }

    pub fn sequences(&self, dir: &Path) -> Result<Vec<Sequence>> {
        self.instances
            .iter()
            .map(|e| read_sequence_csv(&dir.join(&e.file), e.mu.clone(), e.delta0_x, e.delta0_q))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub family: Family,
    pub mode: Mode,
    pub feature_kind: FeatureKind,
    pub response: Response,
    pub train_size: usize,
    pub selected: Hyper,
    pub validation_score: f64,
    /// Validation score per grid point, `null` where training failed.
    pub grid_scores: Vec<Option<f64>>,
    pub model: RegressionModel,
    pub noise: Vec<NoiseModel>,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = read_json(path)?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(Error::Compatibility(format!(
                "{} has schema version {}, expected {SCHEMA_VERSION}",
                path.display(),
                c.schema_version
            )));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub schema_version: u32,
    pub family: Family,
    pub mode: Mode,
    pub feature_kind: FeatureKind,
    pub response: Response,
    pub train_size: usize,
    pub fvu: Option<f64>,
    pub r2: Option<f64>,
    pub degenerate: Option<String>,
    pub noise: BTreeMap<String, NoiseEvaluation>,
}

pub const METRICS_FILE: &str = "metrics.json";

/// Histogram table of standardized errors, one block of rows per noise kind.
pub fn histogram_csv(blocks: &[(String, Vec<HistogramBin>)]) -> String {
    let mut text = String::from("noise,lower,upper,count,density\n");
    for (kind, bins) in blocks {
        for b in bins {
            text.push_str(&format!("{kind},{},{},{},{}\n", b.lower, b.upper, b.count, b.density));
        }
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        let data = vec![1.0, -2.5e-17, std::f64::consts::PI, 4.0, 5.0, 1e300];
        write_matrix(&p, 2, 3, &data).unwrap();
        let (r, c, back) = read_matrix(&p).unwrap();
        assert_eq!((r, c), (2, 3));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        fs::write(&p, "2 2\n1 2 3\n").unwrap();
        assert!(matches!(read_matrix(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn sequence_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let seq = Sequence {
            mu: vec![0.1, 0.2],
            fine_indices: vec![20, 40],
            times: vec![0.006, 0.012],
            features: vec![vec![0.1, 1.0 / 3.0], vec![0.1, 2.0]],
            delta_x: vec![0.5, 0.25],
            delta_q: vec![-0.1, 0.0],
            delta0_x: 0.0,
            delta0_q: 0.0,
        };
        write_sequence_csv(&p, &[1, 2], &seq).unwrap();
        let back = read_sequence_csv(&p, seq.mu.clone(), 0.0, 0.0).unwrap();
        assert_eq!(back, seq);
    }
}
