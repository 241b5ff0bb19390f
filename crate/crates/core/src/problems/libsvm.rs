//! LIBSVM text format: `<label> <index>:<value> ...` with 1-based indices.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One sparse feature vector with 0-based, strictly increasing indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, v)| v * x[j as usize])
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `out += alpha * row`
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        for (&j, v) in self.indices.iter().zip(&self.values) {
            out[j as usize] += alpha * v;
        }
    }
}

/// Binary-labelled sparse dataset; labels are ±1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseDataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
}

impl SparseDataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidConfig(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (k, (row, &y)) in rows.iter().zip(&labels).enumerate() {
            if y != 1.0 && y != -1.0 {
                return Err(Error::InvalidConfig(format!("row {k}: label {y} is not ±1")));
            }
            if row.indices.len() != row.values.len()
                || row.indices.windows(2).any(|w| w[0] >= w[1])
                || row.indices.last().is_some_and(|&j| j as usize >= dim)
            {
                return Err(Error::InvalidConfig(format!("row {k}: malformed sparse row")));
            }
        }
        Ok(Self { rows, labels, dim })
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First `k` rows, keeping the feature dimension.
    pub fn head(&self, k: usize) -> Self {
        let k = k.min(self.len());
        Self {
            rows: self.rows[..k].to_vec(),
            labels: self.labels[..k].to_vec(),
            dim: self.dim,
        }
    }
}

/// Maps raw label values to the binary classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub negative: Vec<f64>,
    pub positive: Vec<f64>,
}

impl Default for LabelMap {
    fn default() -> Self {
        Self {
            negative: vec![-1.0, 0.0],
            positive: vec![1.0],
        }
    }
}

impl LabelMap {
    fn map(&self, raw: f64) -> Option<f64> {
        if self.positive.contains(&raw) {
            Some(1.0)
        } else if self.negative.contains(&raw) {
            Some(-1.0)
        } else {
            None
        }
    }
}

/// Parses a LIBSVM stream. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub fn parse_libsvm<R: BufRead>(reader: R, labels: &LabelMap) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    let mut dim = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let err = |message: String| Error::Parse { line: line_no, message };
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let raw: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("non-numeric label '{label_tok}'")))?;
        let y = labels
            .map(raw)
            .ok_or_else(|| err(format!("unknown label '{label_tok}'")))?;

        let mut row = SparseRow::default();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected index:value, got '{tok}'")))?;
            let idx: u32 = idx.parse().map_err(|_| err(format!("non-numeric index '{idx}'")))?;
            if idx == 0 {
                return Err(err("indices are 1-based; got 0".into()));
            }
            let val: f64 = val.parse().map_err(|_| err(format!("non-numeric value '{val}'")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value '{tok}'")));
            }
            let j = idx - 1;
            if row.indices.last().is_some_and(|&prev| prev >= j) {
                return Err(err(format!("index {idx} is not strictly increasing")));
            }
            row.indices.push(j);
            row.values.push(val);
            dim = dim.max(idx as usize);
        }
        rows.push(row);
        ys.push(y);
    }
    SparseDataset::new(rows, ys, dim)
}

pub fn parse_libsvm_str(text: &str, labels: &LabelMap) -> Result<SparseDataset> {
    parse_libsvm(text.as_bytes(), labels)
}

/// Writes the canonical text form: `+1`/`-1` labels and shortest round-trip
/// decimal values, one row per line.
pub fn to_libsvm_string(data: &SparseDataset) -> String {
    let mut out = String::new();
    for (row, &y) in data.rows().iter().zip(data.labels()) {
        out.push_str(if y > 0.0 { "+1" } else { "-1" });
        for (&j, v) in row.indices.iter().zip(&row.values) {
            let _ = write!(out, " {}:{}", j + 1, v);
        }
        out.push('\n');
    }
    out
}
