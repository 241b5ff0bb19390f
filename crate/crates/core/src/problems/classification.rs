//! Seeded sparse binary-classification data for the logistic benchmarks.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::seeded_rng;

use super::libsvm::{SparseDataset, SparseRow};

const GENERATOR_STREAM: u64 = 1;

/// Rows are sparse Gaussian vectors scaled to unit norm, labelled by a random
/// hyperplane, with a fraction of labels flipped so the data is not separable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSpec {
    pub rows: usize,
    pub dim: usize,
    /// Probability that a feature is present in a row.
    pub density: f64,
    /// Probability that a label is flipped.
    pub flip_prob: f64,
    /// Values are rounded to this many decimal places.
    pub decimals: u32,
    pub seed: u64,
}

impl ClassificationSpec {
    pub fn new(rows: usize, dim: usize, seed: u64) -> Self {
        Self {
            rows,
            dim,
            density: 0.2,
            flip_prob: 0.1,
            decimals: 6,
            seed,
        }
    }

    pub fn generate(&self) -> Result<SparseDataset> {
        if self.rows == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("rows and dim must be positive".into()));
        }
        for (p, what) in [(self.density, "density"), (self.flip_prob, "flip_prob")] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{what} {p} not in [0, 1]")));
            }
        }
        if self.density == 0.0 {
            return Err(Error::InvalidConfig("density must be positive".into()));
        }
        let mut rng = seeded_rng(self.seed, GENERATOR_STREAM);
        let normal = Normal::new(0.0, 1.0).expect("valid normal");
        let w: Vec<f64> = (0..self.dim).map(|_| normal.sample(&mut rng)).collect();
        let scale = 10f64.powi(self.decimals as i32);

        let mut rows = Vec::with_capacity(self.rows);
        let mut labels = Vec::with_capacity(self.rows);
        while rows.len() < self.rows {
            let mut indices = Vec::new();
            let mut values = Vec::new();
            for j in 0..self.dim {
                if rng.random_bool(self.density) {
                    indices.push(j as u32);
                    values.push(normal.sample(&mut rng));
                }
            }
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            for v in &mut values {
                *v = (*v / norm * scale).round() / scale;
            }
            let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] != 0.0).collect();
            if keep.is_empty() {
                continue;
            }
            let row = SparseRow {
                indices: keep.iter().map(|&k| indices[k]).collect(),
                values: keep.iter().map(|&k| values[k]).collect(),
            };
            let margin = row.dot(&w);
            let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
            if rng.random_bool(self.flip_prob) {
                y = -y;
            }
            rows.push(row);
            labels.push(y);
        }
        SparseDataset::new(rows, labels, self.dim)
    }
}
