//! Grid sweeps over algorithm hyperparameters.
//!
//! A grid axis is `key=lo..hi` (every power of ten from `lo` to `hi`) or
//! `key=v1,v2,...`. Several axes form a Cartesian product. Keys name fields of
//! the `[algorithm]` table, plus `batch_size`. For SGD, `eta` is accepted as an
//! alias of `eta0`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{AlgorithmConfig, ExperimentConfig};
use super::runner::execute;
use super::source::LoadedProblem;
use super::trace::Trace;

#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<f64>,
}

impl GridAxis {
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidConfig(format!("bad grid axis `{spec}`: {why}"));
        let (key, rhs) = spec.split_once('=').ok_or_else(|| bad("expected key=values"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(bad("empty key"));
        }
        let number = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(&format!("`{s}` is not a finite number")))
        };
        let values = if let Some((lo, hi)) = rhs.split_once("..") {
            let (lo, hi) = (number(lo)?, number(hi)?);
            let decade = |v: f64| -> Result<i32> {
                let e = v.log10().round();
                if v > 0.0 && (10f64.powi(e as i32) - v).abs() <= 1e-12 * v {
                    Ok(e as i32)
                } else {
                    Err(bad("range ends must be powers of ten"))
                }
            };
            let (a, b) = (decade(lo)?, decade(hi)?);
            if a > b {
                return Err(bad("empty range"));
            }
            (a..=b)
                .map(|i| format!("1e{i}").parse::<f64>().expect("decimal literal"))
                .collect()
        } else {
            rhs.split(',').map(number).collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(bad("no values"));
        }
        Ok(Self {
            key: key.to_string(),
            values,
        })
    }
}

/// Every combination of the axes, in row-major order.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

/// Returns `base` with the grid point applied.
pub fn apply_point(base: &ExperimentConfig, point: &[(String, f64)]) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    let mut table = toml::Value::try_from(&cfg.algorithm)
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize algorithm: {e}")))?;
    for (key, v) in point {
        if key == "batch_size" {
            if *v < 1.0 || v.fract() != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "batch_size {v} is not a positive integer"
                )));
            }
            cfg.batch_size = *v as usize;
            continue;
        }
        let field = match (&cfg.algorithm, key.as_str()) {
            (AlgorithmConfig::Sgd { .. }, "eta") => "eta0",
            _ => key.as_str(),
        };
        table
            .as_table_mut()
            .expect("algorithm serializes to a table")
            .insert(field.to_string(), toml::Value::Float(*v));
    }
    cfg.algorithm = table
        .try_into()
        .map_err(|e| Error::InvalidConfig(format!("grid does not fit the algorithm: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: Vec<(String, f64)>,
    pub seeds: usize,
    pub completed: usize,
    /// Mean over seeds of the final suboptimality; infinite if any seed aborted.
    pub final_suboptimality: f64,
    /// Mean over seeds of the best recorded suboptimality.
    pub best_suboptimality: f64,
    pub gradient_cost: u64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Index of the row with the smallest final suboptimality.
    pub best: Option<usize>,
    pub traces: Vec<Vec<Trace>>,
}

impl SweepResult {
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<32} {:>6} {:>14} {:>14} {:>12}",
            "point", "runs", "final", "best_seen", "grad_cost"
        )
        .expect("writing to a String");
        for (k, r) in self.rows.iter().enumerate() {
            let label = r
                .point
                .iter()
                .map(|(key, v)| format!("{key}={v:e}"))
                .collect::<Vec<_>>()
                .join(" ");
            let mark = if Some(k) == self.best { " *" } else { "" };
            writeln!(
                out,
                "{:<32} {:>3}/{:<2} {:>14.6e} {:>14.6e} {:>12}{mark}",
                label, r.completed, r.seeds, r.final_suboptimality, r.best_suboptimality, r.gradient_cost
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Runs every grid point for every seed. Aborted runs count as infinitely bad
/// rather than failing the sweep.
pub fn run_sweep(base: &ExperimentConfig, axes: &[GridAxis], seeds: &[u64]) -> Result<SweepResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one seed".into()));
    }
    let points = grid_points(axes);
    let configs = points
        .iter()
        .map(|p| apply_point(base, p))
        .collect::<Result<Vec<_>>>()?;
    let problem = LoadedProblem::load(&base.problem)?;
    let optimum = problem.reference_optimum()?;

    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for (point, cfg) in points.into_iter().zip(configs) {
        let mut finals = Vec::new();
        let mut bests = Vec::new();
        let mut cost = 0;
        let mut completed = 0;
        let mut runs = Vec::new();
        for &seed in seeds {
            let mut c = cfg.clone();
            c.seed = seed;
            let out = execute(&c, &problem, &optimum)?;
            if out.error.is_none() {
                completed += 1;
                finals.push(out.trace.summary.final_suboptimality);
            } else {
                finals.push(f64::INFINITY);
            }
            bests.push(out.trace.summary.best_suboptimality);
            cost = cost.max(out.trace.summary.gradient_cost);
            runs.push(out.trace);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        rows.push(SweepRow {
            point,
            seeds: seeds.len(),
            completed,
            final_suboptimality: mean(&finals),
            best_suboptimality: mean(&bests),
            gradient_cost: cost,
        });
        traces.push(runs);
    }
    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.final_suboptimality.is_finite())
        .min_by(|a, b| a.1.final_suboptimality.total_cmp(&b.1.final_suboptimality))
        .map(|(k, _)| k);
    Ok(SweepResult { rows, best, traces })
}
