//! JSON-lines trace files: one header line, one line per record, one summary line.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Constants fixed during a run and needed to interpret it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConstants {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_l: Option<f64>,
    /// True when scale calibration hit a zero denominator.
    #[serde(default)]
    pub calibration_fallback: bool,
    /// First-iteration readings used for calibration: `f − ℓ*` (or the proxy
    /// gap) and, for line search, `γ_0` and `‖g_0‖²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_grad_sq: Option<f64>,
    /// Stepsize `η_0` taken at the first iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strong_convexity: Option<f64>,
    pub lower_bound_mode: String,
    pub projection: String,
    pub trace_every: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub algorithm: String,
    pub config: ExperimentConfig,
    pub rng: String,
    pub problem_kind: String,
    pub problem_hash: String,
    pub n: usize,
    pub dim: usize,
    pub f_star: f64,
    pub reference_method: String,
    pub resolved: ResolvedConstants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub epoch: f64,
    pub suboptimality: f64,
    pub avg_suboptimality: f64,
    pub dist_sq: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub eta: f64,
    /// `NaN` on the record taken before the first step.
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub grad_norm_sq: f64,
    /// `‖∇f(x_t)‖²`, computed outside the oracle budget.
    pub full_grad_norm_sq: f64,
    pub stochastic_grad_evals: u64,
    pub full_grad_evals: u64,
    pub function_evals: u64,
    pub probes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accumulator: Option<f64>,
    pub refreshes: u64,
}

/// Tally of the online invariant checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub monotone: u64,
    pub sandwich: u64,
    pub armijo: u64,
    pub violations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub status: RunStatus,
    pub iterations: u64,
    pub gradient_cost: u64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub final_suboptimality: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub final_avg_suboptimality: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub best_suboptimality: f64,
    pub refreshes: u64,
    pub checks: CheckTally,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Record(TraceRecord),
    Summary(TraceSummary),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    pub summary: TraceSummary,
}

impl Trace {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        let mut push = |line: &Line| -> Result<()> {
            out.push_str(&serde_json::to_string(line)?);
            out.push('\n');
            Ok(())
        };
        push(&Line::Header(self.header.clone()))?;
        for r in &self.records {
            push(&Line::Record(r.clone()))?;
        }
        push(&Line::Summary(self.summary.clone()))?;
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn read<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        let mut summary = None;
        for (k, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: k + 1,
                message: e.to_string(),
            })?;
            match parsed {
                Line::Header(h) if header.is_none() && k == 0 => header = Some(h),
                Line::Record(r) if header.is_some() && summary.is_none() => records.push(r),
                Line::Summary(s) if header.is_some() && summary.is_none() => summary = Some(s),
                _ => {
                    return Err(Error::Parse {
                        line: k + 1,
                        message: "unexpected line order in trace".into(),
                    })
                }
            }
        }
        let header = header.ok_or(Error::Parse {
            line: 1,
            message: "missing trace header".into(),
        })?;
        let summary = summary.ok_or(Error::Parse {
            line: records.len() + 2,
            message: "missing trace summary".into(),
        })?;
        Ok(Self {
            header,
            records,
            summary,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    /// Writes through a temporary file in the same directory, then renames.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_jsonl()?.as_bytes())
    }

    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

/// Writes `bytes` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
