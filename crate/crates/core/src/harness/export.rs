//! Tidy CSV for plotting.
//!
//! Long format (`Aggregate::None`), one row per trace record:
//!
//! `algorithm,seed,t,epoch,suboptimality,avg_suboptimality,eta,grad_norm_sq,full_grad_norm_sq`
//!
//! Aggregated format (`Aggregate::MeanStd`), one row per record index and algorithm:
//!
//! `algorithm,runs,t,epoch,mean_suboptimality,std_suboptimality,mean_avg_suboptimality,std_avg_suboptimality,mean_eta`
//!
//! The standard deviation is the population one (divides by the run count).
//! `epoch` in the aggregated format is the mean over runs, since variance-reduced
//! methods spend a random number of gradients per iteration. Undefined values
//! (the stepsize before the first step) are written as empty fields.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::trace::Trace;

pub const LONG_COLUMNS: &str =
    "algorithm,seed,t,epoch,suboptimality,avg_suboptimality,eta,grad_norm_sq,full_grad_norm_sq";
pub const MEAN_STD_COLUMNS: &str = "algorithm,runs,t,epoch,mean_suboptimality,std_suboptimality,\
mean_avg_suboptimality,std_avg_suboptimality,mean_eta";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    None,
    MeanStd,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
    (mean, var.sqrt())
}

/// Renders `traces` as CSV text with a header row.
pub fn export_plot_data(traces: &[Trace], aggregate: Aggregate) -> Result<String> {
    if traces.is_empty() {
        return Err(Error::InvalidConfig("no traces to export".into()));
    }
    let mut out = String::new();
    match aggregate {
        Aggregate::None => {
            out.push_str(LONG_COLUMNS);
            out.push('\n');
            for tr in traces {
                for r in &tr.records {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        tr.header.algorithm,
                        tr.header.config.seed,
                        r.t,
                        num(r.epoch),
                        num(r.suboptimality),
                        num(r.avg_suboptimality),
                        num(r.eta),
                        num(r.grad_norm_sq),
                        num(r.full_grad_norm_sq),
                    )
                    .expect("writing to a String");
                }
            }
        }
        Aggregate::MeanStd => {
            out.push_str(MEAN_STD_COLUMNS);
            out.push('\n');
            let mut groups: BTreeMap<&str, Vec<&Trace>> = BTreeMap::new();
            for tr in traces {
                groups.entry(tr.header.algorithm.as_str()).or_default().push(tr);
            }
            for (name, group) in groups {
                let first = group[0];
                for tr in &group[1..] {
                    let same = tr.records.len() == first.records.len()
                        && tr.records.iter().zip(&first.records).all(|(a, b)| a.t == b.t);
                    if !same {
                        return Err(Error::Alignment(format!(
                            "{name}: seed {} records at different iterations than seed {}",
                            tr.header.config.seed, first.header.config.seed
                        )));
                    }
                }
                for (k, r0) in first.records.iter().enumerate() {
                    let col = |f: &dyn Fn(&super::trace::TraceRecord) -> f64| -> Vec<f64> {
                        group.iter().map(|tr| f(&tr.records[k])).collect()
                    };
                    let (epoch, _) = mean_std(&col(&|r| r.epoch));
                    let (ms, ss) = mean_std(&col(&|r| r.suboptimality));
                    let (ma, sa) = mean_std(&col(&|r| r.avg_suboptimality));
                    let (me, _) = mean_std(&col(&|r| r.eta));
                    writeln!(
                        out,
                        "{name},{},{},{},{},{},{},{},{}",
                        group.len(),
                        r0.t,
                        num(epoch),
                        num(ms),
                        num(ss),
                        num(ma),
                        num(sa),
                        num(me),
                    )
                    .expect("writing to a String");
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{AlgorithmConfig, ExperimentConfig, ProblemConfig};
    use crate::harness::run_experiment;
    use crate::problems::Regime;

    fn trace(seed: u64, epochs: f64) -> Trace {
        let problem = ProblemConfig::SyntheticQuadratic {
            regime: Regime::StronglyConvex,
            interpolated: true,
            n: 6,
            d: 4,
            seed: 0,
            mask_prob: None,
        };
        let alg = AlgorithmConfig::AdaSps {
            c_p: None,
            c_p_scale: None,
        };
        run_experiment(&ExperimentConfig::new(problem, alg, epochs, seed)).unwrap()
    }

    #[test]
    fn long_format_is_one_row_per_record() {
        let tr = trace(0, 3.0);
        let csv = export_plot_data(std::slice::from_ref(&tr), Aggregate::None).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], LONG_COLUMNS);
        assert_eq!(lines.len(), tr.records.len() + 1);
        let row: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(row[0], "adasps");
        assert_eq!(row[4].parse::<f64>().unwrap(), tr.records[1].suboptimality);
        assert_eq!(lines[1].split(',').nth(6), Some(""));
    }

    #[test]
    fn identical_traces_have_zero_spread() {
        let tr = trace(1, 3.0);
        let csv = export_plot_data(&[tr.clone(), tr.clone(), tr], Aggregate::MeanStd).unwrap();
        for line in csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f[1], "3");
            assert_eq!(f[5].parse::<f64>().unwrap(), 0.0);
            assert_eq!(f[7].parse::<f64>().unwrap(), 0.0);
        }
    }

    #[test]
    fn mismatched_cadence_is_an_alignment_error() {
        let err = export_plot_data(&[trace(0, 3.0), trace(1, 4.0)], Aggregate::MeanStd).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }
}
