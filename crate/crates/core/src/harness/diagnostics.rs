//! Theory constants evaluated on a finished run: noise levels, the
//! averaged-iterate bound, and the bounded-iterates radius `D_max`.

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::problem::{Batch, FiniteSum};
use crate::problems::{binomial, err_f_b, sigma_f_b, ReferenceOptimum, MAX_ENUMERATED_SUBSETS};

use super::trace::Trace;

/// Monte-Carlo draws used when the batch count is too large to enumerate.
pub const DEFAULT_SAMPLE_COUNT: usize = 2000;
/// Relative slack of the containment check.
pub const CONTAINMENT_REL_TOL: f64 = 1e-9;

/// Where the diameter entering `τ` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiameterSource {
    /// Twice the projection radius.
    ProjectionBall,
    /// `√D_max` on strongly convex unconstrained runs.
    BoundedIterates,
    /// Largest recorded distance to `x*`; an estimate only.
    Observed,
}

/// One point of the averaged-iterate bound next to the measured value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub t: u64,
    pub bound: f64,
    pub observed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub algorithm: String,
    pub batch_size: usize,
    /// `σ²_{f,B}`; absent when the problem has no exact minibatch optima.
    pub sigma_fb: Option<f64>,
    /// `err²_{f,B}`; absent for the same reason.
    pub err_fb: Option<f64>,
    /// Whether the two expectations above were enumerated exactly.
    pub enumerated: bool,
    pub smoothness: Option<f64>,
    pub strong_convexity: Option<f64>,
    pub diameter: Option<f64>,
    pub diameter_source: Option<DiameterSource>,
    /// `τ_p` for AdaSPS, `τ_l` for AdaSLS.
    pub tau: Option<f64>,
    /// Averaged-iterate bound at the final recorded iteration.
    pub averaged_iterate_bound: Option<f64>,
    pub averaged_iterate_curve: Vec<BoundPoint>,
    pub sigma_max_sq: Option<f64>,
    pub dmax_bound: Option<f64>,
    pub max_dist_sq: f64,
    /// `Some(true)` when every recorded `‖x_t − x*‖²` lies within `D_max`.
    pub containment: Option<bool>,
    /// Set when a constant had to be estimated or is unavailable.
    pub estimate: bool,
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    /// Checks that every reported number is finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        let mut values = vec![
            ("sigma_fB", self.sigma_fb),
            ("err_fB", self.err_fb),
            ("smoothness", self.smoothness),
            ("strong_convexity", self.strong_convexity),
            ("diameter", self.diameter),
            ("tau", self.tau),
            ("averaged_iterate_bound", self.averaged_iterate_bound),
            ("sigma_max_sq", self.sigma_max_sq),
            ("dmax_bound", self.dmax_bound),
            ("max_dist_sq", Some(self.max_dist_sq)),
        ];
        values.extend(
            self.averaged_iterate_curve
                .iter()
                .map(|p| ("averaged_iterate_curve", Some(p.bound))),
        );
        for (what, v) in values {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvariantViolated(format!("{what} = {v} is not finite and >= 0")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Polyak,
    LineSearch,
    Other,
}

/// Noise levels below this are rounding error on an interpolated problem.
const NOISE_FLOOR: f64 = 1e-12;

fn clamp_noise(v: f64) -> f64 {
    if v.abs() < NOISE_FLOOR {
        0.0
    } else {
        v
    }
}

/// Evaluates the diagnostics of `trace`, which must come from `problem`.
pub fn compute_diagnostics(
    problem: &dyn FiniteSum,
    optimum: &ReferenceOptimum,
    batch_size: usize,
    trace: &Trace,
    seed: u64,
) -> Result<DiagnosticsReport> {
    let header = &trace.header;
    if header.problem_hash != problem.content_hash() {
        return Err(Error::InvalidConfig("trace was recorded on a different problem".into()));
    }
    let n = problem.num_components();
    let resolved = &header.resolved;
    let family = match header.algorithm.as_str() {
        "adasps" => Family::Polyak,
        "adasls" => Family::LineSearch,
        _ => Family::Other,
    };
    let mut notes = Vec::new();
    let mut estimate = false;

    let enumerated = binomial(n, batch_size) <= MAX_ENUMERATED_SUBSETS;
    let (sigma_fb, err_fb) = match (
        sigma_f_b(problem, optimum.f_star, batch_size, DEFAULT_SAMPLE_COUNT, seed),
        err_f_b(problem, batch_size, DEFAULT_SAMPLE_COUNT, seed),
    ) {
        (Ok(s), Ok(e)) => (Some(clamp_noise(s).max(0.0)), Some(clamp_noise(e).max(0.0))),
        (Err(Error::MissingOptimum(_)), _) | (_, Err(Error::MissingOptimum(_))) => {
            estimate = true;
            notes.push("problem has no exact minibatch optima; noise levels unavailable".into());
            (None, None)
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    if !enumerated {
        estimate = true;
        notes.push(format!(
            "noise levels are Monte-Carlo means over {DEFAULT_SAMPLE_COUNT} batches"
        ));
    }

    let smoothness = resolved.smoothness.or(problem.component_smoothness());
    if smoothness.is_none() {
        estimate = true;
        notes.push("smoothness constant unavailable".into());
    }
    let mu = resolved
        .strong_convexity
        .or(problem.component_strong_convexity())
        .filter(|&m| m > 0.0);
    let max_dist_sq = trace.records.iter().map(|r| r.dist_sq).fold(0.0, f64::max);
    let initial_dist_sq = trace.records.first().map_or(0.0, |r| r.dist_sq);
    let exact_gaps = resolved.lower_bound_mode == "exact";

    // Largest single-component gap at x*; bounds every minibatch gap there.
    let mut sigma_max_sq = None;
    if family != Family::Other {
        let mut worst = 0.0f64;
        let mut available = true;
        for i in 0..n {
            let b = Batch::single(i);
            let at_star = problem.component_value(i, &optimum.x_star);
            let low = if family == Family::LineSearch || exact_gaps {
                problem.exact_batch_min(&b)
            } else {
                Some(problem.batch_lower_bound(&b))
            };
            match low {
                Some(l) => worst = worst.max(at_star - l),
                None => {
                    available = false;
                    break;
                }
            }
        }
        if available {
            sigma_max_sq = Some(clamp_noise(worst).max(0.0));
        } else {
            notes.push("component optima unavailable; D_max not evaluated".into());
        }
    }

    let offset = match family {
        Family::Polyak => match (resolved.c_p, resolved.first_gap) {
            (Some(c), Some(g)) if g > 0.0 => Some(bounds::dmax_offset_polyak(c, g)),
            _ => None,
        },
        Family::LineSearch => {
            let rho = header.config.algorithm.line_search().map(|p| p.rho);
            match (resolved.c_l, rho, resolved.first_gamma, resolved.first_grad_sq) {
                (Some(c), Some(rho), Some(g), Some(q)) if g * q > 0.0 => {
                    Some(bounds::dmax_offset_line_search(c, rho, g, q))
                }
                _ => None,
            }
        }
        Family::Other => None,
    };
    let dmax_bound = match (mu, sigma_max_sq, offset, resolved.first_eta) {
        (Some(mu), Some(s), Some(b), Some(eta0)) if eta0.is_finite() => {
            Some(bounds::dmax(initial_dist_sq, s, b, mu, eta0))
        }
        _ => None,
    };
    let containment = dmax_bound.map(|d| {
        trace
            .records
            .iter()
            .all(|r| r.dist_sq <= d * (1.0 + CONTAINMENT_REL_TOL))
    });

    let ball_radius = match &header.config.projection {
        Some(super::config::ProjectionConfig::EuclideanBall { radius, .. }) => Some(*radius),
        Some(super::config::ProjectionConfig::Unconstrained) => None,
        None if resolved.projection.starts_with("euclidean_ball") => Some(super::config::DEFAULT_BALL_RADIUS),
        None => None,
    };
    let (diameter, diameter_source) = match (ball_radius, dmax_bound) {
        (Some(r), _) => (Some(2.0 * r), Some(DiameterSource::ProjectionBall)),
        (None, Some(d)) => (Some(d.sqrt()), Some(DiameterSource::BoundedIterates)),
        (None, None) if family != Family::Other => {
            estimate = true;
            notes.push("no diameter known; using the largest recorded distance".into());
            (Some(max_dist_sq.sqrt()), Some(DiameterSource::Observed))
        }
        (None, None) => (None, None),
    };

    let tau = match (family, smoothness, diameter) {
        (Family::Polyak, Some(l), Some(d)) => resolved.c_p.map(|c| bounds::tau_polyak(c, l, d)),
        (Family::LineSearch, Some(l), Some(d)) => {
            let p = header.config.algorithm.line_search();
            match (resolved.c_l, p) {
                (Some(c), Some(p)) => Some(bounds::tau_line_search(c, l, p.rho, p.gamma_max, d)),
                _ => None,
            }
        }
        _ => None,
    };
    let noise = match family {
        Family::Polyak => sigma_fb.zip(err_fb).map(|(s, e)| s + e),
        Family::LineSearch => sigma_fb,
        Family::Other => None,
    };
    let averaged_iterate_curve: Vec<BoundPoint> = match (tau, noise) {
        (Some(tau), Some(noise)) => trace
            .records
            .iter()
            .filter(|r| r.t > 0)
            .map(|r| BoundPoint {
                t: r.t,
                bound: bounds::averaged_iterate_bound(tau, r.t, noise),
                observed: r.avg_suboptimality,
            })
            .collect(),
        _ => Vec::new(),
    };
    if family == Family::Other {
        notes.push(format!("no averaged-iterate bound for {}", header.algorithm));
    }

    let report = DiagnosticsReport {
        algorithm: header.algorithm.clone(),
        batch_size,
        sigma_fb,
        err_fb,
        enumerated,
        smoothness,
        strong_convexity: mu,
        diameter,
        diameter_source,
        tau,
        averaged_iterate_bound: averaged_iterate_curve.last().map(|p| p.bound),
        averaged_iterate_curve,
        sigma_max_sq,
        dmax_bound,
        max_dist_sq,
        containment,
        estimate,
        notes,
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{AlgorithmConfig, ExperimentConfig, ProblemConfig};
    use crate::harness::{execute, LoadedProblem};
    use crate::problems::Regime;

    fn run(interpolated: bool, seed: u64) -> (LoadedProblem, ReferenceOptimum, Trace) {
        let mut cfg = ExperimentConfig::new(
            ProblemConfig::SyntheticQuadratic {
                regime: Regime::StronglyConvex,
                interpolated,
                n: 8,
                d: 6,
                seed,
                mask_prob: None,
            },
            AlgorithmConfig::AdaSps {
                c_p: None,
                c_p_scale: Some(1.0),
            },
            5.0,
            seed,
        );
        cfg.projection = Some(super::super::config::ProjectionConfig::Unconstrained);
        let loaded = LoadedProblem::load(&cfg.problem).unwrap();
        let opt = loaded.reference_optimum().unwrap();
        let out = execute(&cfg, &loaded, &opt).unwrap();
        assert!(out.error.is_none());
        (loaded, opt, out.trace)
    }

    #[test]
    fn interpolated_noise_is_zero() {
        let (loaded, opt, trace) = run(true, 1);
        let r = compute_diagnostics(loaded.as_dyn(), &opt, 1, &trace, 0).unwrap();
        assert_eq!(r.sigma_fb, Some(0.0));
        assert_eq!(r.err_fb, Some(0.0));
        assert!(r.enumerated);
        assert_eq!(r.containment, Some(true));
        assert_eq!(r.diameter_source, Some(DiameterSource::BoundedIterates));
    }

    #[test]
    fn non_interpolated_report_is_complete() {
        let (loaded, opt, trace) = run(false, 2);
        let r = compute_diagnostics(loaded.as_dyn(), &opt, 1, &trace, 0).unwrap();
        assert!(r.sigma_fb.unwrap() > 0.0);
        assert!(r.dmax_bound.unwrap() >= r.max_dist_sq);
        assert_eq!(r.averaged_iterate_curve.len(), trace.records.len() - 1);
        assert!(!r.estimate);
    }

    #[test]
    fn rejects_foreign_trace() {
        let (_, _, trace) = run(false, 2);
        let (other, opt, _) = run(false, 3);
        assert!(compute_diagnostics(other.as_dyn(), &opt, 1, &trace, 0).is_err());
    }
}
