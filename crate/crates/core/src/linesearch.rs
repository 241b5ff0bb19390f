//! Backtracking Armijo line search.
//!
//! Starting from `γ_max`, the scale shrinks by `β` until the sufficient
//! decrease condition
//!
//! ```text
//! f(x − γ d) ≤ f(x) − ρ γ ‖d‖²
//! ```
//!
//! holds, where `d` is the minibatch gradient at `x`. The caller supplies
//! `f(x)` and `‖d‖²` so a search costs only its probe evaluations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_PROBES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearchParams {
    pub beta: f64,
    pub rho: f64,
    pub gamma_max: f64,
    #[serde(default = "default_max_probes")]
    pub max_probes: usize,
}

fn default_max_probes() -> usize {
    DEFAULT_MAX_PROBES
}

impl LineSearchParams {
    pub fn new(beta: f64, rho: f64, gamma_max: f64) -> Result<Self> {
        let p = Self {
            beta,
            rho,
            gamma_max,
            max_probes: DEFAULT_MAX_PROBES,
        };
        p.validate()?;
        Ok(p)
    }

    /// `β = 0.8`, `ρ = 0.5`: the setting used with the adaptive stepsizes.
    pub fn adaptive(gamma_max: f64) -> Self {
        Self {
            beta: 0.8,
            rho: 0.5,
            gamma_max,
            max_probes: DEFAULT_MAX_PROBES,
        }
    }

    /// `β = 0.9`, `ρ = 0.1`: the plain stochastic line-search baseline.
    pub fn baseline(gamma_max: f64) -> Self {
        Self {
            beta: 0.9,
            rho: 0.1,
            gamma_max,
            max_probes: DEFAULT_MAX_PROBES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!(
                "line-search beta {} not in [0.5, 1)",
                self.beta
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "line-search rho {} not in (0, 1)",
                self.rho
            )));
        }
        if !(self.gamma_max > 0.0 && self.gamma_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "line-search gamma_max {} must be positive",
                self.gamma_max
            )));
        }
        if self.max_probes == 0 {
            return Err(Error::InvalidConfig("max_probes must be positive".into()));
        }
        Ok(())
    }

    /// Guaranteed lower bound `min{(1−ρ)/L, γ_max}` on the accepted scale
    /// for an `L`-smooth function.
    pub fn scale_lower_bound(&self, smoothness: f64) -> f64 {
        ((1.0 - self.rho) / smoothness).min(self.gamma_max)
    }

    /// Upper bound on the number of probes for an `L`-smooth function.
    pub fn probe_bound(&self, smoothness: f64) -> usize {
        let ratio = smoothness * self.gamma_max / (1.0 - self.rho);
        let k = if ratio > 1.0 {
            (ratio.ln() / (1.0 / self.beta).ln()).ceil() as usize
        } else {
            0
        };
        k.max(1) + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearchResult {
    pub gamma: f64,
    pub probes: usize,
}

fn trial_point(x: &[f64], direction: &[f64], gamma: f64, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(x.iter().zip(direction).map(|(xi, di)| xi - gamma * di));
}

/// Checks the sufficient decrease condition at `gamma` with a fresh evaluation.
pub fn armijo_holds<F>(
    mut value: F,
    grad_sq: f64,
    f_at_x: f64,
    x: &[f64],
    direction: &[f64],
    gamma: f64,
    rho: f64,
) -> Result<bool>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut buf = Vec::with_capacity(x.len());
    trial_point(x, direction, gamma, &mut buf);
    Ok(value(&buf)? <= f_at_x - rho * gamma * grad_sq)
}

/// Returns `γ = γ_max β^k` for the smallest `k ≥ 0` passing the Armijo test.
pub fn backtracking_armijo<F>(
    mut value: F,
    grad_sq: f64,
    f_at_x: f64,
    x: &[f64],
    direction: &[f64],
    params: &LineSearchParams,
) -> Result<LineSearchResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(grad_sq > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "line search needs a nonzero gradient, got ‖g‖² = {grad_sq}"
        )));
    }
    if x.len() != direction.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: direction.len(),
        });
    }
    let mut gamma = params.gamma_max;
    let mut buf = Vec::with_capacity(x.len());
    for probes in 1..=params.max_probes {
        trial_point(x, direction, gamma, &mut buf);
        if value(&buf)? <= f_at_x - params.rho * gamma * grad_sq {
            return Ok(LineSearchResult { gamma, probes });
        }
        gamma *= params.beta;
    }
    Err(Error::LineSearchStalled(params.max_probes))
}
