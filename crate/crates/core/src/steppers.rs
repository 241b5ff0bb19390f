//! Stepsize state machines for the non-variance-reduced methods.
//!
//! Every stepper is a pure state machine: the runner evaluates the oracles and
//! feeds the readings in, and the stepper returns `η_t`. When a minibatch
//! gradient vanishes the Polyak-family steppers return the previous stepsize and
//! the runner leaves the iterate in place.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::{LineSearchParams, LineSearchResult};

/// Added to the square-rooted accumulators to avoid division by zero.
pub const EPSILON_GUARD: f64 = 1e-10;

/// A scale constant (`c_p` or `c_l`) that is either given outright or derived
/// once from the first iteration's readings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    scale: f64,
    calibrate: bool,
    resolved: Option<f64>,
    fell_back: bool,
}

impl ScaleCalibration {
    /// Use `c` directly.
    pub fn fixed(c: f64) -> Self {
        Self {
            scale: c,
            calibrate: false,
            resolved: Some(c),
            fell_back: false,
        }
    }

    /// Derive `c` from `scale` and the first readings.
    pub fn from_scale(scale: f64) -> Self {
        Self {
            scale,
            calibrate: true,
            resolved: None,
            fell_back: false,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn value(&self) -> Option<f64> {
        self.resolved
    }

    pub fn is_resolved(&self) -> bool {
        self.resolved.is_some()
    }

    /// True when calibration hit a zero denominator and used `c = scale`.
    pub fn fell_back(&self) -> bool {
        self.fell_back
    }

    fn resolve_with(&mut self, denominator: f64) -> f64 {
        if let Some(c) = self.resolved {
            return c;
        }
        let c = if denominator > 0.0 && denominator.is_finite() {
            self.scale / denominator
        } else {
            log::warn!("scale calibration denominator is {denominator}; using c = scale");
            self.fell_back = true;
            self.scale
        };
        self.resolved = Some(c);
        c
    }

    /// `c_p = scale / √(f_0 − ℓ*_0)`.
    pub fn resolve_polyak(&mut self, first_gap: f64) -> f64 {
        self.resolve_with(first_gap.max(0.0).sqrt())
    }

    /// `c_l = scale / (ρ √(γ_0 ‖∇f_0‖²))`.
    pub fn resolve_line_search(&mut self, rho: f64, first_gamma: f64, first_grad_sq: f64) -> f64 {
        self.resolve_with(rho * (first_gamma * first_grad_sq).max(0.0).sqrt())
    }
}

fn check_gap(f_batch: f64, lower_bound: f64) -> Result<f64> {
    if f_batch < lower_bound {
        return Err(Error::InvalidLowerBound {
            value: f_batch,
            lower_bound,
        });
    }
    Ok(f_batch - lower_bound)
}

/// AdaSPS: `η_t = min{ (f − ℓ*) / (c_p ‖g‖² (√Σ(f_s − ℓ*_s) + ε)), η_{t−1} }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaSpsState {
    pub calibration: ScaleCalibration,
    accumulator: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    eta_prev: f64,
}

impl AdaSpsState {
    pub fn new(calibration: ScaleCalibration) -> Self {
        Self {
            calibration,
            accumulator: 0.0,
            eta_prev: f64::INFINITY,
        }
    }

    pub fn accumulator(&self) -> f64 {
        self.accumulator
    }

    pub fn eta_prev(&self) -> f64 {
        self.eta_prev
    }

    pub fn c_p(&self) -> Option<f64> {
        self.calibration.value()
    }

    pub fn step(&mut self, f_batch: f64, lower_bound: f64, grad_sq: f64) -> Result<f64> {
        let gap = check_gap(f_batch, lower_bound)?;
        let c_p = self.calibration.resolve_polyak(gap);
        self.accumulator += gap;
        if grad_sq == 0.0 {
            return Ok(self.eta_prev);
        }
        let candidate = gap / (c_p * grad_sq * (self.accumulator.sqrt() + EPSILON_GUARD));
        self.eta_prev = candidate.min(self.eta_prev);
        Ok(self.eta_prev)
    }
}

/// AdaSLS: `η_t = min{ γ_t / (c_l √Σ γ_s ‖g_s‖² + ε), η_{t−1} }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaSlsState {
    pub calibration: ScaleCalibration,
    pub params: LineSearchParams,
    accumulator: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    eta_prev: f64,
}

impl AdaSlsState {
    pub fn new(calibration: ScaleCalibration, params: LineSearchParams) -> Self {
        Self {
            calibration,
            params,
            accumulator: 0.0,
            eta_prev: f64::INFINITY,
        }
    }

    pub fn accumulator(&self) -> f64 {
        self.accumulator
    }

    pub fn eta_prev(&self) -> f64 {
        self.eta_prev
    }

    pub fn c_l(&self) -> Option<f64> {
        self.calibration.value()
    }

    pub fn step(&mut self, search: &LineSearchResult, grad_sq: f64) -> f64 {
        let c_l = self
            .calibration
            .resolve_line_search(self.params.rho, search.gamma, grad_sq);
        self.accumulator += search.gamma * grad_sq;
        let candidate = search.gamma / (c_l * self.accumulator.sqrt() + EPSILON_GUARD);
        self.eta_prev = candidate.min(self.eta_prev);
        self.eta_prev
    }
}

/// DecSPS with `c_t = c_0 √(t+1)`:
/// `η_t = min{ (f − ℓ*)/‖g‖², c_{t−1} η_{t−1} } / c_t`, where `c_{−1} η_{−1} = c_0 γ_b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecSpsState {
    pub c0: f64,
    pub gamma_b: f64,
    eta_prev: Option<f64>,
}

impl DecSpsState {
    pub fn new(c0: f64, gamma_b: f64) -> Self {
        Self {
            c0,
            gamma_b,
            eta_prev: None,
        }
    }

    pub fn eta_prev(&self) -> Option<f64> {
        self.eta_prev
    }

    pub fn step(&mut self, f_batch: f64, lower_bound: f64, grad_sq: f64, t: u64) -> Result<f64> {
        let gap = check_gap(f_batch, lower_bound)?;
        if grad_sq == 0.0 {
            return Ok(self.eta_prev.unwrap_or(self.gamma_b));
        }
        let ratio = gap / grad_sq;
        let cap = match self.eta_prev {
            Some(prev) if t > 0 => self.c0 * (t as f64).sqrt() * prev,
            _ => self.c0 * self.gamma_b,
        };
        let eta = ratio.min(cap) / (self.c0 * ((t + 1) as f64).sqrt());
        self.eta_prev = Some(eta);
        Ok(eta)
    }
}

/// SPS (`γ_b = None`) and SPS_max: `η = min{ (f − f*)/(c ‖g‖²), γ_b }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpsState {
    pub c: f64,
    pub gamma_b: Option<f64>,
}

impl SpsState {
    pub fn new(c: f64, gamma_b: Option<f64>) -> Self {
        Self { c, gamma_b }
    }

    pub fn step(&self, f_batch: f64, f_star_batch: f64, grad_sq: f64) -> Result<f64> {
        let gap = check_gap(f_batch, f_star_batch)?;
        if grad_sq == 0.0 {
            return Ok(0.0);
        }
        let eta = gap / (self.c * grad_sq);
        Ok(match self.gamma_b {
            Some(cap) => eta.min(cap),
            None => eta,
        })
    }
}

/// Plain stochastic line search: the stepsize is the Armijo scale itself.
pub fn sls_step(search: &LineSearchResult) -> f64 {
    search.gamma
}

/// AdaGrad-Norm: `η_t = c_g / √(Σ ‖g_s‖² + b_0²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaGradNormState {
    pub c_g: f64,
    pub b0_sq: f64,
    accumulator: f64,
}

impl AdaGradNormState {
    pub fn new(c_g: f64, b0: f64) -> Self {
        Self {
            c_g,
            b0_sq: b0 * b0,
            accumulator: 0.0,
        }
    }

    pub fn step(&mut self, grad_sq: f64) -> f64 {
        self.accumulator += grad_sq;
        let mut denom = (self.accumulator + self.b0_sq).sqrt();
        if denom == 0.0 {
            denom = EPSILON_GUARD;
        }
        self.c_g / denom
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    InvSqrt,
    InvT,
}

/// SGD with a fixed decay schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdSchedule {
    pub kind: ScheduleKind,
    pub eta0: f64,
}

impl SgdSchedule {
    pub fn step(&self, t: u64) -> f64 {
        let t1 = (t + 1) as f64;
        match self.kind {
            ScheduleKind::Constant => self.eta0,
            ScheduleKind::InvSqrt => self.eta0 / t1.sqrt(),
            ScheduleKind::InvT => self.eta0 / t1,
        }
    }
}

/// AdaSPS with periodic restarts: every `u` iterations `c_p` is recomputed
/// from the running accumulator and the unclamped candidate is emitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaSpsDlState {
    pub c_p_scale: f64,
    pub update_freq: u64,
    c_p: f64,
    accumulator: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    eta_prev: f64,
}

impl AdaSpsDlState {
    pub fn new(c_p_scale: f64, update_freq: u64) -> Result<Self> {
        if update_freq == 0 {
            return Err(Error::InvalidConfig("update frequency must be >= 1".into()));
        }
        Ok(Self {
            c_p_scale,
            update_freq,
            c_p: c_p_scale,
            accumulator: 0.0,
            eta_prev: f64::INFINITY,
        })
    }

    pub fn c_p(&self) -> f64 {
        self.c_p
    }

    pub fn eta_prev(&self) -> f64 {
        self.eta_prev
    }

    pub fn step(&mut self, f_batch: f64, lower_bound: f64, grad_sq: f64, t: u64) -> Result<f64> {
        let gap = check_gap(f_batch, lower_bound)?;
        self.accumulator += gap;
        let restart = t.is_multiple_of(self.update_freq);
        if restart {
            let root = self.accumulator.sqrt();
            self.c_p = if root > 0.0 {
                self.c_p_scale / root
            } else {
                self.c_p_scale
            };
        }
        if grad_sq == 0.0 {
            return Ok(self.eta_prev);
        }
        let candidate = gap / (self.c_p * grad_sq * (self.accumulator.sqrt() + EPSILON_GUARD));
        self.eta_prev = if restart {
            candidate
        } else {
            candidate.min(self.eta_prev)
        };
        Ok(self.eta_prev)
    }
}
