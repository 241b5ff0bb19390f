//! Loopless variance reduction.
//!
//! Each iteration builds the proxy
//!
//! ```text
//! F_B(x) = f_B(x) + xᵀ(∇f(w) − ∇f_B(w)) + (μ_F/2)‖x − x_t‖²
//! ```
//!
//! around the current snapshot `w`, runs an adaptive stepsize on it, and then
//! moves the snapshot to `x_t` with probability `p_{t+1}`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::{backtracking_armijo, LineSearchResult};
use crate::problem::{Batch, FiniteSum, Oracle, ParamVector, ProjectionDomain};
use crate::steppers::{AdaSlsState, AdaSpsState};
use crate::vector;

/// Anchor `w` with its full gradient and cached component gradients.
#[derive(Clone, Debug)]
pub struct Snapshot {
    w: ParamVector,
    full_grad: ParamVector,
    component_grads: Vec<ParamVector>,
}

impl Snapshot {
    /// Takes a snapshot at `w`; costs one full gradient.
    pub fn take<P: FiniteSum + ?Sized>(oracle: &mut Oracle<'_, P>, w: &[f64]) -> Result<Self> {
        let (full_grad, component_grads) = oracle.full_gradient_with_components(w)?;
        Ok(Self {
            w: w.to_vec(),
            full_grad,
            component_grads,
        })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn full_grad(&self) -> &[f64] {
        &self.full_grad
    }

    /// `g = ∇f(w) − ∇f_B(w)`, read from the cache.
    pub fn correction(&self, batch: &Batch) -> ParamVector {
        let mut g = self.full_grad.clone();
        let w = -1.0 / batch.len() as f64;
        for &i in batch.indices() {
            vector::axpy(w, &self.component_grads[i], &mut g);
        }
        g
    }
}

/// The proxy `F_B` for one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxyFunction {
    pub batch: Batch,
    pub correction: ParamVector,
    pub anchor: ParamVector,
    pub mu_f: f64,
}

impl ProxyFunction {
    pub fn new(batch: Batch, correction: ParamVector, anchor: ParamVector, mu_f: f64) -> Result<Self> {
        if correction.len() != anchor.len() {
            return Err(Error::DimensionMismatch {
                expected: anchor.len(),
                got: correction.len(),
            });
        }
        if !(mu_f >= 0.0 && mu_f.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu_F must be >= 0, got {mu_f}")));
        }
        Ok(Self {
            batch,
            correction,
            anchor,
            mu_f,
        })
    }

    fn shift(&self, x: &[f64]) -> f64 {
        vector::dot(x, &self.correction) + 0.5 * self.mu_f * vector::dist_sq(x, &self.anchor)
    }

    /// `F_B(x)`; one function evaluation.
    pub fn value<P: FiniteSum + ?Sized>(&self, oracle: &mut Oracle<'_, P>, x: &[f64]) -> Result<f64> {
        Ok(oracle.minibatch_value(&self.batch, x)? + self.shift(x))
    }

    /// `∇F_B(x) = ∇f_B(x) + g + μ_F(x − anchor)`; `B` stochastic gradients.
    pub fn gradient<P: FiniteSum + ?Sized>(&self, oracle: &mut Oracle<'_, P>, x: &[f64]) -> Result<ParamVector> {
        let mut grad = oracle.minibatch_gradient(&self.batch, x)?;
        self.finish_gradient(x, &mut grad);
        Ok(grad)
    }

    /// Adds the correction and proximal terms to a minibatch gradient.
    pub fn finish_gradient(&self, x: &[f64], grad: &mut [f64]) {
        vector::axpy(1.0, &self.correction, grad);
        if self.mu_f != 0.0 {
            for ((gi, xi), ai) in grad.iter_mut().zip(x).zip(&self.anchor) {
                *gi += self.mu_f * (xi - ai);
            }
        }
    }

    /// `ℓ* + anchorᵀg − ‖g‖²/(2μ_F)`, the inner minimum attained at `anchor − g/μ_F`.
    pub fn lower_bound(&self, base_lb: f64) -> Result<f64> {
        let g_sq = vector::norm_sq(&self.correction);
        if g_sq == 0.0 {
            return Ok(base_lb);
        }
        if self.mu_f == 0.0 {
            return Err(Error::UnboundedProxy);
        }
        Ok(base_lb + vector::dot(&self.anchor, &self.correction) - g_sq / (2.0 * self.mu_f))
    }

    /// `F_B(anchor) − lower_bound`, computed without cancellation:
    /// `(f_B(anchor) − ℓ*) + ‖g‖²/(2μ_F)`.
    pub fn anchor_gap(&self, f_at_anchor: f64, base_lb: f64) -> Result<f64> {
        let g_sq = vector::norm_sq(&self.correction);
        let shift = if g_sq == 0.0 {
            0.0
        } else if self.mu_f == 0.0 {
            return Err(Error::UnboundedProxy);
        } else {
            g_sq / (2.0 * self.mu_f)
        };
        if f_at_anchor < base_lb {
            return Err(Error::InvalidLowerBound {
                value: f_at_anchor,
                lower_bound: base_lb,
            });
        }
        Ok(f_at_anchor - base_lb + shift)
    }

    /// `F(x) − F*` when the problem supplies it in closed form.
    pub fn exact_gap<P: FiniteSum + ?Sized>(&self, problem: &P, x: &[f64]) -> Option<f64> {
        problem.exact_proxy_gap(&self.batch, &self.correction, &self.anchor, self.mu_f, x)
    }

    /// Exact `F*_B` when the problem supplies it.
    pub fn exact_min<P: FiniteSum + ?Sized>(&self, problem: &P) -> Option<f64> {
        problem.exact_proxy_min(&self.batch, &self.correction, &self.anchor, self.mu_f)
    }
}

/// Snapshot probability `p_t = 1/(a t + 1)`, or a constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySchedule {
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_p: Option<f64>,
}

impl ProbabilitySchedule {
    pub fn decreasing(a: f64) -> Result<Self> {
        let s = Self { a, fixed_p: None };
        s.validate()?;
        Ok(s)
    }

    pub fn fixed(p: f64) -> Result<Self> {
        let s = Self {
            a: 0.0,
            fixed_p: Some(p),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.fixed_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidConfig(format!("fixed p {p} not in (0, 1]")));
            }
        } else if !(0.0..1.0).contains(&self.a) {
            return Err(Error::InvalidConfig(format!("schedule a = {} not in [0, 1)", self.a)));
        }
        Ok(())
    }

    pub fn probability(&self, t: u64) -> f64 {
        match self.fixed_p {
            Some(p) => p,
            None => 1.0 / (self.a * t as f64 + 1.0),
        }
    }
}

/// Moves the snapshot to `x_t` with probability `p_{t+1}`; returns whether it did.
pub fn snapshot_update<P: FiniteSum + ?Sized>(
    snapshot: &mut Snapshot,
    x_t: &[f64],
    t: u64,
    schedule: &ProbabilitySchedule,
    rng: &mut ChaCha8Rng,
    oracle: &mut Oracle<'_, P>,
) -> Result<bool> {
    let p = schedule.probability(t + 1);
    let u: f64 = rng.random();
    if u < p {
        *snapshot = Snapshot::take(oracle, x_t)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// How the proxy infimum `F*_B` is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyBound {
    /// Closed-form shifted lower bound from `ℓ*_B`.
    #[default]
    Shifted,
    /// Exact minimization of the proxy (quadratics only).
    Exact,
}

/// Readings from one variance-reduced iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VrStep {
    pub eta: f64,
    pub grad_sq: f64,
    /// `F_B(x_t) − F*_B`; NaN for the line-search variant.
    pub proxy_gap: f64,
    /// Accepted Armijo scale; zero for the Polyak variant.
    pub gamma: f64,
    pub probes: usize,
    pub refreshed: bool,
    pub moved: bool,
}

/// Run state shared by AdaSVRPS and AdaSVRLS.
#[derive(Clone, Debug)]
pub struct LooplessVr {
    pub snapshot: Snapshot,
    pub schedule: ProbabilitySchedule,
    pub mu_f: f64,
    pub bound: ProxyBound,
    coin: ChaCha8Rng,
    refreshes: u64,
}

impl LooplessVr {
    /// Starts with `w_0 = x_0`; the initial full gradient counts as a refresh.
    pub fn new<P: FiniteSum + ?Sized>(
        oracle: &mut Oracle<'_, P>,
        x0: &[f64],
        mu_f: f64,
        schedule: ProbabilitySchedule,
        bound: ProxyBound,
        coin: ChaCha8Rng,
    ) -> Result<Self> {
        schedule.validate()?;
        if !(mu_f >= 0.0 && mu_f.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu_F must be >= 0, got {mu_f}")));
        }
        Ok(Self {
            snapshot: Snapshot::take(oracle, x0)?,
            schedule,
            mu_f,
            bound,
            coin,
            refreshes: 1,
        })
    }

    /// Full-gradient snapshots taken so far, including the initial one.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    pub fn proxy(&self, batch: &Batch, x_t: &[f64]) -> Result<ProxyFunction> {
        ProxyFunction::new(batch.clone(), self.snapshot.correction(batch), x_t.to_vec(), self.mu_f)
    }

    fn proxy_gap<P: FiniteSum + ?Sized>(
        &self,
        problem: &P,
        proxy: &ProxyFunction,
        f_b: f64,
        base_lb: f64,
        x_t: &[f64],
    ) -> Result<f64> {
        match self.bound {
            ProxyBound::Shifted => proxy.anchor_gap(f_b, base_lb),
            ProxyBound::Exact => {
                let gap = proxy
                    .exact_gap(problem, x_t)
                    .ok_or(Error::MissingOptimum("exact proxy bound"))?;
                if gap == f64::INFINITY {
                    return Err(Error::UnboundedProxy);
                }
                Ok(gap)
            }
        }
    }

    fn finish<P: FiniteSum + ?Sized>(
        &mut self,
        oracle: &mut Oracle<'_, P>,
        x: &mut ParamVector,
        direction: &[f64],
        eta: f64,
        moved: bool,
        t: u64,
        domain: &ProjectionDomain,
    ) -> Result<bool> {
        let x_t = x.clone();
        if moved {
            vector::axpy(-eta, direction, x);
            domain.project_in_place(x);
        }
        let refreshed = snapshot_update(&mut self.snapshot, &x_t, t, &self.schedule, &mut self.coin, oracle)?;
        if refreshed {
            self.refreshes += 1;
        }
        Ok(refreshed)
    }

    /// One AdaSVRPS iteration on the sampled batch.
    pub fn adasvrps_iteration<P: FiniteSum + ?Sized>(
        &mut self,
        oracle: &mut Oracle<'_, P>,
        batch: &Batch,
        x: &mut ParamVector,
        t: u64,
        stepper: &mut AdaSpsState,
        domain: &ProjectionDomain,
    ) -> Result<VrStep> {
        let problem = oracle.problem();
        let proxy = self.proxy(batch, x)?;
        let f_b = oracle.minibatch_value(batch, x)?;
        let base_lb = oracle.batch_lower_bound(batch);
        let grad = proxy.gradient(oracle, x)?;
        let grad_sq = vector::norm_sq(&grad);
        let gap = self.proxy_gap(problem, &proxy, f_b, base_lb, x)?;
        let eta = stepper.step(gap, 0.0, grad_sq)?;
        let moved = grad_sq > 0.0;
        let refreshed = self.finish(oracle, x, &grad, eta, moved, t, domain)?;
        Ok(VrStep {
            eta,
            grad_sq,
            proxy_gap: gap,
            gamma: 0.0,
            probes: 0,
            refreshed,
            moved,
        })
    }

    /// One AdaSVRLS iteration: Armijo on the proxy, then the AdaSLS stepsize.
    pub fn adasvrls_iteration<P: FiniteSum + ?Sized>(
        &mut self,
        oracle: &mut Oracle<'_, P>,
        batch: &Batch,
        x: &mut ParamVector,
        t: u64,
        stepper: &mut AdaSlsState,
        domain: &ProjectionDomain,
    ) -> Result<VrStep> {
        let proxy = self.proxy(batch, x)?;
        let f_at_x = proxy.value(oracle, x)?;
        let grad = proxy.gradient(oracle, x)?;
        let grad_sq = vector::norm_sq(&grad);
        let (eta, search) = if grad_sq > 0.0 {
            let params = stepper.params;
            let search = backtracking_armijo(|y| proxy.value(oracle, y), grad_sq, f_at_x, x, &grad, &params)?;
            (stepper.step(&search, grad_sq), search)
        } else {
            (stepper.eta_prev(), LineSearchResult { gamma: 0.0, probes: 0 })
        };
        let moved = grad_sq > 0.0;
        let refreshed = self.finish(oracle, x, &grad, eta, moved, t, domain)?;
        Ok(VrStep {
            eta,
            grad_sq,
            proxy_gap: f64::NAN,
            gamma: search.gamma,
            probes: search.probes,
            refreshed,
            moved,
        })
    }
}

/// SVRG with a constant stepsize and a full-gradient refresh every
/// `⌈n/B⌉` iterations.
#[derive(Clone, Debug)]
pub struct Svrg {
    pub snapshot: Snapshot,
    pub eta: f64,
    pub refresh_every: u64,
    refreshes: u64,
}

impl Svrg {
    pub fn new<P: FiniteSum + ?Sized>(
        oracle: &mut Oracle<'_, P>,
        x0: &[f64],
        eta: f64,
        batch_size: usize,
    ) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "SVRG stepsize must be positive, got {eta}"
            )));
        }
        let n = oracle.problem().num_components();
        Ok(Self {
            snapshot: Snapshot::take(oracle, x0)?,
            eta,
            refresh_every: n.div_ceil(batch_size.max(1)) as u64,
            refreshes: 1,
        })
    }

    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    /// One step `x ← Π(x − η (∇f_B(x) + ∇f(w) − ∇f_B(w)))`; returns `‖g_t‖²`.
    pub fn iteration<P: FiniteSum + ?Sized>(
        &mut self,
        oracle: &mut Oracle<'_, P>,
        batch: &Batch,
        x: &mut ParamVector,
        t: u64,
        domain: &ProjectionDomain,
    ) -> Result<f64> {
        if t > 0 && t.is_multiple_of(self.refresh_every) {
            self.snapshot = Snapshot::take(oracle, x)?;
            self.refreshes += 1;
        }
        let mut g = oracle.minibatch_gradient(batch, x)?;
        vector::axpy(1.0, &self.snapshot.correction(batch), &mut g);
        let grad_sq = vector::norm_sq(&g);
        vector::axpy(-self.eta, &g, x);
        domain.project_in_place(x);
        Ok(grad_sq)
    }
}
