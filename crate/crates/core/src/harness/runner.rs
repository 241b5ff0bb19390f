//! The experiment loop: sample, step, project, record, until the budget is spent.

use std::path::{Path, PathBuf};

use crate::bounds;
use crate::error::{Error, Result};
use crate::linesearch::{armijo_holds, backtracking_armijo, LineSearchParams};
use crate::problem::{batch_value, seeded_rng, Batch, FiniteSum, Oracle, ProjectionDomain, Sampler, RNG_ALGORITHM};
use crate::problems::quadratic::random_point;
use crate::problems::ReferenceOptimum;
use crate::steppers::{
    AdaGradNormState, AdaSlsState, AdaSpsDlState, AdaSpsState, DecSpsState, ScaleCalibration, SgdSchedule, SpsState,
};
use crate::varred::{LooplessVr, ProxyBound, Svrg};
use crate::vector;

use super::config::{
    scale_choice, AlgorithmConfig, ExperimentConfig, InitialPoint, LowerBoundMode, ProjectionConfig,
    DEFAULT_BALL_RADIUS,
};
use super::source::LoadedProblem;
use super::trace::{
    CheckTally, ResolvedConstants, RunStatus, Trace, TraceHeader, TraceRecord, TraceSummary, TRACE_SCHEMA_VERSION,
};

/// Most negative suboptimality accepted before the reference is declared stale.
pub const SUBOPTIMALITY_SLACK: f64 = 1e-9;
/// Relative slack of the online stepsize checks.
pub const CHECK_REL_TOL: f64 = 1e-9;
/// Overrides the directory of relative output paths.
pub const OUTPUT_DIR_ENV: &str = "ADASTEP_OUTPUT_DIR";

const SAMPLER_STREAM: u64 = 0;
const COIN_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;

/// A finished or aborted run. Setup errors are returned directly instead.
#[derive(Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    /// Last iterate `x_T`.
    pub final_x: Vec<f64>,
    /// Running mean `x̄_T` of `x_0 .. x_{T−1}`.
    pub average_x: Vec<f64>,
    pub error: Option<Error>,
}

/// Loads the problem, runs, and returns the trace.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Trace> {
    config.validate()?;
    let problem = LoadedProblem::load(&config.problem)?;
    let optimum = problem.reference_optimum()?;
    let outcome = execute(config, &problem, &optimum)?;
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(outcome.trace),
    }
}

/// Runs and writes the trace to `path`; an aborted run still writes its
/// partial trace before the error is returned.
pub fn run_to_file(config: &ExperimentConfig, path: &Path) -> Result<Trace> {
    config.validate()?;
    let problem = LoadedProblem::load(&config.problem)?;
    let optimum = problem.reference_optimum()?;
    let outcome = execute(config, &problem, &optimum)?;
    outcome.trace.write_atomic(path)?;
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(outcome.trace),
    }
}

/// Resolves a relative output path against `$ADASTEP_OUTPUT_DIR` when set.
pub fn resolve_output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Projection used when the config leaves it unset: none for interpolated
/// problems, the default ball around the origin otherwise.
pub fn default_projection(problem: &LoadedProblem) -> ProjectionConfig {
    if problem.interpolated() {
        ProjectionConfig::Unconstrained
    } else {
        ProjectionConfig::EuclideanBall {
            radius: DEFAULT_BALL_RADIUS,
            center: None,
        }
    }
}

fn describe_projection(domain: &ProjectionDomain) -> String {
    match domain {
        ProjectionDomain::Unconstrained => "unconstrained".into(),
        ProjectionDomain::EuclideanBall { radius, center } => {
            if center.iter().all(|&c| c == 0.0) {
                format!("euclidean_ball(radius={radius})")
            } else {
                format!("euclidean_ball(radius={radius}, center=custom)")
            }
        }
    }
}

enum Method {
    Sgd(SgdSchedule),
    Sps(SpsState),
    DecSps(DecSpsState),
    AdaSps(AdaSpsState),
    AdaSls(AdaSlsState),
    Sls(LineSearchParams),
    AdaGradNorm(AdaGradNormState),
    AdaSpsDl(AdaSpsDlState),
    AdaSvrps(LooplessVr, AdaSpsState),
    AdaSvrls(LooplessVr, AdaSlsState),
    Svrg(Svrg),
}

fn calibration(fixed: bool, v: f64) -> ScaleCalibration {
    if fixed {
        ScaleCalibration::fixed(v)
    } else {
        ScaleCalibration::from_scale(v)
    }
}

struct StepInfo {
    eta: f64,
    grad_sq: f64,
    probes: usize,
    accumulator: Option<f64>,
    gap: Option<f64>,
    gamma: Option<f64>,
}

struct Run<'a> {
    problem: &'a (dyn FiniteSum + 'a),
    oracle: Oracle<'a, dyn FiniteSum + 'a>,
    sampler: Sampler,
    method: Method,
    mode: LowerBoundMode,
    domain: ProjectionDomain,
    smoothness: Option<f64>,
    strict: bool,
    checks: CheckTally,
    x: Vec<f64>,
}

impl Run<'_> {
    /// `f_B(x) − ℓ*_B` under the configured lower-bound mode.
    fn batch_gap(&self, batch: &Batch, f_batch: f64) -> Result<f64> {
        match self.mode {
            LowerBoundMode::Problem => {
                let lb = self.problem.batch_lower_bound(batch);
                if f_batch < lb {
                    return Err(Error::InvalidLowerBound {
                        value: f_batch,
                        lower_bound: lb,
                    });
                }
                Ok(f_batch - lb)
            }
            LowerBoundMode::Exact => self
                .problem
                .exact_batch_gap(batch, &self.x)
                .ok_or(Error::MissingOptimum("exact lower bound")),
        }
    }

    fn violation(&mut self, message: String) -> Result<()> {
        self.checks.violations += 1;
        if self.checks.first_violation.is_none() {
            self.checks.first_violation = Some(message.clone());
        }
        if self.strict {
            return Err(Error::InvariantViolated(message));
        }
        Ok(())
    }

    fn check_monotone(&mut self, t: u64, prev: f64, eta: f64) -> Result<()> {
        self.checks.monotone += 1;
        if eta > prev {
            self.violation(format!("stepsize increased at t={t}: {eta:e} > {prev:e}"))?;
        }
        Ok(())
    }

    fn check_bracket(&mut self, t: u64, eta: f64, bracket: (f64, f64), what: &str) -> Result<()> {
        self.checks.sandwich += 1;
        if !bounds::within_bracket(eta, bracket, CHECK_REL_TOL) {
            self.violation(format!(
                "{what} bracket failed at t={t}: {:e} <= {eta:e} <= {:e}",
                bracket.0, bracket.1
            ))?;
        }
        Ok(())
    }

    fn check_armijo(
        &mut self,
        t: u64,
        batch: &Batch,
        f_at_x: f64,
        grad: &[f64],
        grad_sq: f64,
        gamma: f64,
        params: &LineSearchParams,
    ) -> Result<()> {
        self.checks.armijo += 1;
        let problem = self.problem;
        let holds = armijo_holds(
            |y| Ok(batch_value(problem, batch, y)),
            grad_sq,
            f_at_x,
            &self.x,
            grad,
            gamma,
            params.rho,
        )?;
        if !holds {
            self.violation(format!("Armijo condition fails at t={t} for gamma={gamma:e}"))?;
        }
        if let Some(l) = problem.batch_smoothness(batch) {
            let floor = params.scale_lower_bound(l);
            if gamma < floor * (1.0 - CHECK_REL_TOL) {
                self.violation(format!("Armijo scale {gamma:e} below floor {floor:e} at t={t}"))?;
            }
        }
        Ok(())
    }

    fn line_search(
        &mut self,
        batch: &Batch,
        grad: &[f64],
        grad_sq: f64,
        params: &LineSearchParams,
    ) -> Result<(f64, crate::linesearch::LineSearchResult)> {
        let f_at_x = self.oracle.minibatch_value(batch, &self.x)?;
        let oracle = &mut self.oracle;
        let search = backtracking_armijo(
            |y| oracle.minibatch_value(batch, y),
            grad_sq,
            f_at_x,
            &self.x,
            grad,
            params,
        )?;
        Ok((f_at_x, search))
    }

    fn step(&mut self, t: u64) -> Result<StepInfo> {
        let batch = self.sampler.sample_minibatch();
        if matches!(
            self.method,
            Method::AdaSvrps(..) | Method::AdaSvrls(..) | Method::Svrg(_)
        ) {
            return self.step_variance_reduced(t, &batch);
        }
        let grad = self.oracle.minibatch_gradient(&batch, &self.x)?;
        if !vector::all_finite(&grad) {
            return Err(Error::NonFinite {
                what: "minibatch gradient",
                iteration: t,
            });
        }
        let grad_sq = vector::norm_sq(&grad);
        let mut info = StepInfo {
            eta: 0.0,
            grad_sq,
            probes: 0,
            accumulator: None,
            gap: None,
            gamma: None,
        };
        let polyak_gap = |run: &mut Self| -> Result<f64> {
            let f = run.oracle.minibatch_value(&batch, &run.x)?;
            if !f.is_finite() {
                return Err(Error::NonFinite {
                    what: "minibatch value",
                    iteration: t,
                });
            }
            run.batch_gap(&batch, f)
        };
        match self.method {
            Method::Sgd(s) => info.eta = s.step(t),
            Method::AdaGradNorm(ref mut s) => info.eta = s.step(grad_sq),
            Method::Sps(ref s) => {
                let s = s.clone();
                let gap = polyak_gap(self)?;
                info.eta = s.step(gap, 0.0, grad_sq)?;
            }
            Method::DecSps(_) => {
                let gap = polyak_gap(self)?;
                if let Method::DecSps(ref mut s) = self.method {
                    info.eta = s.step(gap, 0.0, grad_sq, t)?;
                }
            }
            Method::AdaSpsDl(_) => {
                let gap = polyak_gap(self)?;
                if let Method::AdaSpsDl(ref mut s) = self.method {
                    info.eta = s.step(gap, 0.0, grad_sq, t)?;
                }
            }
            Method::AdaSps(_) => {
                let gap = polyak_gap(self)?;
                let Method::AdaSps(ref mut s) = self.method else {
                    unreachable!()
                };
                let prev = s.eta_prev();
                info.eta = s.step(gap, 0.0, grad_sq)?;
                info.accumulator = Some(s.accumulator());
                info.gap = Some(gap);
                let c_p = s.c_p().expect("resolved after first step");
                let acc = s.accumulator();
                self.check_monotone(t, prev, info.eta)?;
                if let (Some(l), true) = (self.smoothness, grad_sq > 0.0 && acc > 0.0) {
                    let bracket = bounds::adasps_step_bracket(c_p, l, acc, gap, grad_sq);
                    self.check_bracket(t, info.eta, bracket, "AdaSPS")?;
                }
            }
            Method::Sls(params) => {
                if grad_sq > 0.0 {
                    let (f_at_x, search) = self.line_search(&batch, &grad, grad_sq, &params)?;
                    self.check_armijo(t, &batch, f_at_x, &grad, grad_sq, search.gamma, &params)?;
                    info.eta = search.gamma;
                    info.probes = search.probes;
                    info.gamma = Some(search.gamma);
                }
            }
            Method::AdaSls(ref s) => {
                let params = s.params;
                let prev = s.eta_prev();
                if grad_sq > 0.0 {
                    let (f_at_x, search) = self.line_search(&batch, &grad, grad_sq, &params)?;
                    self.check_armijo(t, &batch, f_at_x, &grad, grad_sq, search.gamma, &params)?;
                    let Method::AdaSls(ref mut s) = self.method else {
                        unreachable!()
                    };
                    info.eta = s.step(&search, grad_sq);
                    let acc = s.accumulator();
                    let c_l = s.c_l().expect("resolved after first step");
                    info.accumulator = Some(acc);
                    info.probes = search.probes;
                    info.gamma = Some(search.gamma);
                    self.check_monotone(t, prev, info.eta)?;
                    if let Some(l) = self.smoothness {
                        let bracket =
                            bounds::adasls_step_bracket(c_l, l, params.rho, params.gamma_max, acc, search.gamma);
                        self.check_bracket(t, info.eta, bracket, "AdaSLS")?;
                    }
                } else {
                    info.eta = prev;
                }
            }
            Method::AdaSvrps(..) | Method::AdaSvrls(..) | Method::Svrg(_) => unreachable!(),
        }
        if grad_sq > 0.0 {
            vector::axpy(-info.eta, &grad, &mut self.x);
            self.domain.project_in_place(&mut self.x);
        }
        Ok(info)
    }

    fn step_variance_reduced(&mut self, t: u64, batch: &Batch) -> Result<StepInfo> {
        let l = self.smoothness;
        let mut info = StepInfo {
            eta: 0.0,
            grad_sq: 0.0,
            probes: 0,
            accumulator: None,
            gap: None,
            gamma: None,
        };
        match &mut self.method {
            Method::AdaSvrps(vr, s) => {
                let prev = s.eta_prev();
                let r = vr.adasvrps_iteration(&mut self.oracle, batch, &mut self.x, t, s, &self.domain)?;
                let (acc, c_p, mu) = (s.accumulator(), s.c_p().expect("resolved"), vr.mu_f);
                info = StepInfo {
                    eta: r.eta,
                    grad_sq: r.grad_sq,
                    probes: 0,
                    accumulator: Some(acc),
                    gap: Some(r.proxy_gap),
                    gamma: None,
                };
                self.check_monotone(t, prev, r.eta)?;
                if let (Some(l), true) = (l, r.grad_sq > 0.0 && acc > 0.0) {
                    let bracket = bounds::adasps_step_bracket(c_p, l + mu, acc, r.proxy_gap, r.grad_sq);
                    self.check_bracket(t, r.eta, bracket, "AdaSVRPS")?;
                }
            }
            Method::AdaSvrls(vr, s) => {
                let prev = s.eta_prev();
                let r = vr.adasvrls_iteration(&mut self.oracle, batch, &mut self.x, t, s, &self.domain)?;
                let params = s.params;
                let mu = vr.mu_f;
                info = StepInfo {
                    eta: r.eta,
                    grad_sq: r.grad_sq,
                    probes: r.probes,
                    accumulator: Some(s.accumulator()),
                    gap: None,
                    gamma: Some(r.gamma),
                };
                let acc = s.accumulator();
                let c_l = s.c_l();
                self.check_monotone(t, prev, r.eta)?;
                if let (Some(l), Some(c_l), true) = (l, c_l, r.grad_sq > 0.0) {
                    let bracket = bounds::adasls_step_bracket(c_l, l + mu, params.rho, params.gamma_max, acc, r.gamma);
                    self.check_bracket(t, r.eta, bracket, "AdaSVRLS")?;
                }
            }
            Method::Svrg(s) => {
                info.grad_sq = s.iteration(&mut self.oracle, batch, &mut self.x, t, &self.domain)?;
                info.eta = s.eta;
            }
            _ => unreachable!(),
        }
        if !info.grad_sq.is_finite() {
            return Err(Error::NonFinite {
                what: "variance-reduced gradient",
                iteration: t,
            });
        }
        Ok(info)
    }

    fn refreshes(&self) -> u64 {
        match &self.method {
            Method::AdaSvrps(vr, _) | Method::AdaSvrls(vr, _) => vr.refreshes(),
            Method::Svrg(s) => s.refreshes(),
            _ => 0,
        }
    }

    fn resolved_scale(&self, r: &mut ResolvedConstants) {
        match &self.method {
            Method::AdaSps(s) | Method::AdaSvrps(_, s) => {
                r.c_p = s.c_p();
                r.calibration_fallback = s.calibration.fell_back();
            }
            Method::AdaSls(s) | Method::AdaSvrls(_, s) => {
                r.c_l = s.c_l();
                r.calibration_fallback = s.calibration.fell_back();
            }
            Method::AdaSpsDl(s) => r.c_p = Some(s.c_p()),
            _ => {}
        }
    }
}

fn build_method(
    config: &ExperimentConfig,
    oracle: &mut Oracle<'_, dyn FiniteSum + '_>,
    x0: &[f64],
    n: usize,
) -> Result<Method> {
    let b = config.batch_size;
    Ok(match config.algorithm.clone() {
        AlgorithmConfig::Sgd { schedule, eta0 } => Method::Sgd(SgdSchedule { kind: schedule, eta0 }),
        AlgorithmConfig::Sps { c, gamma_b } => Method::Sps(SpsState::new(c, gamma_b)),
        AlgorithmConfig::DecSps { c0, gamma_b } => Method::DecSps(DecSpsState::new(c0, gamma_b)),
        AlgorithmConfig::AdaSps { c_p, c_p_scale } => {
            let (fixed, v) = scale_choice(c_p, c_p_scale, "c_p")?;
            Method::AdaSps(AdaSpsState::new(calibration(fixed, v)))
        }
        AlgorithmConfig::AdaSls { c_l, c_l_scale, .. } => {
            let (fixed, v) = scale_choice(c_l, c_l_scale, "c_l")?;
            let params = config.algorithm.line_search().expect("line-search method");
            Method::AdaSls(AdaSlsState::new(calibration(fixed, v), params))
        }
        AlgorithmConfig::Sls { .. } => Method::Sls(config.algorithm.line_search().expect("line-search method")),
        AlgorithmConfig::AdaGradNorm { c_g, b0 } => Method::AdaGradNorm(AdaGradNormState::new(c_g, b0)),
        AlgorithmConfig::AdaSpsDl { c_p_scale, update_freq } => Method::AdaSpsDl(AdaSpsDlState::new(
            c_p_scale,
            update_freq.unwrap_or_else(|| n.div_ceil(b) as u64),
        )?),
        AlgorithmConfig::AdaSvrps {
            c_p,
            c_p_scale,
            mu_f,
            probability,
            proxy_bound,
        } => {
            let (fixed, v) = scale_choice(c_p, c_p_scale, "c_p")?;
            let vr = LooplessVr::new(
                oracle,
                x0,
                mu_f,
                probability.schedule(n, b)?,
                proxy_bound,
                seeded_rng(config.seed, COIN_STREAM),
            )?;
            Method::AdaSvrps(vr, AdaSpsState::new(calibration(fixed, v)))
        }
        AlgorithmConfig::AdaSvrls {
            c_l,
            c_l_scale,
            mu_f,
            probability,
            ..
        } => {
            let (fixed, v) = scale_choice(c_l, c_l_scale, "c_l")?;
            let params = config.algorithm.line_search().expect("line-search method");
            let vr = LooplessVr::new(
                oracle,
                x0,
                mu_f,
                probability.schedule(n, b)?,
                ProxyBound::Shifted,
                seeded_rng(config.seed, COIN_STREAM),
            )?;
            Method::AdaSvrls(vr, AdaSlsState::new(calibration(fixed, v), params))
        }
        AlgorithmConfig::Svrg { eta } => Method::Svrg(Svrg::new(oracle, x0, eta, b)?),
    })
}

fn initial_point(config: &ExperimentConfig, dim: usize) -> Result<Vec<f64>> {
    match &config.initial_point {
        InitialPoint::Zeros => Ok(vec![0.0; dim]),
        InitialPoint::Uniform { scale } => {
            let mut rng = seeded_rng(config.seed, INIT_STREAM);
            Ok(random_point(&mut rng, dim, *scale))
        }
        InitialPoint::Explicit { x } => {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            Ok(x.clone())
        }
    }
}

/// Runs `config` on an already loaded problem.
pub fn execute(config: &ExperimentConfig, loaded: &LoadedProblem, optimum: &ReferenceOptimum) -> Result<RunOutcome> {
    config.validate()?;
    let problem = loaded.as_dyn();
    let n = problem.num_components();
    let dim = problem.dim();
    if optimum.x_star.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: optimum.x_star.len(),
        });
    }
    let budget = config.budget.gradient_cost(n)?;
    let mode = config.lower_bound_mode();
    if mode == LowerBoundMode::Exact && problem.exact_batch_gap(&Batch::single(0), &vec![0.0; dim]).is_none() {
        return Err(Error::InvalidConfig(format!(
            "{} needs exact minibatch optima, which {} does not provide; set lower_bound = \"problem\"",
            config.algorithm.name(),
            loaded.kind()
        )));
    }
    let projection = config.projection.clone().unwrap_or_else(|| default_projection(loaded));
    let domain = projection.domain(dim)?;
    if let ProjectionDomain::EuclideanBall { center, radius } = &domain {
        let r = vector::dist_sq(&optimum.x_star, center).sqrt();
        if r > *radius {
            return Err(Error::InvalidConfig(format!(
                "reference optimum lies outside the projection ball ({r} > {radius})"
            )));
        }
    }
    let every = config.trace.every.unwrap_or(n.div_ceil(config.batch_size) as u64);

    let mut x0 = initial_point(config, dim)?;
    domain.project_in_place(&mut x0);
    let mut oracle: Oracle<'_, dyn FiniteSum + '_> = Oracle::new(problem);
    let method = build_method(config, &mut oracle, &x0, n)?;
    let sampler = Sampler::new(seeded_rng(config.seed, SAMPLER_STREAM), n, config.batch_size)?;

    let mut run = Run {
        problem,
        oracle,
        sampler,
        method,
        mode,
        domain: domain.clone(),
        smoothness: problem.component_smoothness(),
        strict: config.trace.strict_checks,
        checks: CheckTally::default(),
        x: x0,
    };

    let mut resolved = ResolvedConstants {
        smoothness: problem.component_smoothness(),
        strong_convexity: problem.component_strong_convexity(),
        lower_bound_mode: match mode {
            LowerBoundMode::Problem => "problem".into(),
            LowerBoundMode::Exact => "exact".into(),
        },
        projection: describe_projection(&domain),
        trace_every: every,
        ..Default::default()
    };

    let mut records = Vec::new();
    let mut sum = vec![0.0; dim];
    let mut count = 0u64;
    let mut t = 0u64;
    let mut last = StepInfo {
        eta: f64::NAN,
        grad_sq: f64::NAN,
        probes: 0,
        accumulator: None,
        gap: None,
        gamma: None,
    };
    let mut error = None;

    let record = |run: &Run, t: u64, count: u64, sum: &[f64], last: &StepInfo| -> Result<TraceRecord> {
        let f = problem.objective(&run.x);
        let avg: Vec<f64> = if count == 0 {
            run.x.clone()
        } else {
            sum.iter().map(|s| s / count as f64).collect()
        };
        let f_avg = problem.objective(&avg);
        if !f.is_finite() || !f_avg.is_finite() {
            return Err(Error::NonFinite {
                what: "objective",
                iteration: t,
            });
        }
        let subopt = f - optimum.f_star;
        let avg_subopt = f_avg - optimum.f_star;
        for s in [subopt, avg_subopt] {
            if s < -SUBOPTIMALITY_SLACK {
                return Err(Error::StaleReference(s));
            }
        }
        let c = run.oracle.counters();
        Ok(TraceRecord {
            t,
            epoch: c.gradient_cost(n) as f64 / n as f64,
            suboptimality: subopt,
            avg_suboptimality: avg_subopt,
            dist_sq: vector::dist_sq(&run.x, &optimum.x_star),
            eta: last.eta,
            grad_norm_sq: last.grad_sq,
            full_grad_norm_sq: vector::norm_sq(&problem.objective_gradient(&run.x)),
            stochastic_grad_evals: c.stochastic_grad_evals,
            full_grad_evals: c.full_grad_evals,
            function_evals: c.function_evals,
            probes: last.probes,
            accumulator: last.accumulator,
            refreshes: run.refreshes(),
        })
    };

    match record(&run, 0, 0, &sum, &last) {
        Ok(r) => records.push(r),
        Err(e) => error = Some(e),
    }
    while error.is_none() && run.oracle.gradient_cost() < budget {
        vector::axpy(1.0, &run.x, &mut sum);
        count += 1;
        match run.step(t) {
            Ok(info) => {
                if t == 0 {
                    resolved.first_gap = info.gap;
                    resolved.first_gamma = info.gamma;
                    resolved.first_grad_sq = Some(info.grad_sq);
                    resolved.first_eta = Some(info.eta);
                }
                last = info;
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
        t += 1;
        if !vector::all_finite(&run.x) {
            error = Some(Error::NonFinite {
                what: "iterate",
                iteration: t,
            });
            break;
        }
        if t.is_multiple_of(every) {
            match record(&run, t, count, &sum, &last) {
                Ok(r) => records.push(r),
                Err(e) => error = Some(e),
            }
        }
    }
    if error.is_none() && records.last().is_some_and(|r| r.t != t) {
        match record(&run, t, count, &sum, &last) {
            Ok(r) => records.push(r),
            Err(e) => error = Some(e),
        }
    }
    run.resolved_scale(&mut resolved);

    let final_rec = records.last();
    let summary = TraceSummary {
        status: if error.is_some() {
            RunStatus::Aborted
        } else {
            RunStatus::Completed
        },
        iterations: t,
        gradient_cost: run.oracle.gradient_cost(),
        final_suboptimality: final_rec.map_or(f64::NAN, |r| r.suboptimality),
        final_avg_suboptimality: final_rec.map_or(f64::NAN, |r| r.avg_suboptimality),
        best_suboptimality: records.iter().map(|r| r.suboptimality).fold(f64::INFINITY, f64::min),
        refreshes: run.refreshes(),
        checks: run.checks.clone(),
        abort_reason: error.as_ref().map(|e| e.to_string()),
    };
    let header = TraceHeader {
        schema_version: TRACE_SCHEMA_VERSION,
        algorithm: config.algorithm.name().into(),
        config: config.clone(),
        rng: RNG_ALGORITHM.into(),
        problem_kind: loaded.kind().into(),
        problem_hash: problem.content_hash(),
        n,
        dim,
        f_star: optimum.f_star,
        reference_method: optimum.method.clone(),
        resolved,
    };
    let average_x = if count == 0 {
        run.x.clone()
    } else {
        sum.iter().map(|s| s / count as f64).collect()
    };
    Ok(RunOutcome {
        trace: Trace {
            header,
            records,
            summary,
        },
        final_x: run.x,
        average_x,
        error,
    })
}
