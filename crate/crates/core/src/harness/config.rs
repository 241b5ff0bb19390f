//! Experiment configuration: a versioned TOML document that fully determines a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::LineSearchParams;
use crate::problem::ProjectionDomain;
use crate::problems::{LabelMap, Regime};
use crate::steppers::ScheduleKind;
use crate::varred::{ProbabilitySchedule, ProxyBound};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub batch_size: usize,
    pub budget: Budget,
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<LowerBoundMode>,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub initial_point: InitialPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn one() -> usize {
    1
}

/// Oracle budget in component-gradient units. Exactly one field is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_evals: Option<u64>,
}

impl Budget {
    pub fn epochs(e: f64) -> Self {
        Self {
            epochs: Some(e),
            gradient_evals: None,
        }
    }

    /// Total gradient cost allowed for an `n`-component problem.
    pub fn gradient_cost(&self, n: usize) -> Result<u64> {
        match (self.epochs, self.gradient_evals) {
            (Some(e), None) if e > 0.0 && e.is_finite() => Ok((e * n as f64).ceil() as u64),
            (None, Some(g)) if g > 0 => Ok(g),
            _ => Err(Error::InvalidConfig(
                "budget needs exactly one positive field: epochs or gradient_evals".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    SyntheticQuadratic {
        regime: Regime,
        #[serde(default)]
        interpolated: bool,
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask_prob: Option<f64>,
    },
    QuadraticFile {
        path: PathBuf,
    },
    Libsvm {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_rows: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<LabelMap>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regularization: Option<f64>,
    },
}

fn default_n() -> usize {
    50
}

fn default_d() -> usize {
    100
}

impl ProblemConfig {
    pub fn synthetic(regime: Regime, interpolated: bool, seed: u64) -> Self {
        Self::SyntheticQuadratic {
            regime,
            interpolated,
            n: default_n(),
            d: default_d(),
            seed,
            mask_prob: None,
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        match self {
            Self::QuadraticFile { path } | Self::Libsvm { path, .. } if path.is_relative() => {
                *path = base.join(&*path);
            }
            _ => {}
        }
    }
}

/// Where `ℓ*_B` comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundMode {
    /// The problem's cheap bound (zero for non-negative losses).
    Problem,
    /// The exact minibatch infimum; quadratics only.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectionConfig {
    Unconstrained,
    /// Centered at the origin unless `center` is given.
    EuclideanBall {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
}

impl ProjectionConfig {
    pub fn domain(&self, dim: usize) -> Result<ProjectionDomain> {
        let domain = match self {
            Self::Unconstrained => ProjectionDomain::Unconstrained,
            Self::EuclideanBall { radius, center } => {
                ProjectionDomain::ball(center.clone().unwrap_or_else(|| vec![0.0; dim]), *radius)?
            }
        };
        domain.validate(dim)?;
        Ok(domain)
    }
}

/// Default ball radius for non-interpolated problems.
pub const DEFAULT_BALL_RADIUS: f64 = 100.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    /// Record every `every` iterations; defaults to `⌈n/B⌉` (once per epoch).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<u64>,
    /// Abort on the first failed online check.
    #[serde(default = "yes")]
    pub strict_checks: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            every: None,
            strict_checks: true,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPoint {
    #[default]
    Zeros,
    /// Uniform in `[-scale, scale]^d`, drawn from the run seed.
    Uniform {
        scale: f64,
    },
    Explicit {
        x: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbabilityConfig {
    Decreasing {
        #[serde(default = "default_a")]
        a: f64,
    },
    Fixed {
        p: f64,
    },
    /// `p = B/n`.
    BatchFraction,
}

fn default_a() -> f64 {
    0.1
}

impl Default for ProbabilityConfig {
    fn default() -> Self {
        Self::Decreasing { a: default_a() }
    }
}

impl ProbabilityConfig {
    pub fn schedule(&self, n: usize, batch_size: usize) -> Result<ProbabilitySchedule> {
        match *self {
            Self::Decreasing { a } => ProbabilitySchedule::decreasing(a),
            Self::Fixed { p } => ProbabilitySchedule::fixed(p),
            Self::BatchFraction => ProbabilitySchedule::fixed(batch_size as f64 / n as f64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    Sgd {
        #[serde(default = "constant_schedule")]
        schedule: ScheduleKind,
        eta0: f64,
    },
    /// SPS; with `gamma_b` set this is SPS_max.
    Sps {
        #[serde(default = "half")]
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma_b: Option<f64>,
    },
    #[serde(rename = "decsps")]
    DecSps {
        #[serde(default = "unit")]
        c0: f64,
        #[serde(default = "ten")]
        gamma_b: f64,
    },
    #[serde(rename = "adasps")]
    AdaSps {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_p_scale: Option<f64>,
    },
    #[serde(rename = "adasls")]
    AdaSls {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_l: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_l_scale: Option<f64>,
        #[serde(default = "adaptive_beta")]
        beta: f64,
        #[serde(default = "half")]
        rho: f64,
        #[serde(default = "ten")]
        gamma_max: f64,
    },
    Sls {
        #[serde(default = "baseline_beta")]
        beta: f64,
        #[serde(default = "baseline_rho")]
        rho: f64,
        #[serde(default = "ten")]
        gamma_max: f64,
    },
    #[serde(rename = "adagrad_norm")]
    AdaGradNorm {
        #[serde(default = "unit")]
        c_g: f64,
        #[serde(default = "tiny_b0")]
        b0: f64,
    },
    #[serde(rename = "adasps_dl")]
    AdaSpsDl {
        #[serde(default = "unit")]
        c_p_scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        update_freq: Option<u64>,
    },
    #[serde(rename = "adasvrps")]
    AdaSvrps {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_p_scale: Option<f64>,
        #[serde(default = "ten")]
        mu_f: f64,
        #[serde(default)]
        probability: ProbabilityConfig,
        #[serde(default)]
        proxy_bound: ProxyBound,
    },
    #[serde(rename = "adasvrls")]
    AdaSvrls {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_l: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c_l_scale: Option<f64>,
        #[serde(default = "adaptive_beta")]
        beta: f64,
        #[serde(default = "half")]
        rho: f64,
        #[serde(default = "tenth")]
        gamma_max: f64,
        #[serde(default = "ten")]
        mu_f: f64,
        #[serde(default)]
        probability: ProbabilityConfig,
    },
    Svrg {
        eta: f64,
    },
}

fn constant_schedule() -> ScheduleKind {
    ScheduleKind::Constant
}
fn half() -> f64 {
    0.5
}
fn unit() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn tenth() -> f64 {
    0.1
}
fn adaptive_beta() -> f64 {
    0.8
}
fn baseline_beta() -> f64 {
    0.9
}
fn baseline_rho() -> f64 {
    0.1
}
fn tiny_b0() -> f64 {
    1e-10
}

/// Resolves a `(c, c_scale)` pair: a fixed constant, or a scale to calibrate
/// (defaulting to scale 1).
pub(crate) fn scale_choice(fixed: Option<f64>, scale: Option<f64>, what: &str) -> Result<(bool, f64)> {
    let (is_fixed, v) = match (fixed, scale) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig(format!(
                "set at most one of {what} and {what}_scale"
            )))
        }
        (Some(c), None) => (true, c),
        (None, Some(s)) => (false, s),
        (None, None) => (false, 1.0),
    };
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidConfig(format!("{what} must be positive, got {v}")));
    }
    Ok((is_fixed, v))
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} must be positive, got {v}")))
    }
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd { .. } => "sgd",
            Self::Sps { gamma_b: None, .. } => "sps",
            Self::Sps { .. } => "sps_max",
            Self::DecSps { .. } => "decsps",
            Self::AdaSps { .. } => "adasps",
            Self::AdaSls { .. } => "adasls",
            Self::Sls { .. } => "sls",
            Self::AdaGradNorm { .. } => "adagrad_norm",
            Self::AdaSpsDl { .. } => "adasps_dl",
            Self::AdaSvrps { .. } => "adasvrps",
            Self::AdaSvrls { .. } => "adasvrls",
            Self::Svrg { .. } => "svrg",
        }
    }

    pub fn is_variance_reduced(&self) -> bool {
        matches!(self, Self::AdaSvrps { .. } | Self::AdaSvrls { .. } | Self::Svrg { .. })
    }

    /// Lower-bound mode used when the config leaves it unset.
    pub fn default_lower_bound(&self) -> LowerBoundMode {
        match self {
            Self::Sps { .. } => LowerBoundMode::Exact,
            _ => LowerBoundMode::Problem,
        }
    }

    pub fn line_search(&self) -> Option<LineSearchParams> {
        match *self {
            Self::AdaSls {
                beta, rho, gamma_max, ..
            }
            | Self::Sls { beta, rho, gamma_max }
            | Self::AdaSvrls {
                beta, rho, gamma_max, ..
            } => Some(LineSearchParams {
                beta,
                rho,
                gamma_max,
                max_probes: crate::linesearch::DEFAULT_MAX_PROBES,
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.line_search() {
            p.validate()?;
        }
        match self {
            Self::Sgd { eta0, .. } => positive(*eta0, "eta0"),
            Self::Sps { c, gamma_b } => {
                positive(*c, "c")?;
                gamma_b.map_or(Ok(()), |g| positive(g, "gamma_b"))
            }
            Self::DecSps { c0, gamma_b } => {
                positive(*c0, "c0")?;
                positive(*gamma_b, "gamma_b")
            }
            Self::AdaSps { c_p, c_p_scale } => scale_choice(*c_p, *c_p_scale, "c_p").map(|_| ()),
            Self::AdaSls { c_l, c_l_scale, .. } => scale_choice(*c_l, *c_l_scale, "c_l").map(|_| ()),
            Self::Sls { .. } => Ok(()),
            Self::AdaGradNorm { c_g, b0 } => {
                positive(*c_g, "c_g")?;
                if *b0 >= 0.0 && b0.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!("b0 must be >= 0, got {b0}")))
                }
            }
            Self::AdaSpsDl { c_p_scale, update_freq } => {
                positive(*c_p_scale, "c_p_scale")?;
                if *update_freq == Some(0) {
                    return Err(Error::InvalidConfig("update_freq must be >= 1".into()));
                }
                Ok(())
            }
            Self::AdaSvrps {
                c_p, c_p_scale, mu_f, ..
            } => {
                scale_choice(*c_p, *c_p_scale, "c_p")?;
                non_negative(*mu_f, "mu_f")
            }
            Self::AdaSvrls {
                c_l, c_l_scale, mu_f, ..
            } => {
                scale_choice(*c_l, *c_l_scale, "c_l")?;
                non_negative(*mu_f, "mu_f")
            }
            Self::Svrg { eta } => positive(*eta, "eta"),
        }
    }
}

fn non_negative(v: f64, what: &str) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} must be >= 0, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn new(problem: ProblemConfig, algorithm: AlgorithmConfig, epochs: f64, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            batch_size: 1,
            budget: Budget::epochs(epochs),
            problem,
            algorithm,
            projection: None,
            lower_bound: None,
            trace: TraceConfig::default(),
            initial_point: InitialPoint::Zeros,
            output: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.problem.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        self.budget.gradient_cost(1)?;
        if self.trace.every == Some(0) {
            return Err(Error::InvalidConfig("trace.every must be >= 1".into()));
        }
        if let InitialPoint::Uniform { scale } = self.initial_point {
            positive(scale, "initial_point.scale")?;
        }
        self.algorithm.validate()
    }

    pub fn lower_bound_mode(&self) -> LowerBoundMode {
        self.lower_bound.unwrap_or_else(|| self.algorithm.default_lower_bound())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1
seed = 3
batch_size = 2

[budget]
epochs = 5

[problem]
kind = "synthetic_quadratic"
regime = "strongly_convex"
interpolated = true
n = 10
d = 25

[algorithm]
name = "adasps"
c_p_scale = 1.0
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.algorithm.name(), "adasps");
        assert_eq!(cfg.budget.gradient_cost(10).unwrap(), 50);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = SAMPLE.replace("seed = 3", "seed = 3\nsede = 4");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("c_p_scale = 1.0", "c_p_scale = 1.0\ncp = 2");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("d = 25", "d = 25\ndims = 3");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = SAMPLE.replace("schema_version = 1", "schema_version = 2");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("c_p_scale = 1.0", "c_p_scale = 1.0\nc_p = 2.0");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("epochs = 5", "epochs = 5\ngradient_evals = 10");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = SAMPLE.replace("name = \"adasps\"", "name = \"adam\"");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn defaults_follow_the_hyperparameter_tables() {
        let cfg: AlgorithmConfig = toml::from_str("name = \"adasvrls\"").unwrap();
        assert_eq!(
            cfg,
            AlgorithmConfig::AdaSvrls {
                c_l: None,
                c_l_scale: None,
                beta: 0.8,
                rho: 0.5,
                gamma_max: 0.1,
                mu_f: 10.0,
                probability: ProbabilityConfig::Decreasing { a: 0.1 },
            }
        );
        let sls: AlgorithmConfig = toml::from_str("name = \"sls\"").unwrap();
        assert_eq!(sls.line_search().unwrap(), LineSearchParams::baseline(10.0));
        let dec: AlgorithmConfig = toml::from_str("name = \"decsps\"").unwrap();
        assert_eq!(dec, AlgorithmConfig::DecSps { c0: 1.0, gamma_b: 10.0 });
        let sps: AlgorithmConfig = toml::from_str("name = \"sps\"\ngamma_b = 1e-3").unwrap();
        assert_eq!(sps.name(), "sps_max");
        assert_eq!(sps.default_lower_bound(), LowerBoundMode::Exact);
    }
}
