//! Materializes the problem named by a config, with its reference optimum.

use std::fs::File;
use std::io::BufReader;

use crate::error::{Error, Result};
use crate::problem::FiniteSum;
use crate::problems::{parse_libsvm, DiagonalQuadratic, LogisticRegression, QuadraticSpec, ReferenceOptimum};

use super::config::ProblemConfig;

/// Gradient-norm tolerance for the logistic reference solve.
pub const LOGISTIC_REFERENCE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum LoadedProblem {
    Quadratic(DiagonalQuadratic),
    Logistic(LogisticRegression),
}

impl LoadedProblem {
    pub fn load(cfg: &ProblemConfig) -> Result<Self> {
        match cfg {
            ProblemConfig::SyntheticQuadratic {
                regime,
                interpolated,
                n,
                d,
                seed,
                mask_prob,
            } => {
                let mut spec = QuadraticSpec::new(*regime, *interpolated, *n, *d, *seed);
                if let Some(p) = mask_prob {
                    spec.mask_prob = *p;
                }
                Ok(Self::Quadratic(DiagonalQuadratic::generate(&spec)?))
            }
            ProblemConfig::QuadraticFile { path } => {
                let text = std::fs::read_to_string(path)?;
                Ok(Self::Quadratic(DiagonalQuadratic::from_json(&text)?))
            }
            ProblemConfig::Libsvm {
                path,
                max_rows,
                labels,
                regularization,
            } => {
                let reader = BufReader::new(File::open(path)?);
                let mut data = parse_libsvm(reader, &labels.clone().unwrap_or_default())?;
                if let Some(k) = max_rows {
                    data = data.head(*k);
                }
                let problem = match regularization {
                    Some(r) => LogisticRegression::with_regularization(data, *r)?,
                    None => LogisticRegression::new(data)?,
                };
                Ok(Self::Logistic(problem))
            }
        }
    }

    pub fn as_dyn(&self) -> &dyn FiniteSum {
        match self {
            Self::Quadratic(p) => p,
            Self::Logistic(p) => p,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Quadratic(_) => "diagonal_quadratic",
            Self::Logistic(_) => "logistic_regression",
        }
    }

    /// Whether every component shares a minimizer.
    pub fn interpolated(&self) -> bool {
        match self {
            Self::Quadratic(p) => p.interpolated,
            Self::Logistic(_) => false,
        }
    }

    pub fn reference_optimum(&self) -> Result<ReferenceOptimum> {
        match self {
            Self::Quadratic(p) => p.reference_optimum(),
            Self::Logistic(p) => p.reference_optimum(LOGISTIC_REFERENCE_TOL),
        }
    }

    pub fn quadratic(&self) -> Result<&DiagonalQuadratic> {
        match self {
            Self::Quadratic(p) => Ok(p),
            Self::Logistic(_) => Err(Error::InvalidConfig("expected a quadratic problem".into())),
        }
    }
}
