//! The finite-sum problem abstraction, minibatch sampling, oracle accounting,
//! and Euclidean projection.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector;

/// Dense parameter vector `x ∈ R^d`.
pub type ParamVector = Vec<f64>;

/// Name of the pseudorandom generator used for every seeded stream.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Creates the generator for `seed` on the given stream id.
///
/// Independent streams (batch sampling, snapshot coin flips, generators) share
/// a seed but never a position, so adding draws to one stream leaves the others
/// untouched.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A set of `B` distinct component indices in `[0, n)`, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch(Vec<usize>);

impl Batch {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidConfig("empty minibatch".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate index in minibatch".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::InvalidConfig(format!("index {last} out of range for n = {n}")));
            }
        }
        Ok(Self(indices))
    }

    /// The batch containing every component.
    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn single(i: usize) -> Self {
        Self(vec![i])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Oracle over `f(x) = (1/n) Σ f_i(x)`.
///
/// Implementations are read-only after construction. The `component_*`
/// methods are uncounted; all accounted access goes through [`Oracle`].
pub trait FiniteSum: Send + Sync {
    fn num_components(&self) -> usize;

    fn dim(&self) -> usize;

    fn component_value(&self, i: usize, x: &[f64]) -> f64;

    /// `out += weight * ∇f_i(x)`
    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]);

    /// A lower bound `ℓ*` on the minibatch infimum.
    fn batch_lower_bound(&self, _batch: &Batch) -> f64 {
        0.0
    }

    /// The exact minibatch infimum `f*_B`, when available in closed form.
    fn exact_batch_min(&self, _batch: &Batch) -> Option<f64> {
        None
    }

    /// A constant `L` such that every component is `L`-smooth.
    fn component_smoothness(&self) -> Option<f64> {
        None
    }

    /// Smoothness of the averaged minibatch function.
    fn batch_smoothness(&self, _batch: &Batch) -> Option<f64> {
        self.component_smoothness()
    }

    /// A constant `μ` such that every component is `μ`-strongly convex.
    fn component_strong_convexity(&self) -> Option<f64> {
        None
    }

    /// Exact infimum of `f_B(x) + xᵀg + (μ/2)‖x − anchor‖²`, when available.
    fn exact_proxy_min(&self, _batch: &Batch, _correction: &[f64], _anchor: &[f64], _mu_f: f64) -> Option<f64> {
        None
    }

    /// `f_B(x) − f*_B` evaluated without cancellation, when available.
    fn exact_batch_gap(&self, _batch: &Batch, _x: &[f64]) -> Option<f64> {
        None
    }

    /// `F(x) − F*` for the proxy of [`exact_proxy_min`](Self::exact_proxy_min),
    /// evaluated without cancellation; `+∞` when the proxy is unbounded below.
    fn exact_proxy_gap(
        &self,
        _batch: &Batch,
        _correction: &[f64],
        _anchor: &[f64],
        _mu_f: f64,
        _x: &[f64],
    ) -> Option<f64> {
        None
    }

    /// Stable digest of the instance data.
    fn content_hash(&self) -> String;

    /// Full objective value, uncounted (used for reporting only).
    fn objective(&self, x: &[f64]) -> f64 {
        let n = self.num_components();
        (0..n).map(|i| self.component_value(i, x)).sum::<f64>() / n as f64
    }

    /// Full objective gradient, uncounted (used for reporting only).
    fn objective_gradient(&self, x: &[f64]) -> ParamVector {
        let n = self.num_components();
        let mut g = vec![0.0; self.dim()];
        let w = 1.0 / n as f64;
        for i in 0..n {
            self.add_component_gradient(i, x, w, &mut g);
        }
        g
    }
}

/// Oracle call counters for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounters {
    pub stochastic_grad_evals: u64,
    pub full_grad_evals: u64,
    pub function_evals: u64,
}

impl OracleCounters {
    /// Total gradient cost in component-gradient units.
    pub fn gradient_cost(&self, n: usize) -> u64 {
        self.stochastic_grad_evals + n as u64 * self.full_grad_evals
    }
}

/// Accounted access to a [`FiniteSum`] problem.
pub struct Oracle<'a, P: ?Sized> {
    problem: &'a P,
    counters: OracleCounters,
}

impl<'a, P: FiniteSum + ?Sized> Oracle<'a, P> {
    pub fn new(problem: &'a P) -> Self {
        Self {
            problem,
            counters: OracleCounters::default(),
        }
    }

    pub fn problem(&self) -> &'a P {
        self.problem
    }

    pub fn counters(&self) -> OracleCounters {
        self.counters
    }

    pub fn gradient_cost(&self) -> u64 {
        self.counters.gradient_cost(self.problem.num_components())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        let expected = self.problem.dim();
        if x.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: x.len() });
        }
        Ok(())
    }

    /// `(1/B) Σ_{i∈batch} f_i(x)`; one function evaluation.
    pub fn minibatch_value(&mut self, batch: &Batch, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.counters.function_evals += 1;
        Ok(batch_value(self.problem, batch, x))
    }

    /// `(1/B) Σ_{i∈batch} ∇f_i(x)`; `B` stochastic gradient evaluations.
    pub fn minibatch_gradient(&mut self, batch: &Batch, x: &[f64]) -> Result<ParamVector> {
        self.check_dim(x)?;
        self.counters.stochastic_grad_evals += batch.len() as u64;
        Ok(batch_gradient(self.problem, batch, x))
    }

    /// `(1/n) Σ ∇f_i(x)`; one full gradient evaluation.
    pub fn full_gradient(&mut self, x: &[f64]) -> Result<ParamVector> {
        self.check_dim(x)?;
        self.counters.full_grad_evals += 1;
        Ok(self.problem.objective_gradient(x))
    }

    /// Full gradient together with every component gradient; costs the same
    /// as [`Oracle::full_gradient`] since the components are its summands.
    pub fn full_gradient_with_components(&mut self, x: &[f64]) -> Result<(ParamVector, Vec<ParamVector>)> {
        self.check_dim(x)?;
        self.counters.full_grad_evals += 1;
        let n = self.problem.num_components();
        let d = self.problem.dim();
        let mut full = vec![0.0; d];
        let mut parts = Vec::with_capacity(n);
        for i in 0..n {
            let mut g = vec![0.0; d];
            self.problem.add_component_gradient(i, x, 1.0, &mut g);
            vector::axpy(1.0 / n as f64, &g, &mut full);
            parts.push(g);
        }
        Ok((full, parts))
    }

    pub fn batch_lower_bound(&self, batch: &Batch) -> f64 {
        self.problem.batch_lower_bound(batch)
    }
}

/// Uncounted minibatch value.
pub fn batch_value<P: FiniteSum + ?Sized>(problem: &P, batch: &Batch, x: &[f64]) -> f64 {
    let s: f64 = batch.indices().iter().map(|&i| problem.component_value(i, x)).sum();
    s / batch.len() as f64
}

/// Uncounted minibatch gradient.
pub fn batch_gradient<P: FiniteSum + ?Sized>(problem: &P, batch: &Batch, x: &[f64]) -> ParamVector {
    let mut g = vec![0.0; problem.dim()];
    let w = 1.0 / batch.len() as f64;
    for &i in batch.indices() {
        problem.add_component_gradient(i, x, w, &mut g);
    }
    g
}

/// Uniform sampler over size-`B` subsets of `[0, n)`.
#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
    n: usize,
    batch_size: usize,
}

impl Sampler {
    pub fn new(rng: ChaCha8Rng, n: usize, batch_size: usize) -> Result<Self> {
        if batch_size == 0 || batch_size > n {
            return Err(Error::InvalidConfig(format!(
                "batch size {batch_size} must lie in [1, {n}]"
            )));
        }
        Ok(Self { rng, n, batch_size })
    }

    pub fn from_seed(seed: u64, n: usize, batch_size: usize) -> Result<Self> {
        Self::new(seeded_rng(seed, 0), n, batch_size)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Draws `B` distinct indices without replacement, sorted ascending.
    pub fn sample_minibatch(&mut self) -> Batch {
        if self.batch_size == self.n {
            return Batch::full(self.n);
        }
        let mut v = index::sample(&mut self.rng, self.n, self.batch_size).into_vec();
        v.sort_unstable();
        Batch(v)
    }
}

/// Feasible set for projected steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProjectionDomain {
    Unconstrained,
    EuclideanBall { center: ParamVector, radius: f64 },
}

impl ProjectionDomain {
    pub fn ball(center: ParamVector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self::EuclideanBall { center, radius })
    }

    /// Diameter `D` of the set; infinite when unconstrained.
    pub fn diameter(&self) -> f64 {
        match self {
            Self::Unconstrained => f64::INFINITY,
            Self::EuclideanBall { radius, .. } => 2.0 * radius,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::Unconstrained => Ok(()),
            Self::EuclideanBall { center, radius } => {
                if center.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: center.len(),
                    });
                }
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "ball radius must be positive, got {radius}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Euclidean projection in place.
    pub fn project_in_place(&self, x: &mut [f64]) {
        if let Self::EuclideanBall { center, radius } = self {
            let dist = vector::dist_sq(x, center).sqrt();
            if dist > *radius {
                let s = radius / dist;
                for (xi, ci) in x.iter_mut().zip(center) {
                    *xi = ci + (*xi - ci) * s;
                }
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> ParamVector {
        let mut y = x.to_vec();
        self.project_in_place(&mut y);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `f_i(x) = ½ (x − c_i)²` in one dimension.
    pub(crate) struct Shifted(pub Vec<f64>);

    impl FiniteSum for Shifted {
        fn num_components(&self) -> usize {
            self.0.len()
        }
        fn dim(&self) -> usize {
            1
        }
        fn component_value(&self, i: usize, x: &[f64]) -> f64 {
            0.5 * (x[0] - self.0[i]).powi(2)
        }
        fn add_component_gradient(&self, i: usize, x: &[f64], w: f64, out: &mut [f64]) {
            out[0] += w * (x[0] - self.0[i]);
        }
        fn content_hash(&self) -> String {
            String::new()
        }
    }

    #[test]
    fn sampler_trivial_cases() {
        let mut s = Sampler::from_seed(7, 1, 1).unwrap();
        assert_eq!(s.sample_minibatch().indices(), &[0]);
        let mut s = Sampler::from_seed(7, 4, 4).unwrap();
        assert_eq!(s.sample_minibatch().indices(), &[0, 1, 2, 3]);
        assert!(Sampler::from_seed(7, 3, 4).is_err());
        assert!(Sampler::from_seed(7, 3, 0).is_err());
    }

    #[test]
    fn sampler_is_reproducible() {
        let draw = || {
            let mut s = Sampler::from_seed(42, 50, 2).unwrap();
            (s.sample_minibatch(), s.sample_minibatch())
        };
        let (a1, a2) = draw();
        let (b1, b2) = draw();
        assert_eq!(a1, b1);
        assert_eq!(a2, b2);
        for b in [&a1, &a2] {
            assert_eq!(b.len(), 2);
            assert!(b.indices()[0] < b.indices()[1] && b.indices()[1] < 50);
        }
    }

    #[test]
    fn sampler_frequencies_are_uniform() {
        let (n, b, draws) = (10usize, 2usize, 100_000usize);
        let mut s = Sampler::from_seed(3, n, b).unwrap();
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            for &i in s.sample_minibatch().indices() {
                counts[i] += 1;
            }
        }
        let p = b as f64 / n as f64;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "count {c} vs mean {mean}");
        }
    }

    #[test]
    fn batch_validation() {
        assert!(Batch::new(vec![1, 1], 3).is_err());
        assert!(Batch::new(vec![3], 3).is_err());
        assert!(Batch::new(vec![], 3).is_err());
        assert_eq!(Batch::new(vec![2, 0], 3).unwrap().indices(), &[0, 2]);
    }

    #[test]
    fn oracle_values_and_counters() {
        let p = Shifted(vec![0.0, 2.0]);
        let mut o = Oracle::new(&p);
        let both = Batch::full(2);
        assert_eq!(o.minibatch_value(&both, &[0.0]).unwrap(), 1.0);
        assert_eq!(o.full_gradient(&[0.0]).unwrap(), vec![-1.0]);
        let c = o.counters();
        assert_eq!(c.function_evals, 1);
        assert_eq!(c.full_grad_evals, 1);
        assert_eq!(c.stochastic_grad_evals, 0);

        let g = o.minibatch_gradient(&Batch::single(0), &[3.0]).unwrap();
        assert_eq!(g, vec![3.0]);
        assert_eq!(o.counters().stochastic_grad_evals, 1);
        assert_eq!(o.gradient_cost(), 1 + 2);

        assert!(matches!(
            o.minibatch_value(&both, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn full_gradient_equals_full_batch() {
        let p = Shifted(vec![0.3, -1.0, 4.0]);
        let mut o = Oracle::new(&p);
        let x = [0.7];
        let a = o.full_gradient(&x).unwrap();
        let b = o.minibatch_gradient(&Batch::full(3), &x).unwrap();
        assert!((a[0] - b[0]).abs() <= 1e-12);
        let (c, parts) = o.full_gradient_with_components(&x).unwrap();
        assert_eq!(c, a);
        assert_eq!(parts.len(), 3);
    }

    #[test]
    fn ball_projection() {
        let ball = ProjectionDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let y = ball.project(&[3.0, 4.0]);
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        assert_eq!(ball.project(&[0.1, -0.2]), vec![0.1, -0.2]);
        assert_eq!(ProjectionDomain::Unconstrained.project(&[9.0, 9.0]), vec![9.0, 9.0]);
        assert!(ProjectionDomain::ball(vec![0.0], 0.0).is_err());
        assert_eq!(ball.diameter(), 2.0);
    }
}
