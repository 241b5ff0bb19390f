//! Diagonal quadratics `f_i(x) = ½ (x − b_i)ᵀ A_i (x − b_i)`.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReferenceOptimum;
use crate::error::{Error, Result};
use crate::problem::{seeded_rng, Batch, FiniteSum};

const GENERATOR_STREAM: u64 = 1;
/// Number of near-zero eigenvalues `2^-20 .. 2^-1` in the general-convex spectrum.
pub const TINY_EIGENVALUES: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    StronglyConvex,
    GeneralConvex,
    /// Hand-built instance, not produced by the generator.
    Custom,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::StronglyConvex => "strongly_convex",
            Regime::GeneralConvex => "general_convex",
            Regime::Custom => "custom",
        })
    }
}

/// Generator parameters for synthetic quadratics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub regime: Regime,
    pub interpolated: bool,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Bernoulli mask density for the general-convex regime.
    #[serde(default = "default_mask_prob")]
    pub mask_prob: f64,
}

fn default_mask_prob() -> f64 {
    0.1
}

impl QuadraticSpec {
    pub fn new(regime: Regime, interpolated: bool, n: usize, d: usize, seed: u64) -> Self {
        Self {
            regime,
            interpolated,
            n,
            d,
            seed,
            mask_prob: default_mask_prob(),
        }
    }
}

/// Sum of diagonal quadratics; row `i` of `curvature` is the diagonal of `A_i`
/// and row `i` of `centers` is `b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalQuadratic {
    pub regime: Regime,
    pub interpolated: bool,
    pub seed: Option<u64>,
    curvature: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

impl DiagonalQuadratic {
    /// Builds an instance from explicit rows. Curvatures must be finite and
    /// non-negative.
    pub fn from_parts(curvature: Vec<Vec<f64>>, centers: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self {
            regime: Regime::Custom,
            interpolated: false,
            seed: None,
            curvature,
            centers,
        };
        p.validate()?;
        let interpolated = p.centers.windows(2).all(|w| w[0] == w[1]);
        Ok(Self { interpolated, ..p })
    }

    fn validate(&self) -> Result<()> {
        let n = self.curvature.len();
        if n == 0 || self.centers.len() != n {
            return Err(Error::InvalidConfig(format!(
                "need matching non-empty curvature/center rows, got {} and {}",
                n,
                self.centers.len()
            )));
        }
        let d = self.curvature[0].len();
        if d == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        for (a, b) in self.curvature.iter().zip(&self.centers) {
            if a.len() != d || b.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.len().min(b.len()),
                });
            }
            if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(
                    "curvatures must be finite and non-negative, centers finite".into(),
                ));
            }
        }
        Ok(())
    }

    /// Synthetic generator: clipped Gaussian curvatures, optional sparse mask,
    /// column rescaling to pin the Hessian spectrum, Gaussian centers.
    pub fn generate(spec: &QuadraticSpec) -> Result<Self> {
        let QuadraticSpec {
            regime,
            n,
            d,
            seed,
            mask_prob,
            ..
        } = *spec;
        if n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        match regime {
            Regime::StronglyConvex if d < 2 => {
                return Err(Error::InvalidConfig("strongly convex regime needs d >= 2".into()))
            }
            Regime::GeneralConvex if d <= TINY_EIGENVALUES => {
                return Err(Error::InvalidConfig(format!(
                    "general convex regime needs d >= {}",
                    TINY_EIGENVALUES + 1
                )))
            }
            Regime::Custom => return Err(Error::InvalidConfig("custom regime cannot be generated".into())),
            _ => {}
        }
        if regime == Regime::GeneralConvex && !(mask_prob > 0.0 && mask_prob <= 1.0) {
            return Err(Error::InvalidConfig(format!("mask_prob {mask_prob} not in (0, 1]")));
        }

        let mut rng = seeded_rng(seed, GENERATOR_STREAM);
        let entry: Normal<f64> = Normal::new(0.0, 15.0).expect("valid normal");
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| entry.sample(&mut rng).clamp(1.0, 10.0)).collect())
            .collect();

        // Target column means; `None` leaves the column unscaled.
        let mut targets: Vec<Option<f64>> = vec![None; d];
        match regime {
            Regime::StronglyConvex => {
                targets[d - 2] = Some(1.0);
                targets[d - 1] = Some(10.0);
            }
            Regime::GeneralConvex => {
                let coin = Bernoulli::new(mask_prob).expect("valid probability");
                for j in 0..d {
                    // Resample the column until at least one entry survives.
                    let mask = loop {
                        let m: Vec<bool> = (0..n).map(|_| coin.sample(&mut rng)).collect();
                        if m.iter().any(|&k| k) {
                            break m;
                        }
                    };
                    for (row, keep) in a.iter_mut().zip(mask) {
                        if !keep {
                            row[j] = 0.0;
                        }
                    }
                }
                for (j, t) in targets.iter_mut().take(TINY_EIGENVALUES).enumerate() {
                    *t = Some(2f64.powi(j as i32 - TINY_EIGENVALUES as i32));
                }
                targets[d - 1] = Some(10.0);
            }
            Regime::Custom => unreachable!(),
        }
        for (j, target) in targets.iter().enumerate() {
            if let Some(t) = target {
                let col_sum: f64 = a.iter().map(|r| r[j]).sum();
                let factor = t * n as f64 / col_sum;
                for row in a.iter_mut() {
                    row[j] *= factor;
                }
            }
        }

        let center = Normal::new(0.0, 10.0).expect("valid normal");
        let centers: Vec<Vec<f64>> = if spec.interpolated {
            let b: Vec<f64> = (0..d).map(|_| center.sample(&mut rng)).collect();
            vec![b; n]
        } else {
            (0..n)
                .map(|_| (0..d).map(|_| center.sample(&mut rng)).collect())
                .collect()
        };

        Ok(Self {
            regime,
            interpolated: spec.interpolated,
            seed: Some(seed),
            curvature: a,
            centers,
        })
    }

    pub fn curvature(&self) -> &[Vec<f64>] {
        &self.curvature
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Diagonal of `∇²f = (1/n) Σ A_i`, i.e. the Hessian eigenvalues.
    pub fn hessian_diagonal(&self) -> Vec<f64> {
        let n = self.curvature.len() as f64;
        let d = self.dim();
        (0..d)
            .map(|k| self.curvature.iter().map(|r| r[k]).sum::<f64>() / n)
            .collect()
    }

    /// Closed-form minimizer `x*_k = Σ A_ik b_ik / Σ A_ik`.
    pub fn reference_optimum(&self) -> Result<ReferenceOptimum> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        for (k, xk) in x.iter_mut().enumerate() {
            let s: f64 = self.curvature.iter().map(|r| r[k]).sum();
            if s <= 0.0 {
                return Err(Error::ZeroCurvature(k));
            }
            let first = self.centers[0][k];
            if self.centers.iter().all(|b| b[k] == first) {
                // shared center: keep it exact rather than Σab/Σa
                *xk = first;
                continue;
            }
            let t: f64 = self.curvature.iter().zip(&self.centers).map(|(a, b)| a[k] * b[k]).sum();
            *xk = t / s;
        }
        let f_star = self.objective(&x);
        Ok(ReferenceOptimum {
            f_star,
            x_star: x,
            method: "closed form (coordinate-wise weighted mean of centers)".into(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    /// `(S_k, T_k)` = batch-averaged `A_ik` and `A_ik b_ik` for coordinate `k`.
    fn batch_moments(&self, batch: &Batch, k: usize) -> (f64, f64) {
        let inv = 1.0 / batch.len() as f64;
        let (mut s, mut t) = (0.0, 0.0);
        for &i in batch.indices() {
            let a = self.curvature[i][k];
            s += a;
            t += a * self.centers[i][k];
        }
        (s * inv, t * inv)
    }
}

impl FiniteSum for DiagonalQuadratic {
    fn num_components(&self) -> usize {
        self.curvature.len()
    }

    fn dim(&self) -> usize {
        self.curvature[0].len()
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let a = &self.curvature[i];
        let b = &self.centers[i];
        0.5 * x
            .iter()
            .zip(a)
            .zip(b)
            .map(|((xk, ak), bk)| ak * (xk - bk) * (xk - bk))
            .sum::<f64>()
    }

    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let a = &self.curvature[i];
        let b = &self.centers[i];
        for k in 0..out.len() {
            out[k] += weight * a[k] * (x[k] - b[k]);
        }
    }

    /// Component values are non-negative.
    fn batch_lower_bound(&self, _batch: &Batch) -> f64 {
        0.0
    }

    fn exact_batch_min(&self, batch: &Batch) -> Option<f64> {
        let inv = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for k in 0..self.dim() {
            let (s, t) = self.batch_moments(batch, k);
            let first = self.centers[batch.indices()[0]][k];
            if s == 0.0 || batch.indices().iter().all(|&i| self.centers[i][k] == first) {
                continue;
            }
            let m = t / s;
            let r: f64 = batch
                .indices()
                .iter()
                .map(|&i| {
                    let e = self.centers[i][k] - m;
                    self.curvature[i][k] * e * e
                })
                .sum();
            total += 0.5 * r * inv;
        }
        Some(total)
    }

    fn component_smoothness(&self) -> Option<f64> {
        Some(self.curvature.iter().flatten().fold(0.0f64, |m, &v| m.max(v)))
    }

    fn batch_smoothness(&self, batch: &Batch) -> Option<f64> {
        Some(
            (0..self.dim())
                .map(|k| self.batch_moments(batch, k).0)
                .fold(0.0f64, f64::max),
        )
    }

    fn component_strong_convexity(&self) -> Option<f64> {
        Some(self.curvature.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v)))
    }

    fn exact_proxy_min(&self, batch: &Batch, correction: &[f64], anchor: &[f64], mu_f: f64) -> Option<f64> {
        let inv = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for k in 0..self.dim() {
            let (s, t) = self.batch_moments(batch, k);
            let g = correction[k];
            if s + mu_f == 0.0 {
                if g != 0.0 {
                    return Some(f64::NEG_INFINITY);
                }
                continue;
            }
            let x = (t - g + mu_f * anchor[k]) / (s + mu_f);
            let quad: f64 = batch
                .indices()
                .iter()
                .map(|&i| {
                    let e = x - self.centers[i][k];
                    self.curvature[i][k] * e * e
                })
                .sum();
            total += 0.5 * quad * inv + g * x + 0.5 * mu_f * (x - anchor[k]).powi(2);
        }
        Some(total)
    }

    fn exact_batch_gap(&self, batch: &Batch, x: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for (k, xk) in x.iter().enumerate() {
            let (s, t) = self.batch_moments(batch, k);
            if s > 0.0 {
                let e = xk - t / s;
                total += 0.5 * s * e * e;
            }
        }
        Some(total)
    }

    fn exact_proxy_gap(&self, batch: &Batch, correction: &[f64], anchor: &[f64], mu_f: f64, x: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for (k, xk) in x.iter().enumerate() {
            let (s, t) = self.batch_moments(batch, k);
            let h = s + mu_f;
            if h == 0.0 {
                if correction[k] != 0.0 {
                    return Some(f64::INFINITY);
                }
                continue;
            }
            let e = xk - (t - correction[k] + mu_f * anchor[k]) / h;
            total += 0.5 * h * e * e;
        }
        Some(total)
    }

    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"diagonal-quadratic");
        h.update((self.curvature.len() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for row in self.curvature.iter().chain(&self.centers) {
            for v in row {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Draws a uniformly random point with entries in `[-scale, scale]`.
pub fn random_point<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..=scale)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{batch_value, Oracle};

    pub(crate) fn two_point() -> DiagonalQuadratic {
        DiagonalQuadratic::from_parts(vec![vec![1.0], vec![1.0]], vec![vec![0.0], vec![2.0]]).unwrap()
    }

    #[test]
    fn strongly_convex_spectrum_is_pinned() {
        for seed in [0, 1, 17] {
            let p =
                DiagonalQuadratic::generate(&QuadraticSpec::new(Regime::StronglyConvex, false, 50, 100, seed)).unwrap();
            let h = p.hessian_diagonal();
            let lo = h.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = h.iter().cloned().fold(0.0, f64::max);
            assert!((lo - 1.0).abs() < 1e-9, "min eigenvalue {lo}");
            assert!((hi - 10.0).abs() < 1e-9, "max eigenvalue {hi}");
            assert!(p.curvature().iter().flatten().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn general_convex_spectrum() {
        let p = DiagonalQuadratic::generate(&QuadraticSpec::new(Regime::GeneralConvex, false, 50, 1000, 5)).unwrap();
        let h = p.hessian_diagonal();
        let lo = h.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((lo / 2f64.powi(-20) - 1.0).abs() < 1e-9);
        assert!((h[999] - 10.0).abs() < 1e-9);
        for (j, v) in h.iter().take(TINY_EIGENVALUES).enumerate() {
            assert!((v / 2f64.powi(j as i32 - 20) - 1.0).abs() < 1e-9);
        }
        assert!(p.curvature().iter().flatten().all(|&v| v >= 0.0));
        assert!(p.reference_optimum().is_ok());
    }

    #[test]
    fn generator_rejects_bad_dimensions() {
        let bad = QuadraticSpec::new(Regime::GeneralConvex, true, 10, 20, 0);
        assert!(DiagonalQuadratic::generate(&bad).is_err());
        let bad = QuadraticSpec::new(Regime::StronglyConvex, true, 0, 20, 0);
        assert!(DiagonalQuadratic::generate(&bad).is_err());
    }

    #[test]
    fn interpolated_instances_share_minimizer() {
        for regime in [Regime::StronglyConvex, Regime::GeneralConvex] {
            let p = DiagonalQuadratic::generate(&QuadraticSpec::new(regime, true, 20, 30, 9)).unwrap();
            assert!(p.interpolated);
            let opt = p.reference_optimum().unwrap();
            assert_eq!(opt.f_star, 0.0);
            assert_eq!(opt.x_star, p.centers()[0]);
            for i in 0..20 {
                assert_eq!(p.exact_batch_min(&Batch::single(i)), Some(0.0));
            }
            assert_eq!(p.exact_batch_min(&Batch::new(vec![2, 7, 11], 20).unwrap()), Some(0.0));
        }
    }

    #[test]
    fn two_point_reference_optimum() {
        let p = two_point();
        let opt = p.reference_optimum().unwrap();
        assert_eq!(opt.x_star, vec![1.0]);
        assert_eq!(opt.f_star, 0.5);
        assert!(p.objective_gradient(&opt.x_star)[0].abs() <= 1e-10);
        assert_eq!(p.exact_batch_min(&Batch::full(2)), Some(0.5));
        assert_eq!(p.exact_batch_min(&Batch::single(1)), Some(0.0));
    }

    #[test]
    fn zero_curvature_is_an_error() {
        let p = DiagonalQuadratic::from_parts(vec![vec![1.0, 0.0]], vec![vec![0.0, 0.0]]).unwrap();
        assert!(matches!(p.reference_optimum(), Err(Error::ZeroCurvature(1))));
        // the batch minimum is still exact: a flat coordinate contributes nothing
        assert_eq!(p.exact_batch_min(&Batch::single(0)), Some(0.0));
    }

    #[test]
    fn value_at_component_minimizer_is_zero() {
        let p = DiagonalQuadratic::generate(&QuadraticSpec::new(Regime::StronglyConvex, false, 5, 8, 2)).unwrap();
        let mut o = Oracle::new(&p);
        let b3 = p.centers()[3].clone();
        assert_eq!(o.minibatch_value(&Batch::single(3), &b3).unwrap(), 0.0);
        let g = o.minibatch_gradient(&Batch::single(3), &b3).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_min_is_an_infimum() {
        let p = DiagonalQuadratic::generate(&QuadraticSpec::new(Regime::GeneralConvex, false, 8, 24, 4)).unwrap();
        let mut rng = seeded_rng(11, 99);
        let batch = Batch::new(vec![1, 4, 6], 8).unwrap();
        let m = p.exact_batch_min(&batch).unwrap();
        for _ in 0..100 {
            let x = random_point(&mut rng, 24, 30.0);
            assert!(m <= batch_value(&p, &batch, &x) + 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = DiagonalQuadratic::generate(&QuadraticSpec::new(Regime::StronglyConvex, false, 4, 6, 3)).unwrap();
        let q = DiagonalQuadratic::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.content_hash(), q.content_hash());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = QuadraticSpec::new(Regime::GeneralConvex, false, 10, 25, 77);
        let a = DiagonalQuadratic::generate(&spec).unwrap();
        let b = DiagonalQuadratic::generate(&spec).unwrap();
        assert_eq!(a, b);
        let c = DiagonalQuadratic::generate(&QuadraticSpec { seed: 78, ..spec }).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn gaps_match_value_minus_minimum() {
        let p = DiagonalQuadratic::generate(&QuadraticSpec::new(Regime::GeneralConvex, false, 6, 25, 3)).unwrap();
        let mut rng = crate::problem::seeded_rng(5, 0);
        for batch in [Batch::single(2), Batch::new(vec![0, 3, 5], 6).unwrap(), Batch::full(6)] {
            let x = random_point(&mut rng, 25, 5.0);
            let anchor = random_point(&mut rng, 25, 5.0);
            let g = random_point(&mut rng, 25, 1.0);
            let mu = 0.7;
            let fb = batch_value(&p, &batch, &x);
            let gap = p.exact_batch_gap(&batch, &x).unwrap();
            let direct = fb - p.exact_batch_min(&batch).unwrap();
            assert!((gap - direct).abs() <= 1e-9 * fb.abs().max(1.0), "{gap} vs {direct}");
            let proxy = fb
                + x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
                + 0.5 * mu * x.iter().zip(&anchor).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let gap = p.exact_proxy_gap(&batch, &g, &anchor, mu, &x).unwrap();
            let direct = proxy - p.exact_proxy_min(&batch, &g, &anchor, mu).unwrap();
            assert!(gap >= 0.0);
            assert!((gap - direct).abs() <= 1e-9 * proxy.abs().max(1.0), "{gap} vs {direct}");
        }
    }
}
