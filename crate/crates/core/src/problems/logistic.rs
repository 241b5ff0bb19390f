//! L2-regularized logistic regression,
//! `f_i(x) = log(1 + exp(−y_i a_iᵀx)) + λ‖x‖²` with `λ = 1/(2n)`.

use sha2::{Digest, Sha256};

use super::libsvm::{to_libsvm_string, SparseDataset};
use super::ReferenceOptimum;
use crate::error::{Error, Result};
use crate::problem::FiniteSum;
use crate::vector;

/// `log(1 + exp(z))` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(−z))` without overflow.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
pub struct LogisticRegression {
    data: SparseDataset,
    reg: f64,
    row_norm_sq: Vec<f64>,
}

impl LogisticRegression {
    /// Uses the default regularization `1/(2n)`.
    pub fn new(data: SparseDataset) -> Result<Self> {
        let reg = 0.5 / data.len().max(1) as f64;
        Self::with_regularization(data, reg)
    }

    pub fn with_regularization(data: SparseDataset, reg: f64) -> Result<Self> {
        if data.is_empty() || data.dim() == 0 {
            return Err(Error::InvalidConfig(
                "logistic regression needs a non-empty dataset".into(),
            ));
        }
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid regularization {reg}")));
        }
        let row_norm_sq = data.rows().iter().map(|r| r.norm_sq()).collect();
        Ok(Self { data, reg, row_norm_sq })
    }

    pub fn data(&self) -> &SparseDataset {
        &self.data
    }

    pub fn regularization(&self) -> f64 {
        self.reg
    }

    fn margin(&self, i: usize, x: &[f64]) -> f64 {
        self.data.labels()[i] * self.data.rows()[i].dot(x)
    }

    /// Hessian-vector product of the full objective.
    fn hessian_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.data.len() as f64;
        let mut out: Vec<f64> = v.iter().map(|vi| 2.0 * self.reg * vi).collect();
        for (row, &y) in self.data.rows().iter().zip(self.data.labels()) {
            let s = sigmoid(y * row.dot(x));
            let w = s * (1.0 - s) * row.dot(v) / n;
            row.axpy_into(w, &mut out);
        }
        out
    }

    /// High-precision minimizer by a damped Newton method with conjugate-gradient
    /// inner solves, run until `‖∇f‖ ≤ tol`.
    pub fn reference_optimum(&self, tol: f64) -> Result<ReferenceOptimum> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        let mut g = self.objective_gradient(&x);
        let mut fx = self.objective(&x);
        let mut iters = 0;
        while vector::norm_sq(&g).sqrt() > tol {
            iters += 1;
            if iters > 200 {
                return Err(Error::InvalidConfig(format!(
                    "reference solver stalled at gradient norm {:e}",
                    vector::norm_sq(&g).sqrt()
                )));
            }
            let p = self.newton_direction(&x, &g);
            let slope = vector::dot(&g, &p);
            let mut step = 1.0;
            let g_norm = vector::norm_sq(&g);
            loop {
                let mut cand = x.clone();
                vector::axpy(step, &p, &mut cand);
                let fc = self.objective(&cand);
                let gc = self.objective_gradient(&cand);
                // Near the optimum objective differences drown in rounding, so a
                // strictly smaller gradient also accepts the step.
                if fc <= fx + 1e-4 * step * slope || vector::norm_sq(&gc) < g_norm {
                    x = cand;
                    fx = fc;
                    g = gc;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    return Err(Error::InvalidConfig("reference line search failed".into()));
                }
            }
        }
        Ok(ReferenceOptimum {
            f_star: fx,
            x_star: x,
            method: format!("newton-cg, {iters} iterations, gradient norm <= {tol:e}"),
        })
    }

    fn newton_direction(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        let d = g.len();
        let mut p = vec![0.0; d];
        let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut dir = r.clone();
        let mut rs = vector::norm_sq(&r);
        let target = (1e-14f64).max(1e-6 * rs.sqrt().min(1.0) * rs.sqrt());
        for _ in 0..(2 * d).max(50) {
            if rs.sqrt() <= target {
                break;
            }
            let hd = self.hessian_vec(x, &dir);
            let curv = vector::dot(&dir, &hd);
            if curv <= 0.0 {
                break;
            }
            let alpha = rs / curv;
            vector::axpy(alpha, &dir, &mut p);
            vector::axpy(-alpha, &hd, &mut r);
            let rs_new = vector::norm_sq(&r);
            let beta = rs_new / rs;
            for (di, ri) in dir.iter_mut().zip(&r) {
                *di = ri + beta * *di;
            }
            rs = rs_new;
        }
        if vector::norm_sq(&p) == 0.0 {
            return g.iter().map(|v| -v).collect();
        }
        p
    }
}

impl FiniteSum for LogisticRegression {
    fn num_components(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        softplus(-self.margin(i, x)) + self.reg * vector::norm_sq(x)
    }

    fn add_component_gradient(&self, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
        let y = self.data.labels()[i];
        let coef = -y * sigmoid(-self.margin(i, x));
        self.data.rows()[i].axpy_into(weight * coef, out);
        vector::axpy(weight * 2.0 * self.reg, x, out);
    }

    /// Losses are non-negative, so zero is a valid minibatch lower bound.
    fn batch_lower_bound(&self, _batch: &crate::problem::Batch) -> f64 {
        0.0
    }

    fn component_smoothness(&self) -> Option<f64> {
        let max_row = self.row_norm_sq.iter().cloned().fold(0.0, f64::max);
        Some(0.25 * max_row + 2.0 * self.reg)
    }

    fn component_strong_convexity(&self) -> Option<f64> {
        Some(2.0 * self.reg)
    }

    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"logistic-regression");
        h.update(self.reg.to_le_bytes());
        h.update((self.data.dim() as u64).to_le_bytes());
        h.update(to_libsvm_string(&self.data).as_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::libsvm::{parse_libsvm_str, LabelMap};

    fn tiny() -> LogisticRegression {
        let text = "+1 1:1 2:-0.5\n-1 1:0.3 3:2\n+1 2:1.5 3:-1\n-1 1:-1 2:0.2 3:0.7\n";
        LogisticRegression::new(parse_libsvm_str(text, &LabelMap::default()).unwrap()).unwrap()
    }

    #[test]
    fn value_and_gradient_at_zero() {
        let d = parse_libsvm_str("+1 1:1\n", &LabelMap::default()).unwrap();
        let p = LogisticRegression::new(d).unwrap();
        assert_eq!(p.regularization(), 0.5);
        assert!((p.component_value(0, &[0.0]) - 2f64.ln()).abs() < 1e-15);
        let mut g = vec![0.0];
        p.add_component_gradient(0, &[0.0], 1.0, &mut g);
        assert_eq!(g, vec![-0.5]);

        let q = tiny();
        let mut g = vec![0.0; 3];
        q.add_component_gradient(1, &[0.0; 3], 1.0, &mut g);
        assert_eq!(g, vec![0.15, 0.0, 1.0]);
    }

    #[test]
    fn large_margins_do_not_overflow() {
        // margin +40: the loss term is exp(-40) ≈ 4.248e-18
        let d = parse_libsvm_str("+1 1:1\n-1 1:1\n", &LabelMap::default()).unwrap();
        let p = LogisticRegression::new(d).unwrap();
        let x = [40.0];
        let reg = 0.25 * 1600.0;
        let v = p.component_value(0, &x);
        assert!((v - reg - 4.248354255291589e-18).abs() <= 1e-30 + 1e-15 * reg);
        // margin -40: the loss term is 40 + log1p(exp(-40))
        let v = p.component_value(1, &x);
        assert!((v - reg - 40.0).abs() <= 1e-12);
        let mut g = vec![0.0];
        p.add_component_gradient(1, &x, 1.0, &mut g);
        assert!(g[0].is_finite());
        assert!((softplus(-40.0) / 4.248354255291589e-18 - 1.0).abs() < 1e-14);
        assert!(softplus(800.0).is_finite() && softplus(-800.0) == 0.0);
        assert_eq!(sigmoid(-800.0), 0.0);
    }

    #[test]
    fn reference_optimum_is_stationary() {
        let p = tiny();
        let opt = p.reference_optimum(1e-10).unwrap();
        assert!(vector::norm_sq(&p.objective_gradient(&opt.x_star)).sqrt() <= 1e-10);
        assert!(opt.f_star <= p.objective(&[0.0; 3]));
    }

    #[test]
    fn smoothness_constant() {
        let p = tiny();
        // largest row norm is row 1: 0.09 + 4
        let l = p.component_smoothness().unwrap();
        assert!((l - (0.25 * 4.09 + 2.0 * 0.125)).abs() < 1e-15);
    }
}
