//! Concrete problem instances and the diagnostics computed on them.

pub mod classification;
pub mod libsvm;
pub mod logistic;
pub mod quadratic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Batch, FiniteSum, ParamVector, Sampler};

pub use classification::ClassificationSpec;
pub use libsvm::{parse_libsvm, parse_libsvm_str, to_libsvm_string, LabelMap, SparseDataset, SparseRow};
pub use logistic::LogisticRegression;
pub use quadratic::{DiagonalQuadratic, QuadraticSpec, Regime};

/// Cached optimum used to report `f(x) − f*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptimum {
    pub f_star: f64,
    pub x_star: ParamVector,
    pub method: String,
}

/// Largest subset count enumerated exactly by the diagnostics.
pub const MAX_ENUMERATED_SUBSETS: u64 = 10_000;

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Calls `visit` on every size-`k` subset of `[0, n)` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&Batch)) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&Batch::new(idx.clone(), n).expect("valid subset"));
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Expectation of `g(batch)` over uniform size-`B` batches: exact when the
/// subset count is at most [`MAX_ENUMERATED_SUBSETS`], otherwise a Monte-Carlo
/// mean over `sample_count` draws.
pub fn batch_expectation(
    n: usize,
    batch_size: usize,
    sample_count: usize,
    seed: u64,
    mut g: impl FnMut(&Batch) -> Result<f64>,
) -> Result<f64> {
    if batch_size == 0 || batch_size > n {
        return Err(Error::InvalidConfig(format!(
            "batch size {batch_size} must lie in [1, {n}]"
        )));
    }
    let count = binomial(n, batch_size);
    if count <= MAX_ENUMERATED_SUBSETS {
        let mut total = 0.0;
        let mut err = None;
        for_each_subset(n, batch_size, |b| match g(b) {
            Ok(v) => total += v,
            Err(e) => {
                err.get_or_insert(e);
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(total / count as f64)
    } else {
        let draws = sample_count.max(1);
        let mut sampler = Sampler::from_seed(seed, n, batch_size)?;
        let mut total = 0.0;
        for _ in 0..draws {
            total += g(&sampler.sample_minibatch())?;
        }
        Ok(total / draws as f64)
    }
}

/// Optimal objective difference `σ²_{f,B} = f* − E[f*_B]`.
pub fn sigma_f_b<P: FiniteSum + ?Sized>(
    problem: &P,
    f_star: f64,
    batch_size: usize,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    let mean_min = batch_expectation(problem.num_components(), batch_size, sample_count, seed, |b| {
        problem.exact_batch_min(b).ok_or(Error::MissingOptimum("sigma_f_B"))
    })?;
    Ok(f_star - mean_min)
}

/// Estimation error `err²_{f,B} = E[f*_B − ℓ*_B]`.
pub fn err_f_b<P: FiniteSum + ?Sized>(problem: &P, batch_size: usize, sample_count: usize, seed: u64) -> Result<f64> {
    batch_expectation(problem.num_components(), batch_size, sample_count, seed, |b| {
        let exact = problem.exact_batch_min(b).ok_or(Error::MissingOptimum("err_f_B"))?;
        Ok(exact - problem.batch_lower_bound(b))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_enumeration() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |b| seen.push(b.indices().to_vec()));
        assert_eq!(
            seen,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(binomial(50, 2), 1225);
        assert_eq!(binomial(50, 25), 126_410_606_437_752);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn sigma_for_two_components() {
        let p = DiagonalQuadratic::from_parts(vec![vec![1.0], vec![1.0]], vec![vec![0.0], vec![2.0]]).unwrap();
        let opt = p.reference_optimum().unwrap();
        assert_eq!(sigma_f_b(&p, opt.f_star, 1, 0, 0).unwrap(), 0.5);
        assert_eq!(sigma_f_b(&p, opt.f_star, 2, 0, 0).unwrap(), 0.0);
        assert_eq!(err_f_b(&p, 1, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn sigma_is_non_increasing_in_batch_size() {
        let p = DiagonalQuadratic::generate(&QuadraticSpec::new(Regime::StronglyConvex, false, 12, 6, 3)).unwrap();
        let f_star = p.reference_optimum().unwrap().f_star;
        let s: Vec<f64> = [1, 2, 5]
            .iter()
            .map(|&b| sigma_f_b(&p, f_star, b, 0, 0).unwrap())
            .collect();
        assert!(s[0] >= s[1] && s[1] >= s[2] && s[2] >= 0.0, "{s:?}");
    }

    #[test]
    fn interpolated_sigma_is_zero() {
        let p = DiagonalQuadratic::generate(&QuadraticSpec::new(Regime::GeneralConvex, true, 50, 30, 1)).unwrap();
        for b in [1, 2, 5] {
            assert_eq!(sigma_f_b(&p, 0.0, b, 2000, 4).unwrap(), 0.0);
            assert_eq!(err_f_b(&p, b, 2000, 4).unwrap(), 0.0);
        }
    }
}
