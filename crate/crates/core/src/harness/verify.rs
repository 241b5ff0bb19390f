//! Self-checks run by `adastep verify`: the two SVRG counterexamples in closed
//! form, the helper inequalities on random inputs, and the exact-enumeration
//! properties of the variance-reduced proxy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{quadratic_root_bound, WaldSums};
use crate::error::Result;
use crate::problem::{batch_gradient, seeded_rng, Batch, FiniteSum, Oracle, ProjectionDomain};
use crate::problems::{for_each_subset, sigma_f_b, DiagonalQuadratic};
use crate::steppers::SpsState;
use crate::varred::{ProxyFunction, Snapshot};
use crate::vector;

/// Tolerance of the closed-form and enumeration identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Relative slack for the randomized inequalities.
pub const INEQUALITY_REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} {}: {}", self.name, self.detail)
    }
}

/// `f_1 = a_1 (x−1)²`, `f_2 = a_2 (x+1)²` as a two-component quadratic.
pub fn counterexample_problem(a1: f64, a2: f64) -> Result<DiagonalQuadratic> {
    DiagonalQuadratic::from_parts(vec![vec![2.0 * a1], vec![2.0 * a2]], vec![vec![1.0], vec![-1.0]])
}

/// `E_i[η]` of the plain stochastic Polyak step at `x`, through the library's
/// SPS stepper with exact component optima.
pub fn expected_sps_step(a2: f64, x: f64) -> Result<f64> {
    let p = counterexample_problem(1.0, a2)?;
    let mut total = 0.0;
    for i in 0..2 {
        let b = Batch::single(i);
        let f = p.component_value(i, &[x]);
        let f_star = p.exact_batch_min(&b).expect("quadratic optima are exact");
        let g = batch_gradient(&p, &b, &[x]);
        total += SpsState::new(1.0, None).step(f, f_star, vector::norm_sq(&g))?;
    }
    Ok(total / 2.0)
}

/// `E_i[η ∇f(x)]` for the Polyak step over the variance-reduced direction with
/// snapshot `w = x`.
pub fn expected_mismatched_direction(x: f64) -> Result<f64> {
    let p = counterexample_problem(1.0, 1.0)?;
    let mut oracle = Oracle::new(&p);
    let snap = Snapshot::take(&mut oracle, &[x])?;
    let mut total = 0.0;
    for i in 0..2 {
        let b = Batch::single(i);
        let proxy = ProxyFunction::new(b.clone(), snap.correction(&b), vec![x], 0.0)?;
        let dir = proxy.gradient(&mut oracle, &[x])?;
        let f = p.component_value(i, &[x]);
        let f_star = p.exact_batch_min(&b).expect("quadratic optima are exact");
        let eta = SpsState::new(1.0, None).step(f, f_star, vector::norm_sq(&dir))?;
        total += eta * snap.full_grad()[0];
    }
    Ok(total / 2.0)
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

/// Both counterexamples against their closed forms.
pub fn counterexample_checks() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for a2 in [1.0, 0.1, 0.01] {
        let got = expected_sps_step(a2, 0.0)?;
        let want = 0.125 + 0.125 / a2;
        out.push(CheckOutcome::new(
            format!("sps counterexample a2={a2}"),
            close(got, want, IDENTITY_TOL),
            format!("E[eta] = {got:.15} vs 1/8 + 1/(8 a2) = {want:.15}"),
        ));
    }
    for x in [1.0, 2.0, -3.0] {
        let got = expected_mismatched_direction(x)?;
        let want = (x * x + 1.0) / (2.0 * x);
        out.push(CheckOutcome::new(
            format!("mismatched quantity x={x}"),
            close(got, want, IDENTITY_TOL),
            format!("E[eta grad f] = {got:.15} vs (x^2+1)/(2x) = {want:.15}"),
        ));
    }
    Ok(out)
}

fn random_sequence(rng: &mut ChaCha8Rng, first_at_least_one: bool) -> Vec<f64> {
    let len = rng.random_range(1..40);
    (0..len)
        .map(|k| {
            let v: f64 = if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.0..10.0)
            };
            if k == 0 && first_at_least_one {
                1.0 + v
            } else {
                v
            }
        })
        .collect()
}

/// The square-root double inequality and its logarithmic companion.
pub fn wald_check(trials: usize, seed: u64) -> CheckOutcome {
    let mut rng = seeded_rng(seed, 10);
    let mut failures = 0;
    for _ in 0..trials {
        let a = random_sequence(&mut rng, false);
        if !WaldSums::compute(&a).holds(INEQUALITY_REL_TOL) {
            failures += 1;
        }
        let a = random_sequence(&mut rng, true);
        let mut partial = 0.0;
        let mut lhs = 0.0;
        for &v in &a {
            partial += v;
            lhs += v / partial;
        }
        if lhs > (partial.ln() + 1.0) * (1.0 + INEQUALITY_REL_TOL) {
            failures += 1;
        }
    }
    CheckOutcome::new(
        "square-root sum inequality",
        failures == 0,
        format!("{failures} failures over {trials} sequences"),
    )
}

/// `x² ≤ a(x + b)` implies `x ≤ a + √(ab)`, on triples satisfying the premise.
pub fn quadratic_implication_check(trials: usize, seed: u64) -> CheckOutcome {
    let mut rng = seeded_rng(seed, 11);
    let mut failures = 0;
    for _ in 0..trials {
        let a: f64 = rng.random_range(0.0..10.0);
        let b: f64 = rng.random_range(0.0..10.0);
        let root = 0.5 * (a + (a * a + 4.0 * a * b).sqrt());
        let x = root * rng.random_range(0.0..=1.0);
        let premise = x * x <= a * (x + b);
        if premise && x > quadratic_root_bound(a, b) * (1.0 + INEQUALITY_REL_TOL) {
            failures += 1;
        }
    }
    CheckOutcome::new(
        "quadratic implication",
        failures == 0,
        format!("{failures} failures over {trials} triples"),
    )
}

/// Ball projection is idempotent and non-expansive.
pub fn projection_check(trials: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed, 12);
    let mut failures = 0;
    for _ in 0..trials {
        let d = rng.random_range(1..8);
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ball = ProjectionDomain::ball(center, rng.random_range(0.1..3.0))?;
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-6.0..6.0)).collect();
        let (px, py) = (ball.project(&x), ball.project(&y));
        let twice = ball.project(&px);
        let idempotent = vector::dist_sq(&twice, &px) <= 1e-24;
        let contracts = vector::dist_sq(&px, &py) <= vector::dist_sq(&x, &y) * (1.0 + INEQUALITY_REL_TOL);
        if !(idempotent && contracts) {
            failures += 1;
        }
    }
    Ok(CheckOutcome::new(
        "projection idempotent and non-expansive",
        failures == 0,
        format!("{failures} failures over {trials} pairs"),
    ))
}

/// A random convex diagonal quadratic with `n ≤ 6` components.
pub fn random_small_quadratic(rng: &mut ChaCha8Rng) -> Result<DiagonalQuadratic> {
    let n = rng.random_range(2..=6);
    let d = rng.random_range(1..=3);
    let mut curvature = vec![vec![0.0; d]; n];
    let centers: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    for row in curvature.iter_mut() {
        for v in row.iter_mut() {
            *v = if rng.random_bool(0.25) {
                0.0
            } else {
                rng.random_range(0.1..5.0)
            };
        }
    }
    for v in curvature[0].iter_mut() {
        *v = rng.random_range(0.1..5.0);
    }
    DiagonalQuadratic::from_parts(curvature, centers)
}

/// Enumerated `E_B[∇F_B(x)] = ∇f(x)` with the snapshot at a random `w`.
pub fn proxy_unbiasedness_check(trials: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed, 13);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let p = random_small_quadratic(&mut rng)?;
        let (n, d) = (p.num_components(), p.dim());
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mu_f = rng.random_range(0.0..5.0);
        let mut oracle = Oracle::new(&p);
        let snap = Snapshot::take(&mut oracle, &w)?;
        let want = p.objective_gradient(&x);
        for b in 1..=n {
            let mut mean = vec![0.0; d];
            let mut count = 0usize;
            let mut err = None;
            for_each_subset(n, b, |batch| {
                let proxy = ProxyFunction::new(batch.clone(), snap.correction(batch), x.clone(), mu_f);
                match proxy.and_then(|f| f.gradient(&mut oracle, &x)) {
                    Ok(g) => vector::axpy(1.0, &g, &mut mean),
                    Err(e) => err = Some(e),
                }
                count += 1;
            });
            if let Some(e) = err {
                return Err(e);
            }
            for (m, g) in mean.iter().zip(&want) {
                worst = worst.max((m / count as f64 - g).abs());
            }
        }
    }
    Ok(CheckOutcome::new(
        "proxy gradient unbiased",
        worst <= IDENTITY_TOL,
        format!("max deviation {worst:.3e} over {trials} instances and every batch size"),
    ))
}

/// `σ²_{f,B}` is non-increasing in `B` under exact enumeration.
pub fn sigma_monotone_check(trials: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed, 14);
    let mut failures = 0;
    for _ in 0..trials {
        let p = random_small_quadratic(&mut rng)?;
        let f_star = p.reference_optimum()?.f_star;
        let mut prev = f64::INFINITY;
        for b in 1..=p.num_components() {
            let s = sigma_f_b(&p, f_star, b, 0, 0)?;
            if s > prev + IDENTITY_TOL {
                failures += 1;
            }
            prev = s;
        }
        if prev.abs() > IDENTITY_TOL {
            failures += 1;
        }
    }
    Ok(CheckOutcome::new(
        "sigma_fB non-increasing in B",
        failures == 0,
        format!("{failures} failures over {trials} instances"),
    ))
}

/// Enumerated proxy gap against `f(x) − f* + E‖∇f_B(w) − ∇f_B(x*)‖²/(2μ_F)`.
pub fn proxy_gap_check(trials: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = seeded_rng(seed, 15);
    let mut failures = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..trials {
        let p = random_small_quadratic(&mut rng)?;
        let opt = p.reference_optimum()?;
        let (n, d) = (p.num_components(), p.dim());
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mu_f = rng.random_range(0.05..5.0);
        let b = rng.random_range(1..=n);
        let mut oracle = Oracle::new(&p);
        let snap = Snapshot::take(&mut oracle, &w)?;
        let (mut gap, mut drift, mut count) = (0.0, 0.0, 0usize);
        let mut missing = false;
        for_each_subset(n, b, |batch| {
            let proxy =
                ProxyFunction::new(batch.clone(), snap.correction(batch), x.clone(), mu_f).expect("valid proxy");
            match proxy.exact_gap(&p, &x) {
                Some(g) => gap += g,
                None => missing = true,
            }
            let gw = batch_gradient(&p, batch, &w);
            let gs = batch_gradient(&p, batch, &opt.x_star);
            drift += vector::dist_sq(&gw, &gs);
            count += 1;
        });
        if missing {
            failures += 1;
            continue;
        }
        let lhs = gap / count as f64;
        let rhs = p.objective(&x) - opt.f_star + drift / count as f64 / (2.0 * mu_f);
        tightest = tightest.min(rhs - lhs);
        if lhs > rhs + INEQUALITY_REL_TOL * rhs.abs().max(1.0) {
            failures += 1;
        }
    }
    Ok(CheckOutcome::new(
        "proxy gap bound",
        failures == 0,
        format!("{failures} failures over {trials} instances, smallest margin {tightest:.3e}"),
    ))
}

/// Every check, in the order `adastep verify` prints them.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = counterexample_checks()?;
    out.push(wald_check(1000, seed));
    out.push(quadratic_implication_check(1000, seed));
    out.push(projection_check(1000, seed)?);
    out.push(proxy_unbiasedness_check(100, seed)?);
    out.push(sigma_monotone_check(100, seed)?);
    out.push(proxy_gap_check(100, seed)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for c in run_all(0).unwrap() {
            assert!(c.passed, "{}", c.line());
        }
    }

    #[test]
    fn counterexample_step_is_independent_of_x() {
        for x in [-2.0, 0.5, 3.0] {
            assert!(close(expected_sps_step(0.1, x).unwrap(), 1.375, 1e-12));
        }
    }

    #[test]
    fn outcome_lines() {
        let c = CheckOutcome::new("x", false, "y".into());
        assert_eq!(c.line(), "FAIL x: y");
    }
}
