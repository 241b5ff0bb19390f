//! Closed-form constants and inequalities from the convergence analysis,
//! used as runtime checks and diagnostics.

use crate::steppers::EPSILON_GUARD;

/// The three sides of `√(Σa) ≤ Σ a_t/√(Σ_{s≤t} a_s) ≤ 2√(Σa)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaldSums {
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
}

impl WaldSums {
    /// Terms with a zero partial sum contribute nothing.
    pub fn compute(series: &[f64]) -> Self {
        let mut partial = 0.0;
        let mut middle = 0.0;
        for &a in series {
            partial += a;
            if partial > 0.0 {
                middle += a / partial.sqrt();
            }
        }
        let root = partial.sqrt();
        Self {
            lower: root,
            middle,
            upper: 2.0 * root,
        }
    }

    pub fn holds(&self, rel_tol: f64) -> bool {
        let slack = rel_tol * self.upper.max(f64::MIN_POSITIVE);
        self.lower <= self.middle + slack && self.middle <= self.upper + slack
    }
}

/// Largest `x ≥ 0` allowed by `x² ≤ a(x + b)`: the implication gives `x ≤ a + √(ab)`.
pub fn quadratic_root_bound(a: f64, b: f64) -> f64 {
    a + (a * b).sqrt()
}

/// `(lower, upper)` bracket on the AdaSPS stepsize at accumulator `acc`:
/// `1/(2 c_p L (√acc + ε)) ≤ η ≤ (f − ℓ*)/(c_p ‖g‖² √acc)`.
pub fn adasps_step_bracket(c_p: f64, smoothness: f64, acc: f64, gap: f64, grad_sq: f64) -> (f64, f64) {
    let root = acc.sqrt();
    let lower = 1.0 / (2.0 * c_p * smoothness * (root + EPSILON_GUARD));
    let upper = gap / (c_p * grad_sq * root);
    (lower, upper)
}

/// `(lower, upper)` bracket on the AdaSLS stepsize:
/// `min{(1−ρ)/L, γ_max}/(c_l √acc + ε) ≤ η ≤ γ/(c_l √acc)`.
pub fn adasls_step_bracket(c_l: f64, smoothness: f64, rho: f64, gamma_max: f64, acc: f64, gamma: f64) -> (f64, f64) {
    let root = acc.sqrt();
    let floor = ((1.0 - rho) / smoothness).min(gamma_max);
    (floor / (c_l * root + EPSILON_GUARD), gamma / (c_l * root))
}

/// `lower ≤ value ≤ upper` up to relative slack.
pub fn within_bracket(value: f64, bracket: (f64, f64), rel_tol: f64) -> bool {
    let (lo, hi) = bracket;
    value >= lo * (1.0 - rel_tol) && value <= hi * (1.0 + rel_tol)
}

/// `τ_p = 2 c_p L D² + 1/c_p`.
pub fn tau_polyak(c_p: f64, smoothness: f64, diameter: f64) -> f64 {
    2.0 * c_p * smoothness * diameter * diameter + 1.0 / c_p
}

/// `τ_l = max{L/((1−ρ)√ρ), 1/(γ_max √ρ)} c_l D² + 1/(c_l √ρ)`.
pub fn tau_line_search(c_l: f64, smoothness: f64, rho: f64, gamma_max: f64, diameter: f64) -> f64 {
    let sr = rho.sqrt();
    let lead = (smoothness / ((1.0 - rho) * sr)).max(1.0 / (gamma_max * sr));
    lead * c_l * diameter * diameter + 1.0 / (c_l * sr)
}

/// Averaged-iterate bound `τ²/T + τ √s / √T`, where `s` is `σ² + err²`
/// for AdaSPS and `σ²` for AdaSLS.
pub fn averaged_iterate_bound(tau: f64, iterations: u64, noise: f64) -> f64 {
    let t = iterations.max(1) as f64;
    tau * tau / t + tau * noise.max(0.0).sqrt() / t.sqrt()
}

/// `b = 1/(4 c_p³ √(f_{i_0}(x_0) − ℓ*_{i_0}))`.
pub fn dmax_offset_polyak(c_p: f64, first_gap: f64) -> f64 {
    1.0 / (4.0 * c_p.powi(3) * first_gap.sqrt())
}

/// `b = 1/(4 c_l³ ρ² √(γ_0 ‖∇f_{i_0}(x_0)‖²))`.
pub fn dmax_offset_line_search(c_l: f64, rho: f64, first_gamma: f64, first_grad_sq: f64) -> f64 {
    1.0 / (4.0 * c_l.powi(3) * rho * rho * (first_gamma * first_grad_sq).sqrt())
}

/// `D_max = max{‖x_0 − x*‖², (2σ²_max + b)/μ, (2σ²_max + b) η_0}`.
pub fn dmax(initial_dist_sq: f64, sigma_max_sq: f64, offset: f64, mu: f64, eta0: f64) -> f64 {
    let s = 2.0 * sigma_max_sq + offset;
    initial_dist_sq.max(s / mu).max(s * eta0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wald_examples() {
        let w = WaldSums::compute(&[1.0, 0.0, 3.0]);
        assert_eq!(w.lower, 2.0);
        assert_eq!(w.upper, 4.0);
        assert!((w.middle - 2.5).abs() < 1e-15);
        assert!(w.holds(0.0));
        // a single term attains the lower side
        let w = WaldSums::compute(&[4.0]);
        assert_eq!(w.middle, w.lower);
        assert!(WaldSums::compute(&[]).holds(0.0));
    }

    #[test]
    fn quadratic_root() {
        // x² = a(x + b) with a = 1, b = 2 has root x = 2; bound is 1 + √2
        let x = 2.0;
        assert!(x <= quadratic_root_bound(1.0, 2.0));
    }

    #[test]
    fn tau_values() {
        assert_eq!(tau_polyak(1.0, 2.0, 3.0), 37.0);
        // ρ = ¼: √ρ = ½, L/((1−ρ)√ρ) = 8/3·L
        let t = tau_line_search(1.0, 3.0, 0.25, 1.0, 1.0);
        assert!((t - (8.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn dmax_takes_the_maximum() {
        assert_eq!(dmax(5.0, 1.0, 0.0, 1.0, 0.1), 5.0);
        assert_eq!(dmax(0.0, 1.0, 1.0, 0.5, 0.1), 6.0);
        assert_eq!(dmax(0.0, 1.0, 1.0, 10.0, 4.0), 12.0);
        assert_eq!(dmax_offset_polyak(1.0, 4.0), 0.125);
    }
}
