//! Dense vector helpers on `f64` slices.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let a = [1.0, 2.0, 2.0];
        assert_eq!(norm_sq(&a), 9.0);
        assert_eq!(dist_sq(&a, &[1.0, 0.0, 0.0]), 8.0);
        let mut y = vec![1.0, 1.0, 1.0];
        axpy(-2.0, &a, &mut y);
        assert_eq!(y, vec![-1.0, -3.0, -3.0]);
        assert!(!all_finite(&[1.0, f64::NAN]));
    }
}
