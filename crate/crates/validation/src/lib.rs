//! Reference values computed independently of `selab-core`.

use std::f64::consts::PI;

/// `P(sup |B⁰| ≤ x)` through the theta-function form
/// `√(2π)/x Σ_{k≥1} exp(-(2k-1)²π²/(8x²))`.
pub fn kolmogorov_cdf_theta(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (1..=60)
        .map(|k| (-((2 * k - 1) as f64).powi(2) * PI * PI / (8.0 * x * x)).exp())
        .sum::<f64>()
        * (2.0 * PI).sqrt()
        / x
}

/// Quantile of the above by bisection on `[0.2, 4]`.
pub fn kolmogorov_quantile_theta(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf_theta(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_quantiles() {
        assert!((kolmogorov_quantile_theta(0.95) - 1.3581).abs() < 1e-4);
        assert!((kolmogorov_quantile_theta(0.99) - 1.6276).abs() < 1e-4);
        assert!((kolmogorov_quantile_theta(0.5) - 0.8276).abs() < 1e-4);
    }

    #[test]
    fn cdf_is_a_distribution() {
        assert!(kolmogorov_cdf_theta(0.05) < 1e-200);
        assert!((kolmogorov_cdf_theta(5.0) - 1.0).abs() < 1e-15);
        let xs: Vec<f64> = (1..100).map(|i| i as f64 * 0.03).collect();
        assert!(xs
            .windows(2)
            .all(|w| kolmogorov_cdf_theta(w[0]) <= kolmogorov_cdf_theta(w[1])));
    }
}
