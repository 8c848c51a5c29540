//! Gaussian densities and Hermite polynomials.

use std::f64::consts::PI;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn ln_normal_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Probabilists' Hermite polynomial He_n.
pub fn hermite_e(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_closed_forms() {
        let x = 0.7;
        assert_abs_diff_eq!(hermite_e(3, x), x * x * x - 3.0 * x, epsilon = 1e-14);
        assert_abs_diff_eq!(hermite_e(4, x), x.powi(4) - 6.0 * x * x + 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            hermite_e(6, x),
            x.powi(6) - 15.0 * x.powi(4) + 45.0 * x * x - 15.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cdf_symmetry() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.3) + normal_cdf(-1.3), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-10);
    }
}
