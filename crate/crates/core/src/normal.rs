//! Standard normal cdf, density and quantile.
//!
//! These serve as the smoothing cdf/density pair of the kernel distribution
//! estimators and as the gaussianizing map of the model-free transform.

use statrs::function::erf::erfc_inv;

use crate::real::Real;

/// Standard normal cdf.
#[inline]
pub fn cdf<T: Real>(x: T) -> T {
    let x = x.as_f64();
    T::lit(0.5 * libm::erfc(-x / std::f64::consts::SQRT_2))
}

/// Standard normal density.
#[inline]
pub fn pdf<T: Real>(x: T) -> T {
    let c = T::lit(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    c * (-(x * x) / T::lit(2.0)).exp()
}

/// Standard normal quantile; `p` must lie in the open unit interval.
#[inline]
pub fn quantile<T: Real>(p: T) -> T {
    let p = p.as_f64();
    debug_assert!(p > 0.0 && p < 1.0, "quantile outside (0,1): {p}");
    T::lit(-std::f64::consts::SQRT_2 * erfc_inv(2.0 * p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((cdf(0.0f64) - 0.5).abs() < 1e-16);
        assert!((cdf(1.959963984540054f64) - 0.975).abs() < 1e-14);
        assert!((pdf(0.0f64) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((quantile(0.975f64) - 1.959963984540054).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf_in_tails() {
        for &p in &[1e-7f64, 1e-4, 0.1, 0.5, 0.9, 1.0 - 1e-7] {
            let x = quantile(p);
            assert!((cdf(x) - p).abs() < 1e-12 * p.max(1e-3), "p={p}");
        }
    }
}
