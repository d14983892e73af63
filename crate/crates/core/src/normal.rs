//! Standard normal density, distribution function and the ratio of the two.

use std::f64::consts::FRAC_1_SQRT_2;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal distribution function, via `erfc` so the lower tail keeps
/// full relative precision.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `Φ(a) / φ(a)`.
///
/// Above `a = 8` the density is evaluated as a scale factor instead of a
/// divisor; the result overflows to `+inf` near `a ≈ 37.7`, which is the
/// correct limit for every caller (the bounds then evaluate to zero).
pub fn cdf_over_pdf(a: f64) -> f64 {
    if a > 8.0 {
        SQRT_2PI * cdf(a) * (0.5 * a * a).exp()
    } else {
        cdf(a) / pdf(a)
    }
}
