//! The additive character `e(x) = exp(2 pi i x)`.

use num_complex::Complex64;
use std::f64::consts::TAU;

/// `e(theta)` for a real phase. Only the fractional part of `theta` is used,
/// which keeps the argument to `sin_cos` in `[0, 2 pi)`.
#[inline]
pub fn e(theta: f64) -> Complex64 {
    let frac = theta - theta.floor();
    let (s, c) = (TAU * frac).sin_cos();
    Complex64::new(c, s)
}

/// `e(num / den)` with the numerator reduced exactly modulo `den` first.
#[inline]
pub fn e_ratio(num: i64, den: u64) -> Complex64 {
    debug_assert!(den > 0);
    let r = (num as i128).rem_euclid(den as i128) as f64;
    let (s, c) = (TAU * r / den as f64).sin_cos();
    Complex64::new(c, s)
}
