//! Fourier analysis of finitely supported sequences on the integers.
//!
//! The transform convention is `f^(theta) = sum_x f(x) e(-x theta)`.
//! `dft_at` is the direct-summation reference; everything on a grid goes
//! through an FFT and is checked against it in tests.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::phase::{e, e_ratio};
use crate::prime_core::WeightedSequence;
use crate::set::IntSet;

/// Values at the consecutive integers `offset .. offset + len`; zero elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSignal {
    offset: i64,
    values: Vec<Complex64>,
}

impl FiniteSignal {
    pub fn new(offset: i64, values: Vec<Complex64>) -> Self {
        Self { offset, values }
    }

    pub fn from_real(offset: i64, values: &[f64]) -> Self {
        Self {
            offset,
            values: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn zero() -> Self {
        Self {
            offset: 0,
            values: Vec::new(),
        }
    }

    /// Indicator function of a finite set.
    pub fn indicator(set: &IntSet) -> Self {
        match (set.min(), set.max()) {
            (Some(lo), Some(hi)) => {
                let mut values = vec![Complex64::new(0.0, 0.0); (hi - lo + 1) as usize];
                for x in set {
                    values[(x - lo) as usize] = Complex64::new(1.0, 0.0);
                }
                Self { offset: lo, values }
            }
            _ => Self::zero(),
        }
    }

    /// `x -> 1_set(-x)`
    pub fn reflected_indicator(set: &IntSet) -> Self {
        let neg: IntSet = set.iter().map(|x| -x).collect();
        Self::indicator(&neg)
    }

    /// The weight `n -> Lambda(d n + 1)` on `1..=N`.
    pub fn from_weight(w: &WeightedSequence) -> Self {
        Self::from_real(1, w.values())
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Width of the stored window.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, x: i64) -> Complex64 {
        let i = x - self.offset;
        if i >= 0 && (i as usize) < self.values.len() {
            self.values[i as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.offset + i as i64, v))
    }
}

/// Samples `f^(j / M)` for `j = 0..M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid_size: usize,
    samples: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// `(1/M) sum_j |f^(j/M)|^2`
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.grid_size as f64
    }
}

/// Direct evaluation of `sum_x f(x) e(-x theta)`, summed in increasing `x`.
pub fn dft_at(f: &FiniteSignal, theta: f64) -> Complex64 {
    let t = theta - theta.floor();
    f.iter()
        .filter(|(_, v)| *v != Complex64::new(0.0, 0.0))
        .map(|(x, v)| {
            // reduce x * t modulo 1 before forming the phase
            let phase = (x as f64 * t).rem_euclid(1.0);
            v * e(-phase)
        })
        .sum()
}

/// `dft_at` over many phases in parallel. Each entry is computed
/// independently, so results do not depend on the thread count.
pub fn dft_many(f: &FiniteSignal, thetas: &[f64]) -> Vec<Complex64> {
    thetas.par_iter().map(|&t| dft_at(f, t)).collect()
}

/// Transform at `theta` using a rotating phasor instead of one `sin_cos` per
/// term. Faster than `dft_at` and accurate to about `len * 1e-16` relative;
/// used for quadrature where many nearby phases are needed.
pub(crate) fn dft_rotating(f: &FiniteSignal, theta: f64) -> Complex64 {
    if f.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let step = e(-theta);
    let mut phasor = e(-((f.offset as f64 * (theta - theta.floor())).rem_euclid(1.0)));
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, v) in f.values.iter().enumerate() {
        acc += v * phasor;
        phasor *= step;
        // renormalize periodically to stop the modulus drifting
        if i % 1024 == 1023 {
            phasor /= phasor.norm();
        }
    }
    acc
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(buf);
}

/// `f^(j/M)` for all `j` via one FFT of size `M`.
pub fn grid_spectrum(f: &FiniteSignal, grid: usize) -> Result<Spectrum> {
    if grid == 0 || grid < f.len() {
        return Err(LabError::Aliasing {
            grid,
            width: f.len(),
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); grid];
    buf[..f.len()].copy_from_slice(&f.values);
    fft_in_place(&mut buf, false);
    let samples = buf
        .into_iter()
        .enumerate()
        .map(|(j, s)| {
            let shift = (f.offset as i128 * j as i128).rem_euclid(grid as i128) as i64;
            s * e_ratio(-shift, grid as u64)
        })
        .collect();
    Ok(Spectrum {
        grid_size: grid,
        samples,
    })
}

/// `(f * g)(x) = sum_y f(x - y) g(y)` through a zero-padded FFT with grid
/// at least the combined support, so there is no wraparound.
pub fn convolve(f: &FiniteSignal, g: &FiniteSignal) -> FiniteSignal {
    if f.is_empty() || g.is_empty() {
        return FiniteSignal::zero();
    }
    let out_len = f.len() + g.len() - 1;
    let grid = out_len.next_power_of_two();
    let mut a = vec![Complex64::new(0.0, 0.0); grid];
    let mut b = vec![Complex64::new(0.0, 0.0); grid];
    a[..f.len()].copy_from_slice(&f.values);
    b[..g.len()].copy_from_slice(&g.values);
    fft_in_place(&mut a, false);
    fft_in_place(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft_in_place(&mut a, true);
    let scale = 1.0 / grid as f64;
    a.truncate(out_len);
    for v in &mut a {
        *v *= scale;
    }
    FiniteSignal {
        offset: f.offset + g.offset,
        values: a,
    }
}

/// Representation counts `r(n) = #{(x, y) in A x A : x - y = n}`.
#[derive(Clone, Debug)]
pub struct DifferenceCounts {
    offset: i64,
    counts: Vec<u64>,
}

impl DifferenceCounts {
    pub fn of(set: &IntSet) -> Self {
        let conv = convolve(
            &FiniteSignal::indicator(set),
            &FiniteSignal::reflected_indicator(set),
        );
        let counts = conv
            .values
            .iter()
            .map(|v| {
                let r = v.re.round();
                debug_assert!((v.re - r).abs() < 0.25, "fft count drifted: {}", v.re);
                r.max(0.0) as u64
            })
            .collect();
        Self {
            offset: conv.offset,
            counts,
        }
    }

    pub fn at(&self, n: i64) -> u64 {
        let i = n - self.offset;
        if i >= 0 && (i as usize) < self.counts.len() {
            self.counts[i as usize]
        } else {
            0
        }
    }

    /// Positive elements of `A - A` in increasing order.
    pub fn positive_differences(&self) -> impl Iterator<Item = i64> + '_ {
        let start = (1 - self.offset).max(0) as usize;
        self.counts
            .iter()
            .enumerate()
            .skip(start)
            .filter(|(_, &c)| c > 0)
            .map(move |(i, _)| self.offset + i as i64)
    }
}

/// Number of ordered triples `(x, y, z)` in `B^3` with `x - y = z`,
/// as `sum_z 1_B(z) (1_B * 1_{-B})(z)`.
pub fn count_schur_triples(set: &IntSet) -> u64 {
    if set.is_empty() {
        return 0;
    }
    let counts = DifferenceCounts::of(set);
    set.iter().map(|z| counts.at(z)).sum()
}

/// `sum_{n=1}^{N} (1_A * 1_{-A})(n) w(n)` with `N` the window of `w`.
pub fn inner_product_weighted(set: &IntSet, w: &WeightedSequence) -> f64 {
    if set.is_empty() || w.is_empty() {
        return 0.0;
    }
    let counts = DifferenceCounts::of(set);
    (1..=w.len() as i64)
        .map(|n| counts.at(n) as f64 * w.at(n))
        .sum()
}

/// Relative deviation `|a - b| / max(|b|, scale)`.
pub fn relative_error(a: Complex64, b: Complex64, scale: f64) -> f64 {
    (a - b).norm() / b.norm().max(scale).max(f64::MIN_POSITIVE)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PlancherelCheck {
    pub signal_energy: f64,
    pub grid_energy: f64,
    pub relative_error: f64,
}

/// Compares `sum |f|^2` with the grid energy of its spectrum.
pub fn plancherel_check(f: &FiniteSignal, grid: usize) -> Result<PlancherelCheck> {
    let s = grid_spectrum(f, grid)?;
    let signal_energy = f.energy();
    let grid_energy = s.energy();
    let relative_error = if signal_energy == 0.0 {
        grid_energy
    } else {
        (grid_energy - signal_energy).abs() / signal_energy
    };
    Ok(PlancherelCheck {
        signal_energy,
        grid_energy,
        relative_error,
    })
}
