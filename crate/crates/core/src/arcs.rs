//! Farey arcs `M_{a,q} = { theta : |theta - a/q| <= 1/(qQ) }`, quadrature of
//! spectral energy over their unions, and empirical major/minor arc reports
//! for the weighted prime sequence.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csv::{fmt_opt, fmt_real, CsvRow};
use crate::error::{LabError, Result};
use crate::prime_core::{
    arith_functions, build_weight, gcd, psi, restricted_exp_sum, ExceptionalContext, PrimeTable,
};
use crate::spectral::{dft_at, dft_many, dft_rotating, FiniteSignal};

/// Largest supported width parameter. Keeps the exact rational checks
/// inside `i128`.
pub const MAX_Q: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arc {
    pub a: u64,
    pub q: u64,
    pub big_q: u64,
}

impl Arc {
    pub fn center(&self) -> f64 {
        self.a as f64 / self.q as f64
    }

    /// `min(1/(qQ), 1/2)`; the cap only matters for `q = Q = 1`.
    pub fn half_width(&self) -> f64 {
        (1.0 / (self.q as f64 * self.big_q as f64)).min(0.5)
    }

    /// Exact test of `||theta - a/q|| <= 1/(qQ)` on the circle.
    pub fn contains(&self, theta: f64) -> bool {
        let t = theta.rem_euclid(1.0);
        match dyadic(t) {
            Some((m, k)) => {
                let two_k = 1i128 << k;
                let (q, a, big_q) = (self.q as i128, self.a as i128, self.big_q as i128);
                [-1i128, 0, 1].iter().any(|&s| {
                    let diff = (m * q - (a + s * q) * two_k).abs();
                    diff.checked_mul(big_q).is_some_and(|v| v <= two_k)
                })
            }
            None => {
                // t below 2^-40: far from every a/q with q >= 2 relative to the width
                if self.q == 1 {
                    true
                } else {
                    let d = (t - self.center()).abs();
                    d.min(1.0 - d) <= 1.0 / (self.q as f64 * self.big_q as f64)
                }
            }
        }
    }
}

/// `t = m / 2^k` exactly, for `t` in `[2^-40, 1)`; `None` for smaller `t`.
fn dyadic(t: f64) -> Option<(i128, u32)> {
    if t == 0.0 {
        return Some((0, 0));
    }
    if t < (-40f64).exp2() {
        return None;
    }
    let bits = t.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32 - 1075;
    let mut m = ((bits & ((1u64 << 52) - 1)) | (1u64 << 52)) as i128;
    let mut k = (-exp) as u32;
    while m % 2 == 0 && k > 0 {
        m /= 2;
        k -= 1;
    }
    Some((m, k))
}

/// Finds `a/q` with `q <= Q`, `gcd(a, q) = 1` and `||theta - a/q|| <= 1/(qQ)`
/// from the continued-fraction convergents of `theta mod 1`.
pub fn locate_arc(theta: f64, big_q: u64) -> Result<Arc> {
    if big_q == 0 || big_q > MAX_Q {
        return Err(LabError::Domain(format!(
            "Q = {big_q} must lie in [1, {MAX_Q}]"
        )));
    }
    if !theta.is_finite() {
        return Err(LabError::Domain("theta must be finite".into()));
    }
    let t = theta.rem_euclid(1.0);
    let whole = Arc { a: 1, q: 1, big_q };
    let Some((m, k)) = dyadic(t) else {
        return Ok(whole);
    };
    if m == 0 {
        return Ok(whole);
    }
    // convergents of m / 2^k
    let (mut num, mut den) = (m, 1i128 << k);
    let (mut h_prev, mut h) = (0i128, 1i128);
    let (mut k_prev, mut kk) = (1i128, 0i128);
    let mut best = (0i128, 1i128);
    while den != 0 {
        let digit = num / den;
        let h_next = digit * h + h_prev;
        let k_next = digit * kk + k_prev;
        if k_next > big_q as i128 {
            break;
        }
        best = (h_next, k_next);
        (h_prev, h) = (h, h_next);
        (k_prev, kk) = (kk, k_next);
        (num, den) = (den, num - digit * den);
    }
    let (p, q) = best;
    let q = q as u64;
    let a = (p as u64) % q;
    let arc = Arc {
        a: if a == 0 { q } else { a },
        q,
        big_q,
    };
    debug_assert_eq!(gcd(arc.a, arc.q), 1);
    if !arc.contains(theta) {
        return Err(LabError::Invariant(format!(
            "convergent {}/{} misses theta = {theta} at Q = {big_q}",
            arc.a, arc.q
        )));
    }
    Ok(arc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcMode {
    /// The arcs exactly as defined; arcs of different denominators may overlap.
    Overlapping,
    /// Each point belongs to the arc of smallest denominator containing it,
    /// which turns the cover into a partition of the circle.
    FirstHit,
}

#[derive(Clone, Debug)]
pub struct ArcDecomposition {
    big_q: u64,
    mode: ArcMode,
    /// `arcs[q - 1]` holds the arcs with denominator `q`.
    arcs: Vec<Vec<Arc>>,
}

impl ArcDecomposition {
    pub fn new(big_q: u64, mode: ArcMode) -> Result<Self> {
        if big_q == 0 || big_q > 1 << 20 {
            return Err(LabError::Domain(format!(
                "decomposition Q = {big_q} must lie in [1, 2^20]"
            )));
        }
        let arcs = (1..=big_q)
            .map(|q| {
                (1..=q)
                    .filter(|&a| gcd(a, q) == 1)
                    .map(|a| Arc { a, q, big_q })
                    .collect()
            })
            .collect();
        Ok(Self { big_q, mode, arcs })
    }

    pub fn big_q(&self) -> u64 {
        self.big_q
    }

    pub fn mode(&self) -> ArcMode {
        self.mode
    }

    pub fn arcs(&self, q: u64) -> &[Arc] {
        if q == 0 || q > self.big_q {
            &[]
        } else {
            &self.arcs[q as usize - 1]
        }
    }

    pub fn all_arcs(&self) -> impl Iterator<Item = &Arc> {
        self.arcs.iter().flatten()
    }

    /// Integration intervals making up `M*_q` (trimmed in `FirstHit` mode).
    /// Endpoints may fall outside `[0, 1)`; the integrand is periodic.
    pub fn pieces(&self, q: u64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for arc in self.arcs(q) {
            let (c, w) = (arc.center(), arc.half_width());
            let base = vec![(c - w, c + w)];
            let kept = match self.mode {
                ArcMode::Overlapping => base,
                ArcMode::FirstHit => self.trim(base, q),
            };
            out.extend(kept);
        }
        out
    }

    fn trim(&self, mut intervals: Vec<(f64, f64)>, q: u64) -> Vec<(f64, f64)> {
        let (lo, hi) = intervals[0];
        for qq in 1..q {
            let w = (1.0 / (qq as f64 * self.big_q as f64)).min(0.5);
            let start = ((lo - w) * qq as f64).floor() as i64;
            let end = ((hi + w) * qq as f64).ceil() as i64;
            for aa in start..=end {
                if gcd(aa.unsigned_abs(), qq) != 1 && qq != 1 {
                    continue;
                }
                let c = aa as f64 / qq as f64;
                intervals = subtract(&intervals, (c - w, c + w));
                if intervals.is_empty() {
                    return intervals;
                }
            }
        }
        intervals
    }

    /// Total length of all pieces (1 for a `FirstHit` decomposition).
    pub fn measure(&self) -> f64 {
        (1..=self.big_q)
            .flat_map(|q| self.pieces(q))
            .map(|(a, b)| b - a)
            .sum()
    }
}

fn subtract(intervals: &[(f64, f64)], cut: (f64, f64)) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a, b) in intervals {
        if cut.1 <= a || cut.0 >= b {
            out.push((a, b));
            continue;
        }
        if cut.0 > a {
            out.push((a, cut.0));
        }
        if cut.1 < b {
            out.push((cut.1, b));
        }
    }
    out
}

/// Trapezoid estimate of `int |f^|^2` over `M*_q`, together with the value
/// at doubled sample density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcEnergy {
    pub value: f64,
    pub refined: f64,
    pub relative_change: f64,
}

pub fn arc_energy(
    f: &FiniteSignal,
    q: u64,
    decomp: &ArcDecomposition,
    samples_per_arc: usize,
) -> Result<ArcEnergy> {
    if samples_per_arc < 3 {
        return Err(LabError::Domain(format!(
            "samples_per_arc = {samples_per_arc} must be >= 3"
        )));
    }
    let pieces = decomp.pieces(q);
    let per_piece: Vec<(f64, f64)> = pieces
        .par_iter()
        .map(|&(lo, hi)| trapezoid_pair(f, lo, hi, samples_per_arc))
        .collect();
    let value: f64 = per_piece.iter().map(|p| p.0).sum();
    let refined: f64 = per_piece.iter().map(|p| p.1).sum();
    let relative_change = if refined == 0.0 {
        (value - refined).abs()
    } else {
        (value - refined).abs() / refined.abs()
    };
    Ok(ArcEnergy {
        value,
        refined,
        relative_change,
    })
}

/// Composite trapezoid with `n` nodes and with `2n - 1` nodes sharing them.
fn trapezoid_pair(f: &FiniteSignal, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    if hi <= lo || f.is_empty() {
        return (0.0, 0.0);
    }
    let fine = 2 * n - 1;
    let h = (hi - lo) / (fine - 1) as f64;
    let ys: Vec<f64> = (0..fine)
        .map(|i| dft_rotating(f, lo + i as f64 * h).norm_sqr())
        .collect();
    let fine_sum = h * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[fine - 1]));
    let coarse: f64 = ys.iter().step_by(2).sum::<f64>() - 0.5 * (ys[0] + ys[fine - 1]);
    (2.0 * h * coarse, fine_sum)
}

/// Energy per denominator `q = 1..=Q` and the part of `sum |f|^2` they miss.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyPartition {
    pub per_q: Vec<ArcEnergy>,
    pub covered: f64,
    pub total: f64,
    pub residual: f64,
}

pub fn energy_partition(
    f: &FiniteSignal,
    decomp: &ArcDecomposition,
    samples_per_arc: usize,
) -> Result<EnergyPartition> {
    let per_q = (1..=decomp.big_q())
        .map(|q| arc_energy(f, q, decomp, samples_per_arc))
        .collect::<Result<Vec<_>>>()?;
    let covered: f64 = per_q.iter().map(|e| e.value).sum();
    let total = f.energy();
    Ok(EnergyPartition {
        per_q,
        covered,
        total,
        residual: total - covered,
    })
}

fn weight_signal(
    n: usize,
    d: u64,
    ctx: ExceptionalContext,
    table: &PrimeTable,
) -> Result<FiniteSignal> {
    let w = build_weight(n, d, ctx, table)?;
    Ok(FiniteSignal::from_weight(&w))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtAtZeroReport {
    pub n: usize,
    pub d: u64,
    pub dbar: u64,
    pub d_total: u64,
    /// Transform of the weight at 0, by direct summation.
    pub exact: f64,
    /// `psi(D N + 1; D, 1)` with `D = dbar * d`.
    pub psi: f64,
    /// `D N / phi(D)`
    pub main_term: f64,
    /// `exact / main_term`; undefined for `N = 0`.
    pub ratio: Option<f64>,
    /// `|exact - psi| / |psi|`
    pub identity_error: f64,
}

impl CsvRow for FtAtZeroReport {
    const HEADER: &'static [&'static str] = &[
        "n",
        "d",
        "dbar",
        "d_total",
        "exact",
        "psi",
        "main_term",
        "ratio",
        "identity_error",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.d.to_string(),
            self.dbar.to_string(),
            self.d_total.to_string(),
            fmt_real(self.exact),
            fmt_real(self.psi),
            fmt_real(self.main_term),
            fmt_opt(self.ratio),
            fmt_real(self.identity_error),
        ]
    }
}

pub fn ft_at_zero_check(
    n: usize,
    d: u64,
    ctx: ExceptionalContext,
    table: &PrimeTable,
) -> Result<FtAtZeroReport> {
    let signal = weight_signal(n, d, ctx, table)?;
    let d_total = ctx.dbar() * d;
    let exact = dft_at(&signal, 0.0).re;
    let x = d_total * n as u64 + 1;
    let psi_value = psi(x, d_total, 1 % d_total, table)?;
    let (phi, _) = arith_functions(d_total)?;
    let main_term = (d_total * n as u64) as f64 / phi as f64;
    let ratio = (n > 0).then(|| exact / main_term);
    let identity_error = if psi_value == 0.0 {
        exact.abs()
    } else {
        (exact - psi_value).abs() / psi_value.abs()
    };
    Ok(FtAtZeroReport {
        n,
        d,
        dbar: ctx.dbar(),
        d_total,
        exact,
        psi: psi_value,
        main_term,
        ratio,
        identity_error,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorArcRow {
    pub q: u64,
    pub a: u64,
    pub delta: f64,
    /// `|F^(a/q + delta)|`
    pub value: f64,
    /// `|F^(0)| / phi(q)`
    pub reference: f64,
    /// `value / reference`
    pub ratio: Option<f64>,
    /// `|sum over m with gcd(D m + 1, q) = 1 of e(-a m / q)|`
    pub restricted_sum: f64,
}

impl CsvRow for MajorArcRow {
    const HEADER: &'static [&'static str] = &[
        "q",
        "a",
        "delta",
        "value",
        "reference",
        "ratio",
        "restricted_sum",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.q.to_string(),
            self.a.to_string(),
            fmt_real(self.delta),
            fmt_real(self.value),
            fmt_real(self.reference),
            fmt_opt(self.ratio),
            fmt_real(self.restricted_sum),
        ]
    }
}

/// `{0, +-1/(4N), +-1/(2N), +-1/N}`
pub fn default_delta_grid(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    let n = n as f64;
    vec![
        0.0,
        -1.0 / (4.0 * n),
        1.0 / (4.0 * n),
        -1.0 / (2.0 * n),
        1.0 / (2.0 * n),
        -1.0 / n,
        1.0 / n,
    ]
}

pub fn major_arc_report(
    n: usize,
    d: u64,
    ctx: ExceptionalContext,
    q_max: u64,
    delta_grid: &[f64],
    table: &PrimeTable,
) -> Result<Vec<MajorArcRow>> {
    if q_max == 0 {
        return Err(LabError::Domain("q_max must be >= 1".into()));
    }
    if let Some(bad) = delta_grid.iter().find(|x| !(x.abs() <= 0.5)) {
        return Err(LabError::Domain(format!("|delta| = {bad} exceeds 1/2")));
    }
    let signal = weight_signal(n, d, ctx, table)?;
    let d_total = ctx.dbar() * d;
    let at_zero = dft_at(&signal, 0.0).norm();
    let mut specs = Vec::new();
    for q in 1..=q_max {
        let (phi, _) = arith_functions(q)?;
        for a in (1..=q).filter(|&a| gcd(a, q) == 1) {
            let restricted = restricted_exp_sum(q, a as i64, d_total)?.norm();
            for &delta in delta_grid {
                specs.push((q, a, delta, phi, restricted));
            }
        }
    }
    let rows = specs
        .par_iter()
        .map(|&(q, a, delta, phi, restricted_sum)| {
            let value = dft_at(&signal, a as f64 / q as f64 + delta).norm();
            let reference = at_zero / phi as f64;
            MajorArcRow {
                q,
                a,
                delta,
                value,
                reference,
                ratio: (reference > 0.0).then(|| value / reference),
                restricted_sum,
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinorArcRow {
    pub theta: f64,
    pub a: u64,
    pub q: u64,
    /// `|F^(theta)|`
    pub value: f64,
    /// `D (log N)^4 (N / sqrt(q) + N^{4/5} + sqrt(N Q))`
    pub bound: f64,
    pub ratio: f64,
}

impl CsvRow for MinorArcRow {
    const HEADER: &'static [&'static str] = &["theta", "a", "q", "value", "bound", "ratio"];

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_real(self.theta),
            self.a.to_string(),
            self.q.to_string(),
            fmt_real(self.value),
            fmt_real(self.bound),
            fmt_real(self.ratio),
        ]
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MinorArcParams {
    /// Width parameter of the arcs used to classify sampled phases.
    pub big_q: u64,
    /// Phases whose denominator is at most this are discarded.
    pub q_threshold: u64,
    pub sample_count: usize,
    pub seed: u64,
}

pub fn minor_arc_report(
    n: usize,
    d: u64,
    ctx: ExceptionalContext,
    params: MinorArcParams,
    table: &PrimeTable,
) -> Result<Vec<MinorArcRow>> {
    if params.sample_count == 0 {
        return Ok(Vec::new());
    }
    let d_total = ctx.dbar() * d;
    if d_total as usize > n {
        return Err(LabError::Domain(format!(
            "the minor arc estimate needs d <= N (d = {d_total}, N = {n})"
        )));
    }
    if params.q_threshold >= params.big_q {
        return Err(LabError::Domain(format!(
            "q_threshold = {} leaves no denominators up to Q = {}",
            params.q_threshold, params.big_q
        )));
    }
    let signal = weight_signal(n, d, ctx, table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut picks: Vec<(f64, Arc)> = Vec::with_capacity(params.sample_count);
    let max_attempts = 1000 * params.sample_count + 1000;
    for _ in 0..max_attempts {
        if picks.len() == params.sample_count {
            break;
        }
        let theta: f64 = rng.gen();
        let arc = locate_arc(theta, params.big_q)?;
        if arc.q > params.q_threshold {
            picks.push((theta, arc));
        }
    }
    let thetas: Vec<f64> = picks.iter().map(|p| p.0).collect();
    let values = dft_many(&signal, &thetas);
    let nf = n as f64;
    let log4 = nf.ln().powi(4);
    Ok(picks
        .iter()
        .zip(values)
        .map(|(&(theta, arc), v): (&(f64, Arc), Complex64)| {
            let bound = d_total as f64
                * log4
                * (nf / (arc.q as f64).sqrt() + nf.powf(0.8) + (nf * params.big_q as f64).sqrt());
            MinorArcRow {
                theta,
                a: arc.a,
                q: arc.q,
                value: v.norm(),
                bound,
                ratio: v.norm() / bound,
            }
        })
        .collect())
}
