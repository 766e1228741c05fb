//! Density increments and the search for shifted primes in difference sets.
//!
//! Every outcome returned here has been recounted against its defining
//! inequality before it leaves the function; the absolute constants only
//! steer how hard the searches work.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcs::{arc_energy, ArcDecomposition, ArcMode};
use crate::error::{LabError, Result};
use crate::prime_core::{arith_functions, build_weight, ExceptionalContext, PrimeTable};
use crate::set::IntSet;
use crate::spectral::{convolve, DifferenceCounts, FiniteSignal};

/// `start, start + step, ..., start + (length - 1) step`
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Progression {
    pub start: i64,
    pub step: i64,
    pub length: usize,
}

impl Progression {
    pub fn new(start: i64, step: i64, length: usize) -> Result<Self> {
        if step < 1 {
            return Err(LabError::Domain(format!("step {step} must be >= 1")));
        }
        Ok(Self {
            start,
            step,
            length,
        })
    }

    /// `[1..n]`
    pub fn interval(n: usize) -> Self {
        Self {
            start: 1,
            step: 1,
            length: n,
        }
    }

    pub fn contains(&self, x: i64) -> bool {
        let off = x - self.start;
        off >= 0 && off % self.step == 0 && ((off / self.step) as usize) < self.length
    }

    pub fn last(&self) -> Option<i64> {
        (self.length > 0).then(|| self.start + (self.length as i64 - 1) * self.step)
    }

    pub fn elements(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.length as i64).map(move |i| self.start + i * self.step)
    }

    pub fn count_in(&self, set: &IntSet) -> usize {
        set.iter().filter(|&x| self.contains(x)).count()
    }

    /// Position `1..=length` of `x` inside the progression.
    pub fn index_of(&self, x: i64) -> Option<i64> {
        self.contains(x).then(|| (x - self.start) / self.step + 1)
    }

    pub fn contains_set(&self, set: &IntSet) -> bool {
        set.iter().all(|x| self.contains(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationParams {
    /// `N' = floor(c alpha N)`
    pub c: f64,
    /// Required density gain factor `1 + c1`.
    pub c1: f64,
    /// Largest common difference searched; default `ceil(alpha^-3)` capped at `N`.
    pub q1: Option<u64>,
    /// Shortest progression accepted; default `ceil(1 / (c alpha))`.
    pub min_len: Option<usize>,
}

impl Default for IterationParams {
    fn default() -> Self {
        Self {
            c: 1.0 / 8.0,
            c1: 1.0 / 32.0,
            q1: None,
            min_len: None,
        }
    }
}

impl IterationParams {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c1 > 0.0) {
            return Err(LabError::Domain(format!(
                "constants must be positive (c = {}, c1 = {})",
                self.c, self.c1
            )));
        }
        Ok(())
    }

    pub fn q1_for(&self, alpha: f64, n: usize) -> u64 {
        self.q1
            .unwrap_or_else(|| alpha.powi(-3).ceil() as u64)
            .clamp(1, n.max(1) as u64)
    }

    pub fn min_len_for(&self, alpha: f64, n: usize) -> usize {
        self.min_len
            .unwrap_or_else(|| (1.0 / (self.c * alpha)).ceil() as usize)
            .clamp(1, n.max(1))
    }

    /// `ceil(log(1/alpha) / log(1 + c1)) + 1`
    pub fn step_cap(&self, alpha: f64) -> usize {
        ((1.0 / alpha).ln() / (1.0 + self.c1).ln()).ceil().max(0.0) as usize + 1
    }
}

fn check_in_window(set: &IntSet, n: usize) -> Result<()> {
    match (set.min(), set.max()) {
        (Some(lo), Some(hi)) if lo < 1 || hi > n as i64 => Err(LabError::Domain(format!(
            "set spans [{lo}, {hi}], outside [1, {n}]"
        ))),
        _ => Ok(()),
    }
}

/// `alpha^-1 |A|^-1 sum_{q <= Q1} phi(q)^-1 int_{M*_q} |(1_A - alpha 1_[N])^|^2`
/// with the arcs of width parameter `Q`.
pub fn energy_condition(
    set: &IntSet,
    n: usize,
    q1: u64,
    big_q: u64,
    samples_per_arc: usize,
) -> Result<f64> {
    if set.is_empty() {
        return Err(LabError::Domain(
            "energy condition is undefined for an empty set".into(),
        ));
    }
    check_in_window(set, n)?;
    if q1 == 0 || big_q < q1 {
        return Err(LabError::Domain(format!(
            "need Q >= Q1 >= 1 (Q = {big_q}, Q1 = {q1})"
        )));
    }
    let alpha = set.len() as f64 / n as f64;
    let values: Vec<f64> = (1..=n as i64)
        .map(|x| f64::from(set.contains(x)) - alpha)
        .collect();
    let f = FiniteSignal::from_real(1, &values);
    let decomp = ArcDecomposition::new(big_q, ArcMode::Overlapping)?;
    let mut total = 0.0;
    for q in 1..=q1 {
        let (phi, _) = arith_functions(q)?;
        total += arc_energy(&f, q, &decomp, samples_per_arc)?.value / phi as f64;
    }
    Ok(total / (alpha * set.len() as f64))
}

/// A progression together with its exact intersection count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseProgression {
    pub progression: Progression,
    pub count: usize,
    pub density: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    len: u64,
    step: i64,
    start: i64,
}

impl Candidate {
    /// Ordering: higher density, then smaller step, then smaller start,
    /// then longer.
    fn better_than(&self, other: &Candidate) -> bool {
        let lhs = self.count as u128 * other.len as u128;
        let rhs = other.count as u128 * self.len as u128;
        if lhs != rhs {
            return lhs > rhs;
        }
        if self.step != other.step {
            return self.step < other.step;
        }
        if self.start != other.start {
            return self.start < other.start;
        }
        self.len > other.len
    }
}

/// Densest window of length `>= min_len` in a 0/1 sequence, smallest start
/// among ties, longest among those. Returns `(start index, length, count)`.
///
/// Lower convex hull of the prefix-sum points with a tangent query per end
/// point, `O(m log m)`.
fn densest_window(bits: &[bool], min_len: usize) -> Option<(usize, usize, u64)> {
    let m = bits.len();
    if m < min_len || min_len == 0 {
        return None;
    }
    let mut prefix = vec![0i64; m + 1];
    for (i, &b) in bits.iter().enumerate() {
        prefix[i + 1] = prefix[i] + b as i64;
    }
    let pt = |i: usize| (i as i64, prefix[i]);
    // cross product sign of (b - a) x (c - a)
    let cross = |a: (i64, i64), b: (i64, i64), c: (i64, i64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let mut hull: Vec<usize> = Vec::new();
    let mut best: Option<(usize, usize, u64)> = None;
    for j in min_len..=m {
        let i_new = j - min_len;
        while hull.len() >= 2 {
            let a = pt(hull[hull.len() - 2]);
            let b = pt(hull[hull.len() - 1]);
            if cross(a, b, pt(i_new)) <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i_new);
        let pj = pt(j);
        // smallest t with slope(h_t, h_{t+1}) >= slope(h_t, J)
        let (mut lo, mut hi) = (0usize, hull.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let a = pt(hull[mid]);
            let b = pt(hull[mid + 1]);
            // edge slope >= slope to J  <=>  cross(a, J, b) >= 0
            if cross(a, pj, b) >= 0 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let i = hull[lo];
        let cand = (i, j - i, (prefix[j] - prefix[i]) as u64);
        best = match best {
            None => Some(cand),
            Some(b) => {
                let lhs = cand.2 as u128 * b.1 as u128;
                let rhs = b.2 as u128 * cand.1 as u128;
                let better =
                    lhs > rhs || (lhs == rhs && (cand.0 < b.0 || (cand.0 == b.0 && cand.1 > b.1)));
                Some(if better { cand } else { b })
            }
        };
    }
    best
}

/// Exhaustive search over common differences `q <= Q1` and windows of each
/// residue class for the densest progression of length `>= min_len`.
/// Returns it when its density reaches `target_density`.
pub fn find_increment(
    set: &IntSet,
    n: usize,
    q1: u64,
    min_len: usize,
    target_density: f64,
) -> Result<Option<DenseProgression>> {
    check_in_window(set, n)?;
    if set.is_empty() || n == 0 || q1 == 0 {
        return Ok(None);
    }
    let mut member = vec![false; n + 1];
    for x in set {
        member[x as usize] = true;
    }
    let min_len = min_len.max(1);
    let max_q = (q1 as usize).min(n);
    let per_q: Vec<Option<Candidate>> = (1..=max_q)
        .into_par_iter()
        .map(|q| {
            let mut best: Option<Candidate> = None;
            for r in 1..=q.min(n) {
                let bits: Vec<bool> = (r..=n).step_by(q).map(|x| member[x]).collect();
                if let Some((i, len, count)) = densest_window(&bits, min_len) {
                    let cand = Candidate {
                        count,
                        len: len as u64,
                        step: q as i64,
                        start: (r + i * q) as i64,
                    };
                    if best.is_none_or(|b| cand.better_than(&b)) {
                        best = Some(cand);
                    }
                }
            }
            best
        })
        .collect();
    let best = per_q
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.better_than(&a) { b } else { a });
    let Some(best) = best else {
        return Ok(None);
    };
    let progression = Progression {
        start: best.start,
        step: best.step,
        length: best.len as usize,
    };
    let count = progression.count_in(set);
    if count as u64 != best.count {
        return Err(LabError::Invariant(format!(
            "window count {} disagrees with recount {count}",
            best.count
        )));
    }
    let density = count as f64 / progression.length as f64;
    Ok((density >= target_density).then_some(DenseProgression {
        progression,
        count,
        density,
    }))
}

/// Quantities behind one application of the two-outcome iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCertificate {
    pub n: usize,
    pub alpha: f64,
    pub d: u64,
    pub dbar: u64,
    pub n_prime: usize,
    /// `<1_A * 1_{-A}, F_{N', dbar d}>`
    pub inner_product: f64,
    /// `F^_{N', dbar d}(0)`
    pub weight_at_zero: f64,
    /// `alpha^2 N |F^(0)| / 2`
    pub threshold: f64,
    /// `|{n <= N' : n in A - A, dbar d n + 1 prime}|`
    pub shifted_prime_count: usize,
    /// `c1 alpha N' / (dbar log N')`; logged, never enforced.
    pub count_threshold: Option<f64>,
    pub q1: u64,
    pub min_len: usize,
    pub target_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum IterationOutcome {
    Increment {
        dense: DenseProgression,
        certificate: StepCertificate,
    },
    ShiftedPrimes {
        /// Normalized differences `n` with `dbar d n + 1` prime.
        set: IntSet,
        n_prime: usize,
        certificate: StepCertificate,
    },
}

impl IterationOutcome {
    pub fn certificate(&self) -> &StepCertificate {
        match self {
            Self::Increment { certificate, .. } | Self::ShiftedPrimes { certificate, .. } => {
                certificate
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Increment { .. } => "increment",
            Self::ShiftedPrimes { .. } => "shifted_primes",
        }
    }
}

/// One application of the iteration: either many shifted primes
/// `dbar d n + 1` with `n in (A - A) cap [1, N']`, or a progression of common
/// difference at most `Q1` on which `A` has density at least `alpha (1 + c1)`.
pub fn iteration_step(
    set: &IntSet,
    n: usize,
    d: u64,
    ctx: ExceptionalContext,
    params: &IterationParams,
    table: &PrimeTable,
) -> Result<IterationOutcome> {
    params.validate()?;
    if set.is_empty() {
        return Err(LabError::Domain("iteration needs a nonempty set".into()));
    }
    check_in_window(set, n)?;
    if d == 0 {
        return Err(LabError::Domain("d must be >= 1".into()));
    }
    let alpha = set.len() as f64 / n as f64;
    let n_prime = (params.c * set.len() as f64).floor() as usize;
    if n_prime == 0 {
        return Err(LabError::Degenerate(format!(
            "N' = floor(c alpha N) = 0 for |A| = {}, N = {n}, c = {}",
            set.len(),
            params.c
        )));
    }
    let d_total = ctx.dbar() * d;
    let weight = build_weight(n_prime, d, ctx, table)?;
    let counts = DifferenceCounts::of(set);
    let inner_product: f64 = (1..=n_prime as i64)
        .map(|m| counts.at(m) as f64 * weight.at(m))
        .sum();
    let weight_at_zero = weight.total();
    let threshold = alpha * alpha * n as f64 * weight_at_zero.abs() / 2.0;
    let shifted: IntSet = (1..=n_prime as i64)
        .filter(|&m| counts.at(m) > 0 && table.is_prime(d_total * m as u64 + 1))
        .collect();
    let q1 = params.q1_for(alpha, n);
    let min_len = params.min_len_for(alpha, n);
    let target_density = alpha * (1.0 + params.c1);
    let certificate = StepCertificate {
        n,
        alpha,
        d,
        dbar: ctx.dbar(),
        n_prime,
        inner_product,
        weight_at_zero,
        threshold,
        shifted_prime_count: shifted.len(),
        count_threshold: (n_prime >= 2).then(|| {
            params.c1 * alpha * n_prime as f64 / (ctx.dbar() as f64 * (n_prime as f64).ln())
        }),
        q1,
        min_len,
        target_density,
    };

    if inner_product >= threshold && !shifted.is_empty() {
        for m in &shifted {
            if counts.at(m) == 0 || !table.is_prime(d_total * m as u64 + 1) || m > n_prime as i64 {
                return Err(LabError::Invariant(format!(
                    "shifted prime {m} failed recount"
                )));
            }
        }
        return Ok(IterationOutcome::ShiftedPrimes {
            set: shifted,
            n_prime,
            certificate,
        });
    }

    match find_increment(set, n, q1, min_len, target_density)? {
        Some(dense) => {
            let recount = dense.progression.count_in(set);
            if (recount as f64) < target_density * dense.progression.length as f64 {
                return Err(LabError::Invariant(format!(
                    "increment density {recount}/{} below target {target_density}",
                    dense.progression.length
                )));
            }
            Ok(IterationOutcome::Increment { dense, certificate })
        }
        None => Err(LabError::NoCertificate(format!(
            "inner product {inner_product:.6} < threshold {threshold:.6} (or no shifted primes, \
             found {}), and no progression with step <= {q1}, length >= {min_len} reaches density {target_density:.6}",
            shifted.len()
        ))),
    }
}

/// One record of the inner iteration's step log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub n_k: usize,
    pub alpha_k: f64,
    pub d_k: u64,
    pub outcome: IterationOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerIteration {
    /// Normalized differences `n <= N'` at the final step.
    pub a_prime: IntSet,
    /// `{D_k n : 1 <= n <= N'}` with `D_k = dbar d_k`; `D_k n + 1` is prime
    /// for every `n` in `a_prime`.
    pub progression: Progression,
    pub steps: usize,
    /// `A_k` embeds into the coordinates of the input set as
    /// `x -> offset + scale x`; differences scale by `scale = d_k / d`.
    pub offset: i64,
    pub scale: i64,
    pub d_final: u64,
    pub log: Vec<StepRecord>,
}

impl InnerIteration {
    /// A difference `n` of the final set as a difference of the input set.
    pub fn lift(&self, n: i64) -> i64 {
        self.scale * n
    }
}

/// Applies `iteration_step` until it reports shifted primes, passing to the
/// progression and rescaling after each increment.
pub fn iterate_to_primes(
    set: &IntSet,
    n: usize,
    d: u64,
    ctx: ExceptionalContext,
    params: &IterationParams,
    table: &PrimeTable,
) -> Result<InnerIteration> {
    params.validate()?;
    if set.is_empty() {
        return Err(LabError::Domain("iteration needs a nonempty set".into()));
    }
    check_in_window(set, n)?;
    let alpha0 = set.len() as f64 / n as f64;
    let cap = params.step_cap(alpha0);
    let mut current = set.clone();
    let mut n_k = n;
    let mut d_k = d;
    let (mut offset, mut scale) = (0i64, 1i64);
    let mut log = Vec::new();
    for k in 1..=cap {
        let alpha_k = current.len() as f64 / n_k as f64;
        let outcome = iteration_step(&current, n_k, d_k, ctx, params, table)?;
        log.push(StepRecord {
            k,
            n_k,
            alpha_k,
            d_k,
            outcome: outcome.clone(),
        });
        match outcome {
            IterationOutcome::ShiftedPrimes { set, n_prime, .. } => {
                let d_total = (ctx.dbar() * d_k) as i64;
                return Ok(InnerIteration {
                    a_prime: set,
                    progression: Progression {
                        start: d_total,
                        step: d_total,
                        length: n_prime,
                    },
                    steps: k,
                    offset,
                    scale,
                    d_final: d_k,
                    log,
                });
            }
            IterationOutcome::Increment { dense, .. } => {
                let p = dense.progression;
                current = current
                    .iter()
                    .filter(|&x| p.contains(x))
                    .map(|x| (x - p.start) / p.step + 1)
                    .collect();
                n_k = p.length;
                d_k *= p.step as u64;
                offset += scale * (p.start - p.step);
                scale *= p.step;
            }
        }
    }
    Err(LabError::Invariant(format!(
        "no shifted-prime outcome within the cap of {cap} steps (alpha = {alpha0})"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Translate {
    pub n: i64,
    pub size: usize,
    /// `|X| |Y| / (N + d' N')`
    pub bound: f64,
}

/// `n` maximizing `|(n + Y) cap X|` (smallest among ties), from the
/// convolution `1_X * 1_{-Y}`.
pub fn best_translate(
    x: &IntSet,
    x_prog: &Progression,
    y: &IntSet,
    y_prog: &Progression,
) -> Result<Translate> {
    if x.is_empty() || y.is_empty() {
        return Err(LabError::Domain(
            "best_translate needs nonempty sets".into(),
        ));
    }
    if !x_prog.contains_set(x) || !y_prog.contains_set(y) {
        return Err(LabError::Domain(
            "sets must lie in their stated progressions".into(),
        ));
    }
    if y_prog.step % x_prog.step != 0 {
        return Err(LabError::Domain(format!(
            "step {} of Y is not a multiple of step {} of X",
            y_prog.step, x_prog.step
        )));
    }
    let d_prime = (y_prog.step / x_prog.step) as u128;
    let conv = convolve(
        &FiniteSignal::indicator(x),
        &FiniteSignal::reflected_indicator(y),
    );
    let mut best = (i64::MIN, 0u64);
    for (shift, v) in conv.iter() {
        let c = v.re.round().max(0.0) as u64;
        if c > best.1 {
            best = (shift, c);
        }
    }
    let (n, size) = best;
    let recount = y.iter().filter(|&v| x.contains(v + n)).count();
    if recount as u64 != size {
        return Err(LabError::Invariant(format!(
            "translate count {size} disagrees with recount {recount}"
        )));
    }
    let denom = x_prog.length as u128 + d_prime * y_prog.length as u128;
    let product = x.len() as u128 * y.len() as u128;
    if size as u128 * denom < product {
        return Err(LabError::Invariant(format!(
            "translate size {size} below averaging bound {product}/{denom}"
        )));
    }
    Ok(Translate {
        n,
        size: recount,
        bound: product as f64 / denom as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub progression: Progression,
    pub count: usize,
    pub alpha: f64,
}

/// A progression of common difference `d dbar` and length at least
/// `alpha N / dbar` on which `A` has density at least `alpha / 2`.
pub fn refine_to_modulus(set: &IntSet, ambient: &Progression, dbar: u64) -> Result<Refinement> {
    if dbar == 0 {
        return Err(LabError::Domain("dbar must be >= 1".into()));
    }
    // alpha N / dbar = |A| / dbar
    refine_with_length(set, ambient, dbar, set.len() / dbar as usize)
}

/// As `refine_to_modulus`, translating `{d dbar n : 0 <= n <= len}` for a
/// chosen `len >= alpha N / dbar`. Longer windows keep more of `A`.
pub fn refine_with_length(
    set: &IntSet,
    ambient: &Progression,
    dbar: u64,
    len: usize,
) -> Result<Refinement> {
    if set.is_empty() {
        return Err(LabError::Domain(
            "refine_to_modulus needs a nonempty set".into(),
        ));
    }
    if dbar == 0 {
        return Err(LabError::Domain("dbar must be >= 1".into()));
    }
    if !ambient.contains_set(set) {
        return Err(LabError::Domain(
            "set must lie in its ambient progression".into(),
        ));
    }
    let n = ambient.length;
    let alpha = set.len() as f64 / n as f64;
    let min_len = set.len() / dbar as usize;
    if len < 1 || min_len < 1 {
        return Err(LabError::Degenerate(format!(
            "alpha N / dbar = {}/{dbar} < 1",
            set.len()
        )));
    }
    if len < min_len {
        return Err(LabError::Domain(format!(
            "length {len} is below alpha N / dbar = {min_len}"
        )));
    }
    let step = ambient.step * dbar as i64;
    let y_prog = Progression {
        start: 0,
        step,
        length: len + 1,
    };
    let y: IntSet = y_prog.elements().collect();
    let t = best_translate(set, ambient, &y, &y_prog)?;
    let progression = Progression {
        start: t.n,
        step,
        length: len + 1,
    };
    let count = progression.count_in(set);
    if progression.length < min_len
        || progression.step != step
        || 2 * count * n < set.len() * progression.length
    {
        return Err(LabError::Invariant(format!(
            "refinement {progression:?} holds {count} elements, below alpha |P| / 2"
        )));
    }
    Ok(Refinement {
        progression,
        count,
        alpha,
    })
}
