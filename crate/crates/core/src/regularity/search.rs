//! Backtracking over colourings of a finite set of positive integers that
//! avoid a monochromatic `x = y + z` (`y = z` allowed).
//!
//! Colours are interchangeable, so the first value gets colour 1 and a value
//! may only open the next unused colour. The tree is split at a fixed depth
//! into branches searched in parallel with a per-branch node budget; the
//! merge is by branch index, so results do not depend on the thread count.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{find_mono_solution, Colouring};
use crate::error::{LabError, Result};
use crate::prime_core::sieve_primes;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueOrder {
    #[default]
    Ascending,
    Descending,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Node budget of each top-level branch.
    pub budget: u64,
    pub order: ValueOrder,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget: 50_000_000,
            order: ValueOrder::Ascending,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchVerdict {
    /// Every colouring has a monochromatic solution.
    Forced,
    /// Colours `1..=k` of the input values, in input order, with no
    /// monochromatic solution.
    Avoidable(Vec<u32>),
    /// A branch ran out of budget before the tree was settled.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchReport {
    pub verdict: SearchVerdict,
    pub nodes: u64,
    pub branches: usize,
}

enum Dfs {
    Found,
    Done,
    Exhausted,
    Cancelled,
}

struct Searcher<'a> {
    order: &'a [u64],
    k: usize,
    /// colour + 1 per value, 0 while unassigned
    colour_of: Vec<u8>,
    classes: Vec<Vec<u64>>,
    used: usize,
    nodes: u64,
    budget: u64,
    rng: Option<ChaCha8Rng>,
    cancel: Option<(&'a AtomicUsize, usize)>,
}

impl<'a> Searcher<'a> {
    fn new(order: &'a [u64], k: usize, max_value: u64, budget: u64) -> Self {
        Self {
            order,
            k,
            colour_of: vec![0; 2 * max_value as usize + 2],
            classes: vec![Vec::new(); k],
            used: 0,
            nodes: 0,
            budget,
            rng: None,
            cancel: None,
        }
    }

    /// Does colouring `v` with `c` complete a monochromatic `x = y + z`?
    fn conflicts(&self, v: u64, c: usize) -> bool {
        let tag = c as u8 + 1;
        if self.colour_of[2 * v as usize] == tag {
            return true;
        }
        self.classes[c].iter().any(|&u| {
            (u < v && self.colour_of[(v - u) as usize] == tag)
                || self.colour_of[(v + u) as usize] == tag
        })
    }

    fn assign(&mut self, v: u64, c: usize) {
        self.colour_of[v as usize] = c as u8 + 1;
        self.classes[c].push(v);
    }

    fn unassign(&mut self, v: u64, c: usize) {
        self.colour_of[v as usize] = 0;
        self.classes[c].pop();
    }

    fn candidates(&mut self) -> Vec<usize> {
        let mut cs: Vec<usize> = (0..self.k.min(self.used + 1)).collect();
        if let Some(rng) = self.rng.as_mut() {
            cs.shuffle(rng);
        }
        cs
    }

    fn dfs(&mut self, idx: usize) -> Dfs {
        if idx == self.order.len() {
            return Dfs::Found;
        }
        if let Some((best, me)) = self.cancel {
            if best.load(Ordering::Relaxed) < me {
                return Dfs::Cancelled;
            }
        }
        let v = self.order[idx];
        for c in self.candidates() {
            if self.nodes >= self.budget {
                return Dfs::Exhausted;
            }
            self.nodes += 1;
            if self.conflicts(v, c) {
                continue;
            }
            let prev_used = self.used;
            self.used = self.used.max(c + 1);
            self.assign(v, c);
            match self.dfs(idx + 1) {
                Dfs::Found => return Dfs::Found,
                Dfs::Done => {}
                other => return other,
            }
            self.unassign(v, c);
            self.used = prev_used;
        }
        Dfs::Done
    }

    fn colours_of(&self, values: &[u64]) -> Vec<u32> {
        values
            .iter()
            .map(|&v| self.colour_of[v as usize] as u32)
            .collect()
    }
}

fn check_values(values: &[u64], k: u32) -> Result<()> {
    if k == 0 {
        return Err(LabError::Domain("need at least one colour".into()));
    }
    if k > 255 {
        return Err(LabError::Domain(format!(
            "k = {k} exceeds the engine limit 255"
        )));
    }
    if values.first().is_some_and(|&v| v == 0) || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Domain(
            "values must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn search_order(values: &[u64], order: ValueOrder) -> Vec<u64> {
    let mut v = values.to_vec();
    if order == ValueOrder::Descending {
        v.reverse();
    }
    v
}

/// All consistent colourings of the first `depth` values, in DFS order.
fn prefixes(order: &[u64], k: usize, max_value: u64, depth: usize) -> (Vec<Vec<usize>>, u64) {
    fn walk(s: &mut Searcher, depth: usize, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if stack.len() == depth {
            out.push(stack.clone());
            return;
        }
        let v = s.order[stack.len()];
        for c in 0..s.k.min(s.used + 1) {
            s.nodes += 1;
            if s.conflicts(v, c) {
                continue;
            }
            let prev = s.used;
            s.used = s.used.max(c + 1);
            s.assign(v, c);
            stack.push(c);
            walk(s, depth, stack, out);
            stack.pop();
            s.unassign(v, c);
            s.used = prev;
        }
    }
    let mut s = Searcher::new(order, k, max_value, u64::MAX);
    let mut out = Vec::new();
    walk(&mut s, depth, &mut Vec::new(), &mut out);
    (out, s.nodes)
}

const TARGET_BRANCHES: usize = 256;

fn split_depth(order: &[u64], k: usize, max_value: u64) -> (usize, Vec<Vec<usize>>, u64) {
    let mut depth = 0;
    let mut branches = vec![Vec::new()];
    let mut nodes = 0;
    while depth < order.len() && branches.len() < TARGET_BRANCHES && !branches.is_empty() {
        depth += 1;
        (branches, nodes) = prefixes(order, k, max_value, depth);
    }
    (depth, branches, nodes)
}

/// Whether `colours` (aligned with `values`) has a monochromatic
/// `x = y + z`, by direct scan.
fn has_mono_sum(values: &[u64], colours: &[u32]) -> bool {
    let colour = |v: u64| values.binary_search(&v).ok().map(|i| colours[i]);
    values.iter().enumerate().any(|(i, &x)| {
        values[..=i]
            .iter()
            .zip(colours)
            .any(|(&y, &cy)| cy == colours[i] && colour(x - y) == Some(cy))
    })
}

/// Decides whether some `k`-colouring of `values` avoids a monochromatic
/// `x = y + z`.
pub fn search_avoiding(values: &[u64], k: u32, cfg: SearchConfig) -> Result<SearchReport> {
    check_values(values, k)?;
    let max_value = values.last().copied().unwrap_or(0);
    let order = search_order(values, cfg.order);
    let k = k as usize;
    let (depth, branches, prefix_nodes) = split_depth(&order, k, max_value);
    let best = AtomicUsize::new(usize::MAX);
    let results: Vec<(Dfs, u64, Option<Vec<u32>>)> = branches
        .par_iter()
        .enumerate()
        .map(|(i, prefix)| {
            let mut s = Searcher::new(&order, k, max_value, cfg.budget);
            s.cancel = Some((&best, i));
            for (idx, &c) in prefix.iter().enumerate() {
                s.assign(order[idx], c);
                s.used = s.used.max(c + 1);
            }
            let r = s.dfs(depth);
            let colours = matches!(r, Dfs::Found).then(|| {
                best.fetch_min(i, Ordering::Relaxed);
                s.colours_of(values)
            });
            (r, s.nodes, colours)
        })
        .collect();
    // branches after the first avoider may be cancelled at any point
    let settled = results
        .iter()
        .position(|r| r.2.is_some())
        .map_or(results.len(), |i| i + 1);
    let nodes = prefix_nodes + results[..settled].iter().map(|r| r.1).sum::<u64>();
    let verdict = if let Some(colours) = results.iter().find_map(|r| r.2.clone()) {
        if has_mono_sum(values, &colours) {
            return Err(LabError::Invariant(
                "search returned a colouring with a monochromatic solution".into(),
            ));
        }
        SearchVerdict::Avoidable(colours)
    } else if results.iter().any(|r| matches!(r.0, Dfs::Exhausted)) {
        SearchVerdict::Indeterminate
    } else {
        SearchVerdict::Forced
    };
    Ok(SearchReport {
        verdict,
        nodes,
        branches: branches.len(),
    })
}

/// Randomized restarts: restart `r` orders candidate colours by the stream
/// `r` of a generator seeded with `seed`. Returns the avoiding colouring of
/// the lowest-numbered successful restart.
pub fn random_restarts(
    values: &[u64],
    k: u32,
    restarts: usize,
    budget: u64,
    seed: u64,
) -> Result<Option<Vec<u32>>> {
    check_values(values, k)?;
    let max_value = values.last().copied().unwrap_or(0);
    let found: Vec<Option<Vec<u32>>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut s = Searcher::new(values, k as usize, max_value, budget);
            s.rng = Some(rng);
            matches!(s.dfs(0), Dfs::Found).then(|| s.colours_of(values))
        })
        .collect();
    Ok(found.into_iter().flatten().next())
}

/// Exhaustive enumeration of all `k^m` colourings; the first avoider in
/// lexicographic order, if any. Only for tiny inputs.
pub fn naive_avoider(values: &[u64], k: u32) -> Result<Option<Vec<u32>>> {
    check_values(values, k)?;
    let m = values.len();
    let total = (k as u64)
        .checked_pow(m as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| LabError::Domain(format!("{k}^{m} colourings is too many")))?;
    let mut colours = vec![1u32; m];
    for code in 0..total {
        let mut c = code;
        for slot in colours.iter_mut() {
            *slot = (c % k as u64) as u32 + 1;
            c /= k as u64;
        }
        let colour = |v: u64| values.binary_search(&v).ok().map(|i| colours[i]);
        let bad = (0..m).any(|i| {
            (0..=i).any(|j| {
                values[i]
                    .checked_sub(values[j])
                    .and_then(|z| colour(z))
                    .is_some_and(|cz| cz == colours[i] && colours[j] == colours[i])
            })
        });
        if !bad {
            return Ok(Some(colours));
        }
    }
    Ok(None)
}

/// Whether every `k`-colouring of the primes up to `n` has a monochromatic
/// `p1 - p2 = p3 - 1`. An avoiding colouring is rechecked before return.
pub fn verify_rp(k: u32, n: u64, cfg: SearchConfig) -> Result<(SearchReport, Option<Colouring>)> {
    if k == 0 {
        return Err(LabError::Domain("k must be >= 1".into()));
    }
    let shifted: Vec<u64> = sieve_primes(n)?
        .primes()
        .iter()
        .map(|&p| p as u64 - 1)
        .collect();
    let report = search_avoiding(&shifted, k, cfg)?;
    let colouring = match &report.verdict {
        SearchVerdict::Avoidable(colours) => {
            let c = Colouring::new(n, k, colours.clone())?;
            if let Some(w) = find_mono_solution(&c) {
                return Err(LabError::Invariant(format!(
                    "avoiding colouring has solution {w:?}"
                )));
            }
            Some(c)
        }
        _ => None,
    };
    Ok((report, colouring))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Threshold {
    /// Smallest forced `N`.
    Value(u64),
    /// Every `N <= avoids_up_to` admits the stored avoiding colouring.
    LowerBound { avoids_up_to: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub k: u32,
    pub threshold: Threshold,
    /// Avoiding colours of `1..=avoids_up_to` (integers) or of the primes up
    /// to it (shifted primes), for the largest certified `N`.
    pub avoider: Option<Vec<u32>>,
    pub certified_n: Option<u64>,
    /// First `N` whose search ran out of budget.
    pub indeterminate_at: Option<u64>,
    pub nodes: u64,
}

/// Sweeps `N` over `candidates`, each with its value list, until forced.
fn sweep(
    k: u32,
    n_max: u64,
    candidates: Vec<(u64, Vec<u64>)>,
    cfg: SearchConfig,
) -> Result<ThresholdReport> {
    if k == 0 {
        return Err(LabError::Domain("k must be >= 1".into()));
    }
    let mut report = ThresholdReport {
        k,
        threshold: Threshold::LowerBound { avoids_up_to: 0 },
        avoider: None,
        certified_n: None,
        indeterminate_at: None,
        nodes: 0,
    };
    for (n, values) in candidates {
        let r = search_avoiding(&values, k, cfg)?;
        report.nodes += r.nodes;
        match r.verdict {
            SearchVerdict::Forced => {
                report.threshold = Threshold::Value(n);
                return Ok(report);
            }
            SearchVerdict::Avoidable(colours) => {
                report.avoider = Some(colours);
                report.certified_n = Some(n);
            }
            SearchVerdict::Indeterminate => {
                report.indeterminate_at = Some(n);
                break;
            }
        }
    }
    let avoids_up_to = match report.indeterminate_at {
        Some(n) => n - 1,
        None => n_max,
    };
    report.threshold = Threshold::LowerBound { avoids_up_to };
    Ok(report)
}

/// Smallest `N <= n_max` at which every `k`-colouring of the primes up to
/// `N` is forced; the answer only changes at primes, so only primes are
/// tried.
pub fn rp_threshold(k: u32, n_max: u64, cfg: SearchConfig) -> Result<ThresholdReport> {
    if k == 0 {
        return Err(LabError::Domain("k must be >= 1".into()));
    }
    let primes: Vec<u64> = sieve_primes(n_max)?
        .primes()
        .iter()
        .map(|&p| p as u64)
        .collect();
    let candidates = (1..=primes.len())
        .map(|i| (primes[i - 1], primes[..i].iter().map(|p| p - 1).collect()))
        .collect();
    sweep(k, n_max, candidates, cfg)
}

/// Smallest `N <= n_max` such that every `k`-colouring of `[1, N]` has a
/// monochromatic `x + y = z` with `x = y` allowed.
pub fn schur_oracle(k: u32, n_max: u64, cfg: SearchConfig) -> Result<ThresholdReport> {
    let candidates = (1..=n_max).map(|n| (n, (1..=n).collect())).collect();
    sweep(k, n_max, candidates, cfg)
}
