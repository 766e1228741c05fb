//! Colourings of the primes and monochromatic solutions of
//! `p1 - p2 = p3 - 1`, equivalently `x - y = z` inside one colour class of
//! the shifted primes `P - 1`.

mod bootstrap;
mod search;

pub use bootstrap::{
    bootstrap_run, bootstrap_step, BootstrapParams, BootstrapRecord, BootstrapState, BootstrapStep,
    BootstrapTerminal, BootstrapTrace, StepOutcome,
};
pub use search::{
    naive_avoider, random_restarts, rp_threshold, schur_oracle, search_avoiding, verify_rp,
    SearchConfig, SearchReport, SearchVerdict, Threshold, ThresholdReport, ValueOrder,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::prime_core::sieve_primes;
use crate::set::IntSet;
use crate::spectral::count_schur_triples;

/// A colouring of every prime `p <= n0` by colours `1..=k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Colouring {
    n0: u64,
    k: u32,
    primes: Vec<u64>,
    colours: Vec<u32>,
    /// `lookup[p]` is the colour of the prime `p`, 0 elsewhere.
    lookup: Vec<u32>,
}

impl Colouring {
    /// `colours[i]` colours the `i`-th prime up to `n0`.
    pub fn new(n0: u64, k: u32, colours: Vec<u32>) -> Result<Self> {
        if k == 0 {
            return Err(LabError::Domain("a colouring needs k >= 1".into()));
        }
        let primes: Vec<u64> = sieve_primes(n0)?
            .primes()
            .iter()
            .map(|&p| p as u64)
            .collect();
        if primes.len() != colours.len() {
            return Err(LabError::Domain(format!(
                "{} colours given for {} primes up to {n0}",
                colours.len(),
                primes.len()
            )));
        }
        if let Some((p, c)) = primes.iter().zip(&colours).find(|(_, &c)| c == 0 || c > k) {
            return Err(LabError::Domain(format!(
                "prime {p} has colour {c} outside [1, {k}]"
            )));
        }
        let mut lookup = vec![0u32; n0 as usize + 1];
        for (&p, &c) in primes.iter().zip(&colours) {
            lookup[p as usize] = c;
        }
        Ok(Self {
            n0,
            k,
            primes,
            colours,
            lookup,
        })
    }

    pub fn from_fn(n0: u64, k: u32, f: impl Fn(u64) -> u32) -> Result<Self> {
        let colours = sieve_primes(n0)?
            .primes()
            .iter()
            .map(|&p| f(p as u64))
            .collect();
        Self::new(n0, k, colours)
    }

    /// Colour `1 + ((p mod modulus) mod k)`.
    pub fn by_residue(n0: u64, k: u32, modulus: u64) -> Result<Self> {
        if modulus == 0 {
            return Err(LabError::Domain("modulus must be >= 1".into()));
        }
        Self::from_fn(n0, k, |p| 1 + ((p % modulus) % k as u64) as u32)
    }

    /// Independent uniform colours from a seeded stream.
    pub fn random(n0: u64, k: u32, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(LabError::Domain("a colouring needs k >= 1".into()));
        }
        let count = sieve_primes(n0)?.primes().len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let colours = (0..count).map(|_| rng.gen_range(1..=k)).collect();
        Self::new(n0, k, colours)
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn colours(&self) -> &[u32] {
        &self.colours
    }

    /// Colour of `p`, or `None` when `p` is not a prime up to `n0`.
    pub fn colour_of(&self, p: u64) -> Option<u32> {
        match self.lookup.get(p as usize) {
            Some(&c) if c > 0 => Some(c),
            _ => None,
        }
    }

    /// Colour of the shifted prime `z = p - 1`.
    pub fn colour_of_shifted(&self, z: i64) -> Option<u32> {
        if z < 1 {
            return None;
        }
        self.colour_of(z as u64 + 1)
    }

    /// Parses the line format: a header `k=<int> N0=<int>` then one `p c`
    /// line per prime in increasing order. Blank lines and lines starting
    /// with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (header_line, header) = lines.next().ok_or(LabError::Parse {
            line: 0,
            message: "missing header `k=<int> N0=<int>`".into(),
        })?;
        let (mut k, mut n0) = (None, None);
        for token in header.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| LabError::Parse {
                line: header_line,
                message: format!("header token `{token}` is not key=value"),
            })?;
            let parsed: u64 = value.parse().map_err(|_| LabError::Parse {
                line: header_line,
                message: format!("header value `{value}` is not a nonnegative integer"),
            })?;
            match key {
                "k" => k = Some(parsed),
                "N0" => n0 = Some(parsed),
                _ => {
                    return Err(LabError::Parse {
                        line: header_line,
                        message: format!("unknown header key `{key}`"),
                    })
                }
            }
        }
        let (Some(k), Some(n0)) = (k, n0) else {
            return Err(LabError::Parse {
                line: header_line,
                message: "header must give both k and N0".into(),
            });
        };
        if k == 0 || k > u32::MAX as u64 {
            return Err(LabError::Parse {
                line: header_line,
                message: format!("k = {k} must lie in [1, {}]", u32::MAX),
            });
        }
        let k = k as u32;
        let table = sieve_primes(n0)?;
        let primes = table.primes();
        let mut colours = Vec::with_capacity(primes.len());
        let mut last_line = header_line;
        for (line, content) in lines {
            last_line = line;
            let mut parts = content.split_whitespace();
            let (Some(p), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(LabError::Parse {
                    line,
                    message: format!("expected `p c`, found `{content}`"),
                });
            };
            let p: u64 = p.parse().map_err(|_| LabError::Parse {
                line,
                message: format!("`{p}` is not a nonnegative integer"),
            })?;
            let c: u32 = c.parse().map_err(|_| LabError::Parse {
                line,
                message: format!("colour `{c}` is not a positive integer"),
            })?;
            if p > n0 || !table.is_prime(p) {
                return Err(LabError::Parse {
                    line,
                    message: format!("{p} is not a prime up to N0 = {n0}"),
                });
            }
            let expected = primes.get(colours.len()).map(|&q| q as u64);
            match expected {
                Some(q) if p < q => {
                    return Err(LabError::Parse {
                        line,
                        message: format!("prime {p} is duplicated or out of order"),
                    })
                }
                Some(q) if p > q => {
                    return Err(LabError::Parse {
                        line,
                        message: format!("missing prime {q}"),
                    })
                }
                _ => {}
            }
            if c == 0 || c > k {
                return Err(LabError::Parse {
                    line,
                    message: format!("colour {c} of prime {p} outside [1, {k}]"),
                });
            }
            colours.push(c);
        }
        if let Some(&q) = primes.get(colours.len()) {
            return Err(LabError::Parse {
                line: last_line,
                message: format!("missing prime {q}"),
            });
        }
        Self::new(n0, k, colours)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("k={} N0={}\n", self.k, self.n0);
        for (p, c) in self.primes.iter().zip(&self.colours) {
            out.push_str(&format!("{p} {c}\n"));
        }
        out
    }
}

/// `p1 - p2 = p3 - 1` with all three primes of one colour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionWitness {
    pub p1: u64,
    pub p2: u64,
    pub p3: u64,
    pub colour: u32,
}

impl SolutionWitness {
    /// Rechecks the equation, primality, range and colours against `c`.
    pub fn verify(&self, c: &Colouring) -> Result<()> {
        let ok = self.p1 + 1 == self.p2 + self.p3
            && [self.p1, self.p2, self.p3]
                .iter()
                .all(|&p| c.colour_of(p) == Some(self.colour));
        if ok {
            Ok(())
        } else {
            Err(LabError::Invariant(format!(
                "witness {self:?} fails recheck"
            )))
        }
    }
}

/// `{p - 1 : p <= n0 prime of the given colour}`
pub fn induced_shifted_set(c: &Colouring, colour: u32) -> Result<IntSet> {
    if colour == 0 || colour > c.k {
        return Err(LabError::Domain(format!(
            "colour {colour} outside [1, {}]",
            c.k
        )));
    }
    Ok(IntSet::from_sorted(
        c.primes
            .iter()
            .zip(&c.colours)
            .filter(|(_, &col)| col == colour)
            .map(|(&p, _)| p as i64 - 1)
            .collect(),
    ))
}

/// First witness over colours in increasing order; within a class the
/// smallest `x = p1 - 1`, then the smallest `z = p3 - 1`.
pub fn find_mono_solution(c: &Colouring) -> Option<SolutionWitness> {
    for colour in 1..=c.k {
        let class = induced_shifted_set(c, colour).expect("colour in range");
        if count_schur_triples(&class) == 0 {
            continue;
        }
        for x in class.iter() {
            for z in class.iter().take_while(|&z| z < x) {
                if class.contains(x - z) {
                    let w = SolutionWitness {
                        p1: x as u64 + 1,
                        p2: (x - z) as u64 + 1,
                        p3: z as u64 + 1,
                        colour,
                    };
                    debug_assert!(w.verify(c).is_ok());
                    return Some(w);
                }
            }
        }
        unreachable!("triple count positive but no triple found");
    }
    None
}
