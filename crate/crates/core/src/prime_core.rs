//! Sieve, von Mangoldt weights, Chebyshev sums in progressions and the
//! complete exponential sums that appear in the major-arc analysis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::phase::e_ratio;

/// Default memory budget for the smallest-prime-factor table (1 GiB).
pub const DEFAULT_SIEVE_BUDGET_BYTES: u64 = 1 << 30;

/// Smallest-prime-factor table up to `limit`, built with a linear sieve.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    limit: u64,
    spf: Vec<u32>,
    primes: Vec<u32>,
}

pub fn sieve_primes(limit: u64) -> Result<PrimeTable> {
    sieve_primes_with_budget(limit, DEFAULT_SIEVE_BUDGET_BYTES)
}

pub fn sieve_primes_with_budget(limit: u64, budget_bytes: u64) -> Result<PrimeTable> {
    let needed = (limit + 1).saturating_mul(std::mem::size_of::<u32>() as u64);
    if needed > budget_bytes || limit >= u32::MAX as u64 {
        return Err(LabError::Resource {
            limit,
            needed,
            budget: budget_bytes,
        });
    }
    let n = limit as usize;
    let mut spf = vec![0u32; n + 1];
    let mut primes: Vec<u32> = Vec::new();
    for i in 2..=n {
        if spf[i] == 0 {
            spf[i] = i as u32;
            primes.push(i as u32);
        }
        let si = spf[i];
        for &p in &primes {
            if p > si {
                break;
            }
            let m = i * p as usize;
            if m > n {
                break;
            }
            spf[m] = p;
        }
    }
    Ok(PrimeTable { limit, spf, primes })
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Primes `p <= x` (x clamped to the table limit).
    pub fn primes_up_to(&self, x: u64) -> &[u32] {
        let end = self.primes.partition_point(|&p| (p as u64) <= x);
        &self.primes[..end]
    }

    pub fn prime_count(&self, x: u64) -> usize {
        self.primes_up_to(x).len()
    }

    fn check(&self, what: &'static str, n: u64) -> Result<()> {
        if n > self.limit {
            Err(LabError::Range {
                what,
                value: n as i64,
                limit: self.limit,
            })
        } else {
            Ok(())
        }
    }

    /// Primality for `n <= limit`; values above the limit report `false`.
    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && n <= self.limit && self.spf[n as usize] as u64 == n
    }

    pub fn smallest_prime_factor(&self, n: u64) -> Result<u64> {
        self.check("n", n)?;
        if n < 2 {
            return Err(LabError::Domain(format!("{n} has no prime factor")));
        }
        Ok(self.spf[n as usize] as u64)
    }

    /// Prime factorization as `(p, exponent)` pairs in increasing `p`.
    pub fn factor(&self, n: u64) -> Result<Vec<(u64, u32)>> {
        self.check("n", n)?;
        if n == 0 {
            return Err(LabError::Domain("cannot factor 0".into()));
        }
        let mut out: Vec<(u64, u32)> = Vec::new();
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m] as usize;
            let mut k = 0;
            while m % p == 0 {
                m /= p;
                k += 1;
            }
            out.push((p as u64, k));
        }
        Ok(out)
    }

    /// Returns `Some(p)` when `n = p^k` with `k >= 1`.
    pub fn prime_power_base(&self, n: u64) -> Result<Option<u64>> {
        self.check("n", n)?;
        if n < 2 {
            return Ok(None);
        }
        let p = self.spf[n as usize] as u64;
        let mut m = n;
        while m % p == 0 {
            m /= p;
        }
        Ok((m == 1).then_some(p))
    }

    pub fn phi(&self, n: u64) -> Result<u64> {
        Ok(self
            .factor(n)?
            .iter()
            .fold(n, |acc, &(p, _)| acc / p * (p - 1)))
    }

    pub fn mobius(&self, n: u64) -> Result<i8> {
        let f = self.factor(n)?;
        if f.iter().any(|&(_, k)| k > 1) {
            Ok(0)
        } else if f.len() % 2 == 0 {
            Ok(1)
        } else {
            Ok(-1)
        }
    }
}

/// `log p` when `n = p^k`, otherwise 0. Natural logarithm throughout.
pub fn von_mangoldt(n: u64, table: &PrimeTable) -> Result<f64> {
    if n == 0 {
        return Err(LabError::Range {
            what: "n",
            value: 0,
            limit: table.limit,
        });
    }
    Ok(table.prime_power_base(n)?.map_or(0.0, |p| (p as f64).ln()))
}

/// `psi(x; q, a)`: the sum of `Lambda(n)` over `n <= x` with `n = a (mod q)`,
/// by direct summation in increasing `n`.
pub fn psi(x: u64, q: u64, a: u64, table: &PrimeTable) -> Result<f64> {
    if q == 0 {
        return Err(LabError::Domain("modulus q must be >= 1".into()));
    }
    if a >= q {
        return Err(LabError::Domain(format!(
            "residue a = {a} must lie in [0, {q})"
        )));
    }
    table.check("x", x)?;
    let first = if a == 0 { q } else { a };
    let mut total = 0.0;
    let mut n = first;
    while n <= x {
        total += von_mangoldt(n, table)?;
        n += q;
    }
    Ok(total)
}

/// The exceptional modulus carried through every construction.
///
/// No exceptional zero is ever computed; `dbar` is an input, equal to 1 in
/// the unexceptional case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionalContext {
    dbar: u64,
    is_exceptional: bool,
}

impl Default for ExceptionalContext {
    fn default() -> Self {
        Self {
            dbar: 1,
            is_exceptional: false,
        }
    }
}

impl ExceptionalContext {
    pub fn new(dbar: u64, is_exceptional: bool) -> Result<Self> {
        if dbar == 0 {
            return Err(LabError::Domain("dbar must be >= 1".into()));
        }
        if !is_exceptional && dbar != 1 {
            return Err(LabError::Domain(format!(
                "dbar = {dbar} requires an exceptional context; unexceptional contexts have dbar = 1"
            )));
        }
        Ok(Self {
            dbar,
            is_exceptional,
        })
    }

    pub fn unexceptional() -> Self {
        Self::default()
    }

    pub fn exceptional(dbar: u64) -> Result<Self> {
        Self::new(dbar, true)
    }

    pub fn dbar(&self) -> u64 {
        self.dbar
    }

    pub fn is_exceptional(&self) -> bool {
        self.is_exceptional
    }
}

/// `n -> Lambda(d_total * n + 1)` on `n = 1..=N`, zero elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedSequence {
    len: usize,
    d_total: u64,
    values: Vec<f64>,
}

impl WeightedSequence {
    /// Window length `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn d_total(&self) -> u64 {
        self.d_total
    }

    /// Weight at `n`; zero outside `1..=N`.
    pub fn at(&self, n: i64) -> f64 {
        if n >= 1 && (n as usize) <= self.len {
            self.values[n as usize - 1]
        } else {
            0.0
        }
    }

    /// Values at `n = 1..=N` in order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of all weights, i.e. the transform at zero, summed in increasing `n`.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn build_weight(
    len: usize,
    d: u64,
    ctx: ExceptionalContext,
    table: &PrimeTable,
) -> Result<WeightedSequence> {
    if d == 0 {
        return Err(LabError::Domain("d must be >= 1".into()));
    }
    let d_total = ctx.dbar() * d;
    let required = d_total * len as u64 + 1;
    if required > table.limit() {
        return Err(LabError::TableTooSmall {
            required,
            have: table.limit(),
        });
    }
    let values = (1..=len as u64)
        .map(|n| von_mangoldt(d_total * n + 1, table))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightedSequence {
        len,
        d_total,
        values,
    })
}

/// Trial-division factorization; used where no table is at hand.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut k = 0;
            while n % p == 0 {
                n /= p;
                k += 1;
            }
            out.push((p, k));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Euler's totient and the Möbius function of `n >= 1`.
pub fn arith_functions(n: u64) -> Result<(u64, i8)> {
    if n == 0 {
        return Err(LabError::Domain("arith_functions needs n >= 1".into()));
    }
    let f = factorize(n);
    let phi = f.iter().fold(n, |acc, &(p, _)| acc / p * (p - 1));
    let mu = if f.iter().any(|&(_, k)| k > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    };
    Ok((phi, mu))
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Ramanujan's sum `c_q(a)` from the closed form `mu(q/g) phi(q) / phi(q/g)`,
/// `g = gcd(a, q)`.
pub fn ramanujan_sum(q: u64, a: i64) -> Result<f64> {
    if q == 0 {
        return Err(LabError::Domain("ramanujan_sum needs q >= 1".into()));
    }
    let g = gcd(a.unsigned_abs() % q, q);
    let g = if g == 0 { q } else { g };
    let (phi_q, _) = arith_functions(q)?;
    let (phi_r, mu_r) = arith_functions(q / g)?;
    Ok(mu_r as f64 * (phi_q / phi_r) as f64)
}

/// `sum_{m=0}^{q-1} e(-a m / q)` restricted to `gcd(m_modulus * m + 1, q) = 1`,
/// by direct summation.
pub fn restricted_exp_sum(q: u64, a: i64, m_modulus: u64) -> Result<Complex64> {
    if q == 0 || m_modulus == 0 {
        return Err(LabError::Domain(
            "restricted_exp_sum needs q >= 1 and m_modulus >= 1".into(),
        ));
    }
    if gcd(a.unsigned_abs() % q, q) != 1 && q != 1 {
        return Err(LabError::Domain(format!("gcd({a}, {q}) must be 1")));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for m in 0..q {
        let u = ((m_modulus as u128 * m as u128 + 1) % q as u128) as u64;
        if gcd(u, q) == 1 || q == 1 {
            let am = (a as i128 * m as i128).rem_euclid(q as i128) as i64;
            total += e_ratio(-am, q);
        }
    }
    Ok(total)
}
