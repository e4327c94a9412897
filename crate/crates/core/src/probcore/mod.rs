//! Probability primitives shared by every analysis: binomial and multinomial
//! masses, finite-support PMF algebra, percentiles and Markov steady states.
//!
//! Combinatorial coefficients are evaluated in the log domain through
//! `lgamma`, so blocks of a few hundred packets never overflow.

mod markov;
mod pmf;

pub use markov::{steady_state, MarkovError, TransitionMatrix};
pub use pmf::{convolve, percentile, Percentile, Pmf, PmfError, SubPmf};

/// Turn a measure plus the mass it could not represent into a distribution.
pub fn with_overflow(m: SubPmf, overflow: f64) -> Result<Pmf, PmfError> {
    let total = m.total() + overflow;
    if total <= 0.0 {
        return Err(PmfError::Empty);
    }
    let offset = m.offset();
    let mass = m.mass().iter().map(|x| x / total).collect();
    Pmf::new(offset, mass, overflow / total)
}

use alloc::vec::Vec;
use thiserror::Error;

/// Mass at which infinite geometric tails are cut.
pub const TAIL_TOLERANCE: f64 = 1e-9;

/// Longest support a geometric tail is expanded to. Mass that would lie
/// further out is reported as a deficit.
pub const MAX_TAIL_SUPPORT: usize = 1 << 22;

/// Tolerance used when checking that a distribution totals one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("category probabilities sum to {0}, which exceeds 1")]
    ProbabilitiesExceedOne(f64),
    #[error("counts and probabilities have different lengths ({counts} vs {probs})")]
    LengthMismatch { counts: usize, probs: usize },
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// `k * ln(p)` with the convention `0 * ln(0) = 0`.
pub(crate) fn ln_pow(p: f64, k: i64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * libm::log(p)
    }
}

/// `Bin(k; n, p) = C(n, k) p^k (1-p)^(n-k)`, zero outside `0 <= k <= n`.
pub fn binomial(k: i64, n: i64, p: f64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let ln_coef = ln_factorial(n as u64) - ln_factorial(k as u64) - ln_factorial((n - k) as u64);
    libm::exp(ln_coef + ln_pow(p, k) + ln_pow(1.0 - p, n - k))
}

/// `Pr[Bin(n, p) >= k]`.
pub fn binomial_tail(k: i64, n: i64, p: f64) -> f64 {
    let lo = k.max(0);
    (lo..=n).map(|r| binomial(r, n, p)).sum::<f64>().min(1.0)
}

/// Multinomial mass with an implicit "other" category:
///
/// `n! prod p_i^{k_i} (1 - sum p)^{n - sum k} / ((n - sum k)! prod k_i!)`.
///
/// Returns zero when a count is negative or the counts exceed `n`.
pub fn multinomial(counts: &[i64], n: i64, probs: &[f64]) -> Result<f64, ProbError> {
    if counts.len() != probs.len() {
        return Err(ProbError::LengthMismatch {
            counts: counts.len(),
            probs: probs.len(),
        });
    }
    let total_p: f64 = probs.iter().sum();
    if total_p > 1.0 + 1e-12 {
        return Err(ProbError::ProbabilitiesExceedOne(total_p));
    }
    if n < 0 || counts.iter().any(|&c| c < 0) {
        return Ok(0.0);
    }
    let used: i64 = counts.iter().sum();
    if used > n {
        return Ok(0.0);
    }
    let rest = (1.0 - total_p).max(0.0);
    let mut ln = ln_factorial(n as u64) - ln_factorial((n - used) as u64) + ln_pow(rest, n - used);
    for (&c, &p) in counts.iter().zip(probs) {
        ln += ln_pow(p, c) - ln_factorial(c as u64);
    }
    Ok(libm::exp(ln))
}

/// Table of `ln(i!)` for the inner loops of the frame analyses.
#[derive(Clone, Debug)]
pub(crate) struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub(crate) fn new(max: usize) -> Self {
        Self {
            table: (0..=max).map(|i| ln_factorial(i as u64)).collect(),
        }
    }

    pub(crate) fn get(&self, n: i64) -> f64 {
        self.table[n as usize]
    }

    /// `ln C(n, k)`; callers guarantee `0 <= k <= n`.
    pub(crate) fn ln_choose(&self, n: i64, k: i64) -> f64 {
        self.get(n) - self.get(k) - self.get(n - k)
    }

    pub(crate) fn binomial(&self, k: i64, n: i64, p: f64) -> f64 {
        if k < 0 || k > n {
            return 0.0;
        }
        libm::exp(self.ln_choose(n, k) + ln_pow(p, k) + ln_pow(1.0 - p, n - k))
    }

    /// Two-category multinomial `Mult((a, b); n, (pa, pb))`; `pa + pb <= 1`.
    pub(crate) fn mult2(&self, a: i64, b: i64, n: i64, pa: f64, pb: f64) -> f64 {
        if a < 0 || b < 0 || a + b > n {
            return 0.0;
        }
        let rest = (1.0 - pa - pb).max(0.0);
        libm::exp(
            self.get(n) - self.get(a) - self.get(b) - self.get(n - a - b)
                + ln_pow(pa, a)
                + ln_pow(pb, b)
                + ln_pow(rest, n - a - b),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_trivial_values() {
        assert_eq!(binomial(0, 5, 0.0), 1.0);
        assert!((binomial(2, 4, 0.5) - 0.375).abs() < 1e-15);
        assert_eq!(binomial(-1, 4, 0.5), 0.0);
        assert_eq!(binomial(5, 4, 0.5), 0.0);
        assert_eq!(binomial(4, 4, 1.0), 1.0);
        assert_eq!(binomial(3, 4, 1.0), 0.0);
    }

    #[test]
    fn binomial_sums_to_one() {
        for n in 0..=200 {
            for &p in &[0.0, 0.05, 0.5, 0.95, 1.0] {
                let s: f64 = (0..=n).map(|k| binomial(k, n, p)).sum();
                assert!((s - 1.0).abs() < 1e-12, "n={n} p={p} sum={s}");
            }
        }
    }

    #[test]
    fn multinomial_reduces_to_binomial() {
        for n in 0..30 {
            for k in -1..=n + 1 {
                for &p in &[0.0, 0.1, 0.37, 1.0] {
                    let m = multinomial(&[k], n, &[p]).unwrap();
                    let b = binomial(k, n, p);
                    assert!((m - b).abs() <= 1e-12 * b.max(1e-300), "{k} {n} {p}");
                }
            }
        }
        assert!((multinomial(&[1, 1], 2, &[0.5, 0.5]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn multinomial_rejects_excess_probability() {
        assert!(matches!(
            multinomial(&[1, 1], 3, &[0.7, 0.4]),
            Err(ProbError::ProbabilitiesExceedOne(_))
        ));
        assert_eq!(multinomial(&[3, 2], 4, &[0.2, 0.2]).unwrap(), 0.0);
        assert_eq!(multinomial(&[-1, 2], 4, &[0.2, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn multinomial_sums_to_one_exhaustively() {
        let sets: [&[f64]; 4] = [&[0.3], &[0.2, 0.5], &[0.1, 0.2, 0.3], &[0.25, 0.25, 0.5]];
        for probs in sets {
            for n in 0..=12i64 {
                let mut total = 0.0;
                let dims = probs.len();
                let mut counts = alloc::vec![0i64; dims];
                loop {
                    total += multinomial(&counts, n, probs).unwrap();
                    // odometer over counts with sum <= n
                    let mut i = 0;
                    loop {
                        if i == dims {
                            break;
                        }
                        counts[i] += 1;
                        if counts.iter().sum::<i64>() <= n {
                            break;
                        }
                        counts[i] = 0;
                        i += 1;
                    }
                    if i == dims {
                        break;
                    }
                }
                assert!((total - 1.0).abs() < 1e-10, "{probs:?} n={n} total={total}");
            }
        }
    }

    #[test]
    fn table_matches_free_functions() {
        let t = LnFactorials::new(100);
        for n in 0..100 {
            for k in 0..=n {
                let a = t.binomial(k, n, 0.3);
                let b = binomial(k, n, 0.3);
                assert!((a - b).abs() <= 1e-15 * b.max(1e-300));
            }
        }
        let m = t.mult2(3, 2, 10, 0.6, 0.3);
        let r = multinomial(&[3, 2], 10, &[0.6, 0.3]).unwrap();
        assert!((m - r).abs() < 1e-16);
    }
}
