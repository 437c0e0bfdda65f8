//! Multinomial NML normalizing constant `R(n, K)`, kept in base-2 log domain.
//!
//! `R(n, K)` is the sum, over all `K^n` label sequences of length `n`, of the
//! maximized categorical likelihood of the sequence. The binary case is a
//! closed sum over the number of ones; larger alphabets follow from the
//! recurrence `R(n, K) = R(n, K-1) + n / (K-2) * R(n, K-2)`.

use alloc::vec::Vec;

use crate::error::TursError;

/// Largest number of label sequences the brute-force oracles will enumerate.
pub const ENUMERATION_LIMIT: u64 = 1 << 24;

/// `log2(2^a + 2^b)` without leaving the log domain.
pub(crate) fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + libm::log2(1.0 + libm::exp2(lo - hi))
}

/// Maximized log2-likelihood of a label sample with the given class counts.
///
/// `Σ_j c_j log2(c_j / total)` with `0 · log 0 = 0`; an empty sample gives 0.
pub fn log_ml_likelihood(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let c = c as f64;
            c * libm::log2(c / total)
        })
        .sum()
}

fn log2_regret_binary(n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let ln_fact_n = libm::lgamma(nf + 1.0);
    let mut acc = f64::NEG_INFINITY;
    for h in 0..=n {
        let hf = h as f64;
        let rest = nf - hf;
        let mut ln_term = ln_fact_n - libm::lgamma(hf + 1.0) - libm::lgamma(rest + 1.0);
        if h > 0 {
            ln_term += hf * libm::log(hf / nf);
        }
        if h < n {
            ln_term += rest * libm::log(rest / nf);
        }
        acc = log2_add(acc, ln_term * core::f64::consts::LOG2_E);
    }
    acc
}

fn log2_regret_from_binary(n: u64, k: usize, binary: f64) -> f64 {
    if n == 0 || k <= 1 {
        return 0.0;
    }
    let mut two_back = 0.0; // R(n, 1) = 1
    let mut one_back = binary;
    for kk in 3..=k {
        let step = libm::log2(n as f64 / (kk - 2) as f64) + two_back;
        let next = log2_add(one_back, step);
        two_back = one_back;
        one_back = next;
    }
    one_back
}

/// `log2 R(n, K)` computed exactly (up to floating point).
pub fn log_regret(n: u64, k: usize) -> f64 {
    if n == 0 || k <= 1 {
        return 0.0;
    }
    log2_regret_from_binary(n, k, log2_regret_binary(n))
}

/// Oracle for [`log_regret`]: enumerates all `K^n` label sequences and sums
/// their maximized likelihoods.
pub fn regret_bruteforce(n: u32, k: u32) -> Result<f64, TursError> {
    if k == 0 {
        return Err(TursError::InvalidArgument("num_classes must be positive".into()));
    }
    let sequences = libm::pow(k as f64, n as f64);
    if sequences > ENUMERATION_LIMIT as f64 {
        return Err(TursError::EnumerationTooLarge {
            sequences,
            limit: ENUMERATION_LIMIT,
        });
    }
    let n = n as usize;
    let k = k as usize;
    let mut seq = alloc::vec![0usize; n];
    let mut total = 0.0f64;
    loop {
        let mut counts = alloc::vec![0u64; k];
        for &label in &seq {
            counts[label] += 1;
        }
        let mut likelihood = 1.0f64;
        for &c in &counts {
            if c > 0 {
                likelihood *= libm::pow(c as f64 / n as f64, c as f64);
            }
        }
        total += likelihood;

        // next sequence in base-k counting order
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(libm::log2(total));
            }
            seq[pos] += 1;
            if seq[pos] < k {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

/// Memo of `log2 R(n, K)` for one alphabet size and every `n` up to a bound.
///
/// The table is filled eagerly and never mutated afterwards, so it can be
/// shared freely between threads. Lookups beyond the bound are computed on
/// the fly.
#[derive(Clone, Debug)]
pub struct RegretTable {
    num_classes: usize,
    values: Vec<f64>,
}

impl RegretTable {
    pub fn new(num_classes: usize, max_n: usize) -> Self {
        let values = (0..=max_n as u64)
            .map(|n| log2_regret_from_binary(n, num_classes, log2_regret_binary(n)))
            .collect();
        RegretTable {
            num_classes,
            values,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn max_n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, n: usize) -> f64 {
        match self.values.get(n) {
            Some(&v) => v,
            None => log_regret(n as u64, self.num_classes),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log2(x: f64) -> f64 {
        libm::log2(x)
    }

    #[test]
    fn single_class_regret_is_zero() {
        assert_eq!(log_regret(5, 1), 0.0);
        assert_eq!(log_regret(0, 4), 0.0);
    }

    #[test]
    fn one_observation_gives_log_k() {
        assert!((log_regret(1, 3) - log2(3.0)).abs() < 1e-12);
        assert!((log_regret(1, 3) - 1.584_962_500_721_156).abs() < 1e-12);
    }

    #[test]
    fn two_binary_observations() {
        // sequences 00, 11 have ML likelihood 1; 01, 10 have 1/4 each
        let expected = log2(1.0 + 1.0 + 0.25 + 0.25);
        assert!((log_regret(2, 2) - expected).abs() < 1e-12);
        assert!((log_regret(2, 2) - 1.321_928_094_887_362).abs() < 1e-12);
    }

    #[test]
    fn bruteforce_matches_small_cases() {
        assert_eq!(regret_bruteforce(0, 2).unwrap(), 0.0);
        // n=3, K=2: 2 pure sequences + 6 sequences with a 2/1 split
        let split = (2.0f64 / 3.0).powi(2) * (1.0 / 3.0);
        let expected = log2(2.0 + 6.0 * split);
        assert!((regret_bruteforce(3, 2).unwrap() - expected).abs() < 1e-12);
        assert!((regret_bruteforce(3, 2).unwrap() - log_regret(3, 2)).abs() < 1e-10);
        assert!((regret_bruteforce(4, 3).unwrap() - log_regret(4, 3)).abs() < 1e-10);
    }

    #[test]
    fn bruteforce_refuses_huge_enumerations() {
        assert!(matches!(
            regret_bruteforce(25, 2),
            Err(TursError::EnumerationTooLarge { .. })
        ));
        assert!(regret_bruteforce(24, 2).is_ok());
    }

    #[test]
    fn ml_likelihood_examples() {
        let expected = 3.0 * log2(0.75) + log2(0.25);
        assert!((log_ml_likelihood(&[3, 1]) - expected).abs() < 1e-12);
        assert!((log_ml_likelihood(&[3, 1]) + 3.245_112_497_836_532).abs() < 1e-12);
        assert_eq!(log_ml_likelihood(&[7, 0]), 0.0);
        assert_eq!(log_ml_likelihood(&[0, 0]), 0.0);
    }

    #[test]
    fn table_agrees_with_direct_computation() {
        let table = RegretTable::new(4, 50);
        for n in [0usize, 1, 7, 50, 51, 300] {
            assert_eq!(table.get(n), log_regret(n as u64, 4));
        }
    }

    #[test]
    fn monotone_on_grid() {
        for k in 1..6 {
            let mut prev = -1.0;
            for n in 0..200u64 {
                let v = log_regret(n, k);
                assert!(v >= prev - 1e-12, "not monotone in n at n={n} k={k}");
                prev = v;
            }
        }
        for n in [1u64, 5, 40, 333] {
            let mut prev = -1.0;
            for k in 1..8 {
                let v = log_regret(n, k);
                assert!(v >= prev - 1e-12, "not monotone in K at n={n} k={k}");
                prev = v;
            }
        }
    }

    #[test]
    fn asymptotic_slope_for_three_classes() {
        let diff = log_regret(10_000, 3) - log_regret(1_000, 3);
        assert!((diff - log2(10.0)).abs() <= 0.15, "diff = {diff}");
    }

    #[test]
    fn large_n_stays_finite() {
        let v = log_regret(100_000, 10);
        assert!(v.is_finite() && v > 0.0);
    }
}
