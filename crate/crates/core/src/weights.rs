//! Weight functions on Walsh frequencies.
//!
//! * `μ′_α(k) = Σ_i Σ_{j ≤ min(α, N_i)} (a_{i,j} + 2)` governs the decay of
//!   Walsh coefficients of functions with `α` continuous mixed derivatives per
//!   variable.
//! * `μ′_u(k)` truncates coordinate `i` at `u_i` digits instead.
//! * `μ_α(k) = Σ_i Σ_{j ≤ min(α, N_i)} (a_{i,j} + 1)` is the older weight,
//!   kept for comparison. Coordinates with fewer than `α` digits are
//!   truncated at `N_i`.
//!
//! Weights are exact integers; `2^{-μ}` is only formed when summing.

use std::fmt;
use std::str::FromStr;

use crate::dyadic::{digits, MultiIndex, WalshIndex};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// An element of `ℕ₀ ∪ {∞}`: a smoothness order or a digit cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Order {
    Finite(u32),
    Infinite,
}

impl Order {
    /// `min(self, n)`.
    pub fn cap(self, n: usize) -> usize {
        match self {
            Order::Finite(a) => (a as usize).min(n),
            Order::Infinite => n,
        }
    }

    pub fn is_at_least(self, n: u32) -> bool {
        match self {
            Order::Finite(a) => a >= n,
            Order::Infinite => true,
        }
    }

    /// A smoothness order usable in the error bound: `α ≥ 2` or `∞`.
    pub fn require_smoothness(self) -> Result<Self> {
        if self.is_at_least(2) {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(format!(
                "smoothness order must be at least 2, got {self}"
            )))
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(a) => write!(f, "{a}"),
            Order::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Order::Infinite),
            t => t
                .parse::<u32>()
                .map(Order::Finite)
                .map_err(|_| Error::InvalidParameter(format!("bad order {s:?}"))),
        }
    }
}

/// `u = (u_1, …, u_s)` with entries in `ℕ₀ ∪ {∞}`.
pub type OrderVector = Vec<Order>;

/// Contribution of one coordinate to `μ′`: the `cap` leading exponents, each plus two.
pub fn mu_prime_1d(k: &WalshIndex, alpha: Order) -> u64 {
    let cap = alpha.cap(k.digit_count());
    k.exponents()[..cap].iter().map(|&a| a as u64 + 2).sum()
}

/// Same as [`mu_prime_1d`] for a plain integer.
pub fn mu_prime_value(k: u64, alpha: Order) -> u64 {
    let mut rest = k;
    let mut total = 0;
    let mut left = alpha.cap(k.count_ones() as usize);
    while left > 0 {
        let a = 63 - rest.leading_zeros();
        total += a as u64 + 2;
        rest ^= 1u64 << a;
        left -= 1;
    }
    total
}

pub fn mu_prime(k: &MultiIndex, alpha: Order) -> u64 {
    k.components().iter().map(|c| mu_prime_1d(c, alpha)).sum()
}

pub fn mu_prime_u(k: &MultiIndex, u: &[Order]) -> Result<u64> {
    if u.len() != k.dim() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: u.len(),
        });
    }
    Ok(k.components()
        .iter()
        .zip(u)
        .map(|(c, &ui)| mu_prime_1d(c, ui))
        .sum())
}

pub fn mu_dick_1d(k: &WalshIndex, alpha: Order) -> u64 {
    let cap = alpha.cap(k.digit_count());
    k.exponents()[..cap].iter().map(|&a| a as u64 + 1).sum()
}

pub fn mu_dick(k: &MultiIndex, alpha: Order) -> u64 {
    k.components().iter().map(|c| mu_dick_1d(c, alpha)).sum()
}

/// `2^{-w}` as binary64.
pub fn weight(mu: u64) -> f64 {
    (-(mu as f64)).exp2()
}

/// Truncated one-dimensional weight sum with a certified bound on what was cut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSum {
    /// `Σ_{0 ≤ k < 2^cutoff} 2^{-μ′_α(k)}`
    pub truncated: f64,
    /// Upper bound on `Σ_{k ≥ 2^cutoff} 2^{-μ′_α(k)}`.
    pub tail_bound: f64,
}

/// Largest cutoff accepted by [`total_weight_sum`] (the sum is by enumeration).
pub const MAX_ENUMERATED_CUTOFF: u32 = 30;

/// `Σ_{0 ≤ k < 2^cutoff} 2^{-μ′_α(k)}` by direct enumeration, plus a tail bound.
pub fn total_weight_sum(alpha: Order, cutoff: u32) -> Result<WeightSum> {
    let alpha = alpha.require_smoothness()?;
    if cutoff > MAX_ENUMERATED_CUTOFF {
        return Err(Error::Budget {
            what: "weight-sum enumeration",
            needed: 1u128 << cutoff,
            limit: 1u128 << MAX_ENUMERATED_CUTOFF,
        });
    }
    let mut acc = CompensatedSum::new();
    for k in 0..(1u64 << cutoff) {
        acc.add(weight(mu_prime_value(k, alpha)));
    }
    Ok(WeightSum {
        truncated: acc.value(),
        tail_bound: coordinate_tail_bound(alpha, cutoff)?,
    })
}

// Levels summed explicitly before the closed-form remainder takes over.
const TAIL_HORIZON: u32 = 96;

/// `S_β(a) = Σ_{k < 2^a} 2^{-μ′_β(k)}` for `a = 0..=horizon`.
///
/// Splitting on the leading exponent `b` of `k` gives
/// `S_β(a) = 1 + Σ_{b<a} 2^{-(b+2)} S_{β-1}(b)` with `S_0(b) = 2^b`.
fn prefix_weight_sums(beta: Order, horizon: u32) -> Vec<f64> {
    let len = horizon as usize + 1;
    // β = ∞: every digit counts, and the sum factorizes over digits.
    let depth = match beta {
        Order::Finite(b) => b.min(horizon + 1),
        Order::Infinite => horizon + 1,
    };
    // level 0: S_0(a) = 2^a, so 2^{-(b+2)} S_0(b) = 1/4
    let mut prev: Vec<f64> = (0..len).map(|a| (a as f64).exp2()).collect();
    for _ in 0..depth {
        let mut next = vec![0.0; len];
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for a in 0..len {
            next[a] = acc.value();
            acc.add(weight(a as u64 + 2) * prev[a]);
        }
        prev = next;
    }
    prev
}

/// Certified upper bound on `Σ_{k ≥ 2^level} 2^{-μ′_α(k)}` for `α ≥ 2`.
///
/// Every such `k` is `2^a + k′` with `a ≥ level` and `k′ < 2^a`, so the tail
/// is `Σ_{a ≥ level} 2^{-(a+2)} S_{α-1}(a)`. Terms up to a fixed horizon are
/// summed; beyond it `S_{α-1}(a) ≤ S_1(a) = 1 + a/4` gives the closed form
/// `Σ_{a > A} 2^{-(a+2)} (1 + a/4) = 2^{-(A+2)} (1 + (A+2)/4)`.
pub fn coordinate_tail_bound(alpha: Order, level: u32) -> Result<f64> {
    let alpha = alpha.require_smoothness()?;
    let beta = match alpha {
        Order::Finite(a) => Order::Finite(a - 1),
        Order::Infinite => Order::Infinite,
    };
    let horizon = level + TAIL_HORIZON;
    let sums = prefix_weight_sums(beta, horizon);
    let mut acc = CompensatedSum::new();
    for a in level..=horizon {
        acc.add(weight(a as u64 + 2) * sums[a as usize]);
    }
    let remainder = weight(horizon as u64 + 2) * (1.0 + (horizon as f64 + 2.0) / 4.0);
    acc.add(remainder);
    // rounding allowance keeps the bound an overestimate
    Ok(acc.value() * (1.0 + 1e-12))
}

/// Certified upper bound on `Σ_{k ≥ 1} 2^{-μ′_α(k)}`; equals `5/8` for `α = 2`.
pub fn nonzero_weight_total(alpha: Order) -> Result<f64> {
    coordinate_tail_bound(alpha, 0)
}

/// Leading digits of `k` and the remainder: `(k_≤^u, k_>^u)` for one coordinate.
pub fn split_by_order(k: &WalshIndex, u: Order) -> (WalshIndex, WalshIndex) {
    k.split_at(u.cap(k.digit_count()))
}

/// `|min(u, N_k)|_{l¹} = Σ_i min(u_i, N_i)`.
pub fn counted_digits(k: &MultiIndex, u: &[Order]) -> usize {
    k.components()
        .iter()
        .zip(u)
        .map(|(c, &ui)| ui.cap(c.digit_count()))
        .sum()
}

/// `μ′_α` for a plain slice of frequencies.
pub fn mu_prime_values(ks: &[u64], alpha: Order) -> u64 {
    ks.iter().map(|&k| mu_prime_value(k, alpha)).sum()
}

/// `μ_α` for a plain slice of frequencies.
pub fn mu_dick_values(ks: &[u64], alpha: Order) -> u64 {
    ks.iter().map(|&k| mu_dick_1d(&digits(k), alpha)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: Order = Order::Finite(2);

    #[test]
    fn mu_prime_examples() {
        assert_eq!(mu_prime(&MultiIndex::zero(3), TWO), 0);
        assert_eq!(mu_prime(&MultiIndex::new(&[11]), TWO), 8);
        assert_eq!(mu_prime(&MultiIndex::new(&[11]), Order::Infinite), 10);
    }

    #[test]
    fn mu_prime_u_examples() {
        let k = MultiIndex::new(&[11, 1]);
        let zero = vec![Order::Finite(0); 2];
        assert_eq!(mu_prime_u(&k, &zero).unwrap(), 0);
        assert_eq!(
            mu_prime_u(&k, &[Order::Finite(1), Order::Infinite]).unwrap(),
            7
        );
        for alpha in [Order::Finite(1), TWO, Order::Finite(3), Order::Infinite] {
            assert_eq!(mu_prime_u(&k, &[alpha, alpha]).unwrap(), mu_prime(&k, alpha));
        }
        assert!(mu_prime_u(&k, &[TWO]).is_err());
    }

    #[test]
    fn mu_dick_examples() {
        assert_eq!(mu_dick(&MultiIndex::zero(2), TWO), 0);
        assert_eq!(mu_dick(&MultiIndex::new(&[11]), TWO), 6);
        for a in 0..20u64 {
            for alpha in [Order::Finite(1), TWO, Order::Infinite] {
                assert_eq!(mu_dick(&MultiIndex::new(&[1 << a]), alpha), a + 1);
            }
        }
    }

    #[test]
    fn mu_prime_exceeds_mu_by_counted_digits() {
        for k in 0..(1u64 << 12) {
            let idx = MultiIndex::new(&[k]);
            for alpha in [Order::Finite(1), TWO, Order::Finite(3), Order::Infinite] {
                let counted = alpha.cap(idx.total_digits()) as u64;
                assert_eq!(mu_prime(&idx, alpha), mu_dick(&idx, alpha) + counted);
                assert_eq!(mu_prime_value(k, alpha), mu_prime(&idx, alpha));
            }
        }
    }

    #[test]
    fn mu_prime_monotone_in_alpha() {
        for k in 0..(1u64 << 12) {
            let idx = digits(k);
            for a in 1..14u32 {
                let lo = mu_prime_1d(&idx, Order::Finite(a));
                let hi = mu_prime_1d(&idx, Order::Finite(a + 1));
                assert!(lo <= hi);
                if a as usize >= idx.digit_count() {
                    assert_eq!(lo, hi);
                    assert_eq!(lo, mu_prime_1d(&idx, Order::Infinite));
                }
            }
        }
    }

    #[test]
    fn total_weight_sum_examples() {
        let s = total_weight_sum(TWO, 20).unwrap();
        assert!((s.truncated - 1.625).abs() <= (-18f64).exp2());
        assert!(s.truncated <= 1.625);
        assert!(s.truncated + s.tail_bound >= 1.625);

        let s0 = total_weight_sum(TWO, 0).unwrap();
        assert_eq!(s0.truncated, 1.0);

        let inf = total_weight_sum(Order::Infinite, 20).unwrap();
        assert!(inf.truncated > 1.5 && inf.truncated < 1.625);

        assert!(total_weight_sum(Order::Finite(1), 4).is_err());
        assert!(total_weight_sum(TWO, 40).is_err());
    }

    #[test]
    fn total_weight_sum_nondecreasing_and_bounded() {
        let mut last = 0.0;
        for cutoff in 0..18 {
            let s = total_weight_sum(TWO, cutoff).unwrap();
            assert!(s.truncated >= last);
            assert!(s.truncated <= 13.0 / 8.0);
            last = s.truncated;
        }
    }

    #[test]
    fn tail_bound_dominates_enumerated_tail() {
        // Σ_{2^L ≤ k < 2^{L+8}} must stay below the certified tail at L
        for alpha in [TWO, Order::Finite(3), Order::Finite(5), Order::Infinite] {
            for level in 0..10u32 {
                let chunk: f64 = ((1u64 << level)..(1u64 << (level + 8)))
                    .map(|k| weight(mu_prime_value(k, alpha)))
                    .sum();
                let bound = coordinate_tail_bound(alpha, level).unwrap();
                assert!(chunk <= bound, "alpha={alpha} level={level}");
            }
        }
    }

    #[test]
    fn alpha_two_tail_has_closed_form() {
        // Σ_{a ≥ L} 2^{-(a+2)} (1 + a/4) = 2^{-(L+1)} (1 + (L+1)/4)
        for level in 0..30u32 {
            let expected = weight(level as u64 + 1) * (1.0 + (level as f64 + 1.0) / 4.0);
            let bound = coordinate_tail_bound(TWO, level).unwrap();
            assert!((bound - expected).abs() <= 1e-11 * expected);
        }
        assert!((nonzero_weight_total(TWO).unwrap() - 0.625).abs() < 1e-11);
    }

    #[test]
    fn order_parsing() {
        assert_eq!("inf".parse::<Order>().unwrap(), Order::Infinite);
        assert_eq!("3".parse::<Order>().unwrap(), Order::Finite(3));
        assert!("x".parse::<Order>().is_err());
        assert_eq!(Order::Infinite.to_string(), "inf");
    }
}
