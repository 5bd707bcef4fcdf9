//! Exact dyadic arithmetic and dyadic Walsh functions.
//!
//! A point of `[0, 1)` with a terminating binary expansion is held as a
//! [`DyadicValue`], an integer numerator over `2^level`. Digits are indexed
//! from 1 at the most significant fractional bit, so `x = Σ_j x_j 2^{-j}`.
//!
//! A frequency `k` pairs its bit `j - 1` with digit `j` of `x`:
//! `wal_k(x) = (-1)^{Σ_j κ_j x_j}` where `k = Σ_j κ_j 2^{j-1}`.
//!
//! Every finite `f64` is itself a dyadic rational, so the `*_f64` helpers
//! below extract digits and apply `⊕` exactly on binary64 inputs. They exist
//! for quadrature nodes, which are not on any coarse dyadic grid.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// Largest supported level; numerators are `u64`.
pub const MAX_LEVEL: u32 = 63;

/// The value `numerator / 2^level` in `[0, 1)`.
///
/// Equality is structural: `1/2` at level 1 and `2/4` at level 2 differ
/// until one of them is passed through [`DyadicValue::normalize`]. Use
/// [`DyadicValue::cmp_value`] to compare values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicValue {
    numerator: u64,
    level: u32,
}

impl DyadicValue {
    pub const ZERO: DyadicValue = DyadicValue {
        numerator: 0,
        level: 0,
    };

    pub fn new(numerator: u64, level: u32) -> Result<Self> {
        if level > MAX_LEVEL || numerator >> level != 0 {
            return Err(Error::InvalidDyadic { numerator, level });
        }
        Ok(Self { numerator, level })
    }

    pub fn numerator(&self) -> u64 {
        self.numerator
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Strip trailing zero bits.
    pub fn normalize(self) -> Self {
        if self.numerator == 0 {
            return Self::ZERO;
        }
        let tz = self.numerator.trailing_zeros().min(self.level);
        Self {
            numerator: self.numerator >> tz,
            level: self.level - tz,
        }
    }

    /// Re-express at a finer level by padding zero digits.
    pub fn at_level(self, level: u32) -> Result<Self> {
        if level < self.level {
            let dropped = self.numerator & ((1u64 << (self.level - level)) - 1);
            if dropped != 0 {
                return Err(Error::InvalidDyadic {
                    numerator: self.numerator,
                    level,
                });
            }
            return Ok(Self {
                numerator: self.numerator >> (self.level - level),
                level,
            });
        }
        if level > MAX_LEVEL {
            return Err(Error::InvalidDyadic {
                numerator: self.numerator,
                level,
            });
        }
        Ok(Self {
            numerator: self.numerator << (level - self.level),
            level,
        })
    }

    /// Digit `j ≥ 1`; digits past the stored level are zero.
    pub fn digit(&self, j: u32) -> u8 {
        assert!(j >= 1, "digits are indexed from 1");
        if j > self.level {
            0
        } else {
            ((self.numerator >> (self.level - j)) & 1) as u8
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / (self.level as f64).exp2()
    }

    /// Exact conversion from a binary64 value in `[0, 1)`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("{x} is not in [0, 1)")));
        }
        let scaled = x * (MAX_LEVEL as f64).exp2();
        if scaled.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{x} needs more than {MAX_LEVEL} binary digits"
            )));
        }
        Ok(Self {
            numerator: scaled as u64,
            level: MAX_LEVEL,
        }
        .normalize())
    }

    pub fn cmp_value(&self, other: &Self) -> Ordering {
        let level = self.level.max(other.level);
        let a = (self.numerator as u128) << (level - self.level);
        let b = (other.numerator as u128) << (level - other.level);
        a.cmp(&b)
    }
}

impl fmt::Display for DyadicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.level)
    }
}

/// `z ⊕ 2^{-n}`: flip digit `n` of `z`, padding `z` to level `n` if needed.
pub fn xor_shift(z: DyadicValue, n: u32) -> DyadicValue {
    assert!((1..=MAX_LEVEL).contains(&n), "shift position out of range");
    let z = if z.level < n {
        z.at_level(n).expect("padding never fails below MAX_LEVEL")
    } else {
        z
    };
    DyadicValue {
        numerator: z.numerator ^ (1u64 << (z.level - n)),
        level: z.level,
    }
}

/// A frequency `k` with its dyadic expansion `k = Σ 2^{a_j}`, `a_1 > … > a_N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WalshIndex {
    k: u64,
    exponents: Vec<u32>,
}

impl WalshIndex {
    pub fn value(&self) -> u64 {
        self.k
    }

    /// Exponents in strictly decreasing order.
    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// Number of binary digits `N`.
    pub fn digit_count(&self) -> usize {
        self.exponents.len()
    }

    /// `a_1`, the leading exponent.
    pub fn top_exponent(&self) -> Option<u32> {
        self.exponents.first().copied()
    }

    /// `a_N`, the trailing exponent.
    pub fn bottom_exponent(&self) -> Option<u32> {
        self.exponents.last().copied()
    }

    /// Level of the coarsest grid on which `wal_k` is constant: `a_1 + 1`.
    pub fn resolution(&self) -> u32 {
        self.top_exponent().map_or(0, |a| a + 1)
    }

    /// Split into the `count` leading digits and the rest.
    pub fn split_at(&self, count: usize) -> (WalshIndex, WalshIndex) {
        let count = count.min(self.exponents.len());
        let head: u64 = self.exponents[..count].iter().map(|&a| 1u64 << a).sum();
        (digits(head), digits(self.k - head))
    }
}

impl From<u64> for WalshIndex {
    fn from(k: u64) -> Self {
        digits(k)
    }
}

/// Dyadic expansion of `k`.
pub fn digits(k: u64) -> WalshIndex {
    let mut exponents = Vec::with_capacity(k.count_ones() as usize);
    let mut rest = k;
    while rest != 0 {
        let a = 63 - rest.leading_zeros();
        exponents.push(a);
        rest ^= 1u64 << a;
    }
    WalshIndex { k, exponents }
}

/// A vector of frequencies `(k_1, …, k_s)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    components: Vec<WalshIndex>,
}

impl MultiIndex {
    pub fn new(ks: &[u64]) -> Self {
        Self {
            components: ks.iter().map(|&k| digits(k)).collect(),
        }
    }

    pub fn zero(s: usize) -> Self {
        Self::new(&vec![0; s])
    }

    pub fn from_components(components: Vec<WalshIndex>) -> Self {
        Self { components }
    }

    /// `(k_v; 0)`: place `k_v` on the coordinates `v` of an `s`-vector.
    pub fn embed(s: usize, v: &[usize], k_v: &[u64]) -> Result<Self> {
        if v.len() != k_v.len() {
            return Err(Error::DimensionMismatch {
                expected: v.len(),
                got: k_v.len(),
            });
        }
        let mut ks = vec![0; s];
        for (&i, &k) in v.iter().zip(k_v) {
            if i >= s {
                return Err(Error::InvalidParameter(format!("coordinate {i} >= {s}")));
            }
            ks[i] = k;
        }
        Ok(Self::new(&ks))
    }

    pub fn restrict(&self, v: &[usize]) -> Vec<u64> {
        v.iter().map(|&i| self.components[i].value()).collect()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[WalshIndex] {
        &self.components
    }

    pub fn values(&self) -> Vec<u64> {
        self.components.iter().map(WalshIndex::value).collect()
    }

    /// The set `v = { i : k_i ≠ 0 }`, ascending, 0-based.
    pub fn support(&self) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.value() != 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.value() == 0)
    }

    /// `Σ_i N_i`.
    pub fn total_digits(&self) -> usize {
        self.components.iter().map(WalshIndex::digit_count).sum()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.components.iter().map(|c| c.value().to_string()).collect();
        write!(f, "({})", parts.join(" "))
    }
}

fn walsh_sign_1d(k: &WalshIndex, x: &DyadicValue) -> bool {
    k.exponents()
        .iter()
        .fold(false, |odd, &a| odd ^ (x.digit(a + 1) == 1))
}

/// `wal_k(x)` as `+1` or `-1`.
pub fn walsh_eval(k: &MultiIndex, x: &[DyadicValue]) -> Result<i8> {
    if k.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: x.len(),
        });
    }
    let odd = k
        .components()
        .iter()
        .zip(x)
        .fold(false, |odd, (ki, xi)| odd ^ walsh_sign_1d(ki, xi));
    Ok(if odd { -1 } else { 1 })
}

/// Digit `j ≥ 1` of a binary64 value in `[0, 1)`.
pub fn digit_f64(x: f64, j: u32) -> u8 {
    let scaled = (x * (j as f64).exp2()).floor();
    (scaled % 2.0) as u8
}

/// `x ⊕ 2^{-n}` on a binary64 value; exact.
pub fn xor_shift_f64(x: f64, n: u32) -> f64 {
    let step = (-(n as f64)).exp2();
    if digit_f64(x, n) == 0 {
        x + step
    } else {
        x - step
    }
}

/// One-dimensional `wal_k(x)` on a binary64 value.
pub fn walsh_eval_f64(k: u64, x: f64) -> f64 {
    let mut rest = k;
    let mut odd = 0u8;
    while rest != 0 {
        let b = rest.trailing_zeros();
        odd ^= digit_f64(x, b + 1);
        rest &= rest - 1;
    }
    if odd == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `wal_k(x)` for `k` and `x` given as plain slices.
pub fn walsh_eval_point(k: &[u64], x: &[f64]) -> f64 {
    k.iter()
        .zip(x)
        .map(|(&ki, &xi)| walsh_eval_f64(ki, xi))
        .product()
}

/// `∫_0^t wal_k(x) dx` for `t ∈ [0, 1]`, in `O(a_1)` operations.
pub fn walsh_prefix_integral(k: u64, t: f64) -> f64 {
    if k == 0 {
        return t;
    }
    let g = 64 - k.leading_zeros();
    // cell c covers [c 2^{-g}, (c+1) 2^{-g}); digit j of its left end is bit g-j of c
    let mut mask = 0u64;
    let mut rest = k;
    while rest != 0 {
        let b = rest.trailing_zeros();
        mask |= 1u64 << (g - 1 - b);
        rest &= rest - 1;
    }
    let cells = t * (g as f64).exp2();
    let full = cells.floor();
    let full_cells = full as u64;
    let mut sum = 0.0;
    for p in (0..g).rev() {
        if full_cells >> p & 1 == 1 {
            let below = (1u64 << p) - 1;
            if mask & below == 0 {
                let prefix = (full_cells >> (p + 1)) << (p + 1);
                let sign = if (prefix & mask).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                sum += sign * (p as f64).exp2();
            }
        }
    }
    let width = (-(g as f64)).exp2();
    let partial = if full_cells >> g == 0 {
        let sign = if (full_cells & mask).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        sign * (cells - full) * width
    } else {
        0.0
    };
    sum * width + partial
}

/// `∫_a^b wal_k(x) dx` for `0 ≤ a ≤ b ≤ 1`.
pub fn walsh_interval_integral(k: u64, a: f64, b: f64) -> f64 {
    walsh_prefix_integral(k, b) - walsh_prefix_integral(k, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dv(n: u64, l: u32) -> DyadicValue {
        DyadicValue::new(n, l).unwrap()
    }

    #[test]
    fn digits_examples() {
        let zero = digits(0);
        assert_eq!(zero.digit_count(), 0);
        assert!(zero.exponents().is_empty());
        assert_eq!(digits(11).exponents(), &[3, 1, 0]);
        assert_eq!(digits(11).digit_count(), 3);
        assert_eq!(digits(1 << 20).exponents(), &[20]);
    }

    #[test]
    fn xor_shift_examples() {
        // 0.625 = 0.101b
        assert_eq!(xor_shift(dv(5, 3), 2).cmp_value(&dv(7, 3)), Ordering::Equal);
        assert_eq!(xor_shift(dv(3, 2), 1).cmp_value(&dv(1, 2)), Ordering::Equal);
        for n in 1..10 {
            let shifted = xor_shift(DyadicValue::ZERO, n);
            assert_eq!(shifted, dv(1, n));
        }
    }

    #[test]
    fn walsh_eval_examples() {
        let x = [dv(3, 3), dv(1, 1)];
        assert_eq!(walsh_eval(&MultiIndex::zero(2), &x).unwrap(), 1);
        assert_eq!(walsh_eval(&MultiIndex::new(&[2]), &[dv(1, 2)]).unwrap(), -1);
        assert_eq!(walsh_eval(&MultiIndex::new(&[3]), &[dv(3, 2)]).unwrap(), 1);
        assert!(walsh_eval(&MultiIndex::new(&[3]), &x).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(DyadicValue::new(4, 2).is_err());
        assert!(DyadicValue::new(0, 64).is_err());
        assert!(DyadicValue::from_f64(1.0).is_err());
        assert_eq!(DyadicValue::from_f64(0.375).unwrap(), dv(3, 3));
    }

    #[test]
    fn normalize_is_explicit() {
        let v = dv(4, 3);
        assert_ne!(v, dv(1, 1));
        assert_eq!(v.normalize(), dv(1, 1));
        assert_eq!(v.cmp_value(&dv(1, 1)), Ordering::Equal);
    }

    #[test]
    fn embed_restrict_round_trip() {
        let k = MultiIndex::embed(4, &[1, 3], &[5, 9]).unwrap();
        assert_eq!(k.values(), vec![0, 5, 0, 9]);
        assert_eq!(k.support(), vec![1, 3]);
        assert_eq!(k.restrict(&[1, 3]), vec![5, 9]);
    }

    #[test]
    fn character_property_exhaustive() {
        // wal_k(x ⊕ 2^{-n}) = wal_k(x) wal_k(2^{-n})
        let level = 10;
        for k in 0..(1u64 << level) {
            let kk = MultiIndex::new(&[k]);
            for n in 1..=level {
                let step = walsh_eval(&kk, &[dv(1, n)]).unwrap();
                for x in (0..(1u64 << level)).step_by(7) {
                    let x = dv(x, level);
                    let lhs = walsh_eval(&kk, &[xor_shift(x, n)]).unwrap();
                    let rhs = walsh_eval(&kk, &[x]).unwrap() * step;
                    assert_eq!(lhs, rhs, "k={k} n={n} x={x}");
                }
            }
        }
    }

    #[test]
    fn f64_helpers_agree_with_exact() {
        for k in 0..64u64 {
            for x in 0..256u64 {
                let d = dv(x, 8);
                let exact = walsh_eval(&MultiIndex::new(&[k]), &[d]).unwrap() as f64;
                assert_eq!(walsh_eval_f64(k, d.to_f64()), exact);
            }
        }
        for n in 1..12 {
            for x in 0..512u64 {
                let d = dv(x, 9);
                assert_eq!(xor_shift_f64(d.to_f64(), n), xor_shift(d, n).to_f64());
            }
        }
    }

    #[test]
    fn prefix_integral_matches_cell_sum() {
        for k in 0..128u64 {
            for t in 0..=256u64 {
                let t = t as f64 / 256.0 + if t < 256 { 1.0 / 4096.0 } else { 0.0 };
                let t = t.min(1.0);
                // brute force over cells of width 2^{-12}
                let cells = (t * 4096.0).floor() as u64;
                let mut brute = 0.0;
                for c in 0..cells {
                    brute += walsh_eval_f64(k, c as f64 / 4096.0) / 4096.0;
                }
                if cells < 4096 {
                    brute += walsh_eval_f64(k, cells as f64 / 4096.0) * (t - cells as f64 / 4096.0);
                }
                let fast = walsh_prefix_integral(k, t);
                assert!((fast - brute).abs() < 1e-14, "k={k} t={t}: {fast} vs {brute}");
            }
        }
    }

    proptest! {
        #[test]
        fn xor_shift_is_involution(num in 0u64..(1 << 20), level in 20u32..40, n in 1u32..40) {
            let z = DyadicValue::new(num << (level - 20), level).unwrap();
            let padded = z.at_level(level.max(n)).unwrap();
            prop_assert_eq!(xor_shift(xor_shift(z, n), n), padded);
        }

        #[test]
        fn digits_reconstruct(k in any::<u64>()) {
            let w = digits(k);
            let total: u64 = w.exponents().iter().map(|&a| 1u64 << a).sum();
            prop_assert_eq!(total, k);
            prop_assert!(w.exponents().windows(2).all(|p| p[0] > p[1]));
        }
    }
}
