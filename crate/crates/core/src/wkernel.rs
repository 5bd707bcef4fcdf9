//! The kernels `χ_n` and `W(k)`.
//!
//! `χ_n(x, y) = 2^n` when `y` lies between `x` and `x ⊕ 2^{-n}` and `0`
//! otherwise. `W(0) = 1`, and adding a new lowest digit `2^a` to `k` maps
//! `W(k)` to `y ↦ ∫ χ_{a+1}(x, y) W(k)(x) dx`.
//!
//! `W(k)` is held exactly as a piecewise polynomial on the grid of spacing
//! `2^{-(a_1+1)}`. Each piece is stored in the Bernstein basis of a common
//! degree, with integer numerators over one shared denominator. In that form
//! one integration step is a prefix sum of the coefficients, nonnegativity
//! and monotonicity can be read off the coefficients, and continuity is the
//! equality of neighbouring end coefficients.

use std::cmp::Ordering;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dyadic::{digits, xor_shift, DyadicValue, MultiIndex};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, UnitRule};

/// The half-open interval `[lo, hi) · 2^{-level}`, closed on the right when
/// `closed` is set. `hi` may equal `2^level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicInterval {
    pub level: u32,
    pub lo: u64,
    pub hi: u64,
    pub closed: bool,
}

impl DyadicInterval {
    pub fn left(&self) -> f64 {
        self.lo as f64 / (self.level as f64).exp2()
    }

    pub fn right(&self) -> f64 {
        self.hi as f64 / (self.level as f64).exp2()
    }

    pub fn length(&self) -> f64 {
        self.right() - self.left()
    }

    pub fn contains(&self, x: DyadicValue) -> bool {
        let level = self.level.max(x.level());
        let scale = |v: u64, from: u32| (v as u128) << (level - from);
        let (lo, hi) = (scale(self.lo, self.level), scale(self.hi, self.level));
        let x = scale(x.numerator(), x.level());
        lo <= x && (x < hi || (self.closed && x == hi))
    }
}

/// `χ_n(x, y)`: `2^n` when `y ∈ [min(x, x⊕2^{-n}), max(x, x⊕2^{-n})]`.
pub fn chi(n: u32, x: DyadicValue, y: DyadicValue) -> u64 {
    let x2 = xor_shift(x, n);
    let (lo, hi) = match x.cmp_value(&x2) {
        Ordering::Greater => (x2, x),
        _ => (x, x2),
    };
    if lo.cmp_value(&y) != Ordering::Greater && y.cmp_value(&hi) != Ordering::Greater {
        1 << n
    } else {
        0
    }
}

/// The two `x`-intervals on which `χ_n(x, y) = 2^n`.
///
/// With `y` in cell `c` of level `n` and `h = 2^{-n}`: for even `c` they are
/// `[ch, y]` and `[(c+1)h, y+h]`; for odd `c` they are `[y-h, ch)` and
/// `[y, (c+1)h)`.
pub fn chi_support(n: u32, y: DyadicValue) -> Result<[DyadicInterval; 2]> {
    if n == 0 {
        return Err(Error::InvalidParameter("χ_n needs n >= 1".into()));
    }
    let level = y.level().max(n);
    let y = y.at_level(level)?;
    let yn = y.numerator();
    let h = 1u64 << (level - n);
    let c = yn / h;
    let iv = |lo, hi, closed| DyadicInterval {
        level,
        lo,
        hi,
        closed,
    };
    Ok(if c % 2 == 0 {
        [iv(c * h, yn, true), iv((c + 1) * h, yn + h, true)]
    } else {
        [iv(yn - h, c * h, false), iv(yn, (c + 1) * h, false)]
    })
}

/// A piecewise polynomial on the grid `j · 2^{-grid_level}`, each piece in the
/// Bernstein basis of degree `degree` on its own cell, with coefficients
/// `numerators / denominator`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicPiecewisePoly {
    grid_level: u32,
    degree: usize,
    denominator: BigInt,
    // piece j occupies [j*(degree+1), (j+1)*(degree+1))
    numerators: Vec<BigInt>,
}

/// Largest grid level [`build_w`] accepts by default.
pub const DEFAULT_MAX_GRID: u32 = 16;

impl DyadicPiecewisePoly {
    pub fn constant_one(grid_level: u32) -> Self {
        Self {
            grid_level,
            degree: 0,
            denominator: BigInt::one(),
            numerators: vec![BigInt::one(); 1 << grid_level],
        }
    }

    pub fn grid_level(&self) -> u32 {
        self.grid_level
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pieces(&self) -> usize {
        1 << self.grid_level
    }

    pub fn denominator(&self) -> &BigInt {
        &self.denominator
    }

    /// Bernstein numerators of piece `j`.
    pub fn piece(&self, j: usize) -> &[BigInt] {
        let w = self.degree + 1;
        &self.numerators[j * w..(j + 1) * w]
    }

    /// Replace `W` by `y ↦ ∫ χ_n(x, y) W(x) dx` for `1 ≤ n ≤ grid_level`.
    pub fn integrate_chi(&self, n: u32) -> Self {
        assert!(n >= 1 && n <= self.grid_level, "level {n} off grid");
        let pieces = self.pieces();
        let d = self.degree;
        let w = d + 1;
        let r = 1usize << (self.grid_level - n);
        // S[j][i] = Σ_{l<i} β_{j,l}, i = 0..=d+1
        let mut partial: Vec<BigInt> = Vec::with_capacity(pieces * (w + 1));
        for j in 0..pieces {
            let mut acc = BigInt::zero();
            partial.push(acc.clone());
            for b in self.piece(j) {
                acc += b;
                partial.push(acc.clone());
            }
        }
        let s = |j: usize, i: usize| &partial[j * (w + 1) + i];
        // PT[x] = Σ_{l<x} T_l with T_l = S[l][d+1]
        let mut prefix = Vec::with_capacity(pieces + 1);
        let mut acc = BigInt::zero();
        prefix.push(acc.clone());
        for j in 0..pieces {
            acc += s(j, w);
            prefix.push(acc.clone());
        }
        let out: Vec<BigInt> = (0..pieces)
            .into_par_iter()
            .flat_map_iter(|j| {
                let c = j / r;
                let base = if c % 2 == 0 {
                    (&prefix[j] - &prefix[c * r]) + (&prefix[j + r] - &prefix[(c + 1) * r])
                } else {
                    (&prefix[c * r] - &prefix[j - r]) + (&prefix[(c + 1) * r] - &prefix[j])
                };
                let even = c % 2 == 0;
                let partial = &partial;
                (0..=w).map(move |i| {
                    let at = |jj: usize| &partial[jj * (w + 1) + i];
                    if even {
                        &base + at(j) + at(j + r)
                    } else {
                        &base - at(j - r) - at(j)
                    }
                })
            })
            .collect();
        let denominator = &self.denominator * BigInt::from(w) * BigInt::from(1u64 << (self.grid_level - n));
        Self {
            grid_level: self.grid_level,
            degree: d + 1,
            denominator,
            numerators: out,
        }
    }

    fn locate(&self, y: DyadicValue) -> (usize, BigRational) {
        let level = y.level().max(self.grid_level);
        let y = y.at_level(level).expect("level within range");
        let shift = level - self.grid_level;
        let j = (y.numerator() >> shift) as usize;
        let t = BigRational::new(
            BigInt::from(y.numerator() & ((1u64 << shift) - 1)),
            BigInt::one() << shift,
        );
        (j, t)
    }

    /// Exact value at a dyadic point.
    pub fn eval(&self, y: DyadicValue) -> BigRational {
        let (j, t) = self.locate(y);
        let one_minus = BigRational::one() - &t;
        let mut b: Vec<BigRational> = self
            .piece(j)
            .iter()
            .map(|c| BigRational::from_integer(c.clone()))
            .collect();
        for r in 1..b.len() {
            for i in 0..b.len() - r {
                b[i] = &b[i] * &one_minus + &b[i + 1] * &t;
            }
        }
        &b[0] / BigRational::from_integer(self.denominator.clone())
    }

    /// Coefficients of every piece as binary64, cached for fast evaluation.
    pub fn to_f64(&self) -> PiecewiseF64 {
        let den = BigRational::from_integer(self.denominator.clone());
        let coeffs = self
            .numerators
            .iter()
            .map(|c| {
                (BigRational::from_integer(c.clone()) / &den)
                    .to_f64()
                    .expect("finite coefficient")
            })
            .collect();
        PiecewiseF64 {
            grid_level: self.grid_level,
            degree: self.degree,
            coeffs,
        }
    }

    pub fn eval_f64(&self, y: f64) -> f64 {
        self.to_f64().eval(y)
    }

    /// `∫_0^1`, exactly.
    pub fn integral(&self) -> BigRational {
        let total: BigInt = self.numerators.iter().sum();
        BigRational::new(
            total,
            &self.denominator * BigInt::from(self.degree + 1) << self.grid_level,
        )
    }

    /// `‖·‖_{L¹}`, certified: the plain integral when all coefficients are
    /// nonnegative.
    pub fn l1_norm(&self) -> Result<BigRational> {
        if self.coefficients_nonnegative() {
            Ok(self.integral())
        } else {
            Err(Error::Uncertified {
                piece: self.numerators.iter().position(|c| c.is_negative()).unwrap_or(0)
                    / (self.degree + 1),
            })
        }
    }

    pub fn coefficients_nonnegative(&self) -> bool {
        !self.numerators.iter().any(Signed::is_negative)
    }

    pub fn pieces_monotone(&self) -> bool {
        (0..self.pieces()).all(|j| {
            let p = self.piece(j);
            p.windows(2).all(|w| w[0] <= w[1]) || p.windows(2).all(|w| w[0] >= w[1])
        })
    }

    /// `‖·‖_{L^∞}`, exact.
    ///
    /// The largest value at a breakpoint is a lower bound. Each piece is
    /// bounded above by its largest Bernstein coefficient; pieces whose bound
    /// exceeds the breakpoint maximum are subdivided until the bounds meet.
    pub fn sup_norm(&self) -> Result<BigRational> {
        let d = self.degree;
        let abs_piece = |j: usize| -> Vec<BigInt> { self.piece(j).iter().map(|c| c.abs()).collect() };
        if !self.coefficients_nonnegative() {
            // |p| is not a polynomial; only nonnegative kernels are handled
            let piece = self.numerators.iter().position(Signed::is_negative).unwrap() / (d + 1);
            return Err(Error::Uncertified { piece });
        }
        let mut best = BigInt::zero();
        for j in 0..self.pieces() {
            let p = self.piece(j);
            best = best.max(p[0].clone()).max(p[d].clone());
        }
        for j in 0..self.pieces() {
            let p = abs_piece(j);
            if p.iter().max().is_some_and(|m| *m > best) && !bernstein_bounded(&p, &best, 12) {
                return Err(Error::Uncertified { piece: j });
            }
        }
        Ok(BigRational::new(best, self.denominator.clone()))
    }

    /// Whether the last value of every piece matches the first value of the
    /// next one.
    pub fn is_continuous(&self) -> bool {
        (1..self.pieces()).all(|j| self.piece(j - 1)[self.degree] == self.piece(j)[0])
    }

    /// Whether shifting by `2^{-level}` leaves the function unchanged.
    pub fn has_period(&self, level: u32) -> bool {
        if level > self.grid_level {
            return false;
        }
        let shift = 1usize << (self.grid_level - level);
        (0..self.pieces() - shift).all(|j| self.piece(j) == self.piece(j + shift))
    }

    /// `‖·‖_{L^p}` for `1 ≤ p < ∞` by Gauss–Legendre with 16 nodes per piece,
    /// returned with the difference to a 32-node rule as error estimate.
    pub fn lp_norm(&self, p: f64) -> Result<(f64, f64)> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p = {p} must be finite and >= 1")));
        }
        let f = self.to_f64();
        let coarse = f.lp_quadrature(p, &UnitRule::gauss_legendre(16));
        let fine = f.lp_quadrature(p, &UnitRule::gauss_legendre(32));
        Ok((fine, (fine - coarse).abs()))
    }

    /// One row per piece: left breakpoint, right breakpoint, then the
    /// Bernstein coefficients as decimals.
    pub fn to_csv(&self) -> String {
        let f = self.to_f64();
        let mut out = String::from("left,right");
        for i in 0..=self.degree {
            let _ = write!(out, ",b{i}");
        }
        out.push('\n');
        let width = (-(self.grid_level as f64)).exp2();
        for j in 0..self.pieces() {
            let _ = write!(out, "{},{}", j as f64 * width, (j + 1) as f64 * width);
            for c in f.piece(j) {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

// Whether every value of the Bernstein polynomial `p` is at most `bound`,
// by de Casteljau halving up to `depth` times.
fn bernstein_bounded(p: &[BigInt], bound: &BigInt, depth: u32) -> bool {
    if p.iter().all(|c| c <= bound) {
        return true;
    }
    if p[0] > *bound || p[p.len() - 1] > *bound || depth == 0 {
        return false;
    }
    // halves scaled by 2^d so everything stays integral
    let d = p.len() - 1;
    let mut rows = vec![p.iter().map(|c| c << d).collect::<Vec<BigInt>>()];
    for r in 1..=d {
        let prev = &rows[r - 1];
        rows.push((0..=d - r).map(|i| (&prev[i] + &prev[i + 1]) >> 1).collect());
    }
    let left: Vec<BigInt> = (0..=d).map(|r| rows[r][0].clone()).collect();
    let right: Vec<BigInt> = (0..=d).map(|r| rows[d - r][r].clone()).collect();
    let scaled = bound << d;
    bernstein_bounded(&left, &scaled, depth - 1) && bernstein_bounded(&right, &scaled, depth - 1)
}

/// Binary64 copy of a [`DyadicPiecewisePoly`] for evaluation inside
/// quadrature loops.
#[derive(Clone, Debug)]
pub struct PiecewiseF64 {
    grid_level: u32,
    degree: usize,
    coeffs: Vec<f64>,
}

impl PiecewiseF64 {
    /// The constant 1.
    pub fn one() -> Self {
        Self {
            grid_level: 0,
            degree: 0,
            coeffs: vec![1.0],
        }
    }

    pub fn grid_level(&self) -> u32 {
        self.grid_level
    }

    pub fn piece(&self, j: usize) -> &[f64] {
        let w = self.degree + 1;
        &self.coeffs[j * w..(j + 1) * w]
    }

    /// Value on piece `j` at local coordinate `t ∈ [0, 1]`.
    pub fn eval_local(&self, j: usize, t: f64) -> f64 {
        let c = self.piece(j);
        if c.len() > 64 {
            return de_casteljau(&mut c.to_vec(), t);
        }
        let mut buf = [0.0f64; 64];
        buf[..c.len()].copy_from_slice(c);
        de_casteljau(&mut buf[..c.len()], t)
    }

    pub fn eval(&self, y: f64) -> f64 {
        let scaled = y * (self.grid_level as f64).exp2();
        let j = (scaled.floor() as usize).min((1 << self.grid_level) - 1);
        self.eval_local(j, scaled - j as f64)
    }

    fn lp_quadrature(&self, p: f64, rule: &UnitRule) -> f64 {
        let width = (-(self.grid_level as f64)).exp2();
        let total = compensated_sum((0..1usize << self.grid_level).map(|j| {
            rule.nodes()
                .iter()
                .zip(rule.weights())
                .map(|(&t, &w)| w * self.eval_local(j, t).abs().powf(p))
                .sum::<f64>()
                * width
        }));
        total.powf(1.0 / p)
    }
}

fn de_casteljau(b: &mut [f64], t: f64) -> f64 {
    let n = b.len();
    for r in 1..n {
        for i in 0..n - r {
            b[i] = b[i] * (1.0 - t) + b[i + 1] * t;
        }
    }
    b[0]
}

/// `W(k)` on the grid of spacing `2^{-(a_1+1)}`, with the grid level capped
/// at `max_grid`.
pub fn build_w_with_limit(k: u64, max_grid: u32) -> Result<DyadicPiecewisePoly> {
    let idx = digits(k);
    let grid = idx.resolution();
    if grid > max_grid {
        return Err(Error::Budget {
            what: "W-kernel grid pieces",
            needed: 1u128 << grid,
            limit: 1u128 << max_grid,
        });
    }
    let mut w = DyadicPiecewisePoly::constant_one(grid);
    for &a in idx.exponents() {
        w = w.integrate_chi(a + 1);
    }
    Ok(w)
}

pub fn build_w(k: u64) -> Result<DyadicPiecewisePoly> {
    build_w_with_limit(k, DEFAULT_MAX_GRID)
}

/// Visit `W(k)` for every `1 ≤ k < 2^bits`, each built from `W(k - 2^{a_N})`
/// by a single integration step. Calls may arrive in any order and from
/// several threads.
pub fn for_each_w<F>(bits: u32, f: F) -> Result<()>
where
    F: Fn(u64, &DyadicPiecewisePoly) + Sync,
{
    if bits > DEFAULT_MAX_GRID {
        return Err(Error::Budget {
            what: "W-kernel grid pieces",
            needed: 1u128 << bits,
            limit: 1u128 << DEFAULT_MAX_GRID,
        });
    }
    fn descend<F: Fn(u64, &DyadicPiecewisePoly) + Sync>(
        k: u64,
        low: u32,
        w: &DyadicPiecewisePoly,
        f: &F,
    ) {
        f(k, w);
        for b in 0..low {
            let child = w.integrate_chi(b + 1);
            descend(k | 1 << b, b, &child, f);
        }
    }
    (0..bits).into_par_iter().for_each(|a| {
        let w = DyadicPiecewisePoly::constant_one(a + 1).integrate_chi(a + 1);
        descend(1 << a, a, &w, &f);
    });
    Ok(())
}

/// `W(k)(x) = Π_i W(k_i)(x_i)` for dyadic `x`, exactly.
pub fn w_eval_multi(k: &MultiIndex, x: &[DyadicValue]) -> Result<BigRational> {
    if k.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: k.dim(),
            got: x.len(),
        });
    }
    let mut acc = BigRational::one();
    for (ki, &xi) in k.values().iter().zip(x) {
        if *ki != 0 {
            acc *= build_w(*ki)?.eval(xi);
        }
    }
    Ok(acc)
}
