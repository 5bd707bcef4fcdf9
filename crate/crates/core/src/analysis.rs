//! Walsh coefficients, dyadic differences, and checks of the identities that
//! tie them to derivatives.
//!
//! With `d_{k_u}` the composition of `∂_{i, a_{i,j}+1}` over the leading
//! `min(u_i, N_i)` digits of each `k_i`, and `r = min(u, N_k)`:
//!
//! ```text
//! f̂(k) = (-1)^{|r|} 2^{-μ′_u(k)} (d_{k_u} f)^(k)                       (discrete)
//! f̂(k) = (-1)^{|r|} 2^{-μ′_u(k)} ∫ f^{(r)} · W(k_≤^u) · wal_{k_>^u}      (continuous)
//! |f̂(k_v; 0)| ≤ 2^{|v|/p} 2^{-μ′_α(k_v)} ‖f^{(min(α, N))}‖_p
//! ```
//!
//! Every Walsh function here is constant on the cells of side
//! `2^{-(a_1+1)}`, so coefficients are signed sums of cell integrals and a
//! dyadic difference acts on the vector of cell integrals as a permutation.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::dyadic::{digits, xor_shift_f64};
use crate::error::{Error, Result};
use crate::functions::{FunctionHandle, Integrand, ProductFunction};
use crate::numeric::{compensated_sum, UnitRule};
use crate::weights::{mu_prime, mu_prime_u, split_by_order, Order};
use crate::dyadic::MultiIndex;
use crate::wkernel::{build_w, PiecewiseF64};

/// Tolerance for paths that only round in binary64.
pub const EXACT_TOLERANCE: f64 = 1e-12;
/// Floor of the tolerance for quadrature paths.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

/// Tolerance for a quadrature result with the given error estimate.
pub fn quadrature_tolerance(estimate: f64) -> f64 {
    QUADRATURE_TOLERANCE.max(10.0 * estimate)
}

/// A computed value with an error estimate (zero for exact paths).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// How a Walsh coefficient is computed.
#[derive(Clone, Debug, PartialEq)]
pub enum CoeffMethod {
    /// Signed exact integrals over the cells where `wal_k` is constant.
    Exact,
    /// Gauss–Legendre on each cell of the given per-coordinate levels
    /// (`None`: the coarsest levels resolving `wal_k`).
    Quadrature { levels: Option<Vec<u32>>, nodes: usize },
}

impl CoeffMethod {
    pub fn quadrature(nodes: usize) -> Self {
        CoeffMethod::Quadrature { levels: None, nodes }
    }
}

/// Largest number of cells (times nodes) a tensor computation may visit.
pub const CELL_BUDGET: u64 = 1 << 26;

fn resolution(k: u64) -> u32 {
    digits(k).resolution()
}

fn check_dim(f: &dyn Integrand, k: &[u64]) -> Result<()> {
    if f.dim() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: k.len(),
        });
    }
    Ok(())
}

/// Sign of `wal_k` on cell `c` of level `g ≥ a_1 + 1`.
pub fn cell_sign(k: u64, c: u64, g: u32) -> f64 {
    let rev = if g == 0 { 0 } else { c.reverse_bits() >> (64 - g) };
    if (k & rev).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn cell_count(levels: &[u32], nodes_per_cell: u64) -> Result<u64> {
    let total: u32 = levels.iter().sum();
    let needed = (1u128 << total) * nodes_per_cell as u128;
    if total > 40 || needed > CELL_BUDGET as u128 {
        return Err(Error::Budget {
            what: "cells",
            needed,
            limit: CELL_BUDGET as u128,
        });
    }
    Ok(1 << total)
}

// Cell index c ↦ per-coordinate cells, coordinate 0 varying slowest.
fn split_index(mut c: u64, levels: &[u32], out: &mut [u64]) {
    for i in (0..levels.len()).rev() {
        out[i] = c & ((1 << levels[i]) - 1);
        c >>= levels[i];
    }
}

/// Integrals of `f` over every cell of the grid with side `2^{-levels_i}` in
/// coordinate `i`, exactly when `nodes` is `None`.
pub fn cell_integrals(f: &dyn Integrand, levels: &[u32], nodes: Option<usize>) -> Result<(Vec<f64>, f64)> {
    let s = levels.len();
    let per_cell = nodes.map_or(1, |q| (2 * q as u64).pow(s as u32));
    let cells = cell_count(levels, per_cell)?;
    let mut lo = vec![0.0; s];
    let mut hi = vec![0.0; s];
    let mut idx = vec![0u64; s];
    let mut out = Vec::with_capacity(cells as usize);
    let mut err = 0.0f64;
    let rules = nodes.map(|q| (UnitRule::gauss_legendre(q), UnitRule::gauss_legendre(2 * q)));
    for c in 0..cells {
        split_index(c, levels, &mut idx);
        for i in 0..s {
            let w = (-(levels[i] as f64)).exp2();
            lo[i] = idx[i] as f64 * w;
            hi[i] = lo[i] + w;
        }
        match &rules {
            None => out.push(f.box_integral(&lo, &hi)?),
            Some((coarse, fine)) => {
                let a = tensor_quadrature(coarse, &lo, &hi, |x| Ok(f.eval(x)))?;
                let b = tensor_quadrature(fine, &lo, &hi, |x| Ok(f.eval(x)))?;
                err += (a - b).abs();
                out.push(b);
            }
        }
    }
    Ok((out, err))
}

/// `∫_box g` by the tensor product of a one-dimensional rule.
pub fn tensor_quadrature<G>(rule: &UnitRule, lo: &[f64], hi: &[f64], mut g: G) -> Result<f64>
where
    G: FnMut(&[f64]) -> Result<f64>,
{
    let s = lo.len();
    let q = rule.len();
    let total = q.pow(s as u32);
    let mut x = vec![0.0; s];
    let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
    let mut acc = Vec::with_capacity(total);
    for t in 0..total {
        let mut r = t;
        let mut w = vol;
        for i in 0..s {
            let j = r % q;
            r /= q;
            x[i] = lo[i] + (hi[i] - lo[i]) * rule.nodes()[j];
            w *= rule.weights()[j];
        }
        acc.push(w * g(&x)?);
    }
    Ok(compensated_sum(acc))
}

/// `Σ_c wal_k(c) · cells[c]` over a grid fine enough to resolve `k`.
pub fn signed_cell_sum(cells: &[f64], levels: &[u32], k: &[u64]) -> f64 {
    let mut idx = vec![0u64; levels.len()];
    compensated_sum(cells.iter().enumerate().map(|(c, &v)| {
        split_index(c as u64, levels, &mut idx);
        let sign: f64 = k
            .iter()
            .zip(&idx)
            .zip(levels)
            .map(|((&ki, &ci), &g)| cell_sign(ki, ci, g))
            .product();
        sign * v
    }))
}

/// Replace cell integrals of `g` by those of `∂_{i,n} g`: the shift
/// `x ⊕ 2^{-n}` maps whole cells onto cells, so the new entry is
/// `2^n (cells[c ⊕ bit] - cells[c])`.
pub fn apply_difference(cells: &mut [f64], levels: &[u32], i: usize, n: u32) {
    assert!(n >= 1 && n <= levels[i], "difference level {n} not resolved by grid");
    let below: u32 = levels[i + 1..].iter().sum();
    let flip = 1usize << (below + levels[i] - n);
    let scale = (n as f64).exp2();
    for c in 0..cells.len() {
        if c & flip == 0 {
            let (a, b) = (cells[c], cells[c | flip]);
            cells[c] = scale * (b - a);
            cells[c | flip] = scale * (a - b);
        }
    }
}

/// `∫ f · wal_k`.
pub fn walsh_coeff(f: &dyn Integrand, k: &[u64], method: &CoeffMethod) -> Result<Estimate> {
    check_dim(f, k)?;
    let needed: Vec<u32> = k.iter().map(|&ki| resolution(ki)).collect();
    match method {
        CoeffMethod::Exact => {
            if let Some(w) = f.as_walsh() {
                return Ok(Estimate {
                    value: w.coefficient(k),
                    error: 0.0,
                });
            }
            if let Some(p) = f.as_product() {
                return Ok(Estimate {
                    value: product_coeff(p, k),
                    error: 0.0,
                });
            }
            let (cells, _) = cell_integrals(f, &needed, None)?;
            Ok(Estimate {
                value: signed_cell_sum(&cells, &needed, k),
                error: 0.0,
            })
        }
        CoeffMethod::Quadrature { levels, nodes } => {
            let levels = levels.clone().unwrap_or_else(|| needed.clone());
            if levels.len() != k.len() {
                return Err(Error::DimensionMismatch {
                    expected: k.len(),
                    got: levels.len(),
                });
            }
            for (&have, &need) in levels.iter().zip(&needed) {
                if have < need {
                    return Err(Error::InsufficientLevel { level: have, needed: need });
                }
            }
            let (cells, err) = cell_integrals(f, &levels, Some(*nodes))?;
            Ok(Estimate {
                value: signed_cell_sum(&cells, &levels, k),
                error: err,
            })
        }
    }
}

/// One-dimensional `∫ f · wal_k` for a factor, from exact cell integrals.
fn factor_coeff(f: &crate::functions::Factor, k: u64) -> f64 {
    let g = resolution(k);
    let w = (-(g as f64)).exp2();
    compensated_sum((0..1u64 << g).map(|c| {
        let a = c as f64 * w;
        cell_sign(k, c, g) * f.integral(a, a + w)
    }))
}

fn product_coeff(p: &ProductFunction, k: &[u64]) -> f64 {
    p.factors().iter().zip(k).map(|(f, &ki)| factor_coeff(f, ki)).product()
}

/// `∂_{i,n} f (x) = (f(…, x_i ⊕ 2^{-n}, …) - f(x)) / 2^{-n}`.
#[derive(Clone)]
pub struct DyadicDifference {
    inner: FunctionHandle,
    coord: usize,
    n: u32,
}

impl fmt::Debug for DyadicDifference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

pub fn dyadic_difference(f: FunctionHandle, coord: usize, n: u32) -> Result<FunctionHandle> {
    if coord >= f.dim() || n == 0 || n > 52 {
        return Err(Error::InvalidParameter(format!(
            "difference ∂_({},{n}) is out of range for a function of {} variables",
            coord + 1,
            f.dim()
        )));
    }
    Ok(Arc::new(DyadicDifference { inner: f, coord, n }))
}

/// `d_{k_u} f`: the differences `∂_{i, a_{i,j}+1}` over the leading
/// `min(u_i, N_i)` digits of every `k_i`.
pub fn compose_differences(f: FunctionHandle, k: &[u64], u: &[Order]) -> Result<FunctionHandle> {
    let mut g = f;
    for (i, (&ki, &ui)) in k.iter().zip(u).enumerate() {
        let (head, _) = split_by_order(&digits(ki), ui);
        for &a in head.exponents() {
            g = dyadic_difference(g, i, a + 1)?;
        }
    }
    Ok(g)
}

impl Integrand for DyadicDifference {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn label(&self) -> String {
        format!("d[{},{}]({})", self.coord + 1, self.n, self.inner.label())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let mut y = x.to_vec();
        y[self.coord] = xor_shift_f64(x[self.coord], self.n);
        (self.inner.eval(&y) - self.inner.eval(x)) * (self.n as f64).exp2()
    }

    fn box_integral(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        // on each run of constant digit n the shift is a translation by ±2^{-n}
        let i = self.coord;
        let h = (-(self.n as f64)).exp2();
        let mut shifted = 0.0;
        let mut a = lo[i];
        while a < hi[i] {
            let cell = (a / h).floor();
            let b = ((cell + 1.0) * h).min(hi[i]);
            let t = if cell as u64 % 2 == 0 { h } else { -h };
            let (mut l2, mut h2) = (lo.to_vec(), hi.to_vec());
            l2[i] = a + t;
            h2[i] = b + t;
            shifted += self.inner.box_integral(&l2, &h2)?;
            a = b;
        }
        Ok((shifted - self.inner.box_integral(lo, hi)?) * (self.n as f64).exp2())
    }

    fn smoothness(&self) -> Order {
        Order::Finite(0)
    }
}

/// An integrand given by a closure, with no derivative or integral oracle.
pub struct ClosureFunction<F> {
    dim: usize,
    label: String,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ClosureFunction<F> {
    pub fn new(dim: usize, label: impl Into<String>, f: F) -> Self {
        Self {
            dim,
            label: label.into(),
            f,
        }
    }
}

impl<F> fmt::Debug for ClosureFunction<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Integrand for ClosureFunction<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn smoothness(&self) -> Order {
        Order::Finite(0)
    }
}

/// One verified identity: `lhs` against `rhs` at the given tolerance.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CheckRecord {
    #[serde(rename = "function-id")]
    pub function_id: String,
    pub k: String,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(rename = "|diff|")]
    pub diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new(function_id: impl Into<String>, k: &[u64], lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let diff = (lhs - rhs).abs();
        Self {
            function_id: function_id.into(),
            k: format_k(k),
            lhs,
            rhs,
            diff,
            tolerance,
            pass: diff <= tolerance,
        }
    }
}

impl CheckRecord {
    /// A one-sided check `lhs ≤ rhs + tolerance`.
    pub fn at_most(function_id: impl Into<String>, k: &[u64], lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let diff = (lhs - rhs).max(0.0);
        Self {
            function_id: function_id.into(),
            k: format_k(k),
            lhs,
            rhs,
            diff,
            tolerance,
            pass: diff <= tolerance,
        }
    }

    /// A yes/no property, recorded as `1` or `0` against `1`.
    pub fn holds(function_id: impl Into<String>, k: &[u64], ok: bool) -> Self {
        let mut r = Self::new(function_id, k, if ok { 1.0 } else { 0.0 }, 1.0, 0.0);
        r.pass = ok;
        r
    }
}

pub fn format_k(k: &[u64]) -> String {
    let parts: Vec<String> = k.iter().map(u64::to_string).collect();
    format!("({})", parts.join(" "))
}

pub fn write_records<W: std::io::Write>(records: &[CheckRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `(-1)^{|min(u, N_k)|} 2^{-μ′_u(k)}`.
pub fn identity_factor(k: &[u64], u: &[Order]) -> Result<f64> {
    let mi = MultiIndex::new(k);
    let count = crate::weights::counted_digits(&mi, u);
    let sign = if count % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * (-(mu_prime_u(&mi, u)? as f64)).exp2())
}

/// Left and right side of the discrete identity with the error estimate of
/// the cell integrals, all from one grid of cell integrals.
fn disc_sides(cells: &[f64], levels: &[u32], k: &[u64], u: &[Order]) -> Result<(f64, f64)> {
    let lhs = signed_cell_sum(cells, levels, k);
    let mut diffed = cells.to_vec();
    for (i, (&ki, &ui)) in k.iter().zip(u).enumerate() {
        let (head, _) = split_by_order(&digits(ki), ui);
        for &a in head.exponents() {
            apply_difference(&mut diffed, levels, i, a + 1);
        }
    }
    Ok((lhs, identity_factor(k, u)? * signed_cell_sum(&diffed, levels, k)))
}

/// Product of estimates, with `Σ_i e_i Π_{j≠i} (|v_j| + e_j)` as error.
fn product_estimate(parts: &[Estimate]) -> Estimate {
    let value = parts.iter().map(|e| e.value).product();
    let error = (0..parts.len())
        .map(|i| {
            parts[i].error
                * parts
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, e)| e.value.abs() + e.error)
                    .product::<f64>()
        })
        .sum();
    Estimate { value, error }
}

fn check_orders(k: &[u64], u: &[Order]) -> Result<()> {
    if u.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            got: u.len(),
        });
    }
    Ok(())
}

/// Both sides of the discrete identity, computed on the vector of cell
/// integrals. Vectors are cached per grid, so a batch over many `k` costs
/// one set of integrals per distinct grid. For product functions both sides
/// are products of one-dimensional sides, which are cached per coordinate.
pub struct DiscIdChecker {
    f: FunctionHandle,
    nodes: Option<usize>,
    cache: HashMap<Vec<u32>, (Vec<f64>, f64)>,
    factors: HashMap<(usize, u64, Order), (Estimate, Estimate)>,
}

impl DiscIdChecker {
    /// Cell integrals come from the exact oracle, or from Gauss–Legendre
    /// with `nodes` points when given.
    pub fn new(f: FunctionHandle, nodes: Option<usize>) -> Self {
        Self {
            f,
            nodes,
            cache: HashMap::new(),
            factors: HashMap::new(),
        }
    }

    fn tolerance(&self, err: f64) -> f64 {
        if self.nodes.is_some() {
            quadrature_tolerance(err)
        } else {
            EXACT_TOLERANCE
        }
    }

    pub fn check(&mut self, k: &[u64], u: &[Order]) -> Result<CheckRecord> {
        check_dim(self.f.as_ref(), k)?;
        check_orders(k, u)?;
        if let Some(p) = self.f.as_product().cloned() {
            let mut lhs = Vec::with_capacity(k.len());
            let mut rhs = Vec::with_capacity(k.len());
            for (i, (&ki, &ui)) in k.iter().zip(u).enumerate() {
                let key = (i, ki, ui);
                if !self.factors.contains_key(&key) {
                    let one = ProductFunction::new(vec![p.factors()[i].clone()]);
                    let levels = [resolution(ki)];
                    let (cells, err) = cell_integrals(&one, &levels, self.nodes)?;
                    let (l, r) = disc_sides(&cells, &levels, &[ki], &[ui])?;
                    let e = |value| Estimate { value, error: err };
                    self.factors.insert(key, (e(l), e(r)));
                }
                let (l, r) = self.factors[&key];
                lhs.push(l);
                rhs.push(r);
            }
            let (l, r) = (product_estimate(&lhs), product_estimate(&rhs));
            let tol = self.tolerance(l.error + r.error);
            return Ok(CheckRecord::new(self.f.label(), k, l.value, r.value, tol));
        }
        let levels: Vec<u32> = k.iter().map(|&ki| resolution(ki)).collect();
        if !self.cache.contains_key(&levels) {
            let computed = cell_integrals(self.f.as_ref(), &levels, self.nodes)?;
            self.cache.insert(levels.clone(), computed);
        }
        let (cells, err) = &self.cache[&levels];
        let (lhs, rhs) = disc_sides(cells, &levels, k, u)?;
        let tol = self.tolerance(*err);
        Ok(CheckRecord::new(self.f.label(), k, lhs, rhs, tol))
    }
}

/// The discrete identity for a single `k`, exact oracle.
pub fn check_disc_id(f: FunctionHandle, k: &[u64], u: &[Order]) -> Result<CheckRecord> {
    DiscIdChecker::new(f, None).check(k, u)
}

/// The discrete identity with the right side taken from the composed
/// [`DyadicDifference`] handle and its shifted box integrals.
pub fn check_disc_id_composed(f: FunctionHandle, k: &[u64], u: &[Order]) -> Result<CheckRecord> {
    let lhs = walsh_coeff(f.as_ref(), k, &CoeffMethod::Exact)?.value;
    let d = compose_differences(f.clone(), k, u)?;
    let rhs = identity_factor(k, u)? * walsh_coeff(d.as_ref(), k, &CoeffMethod::Exact)?.value;
    Ok(CheckRecord::new(f.label(), k, lhs, rhs, EXACT_TOLERANCE))
}

fn kernel_cache() -> &'static Mutex<HashMap<u64, Arc<PiecewiseF64>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<PiecewiseF64>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Binary64 `W(k)`, built once per `k`.
pub fn kernel(k: u64) -> Result<Arc<PiecewiseF64>> {
    if k == 0 {
        return Ok(Arc::new(PiecewiseF64::one()));
    }
    if let Some(w) = kernel_cache().lock().expect("cache poisoned").get(&k) {
        return Ok(w.clone());
    }
    let w = Arc::new(build_w(k)?.to_f64());
    kernel_cache().lock().expect("cache poisoned").insert(k, w.clone());
    Ok(w)
}

/// `Π_i ∫ g_i` over cells of level `g_i`, node-doubled for an error estimate.
fn conti_integral_1d<G: Fn(f64) -> f64>(level: u32, nodes: usize, g: G) -> Estimate {
    let (coarse, fine) = (UnitRule::gauss_legendre(nodes), UnitRule::gauss_legendre(2 * nodes));
    let w = (-(level as f64)).exp2();
    let mut a = Vec::with_capacity(1 << level);
    let mut b = Vec::with_capacity(1 << level);
    for c in 0..1u64 << level {
        let lo = c as f64 * w;
        a.push(coarse.integrate(lo, lo + w, &g));
        b.push(fine.integrate(lo, lo + w, &g));
    }
    let (a, b) = (compensated_sum(a), compensated_sum(b));
    Estimate {
        value: b,
        error: (a - b).abs(),
    }
}

/// Right side of the continuous identity, `∫ f^{(r)} · W(k_≤) · wal_{k_>}`,
/// without the sign and weight factor.
pub fn conti_integral(f: &dyn Integrand, k: &[u64], u: &[Order], nodes: usize) -> Result<Estimate> {
    check_dim(f, k)?;
    let s = k.len();
    let mut order = Vec::with_capacity(s);
    let mut kernels = Vec::with_capacity(s);
    let mut rests = Vec::with_capacity(s);
    for (&ki, &ui) in k.iter().zip(u) {
        let (head, rest) = split_by_order(&digits(ki), ui);
        order.push(head.digit_count() as u32);
        kernels.push(kernel(head.value())?);
        rests.push(rest.value());
    }
    let levels: Vec<u32> = k.iter().map(|&ki| resolution(ki)).collect();
    let wal = |ki: u64, x: f64| crate::dyadic::walsh_eval_f64(ki, x);
    if let Some(p) = f.as_product() {
        let parts: Vec<Estimate> = p
            .factors()
            .iter()
            .enumerate()
            .map(|(i, factor)| {
                let d = factor.derivative(order[i]);
                let (w, rest) = (&kernels[i], rests[i]);
                conti_integral_1d(levels[i], nodes, |x| d.eval(x) * w.eval(x) * wal(rest, x))
            })
            .collect();
        return Ok(product_estimate(&parts));
    }
    // tensor path for integrands with only a derivative oracle
    let per_cell = (2 * nodes as u64).pow(s as u32);
    let cells = cell_count(&levels, per_cell)?;
    let (coarse, fine) = (UnitRule::gauss_legendre(nodes), UnitRule::gauss_legendre(2 * nodes));
    let integrand = |x: &[f64]| -> Result<f64> {
        let mut v = f.derivative(&order, x)?;
        for i in 0..s {
            v *= kernels[i].eval(x[i]) * wal(rests[i], x[i]);
        }
        Ok(v)
    };
    let mut idx = vec![0u64; s];
    let (mut lo, mut hi) = (vec![0.0; s], vec![0.0; s]);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for c in 0..cells {
        split_index(c, &levels, &mut idx);
        for i in 0..s {
            let w = (-(levels[i] as f64)).exp2();
            lo[i] = idx[i] as f64 * w;
            hi[i] = lo[i] + w;
        }
        a.push(tensor_quadrature(&coarse, &lo, &hi, integrand)?);
        b.push(tensor_quadrature(&fine, &lo, &hi, integrand)?);
    }
    let (a, b) = (compensated_sum(a), compensated_sum(b));
    Ok(Estimate {
        value: b,
        error: (a - b).abs(),
    })
}

/// Nodes per cell used by the continuous-identity quadrature by default.
pub const CONTI_NODES: usize = 12;

/// The continuous identity: exact coefficient (or quadrature when the
/// function has no integral oracle) against the kernel integral.
pub fn check_conti_id(f: &dyn Integrand, k: &[u64], u: &[Order], nodes: usize) -> Result<CheckRecord> {
    check_orders(k, u)?;
    let lhs = match walsh_coeff(f, k, &CoeffMethod::Exact) {
        Ok(e) => e,
        Err(Error::MissingIntegral { .. }) => walsh_coeff(f, k, &CoeffMethod::quadrature(nodes))?,
        Err(e) => return Err(e),
    };
    let integral = conti_integral(f, k, u, nodes)?;
    let factor = identity_factor(k, u)?;
    let rhs = factor * integral.value;
    let tol = quadrature_tolerance(lhs.error + factor.abs() * integral.error);
    Ok(CheckRecord::new(f.label(), k, lhs.value, rhs, tol))
}

/// [`check_conti_id`] over many `k` for one function. Product functions
/// have both sides cached per coordinate.
pub struct ContiIdChecker {
    f: FunctionHandle,
    nodes: usize,
    factors: HashMap<(usize, u64, Order), (f64, Estimate)>,
}

impl ContiIdChecker {
    pub fn new(f: FunctionHandle, nodes: usize) -> Self {
        Self {
            f,
            nodes,
            factors: HashMap::new(),
        }
    }

    pub fn check(&mut self, k: &[u64], u: &[Order]) -> Result<CheckRecord> {
        check_dim(self.f.as_ref(), k)?;
        check_orders(k, u)?;
        let Some(p) = self.f.as_product().cloned() else {
            return check_conti_id(self.f.as_ref(), k, u, self.nodes);
        };
        let mut lhs = 1.0;
        let mut rhs = Vec::with_capacity(k.len());
        for (i, (&ki, &ui)) in k.iter().zip(u).enumerate() {
            let key = (i, ki, ui);
            if !self.factors.contains_key(&key) {
                let one = ProductFunction::new(vec![p.factors()[i].clone()]);
                let coeff = product_coeff(&one, &[ki]);
                let e = conti_integral(&one, &[ki], &[ui], self.nodes)?;
                let factor = identity_factor(&[ki], &[ui])?;
                let side = Estimate {
                    value: factor * e.value,
                    error: factor.abs() * e.error,
                };
                self.factors.insert(key, (coeff, side));
            }
            let (c, r) = self.factors[&key];
            lhs *= c;
            rhs.push(r);
        }
        let r = product_estimate(&rhs);
        Ok(CheckRecord::new(self.f.label(), k, lhs, r.value, quadrature_tolerance(r.error)))
    }
}

/// `|f̂(k)|` and the bound `2^{|v|/p} 2^{-μ′_α(k)} ‖f^{(min(α,N))}‖_p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientBound {
    pub coeff: f64,
    pub bound: f64,
}

impl CoefficientBound {
    pub fn holds(&self, tol: f64) -> bool {
        self.coeff <= self.bound + tol
    }
}

pub fn coefficient_bound(f: &ProductFunction, k: &[u64], alpha: Order, p: f64) -> Result<CoefficientBound> {
    check_dim(f, k)?;
    let alpha = alpha.require_smoothness()?;
    crate::functions::check_exponent("p", p)?;
    let mi = MultiIndex::new(k);
    let v = mi.support();
    let order: Vec<u32> = v
        .iter()
        .map(|&i| alpha.cap(mi.components()[i].digit_count()) as u32)
        .collect();
    let norm = f.norm_fp(&v, &order, p)?;
    let scale = if p.is_infinite() { 1.0 } else { (v.len() as f64 / p).exp2() };
    Ok(CoefficientBound {
        coeff: product_coeff(f, k).abs(),
        bound: scale * (-(mu_prime(&mi, alpha) as f64)).exp2() * norm,
    })
}

/// Per-coordinate factors of [`coefficient_bound`] for a product function:
/// `coeff[i][k_i]` and `bound[i][k_i]` for `k_i < 2^bits`, whose products over
/// `i` give `|f̂(k)|` and the bound for every `k`.
#[derive(Clone, Debug)]
pub struct BoundTable {
    pub coeff: Vec<Vec<f64>>,
    pub bound: Vec<Vec<f64>>,
}

impl BoundTable {
    pub fn new(f: &ProductFunction, bits: u32, alpha: Order, p: f64) -> Result<Self> {
        if bits > 16 {
            return Err(Error::Budget {
                what: "table entries",
                needed: 1u128 << bits,
                limit: 1 << 16,
            });
        }
        let mut coeff = Vec::with_capacity(f.dim());
        let mut bound = Vec::with_capacity(f.dim());
        for factor in f.factors() {
            let one = ProductFunction::new(vec![factor.clone()]);
            let rows: Vec<CoefficientBound> =
                (0..1u64 << bits).map(|k| coefficient_bound(&one, &[k], alpha, p)).collect::<Result<_>>()?;
            coeff.push(rows.iter().map(|r| r.coeff).collect());
            bound.push(rows.iter().map(|r| r.bound).collect());
        }
        Ok(Self { coeff, bound })
    }

    pub fn get(&self, k: &[u64]) -> CoefficientBound {
        let mut out = CoefficientBound { coeff: 1.0, bound: 1.0 };
        for (i, &ki) in k.iter().enumerate() {
            out.coeff *= self.coeff[i][ki as usize];
            out.bound *= self.bound[i][ki as usize];
        }
        out
    }
}

/// Outcome of the sign check: `f̂(k) (-1)^{Σ N_i} ≥ -tol`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignCheck {
    pub signed_coeff: f64,
    /// Whether `f^{(N_1, …, N_s)} ≥ 0` on the unit cube, checked per factor.
    pub precondition: bool,
    pub pass: bool,
}

pub const SIGN_TOLERANCE: f64 = 1e-10;

pub fn check_sign_rule(f: &ProductFunction, k: &[u64]) -> Result<SignCheck> {
    check_dim(f, k)?;
    let n: Vec<u32> = k.iter().map(|&ki| ki.count_ones()).collect();
    let total: u32 = n.iter().sum();
    let coeff = product_coeff(f, k);
    let signed = if total % 2 == 0 { coeff } else { -coeff };
    let mut negative = 0;
    let mut definite = true;
    for (factor, &ni) in f.factors().iter().zip(&n) {
        let d = factor.derivative(ni);
        let (lo, hi) = d.range();
        if lo >= 0.0 {
            continue;
        } else if hi <= 0.0 {
            negative += 1;
        } else {
            definite = false;
        }
    }
    Ok(SignCheck {
        signed_coeff: signed,
        precondition: definite && negative % 2 == 0,
        pass: signed >= -SIGN_TOLERANCE,
    })
}
