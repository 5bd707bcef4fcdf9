//! Batch checks of the kernel lemmas and the coefficient identities, reduced
//! to one summary row per family.

use std::sync::Mutex;
use std::time::Instant;

use num_rational::BigRational;
use rayon::prelude::*;

use crate::analysis::{
    check_sign_rule, BoundTable, CheckRecord, ContiIdChecker, DiscIdChecker, CONTI_NODES,
};
use crate::dyadic::digits;
use crate::error::{Error, Result};
use crate::functions::{FunctionHandle, Integrand, ProductFunction};
use crate::weights::Order;
use crate::wkernel::{for_each_w, DyadicPiecewisePoly};

/// Exponents at which `‖W(k)‖_p ≤ 2^{1-1/p}` is checked by quadrature.
pub const KERNEL_LP_EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];
/// Tolerance added to quadrature norms.
pub const KERNEL_LP_TOLERANCE: f64 = 1e-9;
/// Tolerance of the sign check.
pub const SIGN_TOLERANCE: f64 = crate::analysis::SIGN_TOLERANCE;

/// One family of checks: how many cases ran, how many failed, and the worst.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Summary {
    pub check: String,
    pub subject: String,
    pub config: String,
    pub cases: u64,
    pub failures: u64,
    /// `|diff| - tolerance` at the worst case, clamped to `≤ 0` when it passed.
    pub worst_margin: f64,
    pub worst_k: String,
    pub seconds: f64,
}

impl Summary {
    pub fn new(check: impl Into<String>, subject: impl Into<String>, config: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            subject: subject.into(),
            config: config.into(),
            cases: 0,
            failures: 0,
            worst_margin: f64::NEG_INFINITY,
            worst_k: String::new(),
            seconds: 0.0,
        }
    }

    pub fn add(&mut self, r: &CheckRecord) {
        self.observe(r.pass, r.diff - r.tolerance, || r.k.clone());
    }

    /// Counts one case; `k` is only formatted when it becomes the worst.
    pub fn observe(&mut self, pass: bool, margin: f64, k: impl FnOnce() -> String) {
        self.cases += 1;
        if !pass {
            self.failures += 1;
        }
        let margin = if margin.is_nan() { f64::INFINITY } else { margin };
        // a failing case always outranks a passing one
        let margin = if pass { margin.min(0.0) } else { margin.max(f64::MIN_POSITIVE) };
        if margin > self.worst_margin || self.worst_k.is_empty() {
            self.worst_margin = margin;
            self.worst_k = k();
        }
    }

    pub fn merge(&mut self, other: &Summary) {
        self.cases += other.cases;
        self.failures += other.failures;
        if other.worst_margin > self.worst_margin || self.worst_k.is_empty() {
            self.worst_margin = other.worst_margin;
            self.worst_k = other.worst_k.clone();
        }
    }

    pub fn pass(&self) -> bool {
        self.failures == 0
    }

    /// A `FAIL:` line for reporting, or `None` when the family passed.
    pub fn fail_line(&self) -> Option<String> {
        (!self.pass()).then(|| {
            format!(
                "FAIL: {} {} [{}]: {} of {} cases, worst at k={} (excess {:e})",
                self.check, self.subject, self.config, self.failures, self.cases, self.worst_k, self.worst_margin
            )
        })
    }
}

pub fn write_summaries<W: std::io::Write>(rows: &[Summary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Every `k` with `k_i < bound_i`, first coordinate varying fastest.
pub fn index_box(bounds: &[u64]) -> impl Iterator<Item = Vec<u64>> + '_ {
    let total: u64 = bounds.iter().product();
    (0..total).map(move |mut t| {
        bounds
            .iter()
            .map(|&b| {
                let v = t % b;
                t /= b;
                v
            })
            .collect()
    })
}

/// The kernel properties of one `W(k)`: exact `L¹ = 1`, exact `L^∞ = 2`,
/// nonnegative Bernstein coefficients, continuity, period `2^{-a_N}`,
/// degree at most `N`, and `‖W(k)‖_p ≤ 2^{1-1/p}` for
/// [`KERNEL_LP_EXPONENTS`].
pub fn kernel_records(k: u64, w: &DyadicPiecewisePoly) -> Vec<CheckRecord> {
    let d = digits(k);
    let one = BigRational::from_integer(1.into());
    let two = BigRational::from_integer(2.into());
    let l1 = w.l1_norm().ok();
    let sup = w.sup_norm().ok();
    let as_f64 = |x: &Option<BigRational>| x.as_ref().map_or(f64::NAN, |v| num_traits::ToPrimitive::to_f64(v).unwrap_or(f64::NAN));
    let mut l1_rec = CheckRecord::new("W L1", &[k], as_f64(&l1), 1.0, 0.0);
    l1_rec.pass = l1.as_ref() == Some(&one);
    let mut sup_rec = CheckRecord::new("W Linf", &[k], as_f64(&sup), 2.0, 0.0);
    sup_rec.pass = sup.as_ref() == Some(&two);
    let mut out = vec![
        l1_rec,
        sup_rec,
        CheckRecord::holds("W nonnegative", &[k], w.coefficients_nonnegative()),
        CheckRecord::holds("W continuous", &[k], w.is_continuous()),
        CheckRecord::holds("W periodic", &[k], w.has_period(d.bottom_exponent().unwrap_or(0))),
        CheckRecord::holds("W degree", &[k], w.degree() <= d.digit_count()),
    ];
    for p in KERNEL_LP_EXPONENTS {
        let label = format!("W L{p}");
        match w.lp_norm(p) {
            Ok((v, err)) => out.push(CheckRecord::at_most(
                label,
                &[k],
                v,
                (1.0 - 1.0 / p).exp2(),
                KERNEL_LP_TOLERANCE + 10.0 * err,
            )),
            Err(_) => out.push(CheckRecord::holds(label, &[k], false)),
        }
    }
    out
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Kernel properties for `1 ≤ k < max_k`, one summary per property.
pub fn kernel_suite(max_k: u64, jobs: usize) -> Result<Vec<Summary>> {
    let start = Instant::now();
    let bits = 64 - max_k.saturating_sub(1).leading_zeros();
    let names: Vec<String> = kernel_records(1, &crate::wkernel::build_w(1)?)
        .into_iter()
        .map(|r| r.function_id)
        .collect();
    let acc = Mutex::new(names.iter().map(|n| Summary::new(n.clone(), "W(k)", format!("k<{max_k}"))).collect::<Vec<_>>());
    pool(jobs)?.install(|| {
        for_each_w(bits, |k, w| {
            if k >= max_k {
                return;
            }
            let recs = kernel_records(k, w);
            let mut acc = acc.lock().expect("summary lock poisoned");
            for (s, r) in acc.iter_mut().zip(&recs) {
                s.add(r);
            }
        })
    })?;
    let mut rows = acc.into_inner().expect("summary lock poisoned");
    let secs = start.elapsed().as_secs_f64();
    for r in &mut rows {
        r.seconds = secs;
    }
    Ok(rows)
}

fn order_label(u: Order) -> String {
    format!("u={u}")
}

/// Both coefficient identities for all `k_i < max_k` and each order in
/// `orders` (applied to every coordinate).
pub fn identity_checks(f: &FunctionHandle, max_k: u64, orders: &[Order]) -> Result<Vec<Summary>> {
    let s = f.dim();
    let mut disc = DiscIdChecker::new(f.clone(), None);
    let mut conti = ContiIdChecker::new(f.clone(), CONTI_NODES);
    let mut rows = Vec::new();
    for &u in orders {
        let us = vec![u; s];
        let start = Instant::now();
        let mut a = Summary::new("discrete identity", f.label(), order_label(u));
        for k in index_box(&vec![max_k; s]) {
            a.add(&disc.check(&k, &us)?);
        }
        a.seconds = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let mut b = Summary::new("continuous identity", f.label(), order_label(u));
        for k in index_box(&vec![max_k; s]) {
            b.add(&conti.check(&k, &us)?);
        }
        b.seconds = start.elapsed().as_secs_f64();
        rows.push(a);
        rows.push(b);
    }
    Ok(rows)
}

/// Tolerance of the coefficient bound check.
pub const BOUND_TOLERANCE: f64 = 1e-12;

/// `|f̂(k)| ≤ bound` for all `k_i < 2^bits`, every `α` and `p`.
pub fn bound_checks(f: &ProductFunction, bits: u32, alphas: &[Order], ps: &[f64]) -> Result<Vec<Summary>> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        for &p in ps {
            let start = Instant::now();
            let table = BoundTable::new(f, bits, alpha, p)?;
            let config = format!("alpha={alpha} p={}", crate::error_lab::fmt_real(p));
            let mut sum = Summary::new("coefficient bound", f.label(), config);
            for k in index_box(&vec![1u64 << bits; f.dim()]) {
                let b = table.get(&k);
                let excess = b.coeff - b.bound - BOUND_TOLERANCE;
                sum.observe(excess <= 0.0, excess, || crate::analysis::format_k(&k));
            }
            sum.seconds = start.elapsed().as_secs_f64();
            rows.push(sum);
        }
    }
    Ok(rows)
}

/// `f̂(k) (-1)^{Σ N_i} ≥ -tol` for all `k_i < max_k`. Functions whose
/// derivatives of the relevant orders are not all of one sign are reported
/// as a failed precondition.
pub fn sign_checks(f: &ProductFunction, max_k: u64) -> Result<Summary> {
    let start = Instant::now();
    let mut sum = Summary::new("coefficient sign", f.label(), "");
    for k in index_box(&vec![max_k; f.dim()]) {
        let r = check_sign_rule(f, &k)?;
        let mut rec = CheckRecord::at_most(f.label(), &k, -r.signed_coeff, 0.0, SIGN_TOLERANCE);
        rec.pass &= r.precondition;
        sum.add(&rec);
    }
    sum.seconds = start.elapsed().as_secs_f64();
    Ok(sum)
}

/// Functions whose every derivative is nonnegative on `[0, 1]`.
pub fn sign_suite() -> Vec<ProductFunction> {
    ["poly:x", "poly:x^2", "poly:x * poly:x", "exp 0.5"]
        .iter()
        .map(|s| {
            crate::functions::parse_function(s)
                .expect("built-in spec")
                .as_product()
                .expect("product spec")
                .clone()
        })
        .collect()
}

/// `max_k` clamped to `[1, 2^cap_bits]`.
fn per_coordinate(max_k: u64, cap_bits: u32) -> u64 {
    max_k.clamp(1, 1 << cap_bits)
}

/// The full suite: kernels for `k < max_k`; identities, sign checks with
/// `k_i < min(max_k, 64)`; coefficient bounds with `k_i < min(max_k, 256)`.
pub fn lemma_suite(max_k: u64, jobs: usize) -> Result<Vec<Summary>> {
    let mut rows = kernel_suite(max_k, jobs)?;
    let suite = crate::functions::test_suite();
    let id_k = per_coordinate(max_k, 6);
    let bound_bits = 64 - per_coordinate(max_k, 8).saturating_sub(1).leading_zeros();
    let orders = [Order::Finite(1), Order::Finite(2), Order::Infinite];
    let alphas = [Order::Finite(2), Order::Finite(3), Order::Infinite];
    let ps = [1.0, 2.0, f64::INFINITY];
    let per_function: Vec<Vec<Summary>> = pool(jobs)?.install(|| {
        suite
            .par_iter()
            .map(|(_, f)| {
                let h: FunctionHandle = std::sync::Arc::new(f.clone());
                let mut out = identity_checks(&h, id_k, &orders)?;
                out.extend(bound_checks(f, bound_bits, &alphas, &ps)?);
                Ok(out)
            })
            .collect::<Result<_>>()
    })?;
    rows.extend(per_function.into_iter().flatten());
    for f in sign_suite() {
        rows.push(sign_checks(&f, id_k)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_suite_small() {
        let rows = kernel_suite(64, 2).unwrap();
        assert_eq!(rows.len(), 6 + KERNEL_LP_EXPONENTS.len());
        for r in &rows {
            assert!(r.pass(), "{r:?}");
            assert_eq!(r.cases, 63);
        }
    }

    #[test]
    fn index_box_order() {
        let v: Vec<Vec<u64>> = index_box(&[2, 3]).collect();
        assert_eq!(v.len(), 6);
        assert_eq!(v[1], vec![1, 0]);
        assert_eq!(v[5], vec![1, 2]);
    }

    #[test]
    fn summary_tracks_worst_failure() {
        let mut s = Summary::new("c", "f", "");
        s.add(&CheckRecord::new("f", &[1], 1.0, 1.0, 1e-12));
        s.add(&CheckRecord::new("f", &[2], 1.0, 2.0, 1e-12));
        s.add(&CheckRecord::new("f", &[3], 1.0, 1.0 + 1e-13, 1e-12));
        assert_eq!((s.cases, s.failures), (3, 1));
        assert_eq!(s.worst_k, "(2)");
        assert!(s.fail_line().unwrap().starts_with("FAIL: c f"));
    }

    #[test]
    fn product_identity_path_agrees_with_cells() {
        // the per-coordinate path against the full cell grid
        #[derive(Debug)]
        struct Opaque(ProductFunction);
        impl Integrand for Opaque {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn label(&self) -> String {
                self.0.label()
            }
            fn eval(&self, x: &[f64]) -> f64 {
                self.0.eval(x)
            }
            fn box_integral(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
                self.0.box_integral(lo, hi)
            }
            fn smoothness(&self) -> Order {
                Order::Infinite
            }
        }
        let f = crate::functions::test_suite().into_iter().find(|(_, f)| f.dim() == 2).unwrap().1;
        let mut a = DiscIdChecker::new(std::sync::Arc::new(f.clone()), None);
        let mut b = DiscIdChecker::new(std::sync::Arc::new(Opaque(f)), None);
        for k in index_box(&[16, 16]) {
            for u in [Order::Finite(1), Order::Infinite] {
                let (x, y) = (a.check(&k, &[u, u]).unwrap(), b.check(&k, &[u, u]).unwrap());
                assert!(x.pass && y.pass);
                assert!((x.lhs - y.lhs).abs() < 1e-15 && (x.rhs - y.rhs).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bound_table_matches_direct() {
        let f = crate::functions::test_suite().into_iter().find(|(_, f)| f.dim() == 3).unwrap().1;
        let t = BoundTable::new(&f, 4, Order::Finite(2), 2.0).unwrap();
        for k in index_box(&[16, 16, 16]).step_by(37) {
            let direct = crate::analysis::coefficient_bound(&f, &k, Order::Finite(2), 2.0).unwrap();
            let via = t.get(&k);
            assert!((direct.coeff - via.coeff).abs() <= 1e-15 * (1.0 + direct.coeff));
            assert!((direct.bound - via.bound).abs() <= 1e-14 * (1.0 + direct.bound), "{k:?}");
        }
    }

    #[test]
    fn sign_suite_passes() {
        for f in sign_suite() {
            let s = sign_checks(&f, 16).unwrap();
            assert!(s.pass(), "{s:?}");
        }
    }
}
