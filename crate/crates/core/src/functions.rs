//! Integrands with exact derivative and integral oracles.
//!
//! [`ProductFunction`]s are products of one-dimensional factors (polynomials,
//! `amp·e^{cx}`, `amp·sin(ax + b)`), so mixed partials, box integrals and the
//! derivative norms that enter the error bound all factorize into
//! one-dimensional closed forms. [`WalshPolynomial`]s are finite Walsh
//! series, whose Walsh coefficients are known by construction.
//!
//! # Function specs
//!
//! A spec is a `*`-separated list of factors, factor `i` acting on `x_i`:
//!
//! ```text
//! poly 1 0.5 0 2        1 + x/2 + 2x³ (coefficients from degree 0)
//! poly:x   poly:x^2     monomials
//! const 3               a constant factor
//! exp 0.5               e^{x/2}
//! sin 2 0.25            sin(2x + 1/4)
//! x * x^2               x₁ · x₂²
//! walsh 4:1 1,2:0.5     wal_4(x₁) + wal_(1,2)(x)/2
//! ```
//!
//! Arguments may be separated by spaces or commas, and the head may be
//! joined to them with a colon. A manifest holds one spec per line,
//! optionally prefixed by `name =`; `#` starts a comment line.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use crate::dyadic::{walsh_eval_point, walsh_interval_integral};
use crate::error::{Error, Result};
use crate::merit::SubsetWeights;
use crate::numeric::{compensated_sum, UnitRule};
use crate::weights::Order;

/// An integrand on `[0, 1)^s`.
pub trait Integrand: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn label(&self) -> String;

    fn eval(&self, x: &[f64]) -> f64;

    /// Mixed partial derivative of the given order vector.
    fn derivative(&self, order: &[u32], x: &[f64]) -> Result<f64> {
        if order.iter().all(|&o| o == 0) {
            Ok(self.eval(x))
        } else {
            Err(Error::UnsupportedOrder {
                function: self.label(),
                order: order.to_vec(),
            })
        }
    }

    /// `∫` over the box `Π [lo_i, hi_i]`.
    fn box_integral(&self, _lo: &[f64], _hi: &[f64]) -> Result<f64> {
        Err(Error::MissingIntegral {
            function: self.label(),
        })
    }

    /// Order up to which mixed partials exist and are continuous.
    fn smoothness(&self) -> Order;

    fn as_product(&self) -> Option<&ProductFunction> {
        None
    }

    fn as_walsh(&self) -> Option<&WalshPolynomial> {
        None
    }
}

pub type FunctionHandle = Arc<dyn Integrand>;

/// A one-dimensional smooth factor.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    /// `Σ c_j x^j`, coefficients from degree 0.
    Poly(Vec<f64>),
    /// `amp · e^{rate·x}`.
    Exp { amp: f64, rate: f64 },
    /// `amp · sin(freq·x + phase)`.
    Sin { amp: f64, freq: f64, phase: f64 },
}

impl Factor {
    pub fn constant(c: f64) -> Self {
        Factor::Poly(vec![c])
    }

    pub fn monomial(degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = 1.0;
        Factor::Poly(c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Factor::Poly(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            Factor::Exp { amp, rate } => amp * (rate * x).exp(),
            Factor::Sin { amp, freq, phase } => amp * (freq * x + phase).sin(),
        }
    }

    /// The `order`-th derivative as another factor.
    pub fn derivative(&self, order: u32) -> Factor {
        match self {
            Factor::Poly(c) => {
                let mut c = c.clone();
                for _ in 0..order {
                    if c.len() <= 1 {
                        c = vec![0.0];
                        break;
                    }
                    c = c.iter().enumerate().skip(1).map(|(j, &a)| j as f64 * a).collect();
                }
                Factor::Poly(c)
            }
            Factor::Exp { amp, rate } => Factor::Exp {
                amp: amp * rate.powi(order as i32),
                rate: *rate,
            },
            Factor::Sin { amp, freq, phase } => Factor::Sin {
                amp: amp * freq.powi(order as i32),
                freq: *freq,
                phase: phase + order as f64 * FRAC_PI_2,
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Factor::Poly(c) => c.iter().all(|&a| a == 0.0),
            Factor::Exp { amp, .. } => *amp == 0.0,
            Factor::Sin { amp, freq, phase } => *amp == 0.0 || (*freq == 0.0 && phase.sin() == 0.0),
        }
    }

    /// `∫_a^b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Factor::Poly(c) => {
                let anti = |x: f64| {
                    c.iter()
                        .enumerate()
                        .rev()
                        .fold(0.0, |acc, (j, &cj)| acc * x + cj / (j + 1) as f64)
                        * x
                };
                anti(b) - anti(a)
            }
            Factor::Exp { amp, rate } => {
                if *rate == 0.0 {
                    amp * (b - a)
                } else {
                    amp * ((rate * b).exp() - (rate * a).exp()) / rate
                }
            }
            Factor::Sin { amp, freq, phase } => {
                if *freq == 0.0 {
                    amp * phase.sin() * (b - a)
                } else {
                    -amp * ((freq * b + phase).cos() - (freq * a + phase).cos()) / freq
                }
            }
        }
    }

    /// Zeros in the open interval `(a, b)`, ascending.
    pub fn roots(&self, a: f64, b: f64) -> Vec<f64> {
        if self.is_zero() {
            return Vec::new();
        }
        match self {
            Factor::Poly(c) => poly_roots(c, a, b),
            Factor::Exp { .. } => Vec::new(),
            Factor::Sin { freq, phase, .. } => {
                if *freq == 0.0 {
                    return Vec::new();
                }
                // freq·x + phase = jπ
                let (t0, t1) = {
                    let u = (freq * a + phase) / std::f64::consts::PI;
                    let v = (freq * b + phase) / std::f64::consts::PI;
                    (u.min(v), u.max(v))
                };
                let mut out: Vec<f64> = ((t0.floor() as i64)..=(t1.ceil() as i64))
                    .map(|j| (j as f64 * std::f64::consts::PI - phase) / freq)
                    .filter(|&x| x > a && x < b)
                    .collect();
                out.sort_by(f64::total_cmp);
                out
            }
        }
    }

    /// `(min, max)` of the factor over `[0, 1]`.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = self.eval(0.0).min(self.eval(1.0));
        let mut hi = self.eval(0.0).max(self.eval(1.0));
        for r in self.derivative(1).roots(0.0, 1.0) {
            let v = self.eval(r);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// `sup_{[0,1]} |f|`.
    pub fn sup_abs(&self) -> f64 {
        let mut candidates = vec![0.0, 1.0];
        match self {
            Factor::Poly(c) => candidates.extend(poly_roots(&derivative_coeffs(c), 0.0, 1.0)),
            Factor::Exp { .. } => {}
            Factor::Sin { freq, phase, .. } => {
                if *freq != 0.0 {
                    // extrema where the cosine vanishes
                    let shifted = Factor::Sin {
                        amp: 1.0,
                        freq: *freq,
                        phase: phase + FRAC_PI_2,
                    };
                    candidates.extend(shifted.roots(0.0, 1.0));
                }
            }
        }
        candidates.iter().map(|&x| self.eval(x).abs()).fold(0.0, f64::max)
    }

    /// `‖f‖_{L^p([0,1])}`; closed form for `p ∈ {1, 2, ∞}`, Gauss–Legendre
    /// between sign changes otherwise.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_abs();
        }
        if self.is_zero() {
            return 0.0;
        }
        let mut cuts = vec![0.0];
        cuts.extend(self.roots(0.0, 1.0));
        cuts.push(1.0);
        if p == 1.0 {
            return compensated_sum(cuts.windows(2).map(|w| self.integral(w[0], w[1]).abs()));
        }
        if p == 2.0 {
            return self.square_integral().max(0.0).sqrt();
        }
        let rule = UnitRule::gauss_legendre(32);
        let total = compensated_sum(cuts.windows(2).flat_map(|w| {
            let (a, b) = (w[0], w[1]);
            let rule = &rule;
            (0..8).map(move |i| {
                let lo = a + (b - a) * i as f64 / 8.0;
                let hi = a + (b - a) * (i + 1) as f64 / 8.0;
                rule.integrate(lo, hi, |x| self.eval(x).abs().powf(p))
            })
        }));
        total.powf(1.0 / p)
    }

    // ∫_0^1 f²
    fn square_integral(&self) -> f64 {
        match self {
            Factor::Poly(c) => {
                let mut sq = vec![0.0; 2 * c.len() - 1];
                for (i, &a) in c.iter().enumerate() {
                    for (j, &b) in c.iter().enumerate() {
                        sq[i + j] += a * b;
                    }
                }
                Factor::Poly(sq).integral(0.0, 1.0)
            }
            Factor::Exp { amp, rate } => Factor::Exp {
                amp: amp * amp,
                rate: 2.0 * rate,
            }
            .integral(0.0, 1.0),
            Factor::Sin { amp, freq, phase } => {
                // sin² = (1 - cos(2θ)) / 2
                let cos_part = Factor::Sin {
                    amp: 1.0,
                    freq: 2.0 * freq,
                    phase: 2.0 * phase + FRAC_PI_2,
                }
                .integral(0.0, 1.0);
                amp * amp * 0.5 * (1.0 - cos_part)
            }
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Poly(c) => {
                write!(f, "poly")?;
                for a in c {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
            Factor::Exp { amp, rate } if *amp == 1.0 => write!(f, "exp {rate}"),
            Factor::Exp { amp, rate } => write!(f, "exp {rate} {amp}"),
            Factor::Sin { amp, freq, phase } if *amp == 1.0 => write!(f, "sin {freq} {phase}"),
            Factor::Sin { amp, freq, phase } => write!(f, "sin {freq} {phase} {amp}"),
        }
    }
}

fn derivative_coeffs(c: &[f64]) -> Vec<f64> {
    match Factor::Poly(c.to_vec()).derivative(1) {
        Factor::Poly(d) => d,
        _ => unreachable!(),
    }
}

fn trim(c: &[f64]) -> &[f64] {
    let len = c.iter().rposition(|&a| a != 0.0).map_or(0, |i| i + 1);
    &c[..len]
}

// Real zeros of a polynomial in (a, b): the critical points split the
// interval into monotone runs, each holding at most one sign change.
fn poly_roots(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = trim(c);
    if c.len() <= 1 {
        return Vec::new();
    }
    let f = |x: f64| c.iter().rev().fold(0.0, |acc, &v| acc * x + v);
    let mut knots = vec![a];
    knots.extend(poly_roots(&derivative_coeffs(c), a, b));
    knots.push(b);
    let mut out = Vec::new();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            if lo > a && out.last() != Some(&lo) {
                out.push(lo);
            }
            continue;
        }
        if fhi == 0.0 || flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    // zeros sitting exactly on the last knot
    if let Some(&last) = knots.get(knots.len() - 2) {
        if last > a && f(last) == 0.0 && out.last() != Some(&last) {
            out.push(last);
        }
    }
    out.retain(|&x| x > a && x < b);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `f(x) = Π_i f_i(x_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductFunction {
    factors: Vec<Factor>,
    label: String,
}

impl ProductFunction {
    pub fn new(factors: Vec<Factor>) -> Self {
        let label = factors.iter().map(Factor::to_string).collect::<Vec<_>>().join(" * ");
        Self { factors, label }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// The same function on `[0,1)^s`, constant in the added coordinates.
    pub fn padded(&self, s: usize) -> Result<Self> {
        if s < self.factors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.factors.len(),
                got: s,
            });
        }
        let mut factors = self.factors.clone();
        factors.resize(s, Factor::constant(1.0));
        Ok(Self {
            factors,
            label: self.label.clone(),
        })
    }

    pub fn integral(&self) -> f64 {
        self.factors.iter().map(|f| f.integral(0.0, 1.0)).product()
    }

    /// `‖f^{(order)}‖_p` over the coordinates `v` (0-based, ascending), with
    /// the remaining coordinates integrated out first. `order` is indexed
    /// like `v`.
    pub fn norm_fp(&self, v: &[usize], order: &[u32], p: f64) -> Result<f64> {
        check_order_len(v, order)?;
        let mut acc = 1.0;
        for (i, f) in self.factors.iter().enumerate() {
            acc *= match v.iter().position(|&j| j == i) {
                Some(pos) => f.derivative(order[pos]).lp_norm(p),
                None => f.integral(0.0, 1.0).abs(),
            };
        }
        Ok(acc)
    }

    /// `sup_{1 ≤ r ≤ α} ‖f_i^{(r)}‖_p` for one coordinate.
    pub fn coordinate_sup(&self, i: usize, alpha: Order, p: f64) -> Result<f64> {
        let f = &self.factors[i];
        let sup_to = |cap: u32| (1..=cap).map(|r| f.derivative(r).lp_norm(p)).fold(0.0, f64::max);
        match alpha {
            Order::Finite(a) => Ok(sup_to(a)),
            Order::Infinite => {
                let (cap, double) = (ORDER_CAP, 2 * ORDER_CAP);
                let (at_cap, at_double) = (sup_to(cap), sup_to(double));
                if (at_double - at_cap).abs() > 1e-12 * at_cap.max(1.0) {
                    return Err(Error::Divergence {
                        cap,
                        double,
                        at_cap,
                        at_double,
                    });
                }
                Ok(at_double)
            }
        }
    }

    /// `‖f‖_{B_{α,γ,p,q′}} = (Σ_v (γ_v^{-1} 2^{|v|/p} sup_{α_v} ‖f^{(α_v)}‖_p)^{q′})^{1/q′}`
    /// over nonempty `v ⊆ {1, …, s}`, the maximum over `v` when `q′ = ∞`.
    pub fn norm_b(&self, alpha: Order, gamma: &SubsetWeights, p: f64, q_prime: f64) -> Result<f64> {
        let s = self.factors.len();
        check_exponent("p", p)?;
        check_exponent("q'", q_prime)?;
        if s > 20 {
            return Err(Error::Budget {
                what: "norm subsets",
                needed: 1u128 << s,
                limit: 1 << 20,
            });
        }
        let sups: Vec<f64> = (0..s).map(|i| self.coordinate_sup(i, alpha, p)).collect::<Result<_>>()?;
        let means: Vec<f64> = self.factors.iter().map(|f| f.integral(0.0, 1.0).abs()).collect();
        let mut terms = Vec::with_capacity((1 << s) - 1);
        for mask in 1u64..1 << s {
            let mut t = 1.0;
            let mut size = 0;
            for i in 0..s {
                if mask >> i & 1 == 1 {
                    t *= sups[i];
                    size += 1;
                } else {
                    t *= means[i];
                }
            }
            let scale = if p.is_infinite() { 1.0 } else { (size as f64 / p).exp2() };
            terms.push(scale * t / gamma.gamma(mask, s)?);
        }
        Ok(holder_combine(&terms, q_prime))
    }
}

/// Orders beyond this are probed when `α = ∞`, and once more at twice the cap.
pub const ORDER_CAP: u32 = 8;

fn check_order_len(v: &[usize], order: &[u32]) -> Result<()> {
    if v.len() != order.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            got: order.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_exponent(name: &str, p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {p} must lie in [1, inf]")))
    }
}

/// `(Σ t_v^q)^{1/q}`, or `max t_v` for `q = ∞`.
pub fn holder_combine(terms: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        terms.iter().copied().fold(0.0, f64::max)
    } else if q == 1.0 {
        compensated_sum(terms.iter().copied())
    } else {
        compensated_sum(terms.iter().map(|t| t.powf(q))).powf(1.0 / q)
    }
}

impl Integrand for ProductFunction {
    fn dim(&self) -> usize {
        self.factors.len()
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.factors.iter().zip(x).map(|(f, &xi)| f.eval(xi)).product()
    }

    fn derivative(&self, order: &[u32], x: &[f64]) -> Result<f64> {
        if order.len() != self.factors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.factors.len(),
                got: order.len(),
            });
        }
        Ok(self
            .factors
            .iter()
            .zip(order)
            .zip(x)
            .map(|((f, &o), &xi)| f.derivative(o).eval(xi))
            .product())
    }

    fn box_integral(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        Ok(self
            .factors
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(f, (&a, &b))| f.integral(a, b))
            .product())
    }

    fn smoothness(&self) -> Order {
        Order::Infinite
    }

    fn as_product(&self) -> Option<&ProductFunction> {
        Some(self)
    }
}

/// `Σ_k c_k wal_k(x)` over finitely many frequency vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct WalshPolynomial {
    s: usize,
    terms: BTreeMap<Vec<u64>, f64>,
}

impl WalshPolynomial {
    pub fn new(s: usize) -> Self {
        Self {
            s,
            terms: BTreeMap::new(),
        }
    }

    /// Add `c · wal_k`, merging with an existing term.
    pub fn add_term(&mut self, k: &[u64], c: f64) -> Result<()> {
        if k.len() != self.s {
            return Err(Error::DimensionMismatch {
                expected: self.s,
                got: k.len(),
            });
        }
        *self.terms.entry(k.to_vec()).or_insert(0.0) += c;
        Ok(())
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u64>, f64> {
        &self.terms
    }

    /// The stored coefficient of `wal_k`, zero if absent.
    pub fn coefficient(&self, k: &[u64]) -> f64 {
        self.terms.get(k).copied().unwrap_or(0.0)
    }

    pub fn integral(&self) -> f64 {
        self.coefficient(&vec![0; self.s])
    }
}

impl Integrand for WalshPolynomial {
    fn dim(&self) -> usize {
        self.s
    }

    fn label(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, c)| {
                let k: Vec<String> = k.iter().map(u64::to_string).collect();
                format!("{}:{c}", k.join(","))
            })
            .collect();
        format!("walsh {}", parts.join(" "))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        compensated_sum(self.terms.iter().map(|(k, c)| c * walsh_eval_point(k, x)))
    }

    fn box_integral(&self, lo: &[f64], hi: &[f64]) -> Result<f64> {
        Ok(compensated_sum(self.terms.iter().map(|(k, c)| {
            c * k
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&ki, (&a, &b))| walsh_interval_integral(ki, a, b))
                .product::<f64>()
        })))
    }

    fn smoothness(&self) -> Order {
        Order::Finite(0)
    }

    fn as_walsh(&self) -> Option<&WalshPolynomial> {
        Some(self)
    }
}

fn parse_err(message: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        message: message.into(),
    }
}

fn parse_number(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| parse_err(format!("expected a number, got {tok:?}")))
}

// `x` or `x^d` inside a poly factor.
fn parse_monomial(tok: &str) -> Option<usize> {
    match tok {
        "x" => Some(1),
        _ => tok.strip_prefix("x^").and_then(|d| d.parse().ok()),
    }
}

fn parse_factor(text: &str) -> Result<Factor> {
    let text = text.trim();
    let (head, rest) = match text.find([':', ' ', '\t']) {
        Some(i) => (&text[..i], &text[i + 1..]),
        None => (text, ""),
    };
    let args: Vec<&str> = rest.split([' ', ',', '\t']).filter(|t| !t.is_empty()).collect();
    let nums = || args.iter().map(|t| parse_number(t)).collect::<Result<Vec<f64>>>();
    if let Some(d) = parse_monomial(head) {
        if !args.is_empty() {
            return Err(parse_err(format!("{head} takes no arguments")));
        }
        return Ok(Factor::monomial(d));
    }
    match head {
        "poly" => {
            if let [tok] = args[..] {
                if let Some(d) = parse_monomial(tok) {
                    return Ok(Factor::monomial(d));
                }
            }
            let c = nums()?;
            if c.is_empty() {
                return Err(parse_err("poly needs at least one coefficient"));
            }
            Ok(Factor::Poly(c))
        }
        "const" => match nums()?[..] {
            [c] => Ok(Factor::constant(c)),
            _ => Err(parse_err("const takes one value")),
        },
        "exp" => match nums()?[..] {
            [rate] => Ok(Factor::Exp { amp: 1.0, rate }),
            [rate, amp] => Ok(Factor::Exp { amp, rate }),
            _ => Err(parse_err("exp takes a rate and an optional amplitude")),
        },
        "sin" => match nums()?[..] {
            [freq] => Ok(Factor::Sin {
                amp: 1.0,
                freq,
                phase: 0.0,
            }),
            [freq, phase] => Ok(Factor::Sin { amp: 1.0, freq, phase }),
            [freq, phase, amp] => Ok(Factor::Sin { amp, freq, phase }),
            _ => Err(parse_err("sin takes a frequency, a phase and an optional amplitude")),
        },
        "cos" => match nums()?[..] {
            [freq] => Ok(Factor::Sin {
                amp: 1.0,
                freq,
                phase: FRAC_PI_2,
            }),
            _ => Err(parse_err("cos takes a frequency")),
        },
        _ => match parse_number(head) {
            Ok(c) if args.is_empty() => Ok(Factor::constant(c)),
            _ => Err(parse_err(format!("unknown factor {head:?}"))),
        },
    }
}

fn parse_walsh(rest: &str) -> Result<WalshPolynomial> {
    let mut terms = Vec::new();
    for tok in rest.split_whitespace() {
        let (k, c) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(format!("walsh term {tok:?} needs the form k1,k2:coef")))?;
        let k = k
            .split(',')
            .map(|t| t.parse::<u64>().map_err(|_| parse_err(format!("bad frequency {t:?}"))))
            .collect::<Result<Vec<u64>>>()?;
        terms.push((k, parse_number(c)?));
    }
    let s = terms.first().ok_or_else(|| parse_err("walsh needs at least one term"))?.0.len();
    let mut w = WalshPolynomial::new(s);
    for (k, c) in terms {
        w.add_term(&k, c).map_err(|e| parse_err(e.to_string()))?;
    }
    Ok(w)
}

/// Parse one function spec.
pub fn parse_function(spec: &str) -> Result<FunctionHandle> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("walsh") {
        let rest = rest.strip_prefix(':').unwrap_or(rest);
        let mut w = parse_walsh(rest)?;
        w.terms.retain(|_, c| *c != 0.0);
        return Ok(Arc::new(w));
    }
    let factors = spec.split('*').map(parse_factor).collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(ProductFunction::new(factors).with_label(spec)))
}

/// A named function from a manifest.
#[derive(Clone, Debug)]
pub struct NamedFunction {
    pub name: String,
    pub function: FunctionHandle,
}

pub fn parse_manifest(text: &str) -> Result<Vec<NamedFunction>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, spec) = match line.split_once('=') {
            Some((n, s)) => (n.trim().to_string(), s.trim()),
            None => (line.to_string(), line),
        };
        let function = parse_function(spec).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse { line: i + 1, message },
            other => other,
        })?;
        out.push(NamedFunction { name, function });
    }
    Ok(out)
}

/// The built-in suite of smooth product integrands, each with its name.
///
/// Every member has derivative norms that stay bounded over all orders, so
/// the suite also serves for `α = ∞`.
pub fn test_suite() -> Vec<(String, ProductFunction)> {
    let f = |name: &str, factors: Vec<Factor>| (name.to_string(), ProductFunction::new(factors).with_label(name));
    let exp_half = Factor::Exp { amp: 1.0, rate: 0.5 };
    vec![
        f("x", vec![Factor::monomial(1)]),
        f("x^2", vec![Factor::monomial(2)]),
        f("x^3-x/2", vec![Factor::Poly(vec![0.0, -0.5, 0.0, 1.0])]),
        f("exp(x/2)", vec![exp_half.clone()]),
        f("sin(x+0.3)", vec![Factor::Sin {
            amp: 1.0,
            freq: 1.0,
            phase: 0.3,
        }]),
        f("x1*x2", vec![Factor::monomial(1), Factor::monomial(1)]),
        f("exp(x1/2)*x2^2", vec![exp_half, Factor::monomial(2)]),
        f("x1*cos(x2)*x3", vec![
            Factor::monomial(1),
            Factor::Sin {
                amp: 1.0,
                freq: 1.0,
                phase: FRAC_PI_2,
            },
            Factor::monomial(1),
        ]),
    ]
}
