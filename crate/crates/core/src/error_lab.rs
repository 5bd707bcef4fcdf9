//! QMC averages, the signed error decomposition over the dual net, and
//! end-to-end checks of `|I(f) - I_P(f)| ≤ ‖f‖ · W(P)`.
//!
//! Signs follow `I_P(f) - I(f) = Σ_{k ∈ P^⊥ \ {0}} f̂(k)`; reports store
//! `err = I(f) - I_P(f)` and the bound is checked on `|err|`.

use rayon::prelude::*;

use crate::analysis::tensor_quadrature;
use crate::error::{Error, Result};
use crate::functions::{Integrand, WalshPolynomial};
use crate::merit::{merit_new, MeritConfig, SubsetWeights};
use crate::net::{generate_points, GeneratorSet, PointSet};
use crate::numeric::{compensated_sum, UnitRule};
use crate::weights::Order;

/// Slack allowed on top of the bound for binary64 rounding.
pub const BOUND_TOLERANCE: f64 = 1e-9;
/// Tolerance of the decomposition identity.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-12;

/// `I_P(f) = 2^{-m} Σ_{x ∈ P} f(x)`, duplicates counted.
pub fn qmc_integrate(f: &dyn Integrand, p: &PointSet) -> Result<f64> {
    if f.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: f.dim(),
        });
    }
    let sum = compensated_sum(p.iter_f64().map(|x| f.eval(&x)));
    Ok(sum / p.len() as f64)
}

/// `∫_{[0,1)^s} f` from the integral oracle, or by tensor Gauss–Legendre
/// with a node-doubling error estimate when there is none.
pub fn exact_integral(f: &dyn Integrand) -> Result<(f64, f64)> {
    let s = f.dim();
    let (lo, hi) = (vec![0.0; s], vec![1.0; s]);
    match f.box_integral(&lo, &hi) {
        Ok(v) => Ok((v, 0.0)),
        Err(Error::MissingIntegral { .. }) => {
            let nodes = 16usize;
            let needed = (2 * nodes as u128).pow(s as u32);
            if needed > crate::analysis::CELL_BUDGET as u128 {
                return Err(Error::Budget {
                    what: "quadrature nodes",
                    needed,
                    limit: crate::analysis::CELL_BUDGET as u128,
                });
            }
            let eval = |x: &[f64]| Ok(f.eval(x));
            let a = tensor_quadrature(&UnitRule::gauss_legendre(nodes), &lo, &hi, eval)?;
            let b = tensor_quadrature(&UnitRule::gauss_legendre(2 * nodes), &lo, &hi, eval)?;
            Ok((b, (a - b).abs()))
        }
        Err(e) => Err(e),
    }
}

/// Both sides of `I_P(f) - I(f) = Σ_{k ∈ P^⊥ \ {0}} c_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub exact_integral: f64,
    pub qmc_average: f64,
    pub dual_sum: f64,
    pub diff: f64,
    pub pass: bool,
}

pub fn error_decomposition_check(f: &WalshPolynomial, g: &GeneratorSet) -> Result<Decomposition> {
    if f.dim() != g.s() {
        return Err(Error::DimensionMismatch {
            expected: g.s(),
            got: f.dim(),
        });
    }
    let n = g.n() as u32;
    if let Some(k) = f.terms().keys().find(|k| k.iter().any(|&ki| ki >> n != 0)) {
        return Err(Error::InvalidParameter(format!(
            "frequency {k:?} has digits beyond level {n}"
        )));
    }
    let exact = f.integral();
    let qmc = qmc_integrate(f, &generate_points(g))?;
    let dual_sum = compensated_sum(
        f.terms()
            .iter()
            .filter(|(k, _)| k.iter().any(|&ki| ki != 0) && g.annihilates(k))
            .map(|(_, &c)| c),
    );
    let diff = ((qmc - exact) - dual_sum).abs();
    Ok(Decomposition {
        exact_integral: exact,
        qmc_average: qmc,
        dual_sum,
        diff,
        pass: diff <= DECOMPOSITION_TOLERANCE,
    })
}

/// Parameters of one bound check.
#[derive(Clone, Debug)]
pub struct BoundConfig {
    pub alpha: Order,
    pub gamma: SubsetWeights,
    /// Text of the weight spec, for reports.
    pub gamma_label: String,
    pub p: f64,
    pub q: f64,
    pub q_prime: f64,
    pub cap_level: u32,
}

impl BoundConfig {
    pub fn new(alpha: Order, p: f64, q: f64, q_prime: f64, cap_level: u32) -> Result<Self> {
        check_holder(q, q_prime)?;
        Ok(Self {
            alpha,
            gamma: SubsetWeights::uniform(),
            gamma_label: "uniform".into(),
            p,
            q,
            q_prime,
            cap_level,
        })
    }

    pub fn with_gamma(mut self, gamma: SubsetWeights, label: impl Into<String>) -> Self {
        self.gamma = gamma;
        self.gamma_label = label.into();
        self
    }
}

/// Rejects exponents with `1/q + 1/q′ ≠ 1`.
pub fn check_holder(q: f64, q_prime: f64) -> Result<()> {
    crate::functions::check_exponent("q", q)?;
    crate::functions::check_exponent("q'", q_prime)?;
    if (1.0 / q + 1.0 / q_prime - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "q = {} and q' = {} are not Hölder conjugates",
            fmt_real(q),
            fmt_real(q_prime)
        )));
    }
    Ok(())
}

/// `inf` for infinity, shortest round-trip decimal otherwise.
pub fn fmt_real(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x}")
    }
}

/// One row of a bound report.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ErrorReport {
    pub function: String,
    pub net: String,
    pub alpha: String,
    pub p: String,
    pub q: String,
    pub gamma: String,
    pub cap: u32,
    pub exact_integral: f64,
    pub qmc_average: f64,
    /// `I(f) - I_P(f)`.
    pub err: f64,
    pub norm: f64,
    pub merit_truncated: f64,
    pub merit_tail: f64,
    pub merit_upper: f64,
    pub bound: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Column order of [`ErrorReport`] CSV output.
pub const REPORT_COLUMNS: &[&str] = &[
    "function",
    "net",
    "alpha",
    "p",
    "q",
    "gamma",
    "cap",
    "exact_integral",
    "qmc_average",
    "err",
    "norm",
    "merit_truncated",
    "merit_tail",
    "merit_upper",
    "bound",
    "slack",
    "tolerance",
    "pass",
];

/// Checks `|I(f) - I_P(f)| ≤ ‖f‖_{B,α,γ,p,q′} · W_{α,γ,q}(P)` with the merit
/// truncated at `cap_level` plus its certified tail.
pub fn verify_error_bound(f: &dyn Integrand, g: &GeneratorSet, net_id: &str, cfg: &BoundConfig) -> Result<ErrorReport> {
    if f.dim() != g.s() {
        return Err(Error::DimensionMismatch {
            expected: g.s(),
            got: f.dim(),
        });
    }
    check_holder(cfg.q, cfg.q_prime)?;
    let alpha = cfg.alpha.require_smoothness()?;
    let smooth_enough = match alpha {
        Order::Finite(a) => f.smoothness().is_at_least(a),
        Order::Infinite => f.smoothness() == Order::Infinite,
    };
    if !smooth_enough {
        return Err(Error::InvalidParameter(format!(
            "{} is not smooth of order {alpha}",
            f.label()
        )));
    }
    let product = f.as_product().ok_or_else(|| {
        Error::InvalidParameter(format!("no derivative norms for non-product function {}", f.label()))
    })?;
    let norm = product.norm_b(alpha, &cfg.gamma, cfg.p, cfg.q_prime)?;
    let mut mc = MeritConfig::new(alpha, cfg.cap_level);
    mc.gamma = cfg.gamma.clone();
    mc.q = cfg.q;
    let merit = merit_new(g, &mc)?;
    let (exact, quad_err) = exact_integral(f)?;
    let qmc = qmc_integrate(f, &generate_points(g))?;
    let err = exact - qmc;
    let bound = norm * merit.upper();
    let tolerance = BOUND_TOLERANCE + quad_err;
    Ok(ErrorReport {
        function: f.label(),
        net: net_id.to_string(),
        alpha: alpha.to_string(),
        p: fmt_real(cfg.p),
        q: fmt_real(cfg.q),
        gamma: cfg.gamma_label.clone(),
        cap: cfg.cap_level,
        exact_integral: exact,
        qmc_average: qmc,
        err,
        norm,
        merit_truncated: merit.truncated,
        merit_tail: merit.tail_bound,
        merit_upper: merit.upper(),
        bound,
        slack: bound - err.abs(),
        tolerance,
        pass: err.abs() <= bound + tolerance,
    })
}

/// One entry of a verification matrix.
pub struct Case<'a> {
    pub function: &'a dyn Integrand,
    pub net: &'a GeneratorSet,
    pub net_id: String,
    pub config: &'a BoundConfig,
}

/// Runs the cases on `jobs` threads; reports come back in case order.
pub fn verify_many(cases: &[Case<'_>], jobs: usize) -> Result<Vec<ErrorReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    pool.install(|| {
        cases
            .par_iter()
            .map(|c| verify_error_bound(c.function, c.net, &c.net_id, c.config))
            .collect()
    })
}

pub fn write_reports<W: std::io::Write>(reports: &[ErrorReport], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{parse_function, test_suite};
    use crate::merit::search_random;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity() -> GeneratorSet {
        GeneratorSet::identity(1, 2, 2).unwrap()
    }

    #[test]
    fn qmc_examples() {
        let p = generate_points(&identity());
        let c = parse_function("const 3").unwrap();
        assert_eq!(qmc_integrate(c.as_ref(), &p).unwrap(), 3.0);
        let x = parse_function("poly:x").unwrap();
        assert_eq!(qmc_integrate(x.as_ref(), &p).unwrap(), 0.375);
        let w = parse_function("walsh 4:1").unwrap();
        assert_eq!(qmc_integrate(w.as_ref(), &p).unwrap(), 1.0);
    }

    fn walsh(s: usize, terms: &[(&[u64], f64)]) -> WalshPolynomial {
        let mut w = WalshPolynomial::new(s);
        for (k, c) in terms {
            w.add_term(k, *c).unwrap();
        }
        w
    }

    #[test]
    fn decomposition_examples() {
        let r = error_decomposition_check(&walsh(1, &[(&[3], 1.0)]), &identity()).unwrap();
        assert!(r.pass);
        let r = error_decomposition_check(&walsh(1, &[(&[1], 1.0)]), &identity()).unwrap();
        assert_eq!((r.exact_integral, r.qmc_average, r.dual_sum), (0.0, 0.0, 0.0));
        let r = error_decomposition_check(&walsh(1, &[(&[0], 2.5)]), &identity()).unwrap();
        assert_eq!((r.qmc_average - r.exact_integral, r.dual_sum), (0.0, 0.0));
        let deep = GeneratorSet::identity(1, 3, 2).unwrap();
        let r = error_decomposition_check(&walsh(1, &[(&[4], 1.0)]), &deep).unwrap();
        assert_eq!((r.exact_integral, r.qmc_average, r.dual_sum), (0.0, 1.0, 1.0));
        assert!(error_decomposition_check(&walsh(1, &[(&[4], 1.0)]), &identity()).is_err());
    }

    #[test]
    fn decomposition_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            let s = rng.gen_range(1..=3);
            let n = rng.gen_range(2..=6);
            let m = rng.gen_range(1..=n);
            let g = GeneratorSet::random(s, n, m, &mut rng).unwrap();
            let mut w = WalshPolynomial::new(s);
            for _ in 0..rng.gen_range(1..12) {
                let k: Vec<u64> = (0..s).map(|_| rng.gen_range(0..1u64 << n)).collect();
                w.add_term(&k, rng.gen_range(-1.0..1.0)).unwrap();
            }
            let r = error_decomposition_check(&w, &g).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn error_bound_identity_example() {
        let x = parse_function("poly:x").unwrap();
        let cfg = BoundConfig::new(Order::Finite(2), f64::INFINITY, 1.0, f64::INFINITY, 14).unwrap();
        let r = verify_error_bound(x.as_ref(), &identity(), "identity", &cfg).unwrap();
        assert_eq!(r.err, 0.125);
        assert_eq!(r.norm, 1.0);
        assert!(r.merit_upper >= 0.125 && r.pass);
        let fine = GeneratorSet::identity(1, 8, 8).unwrap();
        let cfg16 = BoundConfig::new(Order::Finite(2), f64::INFINITY, 1.0, f64::INFINITY, 16).unwrap();
        let r8 = verify_error_bound(x.as_ref(), &fine, "identity", &cfg16).unwrap();
        assert!(r8.pass && r8.slack < 1e-3, "{r8:?}");
        let c = parse_function("const 2").unwrap();
        let r = verify_error_bound(c.as_ref(), &identity(), "identity", &cfg).unwrap();
        assert!(r.err == 0.0 && r.pass);
    }

    #[test]
    fn error_bound_two_dim_random_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = GeneratorSet::random(2, 6, 6, &mut rng).unwrap();
        let f = parse_function("poly:x * poly:x").unwrap();
        let cfg = BoundConfig::new(Order::Finite(2), f64::INFINITY, 1.0, f64::INFINITY, 14).unwrap();
        let r = verify_error_bound(f.as_ref(), &g, "random", &cfg).unwrap();
        assert!(r.pass && r.slack > 0.0, "{r:?}");
    }

    #[test]
    fn holder_pairs_are_enforced() {
        assert!(BoundConfig::new(Order::Finite(2), 2.0, 2.0, 2.0, 8).is_ok());
        assert!(BoundConfig::new(Order::Finite(2), 2.0, 1.0, 2.0, 8).is_err());
        assert!(BoundConfig::new(Order::Finite(2), 2.0, 1.5, 3.0, 8).is_ok());
    }

    #[test]
    fn non_product_functions_are_rejected() {
        let w = parse_function("walsh 1:1").unwrap();
        let cfg = BoundConfig::new(Order::Finite(2), 1.0, 1.0, f64::INFINITY, 8).unwrap();
        assert!(verify_error_bound(w.as_ref(), &identity(), "id", &cfg).is_err());
    }

    #[test]
    fn smaller_merit_gives_smaller_bound() {
        let f = test_suite().into_iter().find(|(_, f)| f.dim() == 2).unwrap().1;
        let cfg = BoundConfig::new(Order::Finite(2), f64::INFINITY, 1.0, f64::INFINITY, 12).unwrap();
        let mc = MeritConfig::new(Order::Finite(2), 12);
        let search = search_random(2, 5, 5, &mc, 8, 3, 1).unwrap();
        let best = verify_error_bound(&f, &search.best, "best", &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let other = GeneratorSet::random(2, 5, 5, &mut rng).unwrap();
        let r = verify_error_bound(&f, &other, "trial0", &cfg).unwrap();
        assert!(best.bound <= r.bound);
        assert!(best.pass && r.pass);
    }

    #[test]
    fn quadrature_fallback_has_estimate() {
        let f = crate::analysis::ClosureFunction::new(2, "xy", |x: &[f64]| x[0] * x[1]);
        let (v, e) = exact_integral(&f).unwrap();
        assert!((v - 0.25).abs() < 1e-15 && e < 1e-15);
    }

    #[test]
    fn report_csv_header_is_fixed() {
        let x = parse_function("poly:x").unwrap();
        let cfg = BoundConfig::new(Order::Finite(2), f64::INFINITY, 1.0, f64::INFINITY, 10).unwrap();
        let r = verify_error_bound(x.as_ref(), &identity(), "identity", &cfg).unwrap();
        let mut buf = Vec::new();
        write_reports(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
        let row = lines.next().unwrap();
        assert!(row.starts_with("poly:x,identity,2,inf,1,uniform,10,0.5,0.375,0.125,1.0,"), "{row}");
    }
}
