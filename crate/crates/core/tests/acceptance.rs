//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use walsh_merit::analysis::coefficient_bound;
use walsh_merit::dyadic::{digits, MultiIndex};
use walsh_merit::error_lab::{error_decomposition_check, verify_many, BoundConfig, Case};
use walsh_merit::functions::{parse_function, test_suite, FunctionHandle, Integrand, ProductFunction, WalshPolynomial};
use walsh_merit::lemmas::{bound_checks, identity_checks, index_box, sign_checks, sign_suite, Summary};
use walsh_merit::merit::{wafom_brute_force, wafom_fast};
use walsh_merit::net::{char_sum, dual_basis, generate_points, GeneratorSet, DEFAULT_DUAL_BUDGET};
use walsh_merit::weights::{total_weight_sum, Order};
use walsh_merit::wkernel::{build_w, for_each_w};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn summaries(rows: &[Summary]) -> Outcome {
    let cases: u64 = rows.iter().map(|r| r.cases).sum();
    let fails: Vec<String> = rows.iter().filter_map(Summary::fail_line).collect();
    if fails.is_empty() {
        outcome(true, format!("{cases} cases in {} families", rows.len()))
    } else {
        outcome(false, fails.join("; "))
    }
}

fn c1_kernel_exactness() -> Outcome {
    let one = BigRational::from_integer(1.into());
    let two = BigRational::from_integer(2.into());
    let seen = AtomicU64::new(0);
    let bad = std::sync::Mutex::new(Vec::new());
    let res = for_each_w(10, |k, w| {
        seen.fetch_add(1, Ordering::Relaxed);
        let period = digits(k).bottom_exponent().unwrap_or(0);
        let ok = w.l1_norm().is_ok_and(|v| v == one)
            && w.sup_norm().is_ok_and(|v| v == two)
            && w.coefficients_nonnegative()
            && w.is_continuous()
            && w.has_period(period);
        if !ok {
            bad.lock().unwrap().push(k);
        }
    });
    if let Err(e) = res {
        return outcome(false, e.to_string());
    }
    let mut bad = bad.into_inner().unwrap();
    bad.sort();
    let n = seen.load(Ordering::Relaxed);
    outcome(bad.is_empty() && n == 1023, format!("{n} kernels, failures at {bad:?}"))
}

fn c2_lp_bound() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for k in 1..256u64 {
        let w = match build_w(k) {
            Ok(w) => w,
            Err(e) => return outcome(false, format!("k={k}: {e}")),
        };
        let to_f64 = |r: BigRational| num_traits::ToPrimitive::to_f64(&r).unwrap_or(f64::NAN);
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let value = if p == 1.0 {
                w.l1_norm().map(to_f64)
            } else if p.is_infinite() {
                w.sup_norm().map(to_f64)
            } else {
                w.lp_norm(p).map(|(v, _)| v)
            };
            let limit = if p.is_infinite() { 2.0 } else { (1.0 - 1.0 / p).exp2() };
            match value {
                Ok(v) => worst = worst.max(v - limit),
                Err(e) => return outcome(false, format!("k={k} p={p}: {e}")),
            }
        }
    }
    outcome(worst <= 1e-9, format!("max ||W(k)||_p - 2^(1-1/p) = {worst:e}"))
}

fn c3_character_sums() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0u64;
    for net in 0..20 {
        let s = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=16 / s);
        let m = rng.gen_range(1..=n);
        let g = GeneratorSet::random(s, n, m, &mut rng).unwrap();
        let p = generate_points(&g);
        let basis = dual_basis(&g);
        for k in index_box(&vec![1u64 << n; s]) {
            let c = char_sum(&p, &MultiIndex::new(&k)).unwrap();
            let member = basis.contains(&k);
            let expected = if member { 1i64 << m } else { 0 };
            if c != expected {
                return outcome(false, format!("net {net} (s={s} n={n} m={m}) k={k:?}: sum {c}, member {member}"));
            }
            checked += 1;
        }
    }
    outcome(true, format!("{checked} character sums on 20 nets"))
}

fn c4_identities() -> Outcome {
    let orders = [Order::Finite(1), Order::Finite(2), Order::Infinite];
    let mut rows = Vec::new();
    for (_, f) in test_suite() {
        let h: FunctionHandle = Arc::new(f);
        match identity_checks(&h, 64, &orders) {
            Ok(r) => rows.extend(r),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    summaries(&rows)
}

fn c5_coefficient_bound() -> Outcome {
    let alphas = [Order::Finite(2), Order::Finite(3), Order::Infinite];
    let ps = [1.0, 2.0, f64::INFINITY];
    let mut rows = Vec::new();
    for (_, f) in test_suite() {
        match bound_checks(&f, 8, &alphas, &ps) {
            Ok(r) => rows.extend(r),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let mut out = summaries(&rows);
    let x = parse_function("poly:x").unwrap().as_product().unwrap().clone();
    for alpha in alphas {
        for (k, exact) in [(1u64, 0.25), (2, 0.125)] {
            let b = coefficient_bound(&x, &[k], alpha, f64::INFINITY).unwrap();
            if (b.coeff - exact).abs() > 1e-12 || (b.bound - exact).abs() > 1e-12 {
                out.pass = false;
                out.detail += &format!("; equality case k={k} alpha={alpha}: {b:?}");
            }
        }
    }
    if out.pass {
        out.detail += "; equality cases k=1,2 exact";
    }
    out
}

fn c6_weight_sum() -> Outcome {
    let w = total_weight_sum(Order::Finite(2), 20).unwrap();
    let gap = (w.truncated - 13.0 / 8.0).abs();
    outcome(gap <= (-16f64).exp2(), format!("sum = {}, |sum - 13/8| = {gap:e}", w.truncated))
}

fn c7_wafom() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nets = Vec::new();
    for s in 1..=16usize {
        for n in 1..=16 / s {
            for m in 1..=n {
                nets.push(GeneratorSet::identity(s, n, m).unwrap());
                nets.push(GeneratorSet::random(s, n, m, &mut rng).unwrap());
            }
        }
    }
    let small = nets.len();
    while nets.len() < small + 50 {
        let s = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=24 / s);
        if s * n <= 16 {
            continue;
        }
        let m = rng.gen_range(1..=n);
        nets.push(GeneratorSet::random(s, n, m, &mut rng).unwrap());
    }
    let mut worst = 0.0f64;
    for g in &nets {
        match wafom_brute_force(g, DEFAULT_DUAL_BUDGET) {
            Ok(b) => worst = worst.max((wafom_fast(g) - b).abs()),
            Err(e) => return outcome(false, format!("s={} n={} m={}: {e}", g.s(), g.n(), g.m())),
        }
    }
    outcome(worst <= 1e-12, format!("{small} small + 50 larger nets, max difference {worst:e}"))
}

fn c8_error_bound() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let suite: Vec<ProductFunction> = test_suite().into_iter().map(|(_, f)| f).collect();
    let mut nets = Vec::new();
    for s in 1..=3usize {
        for t in 0..25 {
            let m = rng.gen_range(1..=8);
            let n = rng.gen_range(m..=(m + 2).min(10));
            nets.push((format!("s{s}-{t}"), GeneratorSet::random(s, n, m, &mut rng).unwrap()));
        }
    }
    let mut configs = Vec::new();
    for alpha in [Order::Finite(2), Order::Finite(3)] {
        for (p, q, qp) in [(f64::INFINITY, 1.0, f64::INFINITY), (2.0, 2.0, 2.0)] {
            configs.push((alpha, p, q, qp));
        }
    }
    let mut jobs = Vec::new();
    for (ni, (_, g)) in nets.iter().enumerate() {
        for f in suite.iter().filter(|f| f.dim() <= g.s()) {
            let f = f.padded(g.s()).unwrap();
            for &(alpha, p, q, qp) in &configs {
                let cfg = BoundConfig::new(alpha, p, q, qp, g.n() as u32 + 8).unwrap();
                jobs.push((ni, f.clone(), cfg));
            }
        }
    }
    let cases: Vec<Case> = jobs
        .iter()
        .map(|(ni, f, cfg)| Case {
            function: f,
            net: &nets[*ni].1,
            net_id: nets[*ni].0.clone(),
            config: cfg,
        })
        .collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let bound = match verify_many(&cases, threads) {
        Ok(reports) => {
            let fails: Vec<String> = reports
                .iter()
                .filter(|r| !r.pass)
                .map(|r| format!("{} on {} alpha={} p={}: |err| {} > {}", r.function, r.net, r.alpha, r.p, r.err.abs(), r.bound))
                .collect();
            let min_slack = reports.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
            if fails.is_empty() {
                outcome(true, format!("{} reports, min slack {min_slack:e}", reports.len()))
            } else {
                outcome(false, format!("{} of {} fail: {}", fails.len(), reports.len(), fails.join("; ")))
            }
        }
        Err(e) => outcome(false, e.to_string()),
    };
    let x = parse_function("poly:x").unwrap();
    let id = GeneratorSet::identity(1, 8, 8).unwrap();
    let cfg = BoundConfig::new(Order::Finite(2), f64::INFINITY, 1.0, f64::INFINITY, 16).unwrap();
    let tight = match walsh_merit::error_lab::verify_error_bound(x.as_ref(), &id, "identity", &cfg) {
        Ok(r) => outcome(r.pass && r.slack <= 1e-3, format!("f(x)=x, identity net n=m=8: err {}, bound {}, slack {:e}", r.err, r.bound, r.slack)),
        Err(e) => outcome(false, e.to_string()),
    };
    (bound, tight)
}

fn c9_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for t in 0..100 {
        let s = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=n);
        let g = GeneratorSet::random(s, n, m, &mut rng).unwrap();
        let basis = dual_basis(&g);
        let mut w = WalshPolynomial::new(s);
        for _ in 0..rng.gen_range(1..20) {
            let k: Vec<u64> = (0..s).map(|_| rng.gen_range(0..1u64 << n)).collect();
            w.add_term(&k, rng.gen_range(-1.0..1.0)).unwrap();
        }
        // make sure some dual elements carry weight
        if basis.nullity() > 0 {
            let k = basis.basis()[rng.gen_range(0..basis.nullity())].clone();
            w.add_term(&k, 0.75).unwrap();
        }
        match error_decomposition_check(&w, &g) {
            Ok(r) if r.pass => worst = worst.max(r.diff),
            Ok(r) => return outcome(false, format!("polynomial {t}: {r:?}")),
            Err(e) => return outcome(false, format!("polynomial {t}: {e}")),
        }
    }
    outcome(true, format!("100 polynomials, max |difference| {worst:e}"))
}

fn c10_sign() -> Outcome {
    let mut rows = Vec::new();
    for f in sign_suite() {
        match sign_checks(&f, 64) {
            Ok(r) => rows.push(r),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    summaries(&rows)
}

fn report(label: &str, title: &str, target: Option<f64>, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = run();
    let secs = start.elapsed().as_secs_f64();
    if let Some(limit) = target {
        if secs > limit {
            o.pass = false;
            o.detail += &format!("; took {secs:.1} s, target {limit} s");
        }
    }
    println!("{label:<4} {} {title}: {} [{secs:.1} s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let mut ok = true;
    ok &= report("C1", "W-kernel exactness, k < 2^10", Some(60.0), c1_kernel_exactness);
    ok &= report("C2", "L^p bound, k < 2^8", None, c2_lp_bound);
    ok &= report("C3", "character sums vs dual membership", None, c3_character_sums);
    ok &= report("C4", "discrete and continuous identities", None, c4_identities);
    ok &= report("C5", "coefficient bound", None, c5_coefficient_bound);
    ok &= report("C6", "weight-sum constant 13/8", None, c6_weight_sum);
    ok &= report("C7", "WAFOM product formula vs dual sum", Some(120.0), c7_wafom);
    let mut tight = None;
    ok &= report("C8", "error bound end to end", None, || {
        let (bound, t) = c8_error_bound();
        tight = Some(t);
        bound
    });
    ok &= report("C8t", "error bound near-tightness", None, || tight.take().expect("C8 ran"));
    ok &= report("C9", "error decomposition exactness", None, c9_decomposition);
    ok &= report("C10", "coefficient sign", None, c10_sign);
    if !ok {
        std::process::exit(1);
    }
}
