//! Figures of merit of digital nets.
//!
//! The merit of a net `P` for smoothness `α`, subset weights `γ` and
//! exponent `q` is
//!
//! ```text
//! W(P) = ( Σ_{∅≠v⊆S} ( γ_v Σ_{k_v ∈ P_v^⊥} 2^{-μ′_α(k_v)} )^q )^{1/q}
//! ```
//!
//! where `P_v^⊥` holds the dual-net elements whose support is exactly `v`.
//! The inner sums are infinite; they are truncated to `k_i < 2^L` and the
//! omitted part is bounded from above, so `truncated + tail_bound` is a
//! certified upper bound on `W(P)`.
//!
//! Two routes give the truncated sums. Enumeration walks the dual net
//! directly. The character-sum route uses that `2^{-m} Σ_{x∈P} wal_k(x)`
//! is the indicator of the dual net, so the sum factorizes over points:
//! `Σ_{k_v} 2^{-μ′(k_v)} = 2^{-m} Σ_h Π_{i∈v} (φ(x_{h,i}) - 1)` with
//! `φ(x) = Σ_{k<2^L} 2^{-μ′(k)} wal_k(x)`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::holder_combine;
use crate::net::{dual_basis, generate_points, DualEnumerator, GeneratorSet};
use crate::numeric::CompensatedSum;
use crate::weights::{coordinate_tail_bound, mu_dick_1d, mu_prime_value, nonzero_weight_total, weight, Order};
use crate::dyadic::digits;

#[derive(Clone, Debug, PartialEq)]
enum WeightModel {
    Uniform,
    Product(Vec<f64>),
    // keyed by subset bitmask, bit i for coordinate i + 1
    Explicit(BTreeMap<u64, f64>),
}

/// The weights `γ_v > 0` attached to nonempty coordinate subsets `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetWeights {
    model: WeightModel,
    scale: f64,
}

impl Default for SubsetWeights {
    fn default() -> Self {
        Self::uniform()
    }
}

impl SubsetWeights {
    /// `γ_v = 1` for every `v`.
    pub fn uniform() -> Self {
        Self {
            model: WeightModel::Uniform,
            scale: 1.0,
        }
    }

    /// `γ_v = Π_{i∈v} γ_i`.
    pub fn product(gammas: Vec<f64>) -> Self {
        Self {
            model: WeightModel::Product(gammas),
            scale: 1.0,
        }
    }

    /// Explicit `γ_v`, keyed by subset bitmask (bit `i` for coordinate `i+1`).
    pub fn explicit(map: BTreeMap<u64, f64>) -> Self {
        Self {
            model: WeightModel::Explicit(map),
            scale: 1.0,
        }
    }

    /// Every `γ_v` multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            model: self.model.clone(),
            scale: self.scale * t,
        }
    }

    /// `γ_v` for the subset `mask` of `{1, …, s}`.
    pub fn gamma(&self, mask: u64, s: usize) -> Result<f64> {
        let g = match &self.model {
            WeightModel::Uniform => 1.0,
            WeightModel::Product(gs) => {
                if gs.len() < s {
                    return Err(Error::DimensionMismatch {
                        expected: s,
                        got: gs.len(),
                    });
                }
                (0..s).filter(|i| mask >> i & 1 == 1).map(|i| gs[i]).product()
            }
            WeightModel::Explicit(map) => *map.get(&mask).ok_or_else(|| {
                Error::InvalidParameter(format!("no weight given for subset {}", subset_label(mask)))
            })?,
        };
        let g = g * self.scale;
        if g > 0.0 && g.is_finite() {
            Ok(g)
        } else {
            Err(Error::InvalidParameter(format!(
                "weight of subset {} is {g}, must be positive",
                subset_label(mask)
            )))
        }
    }

    /// Parse `product:0.9,0.8,…`, `file:<path>` or `uniform`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let err = |message: String| Error::Parse { line: 1, message };
        if spec == "uniform" || spec == "1" {
            return Ok(Self::uniform());
        }
        if let Some(list) = spec.strip_prefix("product:") {
            let gs = list
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| err(format!("bad weight {t:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if gs.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
                return Err(err("product weights must be positive".into()));
            }
            return Ok(Self::product(gs));
        }
        if let Some(path) = spec.strip_prefix("file:") {
            return Self::read(Path::new(path));
        }
        Err(err(format!("unknown weight spec {spec:?}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_file(&std::fs::read_to_string(path)?)
    }

    /// Lines `v gamma_v` with `v` a comma-separated list of 1-based
    /// coordinates, optionally in braces; `#` starts a comment line.
    pub fn parse_file(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let (v, g) = line
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| err("expected `v gamma_v`".into()))?;
            let v = v.trim().trim_start_matches('{').trim_end_matches('}');
            let mut mask = 0u64;
            for t in v.split(',') {
                let c: u32 = t.trim().parse().map_err(|_| err(format!("bad coordinate {t:?}")))?;
                if c == 0 || c > 63 {
                    return Err(err(format!("coordinate {c} out of range 1..=63")));
                }
                mask |= 1 << (c - 1);
            }
            let g: f64 = g.parse().map_err(|_| err(format!("bad weight {g:?}")))?;
            if !(g > 0.0 && g.is_finite()) {
                return Err(err(format!("weight {g} must be positive")));
            }
            if map.insert(mask, g).is_some() {
                return Err(err(format!("subset {} listed twice", subset_label(mask))));
            }
        }
        Ok(Self::explicit(map))
    }
}

/// `{1,3}`-style label of a subset bitmask.
pub fn subset_label(mask: u64) -> String {
    let parts: Vec<String> = (0..64).filter(|i| mask >> i & 1 == 1).map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// How the truncated dual sums are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MeritRoute {
    /// Enumeration when the dual slice is small, character sums otherwise.
    #[default]
    Auto,
    Enumerate,
    CharacterSum,
}

/// Parameters of the merit `W_{α,γ,q}`.
#[derive(Clone, Debug)]
pub struct MeritConfig {
    pub alpha: Order,
    pub gamma: SubsetWeights,
    pub q: f64,
    /// Truncation level `L`: dual elements with every `k_i < 2^L` are summed.
    pub cap_level: u32,
    /// Largest number of dual elements the enumeration route may visit.
    pub budget: u64,
    pub route: MeritRoute,
}

impl MeritConfig {
    pub fn new(alpha: Order, cap_level: u32) -> Self {
        Self {
            alpha,
            gamma: SubsetWeights::uniform(),
            q: 1.0,
            cap_level,
            budget: crate::net::DEFAULT_DUAL_BUDGET,
            route: MeritRoute::Auto,
        }
    }
}

/// A truncated figure of merit with a certified bound on the omitted part.
#[derive(Clone, Debug, PartialEq)]
pub struct MeritValue {
    pub truncated: f64,
    pub tail_bound: f64,
    /// Unweighted truncated sum for each nonempty subset, by bitmask.
    pub per_subset: Vec<(u64, f64)>,
}

impl MeritValue {
    pub fn upper(&self) -> f64 {
        self.truncated + self.tail_bound
    }
}

/// Which exponent weight is summed: `μ′_α` (`+2` per digit) or Dick's `μ_α`
/// (`+1` per digit).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Prime,
    Dick,
}

impl Kind {
    fn offset(self) -> u64 {
        match self {
            Kind::Prime => 2,
            Kind::Dick => 1,
        }
    }

    fn mu(self, k: u64, alpha: Order) -> u64 {
        match self {
            Kind::Prime => mu_prime_value(k, alpha),
            Kind::Dick => mu_dick_1d(&digits(k), alpha),
        }
    }
}

// Dimension cap for the per-subset tables.
const MAX_SUBSET_DIM: usize = 20;
// Largest dual slice the automatic route enumerates.
const AUTO_ENUMERATION_LIMIT: u64 = 1 << 20;

fn check_config(g: &GeneratorSet, alpha: Order, q: f64, cap: u32) -> Result<Order> {
    let alpha = alpha.require_smoothness()?;
    crate::functions::check_exponent("q", q)?;
    if (cap as usize) < g.n() || cap > 62 {
        return Err(Error::InvalidParameter(format!(
            "cap level {cap} must lie in [n, 62] with n = {}",
            g.n()
        )));
    }
    if g.s() > MAX_SUBSET_DIM {
        return Err(Error::Budget {
            what: "coordinate subsets",
            needed: 1u128 << g.s(),
            limit: 1u128 << MAX_SUBSET_DIM,
        });
    }
    Ok(alpha)
}

/// Truncated `Σ_{k_v ∈ P_v^⊥, k_i < 2^L} 2^{-μ(k_v)}` for every nonempty `v`,
/// indexed by bitmask (entry 0 unused).
fn subset_sums(g: &GeneratorSet, alpha: Order, cap: u32, budget: u64, route: MeritRoute, kind: Kind) -> Result<Vec<f64>> {
    let route = match route {
        MeritRoute::Auto => {
            let dim = (g.s() * cap as usize).saturating_sub(dual_basis(g).rank());
            if dim <= AUTO_ENUMERATION_LIMIT.trailing_zeros() as usize {
                MeritRoute::Enumerate
            } else {
                MeritRoute::CharacterSum
            }
        }
        r => r,
    };
    match route {
        MeritRoute::Enumerate => enumerate_sums(g, alpha, cap, budget, kind),
        _ => character_sums(g, alpha, cap, kind),
    }
}

// Fixed chunking keeps the floating-point reduction order independent of the
// thread count.
const ENUMERATION_CHUNKS: u64 = 64;

fn enumerate_sums(g: &GeneratorSet, alpha: Order, cap: u32, budget: u64, kind: Kind) -> Result<Vec<f64>> {
    let e = DualEnumerator::new(g, cap, budget)?;
    let s = g.s();
    let partials: Vec<Vec<CompensatedSum>> = e
        .partition(ENUMERATION_CHUNKS)
        .into_par_iter()
        .map(|(a, b)| {
            let mut acc = vec![CompensatedSum::new(); 1 << s];
            e.for_each_in(a, b, |k| {
                let mut mask = 0u64;
                let mut mu = 0u64;
                for (i, &ki) in k.iter().enumerate() {
                    if ki != 0 {
                        mask |= 1 << i;
                        mu += kind.mu(ki, alpha);
                    }
                }
                if mask != 0 {
                    acc[mask as usize].add(weight(mu));
                }
            });
            acc
        })
        .collect();
    let mut total = vec![CompensatedSum::new(); 1 << s];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.add(p.value());
        }
    }
    Ok(total.iter().map(CompensatedSum::value).collect())
}

/// `agg[r] = Σ_{k < 2^L, k ≡ r mod 2^n} 2^{-μ(k)}`.
///
/// Digits at positions `n..L` are processed from the top, tracking how many
/// of the leading `α` digits they used; the low part `r` then contributes
/// with the remaining budget.
fn aggregate_weights(alpha: Order, n: u32, cap: u32, kind: Kind) -> Vec<f64> {
    let high = (cap - n) as usize;
    let states = match alpha {
        Order::Finite(a) => (a as usize).min(high) + 1,
        Order::Infinite => high + 1,
    };
    let counted = |c: usize| alpha.is_at_least(c as u32 + 1);
    // a[c]: total weight of high-digit patterns with c digits so far
    let mut a = vec![0.0f64; states];
    a[0] = 1.0;
    for pos in (n..cap).rev() {
        let w = weight(pos as u64 + kind.offset());
        let mut next = a.clone();
        for c in 0..states {
            if a[c] == 0.0 {
                continue;
            }
            let (target, factor) = if counted(c) { ((c + 1).min(states - 1), w) } else { (c, 1.0) };
            next[target] += a[c] * factor;
        }
        a = next;
    }
    let remaining = |c: usize| match alpha {
        Order::Finite(x) => Order::Finite(x.saturating_sub(c as u32)),
        Order::Infinite => Order::Infinite,
    };
    (0..1u64 << n)
        .map(|r| {
            let mut acc = CompensatedSum::new();
            for (c, &ac) in a.iter().enumerate() {
                if ac != 0.0 {
                    let rest = remaining(c);
                    let mu = if rest == Order::Finite(0) { 0 } else { kind.mu(r, rest) };
                    acc.add(ac * weight(mu));
                }
            }
            acc.value()
        })
        .collect()
}

fn walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

fn bit_reverse(x: u64, bits: u32) -> u64 {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (64 - bits)
    }
}

/// `φ(x) - 1` on the level-`n` grid, indexed by numerator.
fn phi_minus_one(alpha: Order, n: u32, cap: u32, kind: Kind) -> Vec<f64> {
    let mut h = aggregate_weights(alpha, n, cap, kind);
    walsh_hadamard(&mut h);
    // wal_r at numerator X pairs bit j of r with bit n-1-j of X
    (0..1u64 << n).map(|x| h[bit_reverse(x, n) as usize] - 1.0).collect()
}

fn character_sums(g: &GeneratorSet, alpha: Order, cap: u32, kind: Kind) -> Result<Vec<f64>> {
    let n = g.n() as u32;
    if n > 26 {
        return Err(Error::Budget {
            what: "character-sum table",
            needed: 1u128 << n,
            limit: 1 << 26,
        });
    }
    let phi = phi_minus_one(alpha, n, cap, kind);
    let p = generate_points(g);
    let s = g.s();
    let chunks = p.len().div_ceil(ENUMERATION_CHUNKS as usize).max(1);
    let partials: Vec<Vec<CompensatedSum>> = (0..p.len())
        .collect::<Vec<_>>()
        .par_chunks(chunks)
        .map(|hs| {
            let mut acc = vec![CompensatedSum::new(); 1 << s];
            let mut prod = vec![1.0f64; 1 << s];
            for &h in hs {
                let t: Vec<f64> = p.numerators(h).iter().map(|&x| phi[x as usize]).collect();
                for mask in 1usize..1 << s {
                    let low = mask.trailing_zeros() as usize;
                    prod[mask] = prod[mask & (mask - 1)] * t[low];
                    acc[mask].add(prod[mask]);
                }
            }
            acc
        })
        .collect();
    let scale = (-(g.m() as f64)).exp2();
    let mut total = vec![CompensatedSum::new(); 1 << s];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.add(p.value());
        }
    }
    Ok(total.iter().map(|c| c.value() * scale).collect())
}

/// Bound on the omitted part of subset `v`'s sum: some `k_i ≥ 2^L`, which
/// costs `tail1` in that coordinate and at most `T` in each other one.
fn subset_tail(size: usize, tail1: f64, nonzero_total: f64) -> f64 {
    size as f64 * tail1 * nonzero_total.powi(size as i32 - 1)
}

/// The merit `W_{α,γ,q}(P)` truncated at `k_i < 2^L`, with a certified
/// bound on the omitted dual elements.
pub fn merit_new(g: &GeneratorSet, cfg: &MeritConfig) -> Result<MeritValue> {
    let alpha = check_config(g, cfg.alpha, cfg.q, cfg.cap_level)?;
    let sums = subset_sums(g, alpha, cfg.cap_level, cfg.budget, cfg.route, Kind::Prime)?;
    let s = g.s();
    let tail1 = coordinate_tail_bound(alpha, cfg.cap_level)?;
    let nonzero = nonzero_weight_total(alpha)?;
    let mut weighted = Vec::with_capacity(sums.len());
    let mut tails = Vec::with_capacity(sums.len());
    let mut per_subset = Vec::with_capacity(sums.len());
    for mask in 1u64..1 << s {
        let gamma = cfg.gamma.gamma(mask, s)?;
        let sum = sums[mask as usize].max(0.0);
        weighted.push(gamma * sum);
        tails.push(gamma * subset_tail(mask.count_ones() as usize, tail1, nonzero));
        per_subset.push((mask, sum));
    }
    Ok(MeritValue {
        truncated: holder_combine(&weighted, cfg.q),
        tail_bound: holder_combine(&tails, cfg.q),
        per_subset,
    })
}

/// WAFOM: `Σ_{0≠k∈P^⊥, k_i<2^n} 2^{-μ′_∞(k)}`, by the product formula
/// `2^{-m} Σ_{x∈P} Π_i Π_{j=1}^n (1 + (-1)^{x_{i,j}} 2^{-(j+1)}) - 1`.
pub fn wafom_fast(g: &GeneratorSet) -> f64 {
    let n = g.n() as u32;
    let p = generate_points(g);
    let mut acc = CompensatedSum::new();
    for h in 0..p.len() {
        let mut prod = 1.0;
        for &x in p.numerators(h) {
            for j in 1..=n {
                let bit = x >> (n - j) & 1;
                let t = (-(j as f64 + 1.0)).exp2();
                prod *= if bit == 0 { 1.0 + t } else { 1.0 - t };
            }
        }
        acc.add(prod);
    }
    acc.value() * (-(g.m() as f64)).exp2() - 1.0
}

/// WAFOM by summing over the enumerated dual net at `L = n`.
pub fn wafom_brute_force(g: &GeneratorSet, budget: u64) -> Result<f64> {
    let sums = enumerate_sums(g, Order::Infinite, g.n() as u32, budget, Kind::Prime)?;
    Ok(CompensatedSum::from_iter(sums.into_iter().skip(1)).value())
}

/// Dick's weight sum `(Σ_v (C_α^{|v|} γ_v Σ_{k_v} 2^{-μ_α(k_v)})^{r′})^{1/r′}`,
/// truncated at `k_i < 2^L`. `C_α` is supplied by the caller.
pub fn merit_dick_weightsum(
    g: &GeneratorSet,
    alpha: Order,
    gamma: &SubsetWeights,
    r_prime: f64,
    c_alpha: f64,
    cap_level: u32,
    budget: u64,
) -> Result<f64> {
    if !(c_alpha > 0.0 && c_alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("C_alpha = {c_alpha} must be positive")));
    }
    let alpha = check_config(g, alpha, r_prime, cap_level)?;
    let sums = subset_sums(g, alpha, cap_level, budget, MeritRoute::Auto, Kind::Dick)?;
    let s = g.s();
    let mut terms = Vec::new();
    for mask in 1u64..1 << s {
        let c = c_alpha.powi(mask.count_ones() as i32);
        terms.push(c * gamma.gamma(mask, s)? * sums[mask as usize].max(0.0));
    }
    Ok(holder_combine(&terms, r_prime))
}

/// One row of a search trace.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    #[serde(rename = "seed-offset")]
    pub seed_offset: u64,
    pub merit_truncated: f64,
    pub tail_bound: f64,
    pub merit_upper: f64,
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best: GeneratorSet,
    pub best_trial: u64,
    pub best_merit: MeritValue,
    pub trace: Vec<TrialRecord>,
}

/// Random search over generator sets with uniform GF(2) entries. Trial `t`
/// draws its matrices from ChaCha8 seeded with `seed + t`, so results do not
/// depend on `jobs`. Ties keep the earliest trial.
pub fn search_random(
    s: usize,
    n: usize,
    m: usize,
    cfg: &MeritConfig,
    trials: u64,
    seed: u64,
    jobs: usize,
) -> Result<SearchResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let results: Vec<(GeneratorSet, MeritValue)> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
                let g = GeneratorSet::random(s, n, m, &mut rng)?;
                let v = merit_new(&g, cfg)?;
                Ok((g, v))
            })
            .collect::<Result<_>>()
    })?;
    let mut best = 0;
    for (i, (_, v)) in results.iter().enumerate() {
        if v.upper() < results[best].1.upper() {
            best = i;
        }
    }
    let trace = results
        .iter()
        .enumerate()
        .map(|(t, (_, v))| TrialRecord {
            trial: t as u64,
            seed_offset: t as u64,
            merit_truncated: v.truncated,
            tail_bound: v.tail_bound,
            merit_upper: v.upper(),
        })
        .collect();
    let (g, v) = results.into_iter().nth(best).expect("nonempty");
    Ok(SearchResult {
        best: g,
        best_trial: best as u64,
        best_merit: v,
        trace,
    })
}

pub fn write_trace<W: std::io::Write>(trace: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in trace {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
