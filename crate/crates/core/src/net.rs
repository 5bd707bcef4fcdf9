//! Base-2 digital nets, their dual nets, and the character-sum identity.
//!
//! Point `h` of the net has coordinate `i` with digit vector
//! `(y_{h,i,1}, …, y_{h,i,n}) = C_i · h⃗`, where `h⃗` lists the binary digits of
//! `h` from the least significant one. A frequency vector `k` lies in the
//! dual net when `Σ_i C_iᵀ k⃗_i = 0`, with `k⃗_i` the lowest `n` digits of
//! `k_i`; higher digits of `k_i` are unconstrained.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::dyadic::{DyadicValue, MultiIndex};
use crate::error::{Error, Result};
use crate::gf2::{BitVec, Echelon};

/// Largest supported row count `n` and column count `m`.
pub const MAX_PRECISION: usize = 62;

/// An `n × m` matrix over GF(2). Row `j` is a word whose bit `c` holds
/// column `c + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    cols: usize,
    rows: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::from_rows(cols, vec![0; rows])
    }

    pub fn identity(rows: usize, cols: usize) -> Result<Self> {
        let mut m = Self::zeros(rows, cols)?;
        for j in 0..rows.min(cols) {
            m.rows[j] = 1 << j;
        }
        Ok(m)
    }

    /// Build from packed rows; bits at or above `cols` must be clear.
    pub fn from_rows(cols: usize, rows: Vec<u64>) -> Result<Self> {
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidGenerator("matrix dimensions must be positive".into()));
        }
        if rows.len() > MAX_PRECISION || cols > MAX_PRECISION {
            return Err(Error::InvalidGenerator(format!(
                "matrix is {}x{cols}, limit is {MAX_PRECISION}",
                rows.len()
            )));
        }
        if rows.iter().any(|&r| r >> cols != 0) {
            return Err(Error::InvalidGenerator("row has bits beyond the last column".into()));
        }
        Ok(Self { cols, rows })
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        let mask = (1u64 << cols) - 1;
        Self::from_rows(cols, (0..rows).map(|_| rng.gen::<u64>() & mask).collect())
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Entry at 0-based row `r` and column `c`.
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r] >> c & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, bit: bool) {
        if bit {
            self.rows[r] |= 1 << c;
        } else {
            self.rows[r] &= !(1 << c);
        }
    }

    pub fn row(&self, r: usize) -> u64 {
        self.rows[r]
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    /// `C · h⃗` as an `n`-bit word, bit `j` holding output digit `j + 1`.
    pub fn apply(&self, h: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &r)| acc | (u64::from((r & h).count_ones() & 1) << j))
    }

    /// `Cᵀ k⃗` for the lowest `n` digits of `k`, as an `m`-bit word.
    pub fn apply_transpose(&self, k: u64) -> u64 {
        self.rows
            .iter()
            .enumerate()
            .filter(|(j, _)| k >> j & 1 == 1)
            .fold(0, |acc, (_, &r)| acc ^ r)
    }
}

/// The generator matrices `C_1, …, C_s` of a digital net with `2^m` points
/// and `n` output digits per coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GeneratorSet {
    n: usize,
    m: usize,
    matrices: Vec<BitMatrix>,
}

impl GeneratorSet {
    pub fn new(matrices: Vec<BitMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidGenerator("at least one matrix is required".into()))?;
        let (n, m) = (first.nrows(), first.ncols());
        if n < m {
            return Err(Error::InvalidGenerator(format!("need n >= m, got n={n}, m={m}")));
        }
        if let Some(bad) = matrices.iter().find(|c| c.nrows() != n || c.ncols() != m) {
            return Err(Error::InvalidGenerator(format!(
                "matrix shapes differ: {n}x{m} and {}x{}",
                bad.nrows(),
                bad.ncols()
            )));
        }
        Ok(Self { n, m, matrices })
    }

    /// `s` copies of the `n × m` identity.
    pub fn identity(s: usize, n: usize, m: usize) -> Result<Self> {
        Self::new(vec![BitMatrix::identity(n, m)?; s])
    }

    pub fn random<R: Rng + ?Sized>(s: usize, n: usize, m: usize, rng: &mut R) -> Result<Self> {
        let matrices = (0..s)
            .map(|_| BitMatrix::random(n, m, rng))
            .collect::<Result<_>>()?;
        Self::new(matrices)
    }

    pub fn s(&self) -> usize {
        self.matrices.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrices(&self) -> &[BitMatrix] {
        &self.matrices
    }

    pub fn num_points(&self) -> u64 {
        1 << self.m
    }

    /// Numerator at level `n` of coordinate `i` of point `h`.
    pub fn coordinate(&self, h: u64, i: usize) -> u64 {
        let y = self.matrices[i].apply(h);
        // bit j of y is digit j + 1, i.e. weight 2^{n-1-j}
        (0..self.n).fold(0, |acc, j| acc | ((y >> j & 1) << (self.n - 1 - j)))
    }

    /// Whether `k` (any digits, only the lowest `n` of each coordinate read)
    /// satisfies the dual condition.
    pub fn annihilates(&self, k: &[u64]) -> bool {
        debug_assert_eq!(k.len(), self.s());
        k.iter()
            .zip(&self.matrices)
            .fold(0, |acc, (&ki, c)| acc ^ c.apply_transpose(ki))
            == 0
    }

    /// Parse the text format: `s n m`, then `s` blocks of `n` rows of `m`
    /// characters from `{0, 1}`. Blank lines separate blocks; lines starting
    /// with `#` are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "missing header `s n m`".into(),
        })?;
        let dims = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: hline,
                message: format!("bad header: {e}"),
            })?;
        let [s, n, m] = dims[..] else {
            return Err(Error::Parse {
                line: hline,
                message: format!("header needs 3 fields, got {}", dims.len()),
            });
        };
        if s == 0 || n == 0 || m == 0 || n > MAX_PRECISION || m > MAX_PRECISION {
            return Err(Error::Parse {
                line: hline,
                message: format!("unsupported dimensions s={s} n={n} m={m}"),
            });
        }
        let mut matrices = Vec::with_capacity(s);
        for _ in 0..s {
            let mut rows = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln, row) = lines.next().ok_or(Error::Parse {
                    line: 0,
                    message: "unexpected end of input".into(),
                })?;
                if row.chars().count() != m {
                    return Err(Error::Parse {
                        line: ln,
                        message: format!("expected {m} columns, got {}", row.chars().count()),
                    });
                }
                let mut word = 0u64;
                for (c, ch) in row.chars().enumerate() {
                    match ch {
                        '0' => {}
                        '1' => word |= 1 << c,
                        _ => {
                            return Err(Error::Parse {
                                line: ln,
                                message: format!("unexpected character {ch:?}"),
                            })
                        }
                    }
                }
                rows.push(word);
            }
            matrices.push(BitMatrix::from_rows(m, rows)?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                message: "trailing content after last matrix".into(),
            });
        }
        Self::new(matrices).map_err(|e| Error::Parse {
            line: hline,
            message: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.s(), self.n, self.m);
        for (i, c) in self.matrices.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for r in 0..self.n {
                for col in 0..self.m {
                    out.push(if c.get(r, col) { '1' } else { '0' });
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// The `2^m` points of a digital net, coordinates at level `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet {
    s: usize,
    n: u32,
    m: u32,
    // row-major, point h occupies [h*s, (h+1)*s)
    numerators: Vec<u64>,
}

impl PointSet {
    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn level(&self) -> u32 {
        self.n
    }

    pub fn log_len(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        self.numerators.len() / self.s
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    /// Numerators of point `h`.
    pub fn numerators(&self, h: usize) -> &[u64] {
        &self.numerators[h * self.s..(h + 1) * self.s]
    }

    pub fn point(&self, h: usize) -> Vec<DyadicValue> {
        self.numerators(h)
            .iter()
            .map(|&a| DyadicValue::new(a, self.n).expect("numerator below 2^n"))
            .collect()
    }

    pub fn point_f64(&self, h: usize) -> Vec<f64> {
        let scale = (-(self.n as f64)).exp2();
        self.numerators(h).iter().map(|&a| a as f64 * scale).collect()
    }

    pub fn iter_f64(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|h| self.point_f64(h))
    }

    /// Write `h, x_1, …, x_s` rows with exact `a/2^n` values as decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h");
        for i in 1..=self.s {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for h in 0..self.len() {
            let _ = write!(out, "{h}");
            for x in self.point_f64(h) {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn generate_points(g: &GeneratorSet) -> PointSet {
    let s = g.s();
    let mut numerators = Vec::with_capacity(s << g.m());
    for h in 0..g.num_points() {
        for i in 0..s {
            numerators.push(g.coordinate(h, i));
        }
    }
    PointSet {
        s,
        n: g.n() as u32,
        m: g.m() as u32,
        numerators,
    }
}

/// `Σ_{x ∈ P} wal_k(x)`, which is `2^m` on the dual net and `0` elsewhere.
pub fn char_sum(p: &PointSet, k: &MultiIndex) -> Result<i64> {
    if k.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: k.dim(),
        });
    }
    let n = p.level();
    // wal_k(x) reads digit a+1 of x for each exponent a; at level n that is
    // bit n-1-a of the numerator, and digits beyond n vanish.
    let masks: Vec<u64> = k
        .values()
        .iter()
        .map(|&ki| {
            (0..n)
                .filter(|&a| ki >> a & 1 == 1)
                .fold(0, |acc, a| acc | 1 << (n - 1 - a))
        })
        .collect();
    Ok((0..p.len())
        .map(|h| {
            let odd = p
                .numerators(h)
                .iter()
                .zip(&masks)
                .fold(0, |acc, (&x, &mk)| acc ^ (x & mk).count_ones())
                & 1;
            1 - 2 * i64::from(odd)
        })
        .sum())
}

/// A basis of `{ (k⃗_1, …, k⃗_s) : Σ C_iᵀ k⃗_i = 0 }` over GF(2).
#[derive(Clone, Debug)]
pub struct DualBasis {
    s: usize,
    n: usize,
    rank: usize,
    // each basis vector as s coordinates of n bits
    basis: Vec<Vec<u64>>,
    free: Vec<usize>,
}

impl DualBasis {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nullity(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<u64>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn precision(&self) -> usize {
        self.n
    }

    /// Whether the lowest `n` digits of each `k_i` lie in the span.
    pub fn contains(&self, k: &[u64]) -> bool {
        let mask = (1u64 << self.n) - 1;
        let mut v: Vec<u64> = k.iter().map(|&x| x & mask).collect();
        // basis vector b is the only one with its free column set
        for (b, &f) in self.basis.iter().zip(&self.free) {
            let (i, j) = (f / self.n, f % self.n);
            if v[i] >> j & 1 == 1 {
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi ^= bi;
                }
            }
        }
        v.iter().all(|&x| x == 0)
    }
}

pub fn dual_basis(g: &GeneratorSet) -> DualBasis {
    let (s, n, m) = (g.s(), g.n(), g.m());
    let cols = s * n;
    // equation c: Σ_i Σ_j C_i[j][c] κ_{i,j} = 0, unknown (i, j) at column i*n + j
    let rows: Vec<BitVec> = (0..m)
        .map(|c| {
            let mut r = BitVec::zeros(cols);
            for (i, mat) in g.matrices().iter().enumerate() {
                for j in 0..n {
                    if mat.get(j, c) {
                        r.set(i * n + j, true);
                    }
                }
            }
            r
        })
        .collect();
    let ech = Echelon::new(rows, cols);
    let free = ech.free_columns();
    let basis = ech
        .nullspace()
        .into_iter()
        .map(|v| {
            let mut k = vec![0u64; s];
            for idx in v.ones() {
                k[idx / n] |= 1 << (idx % n);
            }
            k
        })
        .collect();
    DualBasis {
        s,
        n,
        rank: ech.rank(),
        basis,
        free,
    }
}

/// Default cap on the number of dual elements an enumeration may visit.
pub const DEFAULT_DUAL_BUDGET: u64 = 1 << 26;

/// The dual-net elements with every `k_i < 2^L`, addressed by index.
///
/// The elements form a GF(2) space spanned by the dual basis together with
/// the unconstrained digits `n+1, …, L` of every coordinate; element `t` is
/// the combination selected by the bits of the Gray code of `t`, so
/// consecutive elements differ by one generator.
#[derive(Clone, Debug)]
pub struct DualEnumerator {
    s: usize,
    generators: Vec<Vec<u64>>,
}

impl DualEnumerator {
    pub fn new(g: &GeneratorSet, cap_level: u32, budget: u64) -> Result<Self> {
        Self::from_basis(&dual_basis(g), cap_level, budget)
    }

    pub fn from_basis(basis: &DualBasis, cap_level: u32, budget: u64) -> Result<Self> {
        let (s, n) = (basis.dim(), basis.precision());
        let cap = cap_level as usize;
        if cap < n || cap > 63 {
            return Err(Error::InvalidParameter(format!(
                "cap level {cap_level} must lie in [n, 63] with n = {n}"
            )));
        }
        let mut generators = basis.basis().to_vec();
        for i in 0..s {
            for j in n..cap {
                let mut k = vec![0u64; s];
                k[i] = 1 << j;
                generators.push(k);
            }
        }
        let dimension = generators.len();
        if dimension >= 64 || (1u64 << dimension) > budget {
            return Err(Error::Budget {
                what: "dual-net enumeration",
                needed: 1u128 << dimension.min(127),
                limit: u128::from(budget),
            });
        }
        Ok(Self { s, generators })
    }

    /// `log₂` of the element count.
    pub fn dimension(&self) -> usize {
        self.generators.len()
    }

    pub fn len(&self) -> u64 {
        1 << self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Element number `t`.
    pub fn element(&self, t: u64) -> Vec<u64> {
        let code = t ^ (t >> 1);
        let mut k = vec![0u64; self.s];
        for (b, gen) in self.generators.iter().enumerate() {
            if code >> b & 1 == 1 {
                for (ki, gi) in k.iter_mut().zip(gen) {
                    *ki ^= gi;
                }
            }
        }
        k
    }

    /// Visit elements `start..end` in order.
    pub fn for_each_in<F: FnMut(&[u64])>(&self, start: u64, end: u64, mut f: F) {
        if start >= end {
            return;
        }
        let mut k = self.element(start);
        f(&k);
        for t in start + 1..end {
            let gen = &self.generators[t.trailing_zeros() as usize];
            for (ki, gi) in k.iter_mut().zip(gen) {
                *ki ^= gi;
            }
            f(&k);
        }
    }

    pub fn for_each<F: FnMut(&[u64])>(&self, f: F) {
        self.for_each_in(0, self.len(), f)
    }

    /// Split `0..len` into `parts` contiguous index ranges.
    pub fn partition(&self, parts: u64) -> Vec<(u64, u64)> {
        let parts = parts.clamp(1, self.len());
        let len = self.len();
        (0..parts)
            .map(|p| (len * p / parts, len * (p + 1) / parts))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        (0..self.len()).map(|t| MultiIndex::new(&self.element(t)))
    }
}

/// Dual-net elements with every `k_i < 2^L`, collected.
pub fn enumerate_dual(g: &GeneratorSet, cap_level: u32, budget: u64) -> Result<Vec<MultiIndex>> {
    Ok(DualEnumerator::new(g, cap_level, budget)?.iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_dim(m: usize, rows: &[u64]) -> GeneratorSet {
        GeneratorSet::new(vec![BitMatrix::from_rows(m, rows.to_vec()).unwrap()]).unwrap()
    }

    fn values(p: &PointSet) -> Vec<f64> {
        p.iter_f64().map(|x| x[0]).collect()
    }

    #[test]
    fn identity_net_points() {
        let g = GeneratorSet::identity(1, 2, 2).unwrap();
        assert_eq!(values(&generate_points(&g)), vec![0.0, 0.5, 0.25, 0.75]);
    }

    #[test]
    fn rectangular_net_points() {
        let g = one_dim(1, &[1, 0]);
        assert_eq!(values(&generate_points(&g)), vec![0.0, 0.5]);
    }

    #[test]
    fn origin_is_first_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = GeneratorSet::random(3, 6, 4, &mut rng).unwrap();
        assert!(generate_points(&g).numerators(0).iter().all(|&a| a == 0));
    }

    #[test]
    fn dual_basis_examples() {
        let id = dual_basis(&GeneratorSet::identity(1, 2, 2).unwrap());
        assert_eq!((id.rank(), id.nullity()), (2, 0));

        let g = one_dim(2, &[0b01, 0b10, 0b00]);
        let b = dual_basis(&g);
        assert_eq!(b.nullity(), 1);
        let members: Vec<u64> = (0..8).filter(|&k| b.contains(&[k])).collect();
        assert_eq!(members, vec![0, 4]);

        let zero = GeneratorSet::new(vec![BitMatrix::zeros(3, 2).unwrap(); 2]).unwrap();
        let z = dual_basis(&zero);
        assert_eq!(z.nullity(), 6);
        assert!((0..8).all(|a| (0..8).all(|b| z.contains(&[a, b]))));
    }

    #[test]
    fn enumerate_dual_examples() {
        let id = GeneratorSet::identity(1, 2, 2).unwrap();
        let mut ks: Vec<u64> = enumerate_dual(&id, 6, 1 << 20)
            .unwrap()
            .iter()
            .map(|k| k.values()[0])
            .collect();
        ks.sort_unstable();
        assert_eq!(ks, (0..16).map(|t| 4 * t).collect::<Vec<_>>());

        let g = one_dim(2, &[0b01, 0b10, 0b00]);
        let mut ks: Vec<u64> = enumerate_dual(&g, 3, 1 << 20)
            .unwrap()
            .iter()
            .map(|k| k.values()[0])
            .collect();
        ks.sort_unstable();
        assert_eq!(ks, vec![0, 4]);
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let id = GeneratorSet::identity(2, 4, 4).unwrap();
        let err = DualEnumerator::new(&id, 20, 1 << 10).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn char_sum_examples() {
        let p = generate_points(&GeneratorSet::identity(1, 2, 2).unwrap());
        assert_eq!(char_sum(&p, &MultiIndex::new(&[0])).unwrap(), 4);
        assert_eq!(char_sum(&p, &MultiIndex::new(&[1])).unwrap(), 0);
        assert_eq!(char_sum(&p, &MultiIndex::new(&[4])).unwrap(), 4);
    }

    #[test]
    fn char_sum_matches_membership_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (s, n, m) in [(1, 8, 5), (2, 4, 3), (2, 6, 6), (4, 4, 2), (3, 5, 4)] {
            for _ in 0..4 {
                let g = GeneratorSet::random(s, n, m, &mut rng).unwrap();
                let p = generate_points(&g);
                let b = dual_basis(&g);
                for t in 0..1u64 << (s * n) {
                    let k: Vec<u64> = (0..s).map(|i| t >> (i * n) & ((1 << n) - 1)).collect();
                    let cs = char_sum(&p, &MultiIndex::new(&k)).unwrap();
                    let member = b.contains(&k);
                    assert_eq!(member, g.annihilates(&k));
                    assert_eq!(cs, if member { 1 << m } else { 0 }, "k={k:?}");
                }
            }
        }
    }

    #[test]
    fn enumeration_count_and_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (s, n, m, cap) in [(1, 4, 4, 7), (2, 3, 2, 5), (3, 3, 3, 4)] {
            let g = GeneratorSet::random(s, n, m, &mut rng).unwrap();
            let b = dual_basis(&g);
            let e = DualEnumerator::from_basis(&b, cap, 1 << 24).unwrap();
            assert_eq!(e.dimension(), s * cap as usize - b.rank());
            let mut seen = std::collections::HashSet::new();
            e.for_each(|k| {
                assert!(g.annihilates(k));
                assert!(k.iter().all(|&x| x < 1 << cap));
                assert!(seen.insert(k.to_vec()));
            });
            assert_eq!(seen.len() as u64, e.len());
            let brute = (0..1u64 << (s * cap as usize))
                .filter(|t| {
                    let k: Vec<u64> = (0..s).map(|i| t >> (i * cap as usize) & ((1 << cap) - 1)).collect();
                    g.annihilates(&k)
                })
                .count();
            assert_eq!(brute as u64, e.len());
        }
    }

    #[test]
    fn partitions_cover_the_enumeration_in_order() {
        let g = GeneratorSet::identity(2, 3, 3).unwrap();
        let e = DualEnumerator::new(&g, 5, 1 << 20).unwrap();
        let mut whole = Vec::new();
        e.for_each(|k| whole.push(k.to_vec()));
        let mut pieces = Vec::new();
        for (a, b) in e.partition(5) {
            e.for_each_in(a, b, |k| pieces.push(k.to_vec()));
        }
        assert_eq!(whole, pieces);
        assert_eq!(whole[0], vec![0, 0]);
    }

    #[test]
    fn text_format_round_trip() {
        let text = "# two matrices\n2 3 2\n10\n01\n00\n\n11\n01\n10\n";
        let g = GeneratorSet::parse(text).unwrap();
        assert_eq!((g.s(), g.n(), g.m()), (2, 3, 2));
        assert_eq!(g.matrices()[1].rows(), &[0b11, 0b10, 0b01]);
        assert_eq!(GeneratorSet::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn text_format_errors() {
        for bad in ["", "1 2", "1 2 2\n10\n", "1 2 2\n10\n0x\n", "1 1 2\n11\n", "1 2 2\n10\n01\n11\n"] {
            assert!(matches!(GeneratorSet::parse(bad), Err(Error::Parse { .. })), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn point_set_is_a_group_under_digit_xor(seed in any::<u64>(), s in 1usize..4, m in 1usize..6, extra in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = GeneratorSet::random(s, m + extra, m, &mut rng).unwrap();
            let p = generate_points(&g);
            let set: std::collections::HashSet<Vec<u64>> =
                (0..p.len()).map(|h| p.numerators(h).to_vec()).collect();
            prop_assert!(set.contains(&vec![0; s]));
            for a in 0..p.len() {
                for b in 0..p.len() {
                    let x: Vec<u64> = p.numerators(a).iter().zip(p.numerators(b)).map(|(u, v)| u ^ v).collect();
                    prop_assert!(set.contains(&x));
                }
            }
        }
    }
}
