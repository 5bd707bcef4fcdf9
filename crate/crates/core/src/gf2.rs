//! Packed linear algebra over GF(2).

use std::fmt;

/// A fixed-length bit vector packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Index of the lowest set bit.
    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        Ok(())
    }
}

/// Reduced row-echelon form of a set of rows.
#[derive(Clone, Debug)]
pub struct Echelon {
    /// Nonzero reduced rows, one per pivot, in increasing pivot order.
    pub rows: Vec<BitVec>,
    /// Pivot column of each row.
    pub pivots: Vec<usize>,
    pub cols: usize,
}

impl Echelon {
    /// Gauss–Jordan elimination, pivoting on the first set bit of each row.
    pub fn new(rows: Vec<BitVec>, cols: usize) -> Self {
        let mut basis: Vec<BitVec> = Vec::new();
        let mut pivots: Vec<usize> = Vec::new();
        for mut row in rows {
            for (b, &p) in basis.iter().zip(&pivots) {
                if row.get(p) {
                    row.xor_assign(b);
                }
            }
            if let Some(p) = row.first_one() {
                for b in basis.iter_mut() {
                    if b.get(p) {
                        b.xor_assign(&row);
                    }
                }
                basis.push(row);
                pivots.push(p);
            }
        }
        let mut order: Vec<usize> = (0..basis.len()).collect();
        order.sort_by_key(|&i| pivots[i]);
        Self {
            rows: order.iter().map(|&i| basis[i].clone()).collect(),
            pivots: order.iter().map(|&i| pivots[i]).collect(),
            cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Non-pivot columns, ascending.
    pub fn free_columns(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.cols];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        (0..self.cols).filter(|&c| !is_pivot[c]).collect()
    }

    /// One kernel vector per free column `f`: `e_f` plus the pivot columns
    /// whose reduced rows contain `f`.
    pub fn nullspace(&self) -> Vec<BitVec> {
        self.free_columns()
            .into_iter()
            .map(|f| {
                let mut v = BitVec::zeros(self.cols);
                v.set(f, true);
                for (row, &p) in self.rows.iter().zip(&self.pivots) {
                    if row.get(f) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &[u8]) -> BitVec {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b == 1);
        }
        v
    }

    fn apply(rows: &[BitVec], v: &BitVec) -> bool {
        rows.iter().all(|r| {
            let mut acc = false;
            for i in v.ones() {
                acc ^= r.get(i);
            }
            !acc
        })
    }

    #[test]
    fn nullspace_of_small_system() {
        let rows = vec![bv(&[1, 1, 0, 1]), bv(&[0, 1, 1, 0]), bv(&[1, 0, 1, 1])];
        let ech = Echelon::new(rows.clone(), 4);
        assert_eq!(ech.rank(), 2);
        let ns = ech.nullspace();
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(!v.is_zero());
            assert!(apply(&rows, v));
        }
    }

    #[test]
    fn wide_vectors_cross_word_boundaries() {
        let mut r = BitVec::zeros(130);
        r.set(3, true);
        r.set(70, true);
        r.set(129, true);
        let ech = Echelon::new(vec![r.clone()], 130);
        let ns = ech.nullspace();
        assert_eq!(ns.len(), 129);
        assert!(ns.iter().all(|v| apply(&[r.clone()], v)));
        assert_eq!(r.first_one(), Some(3));
    }
}
