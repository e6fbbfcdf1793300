//! Incremental GF(2) row reduction on bit-packed rows.
//!
//! Rows are inserted one at a time, reduced against the current pivots, and
//! dropped early when dependent, so the working set stays at most
//! rank-by-width however many rows are fed in.

use crate::bits::BitVec;

/// A set of independent rows in echelon form, one distinct pivot per row.
#[derive(Clone, Debug)]
pub struct Echelon {
    rows: Vec<BitVec>,
    pivots: Vec<usize>,
    ncols: usize,
}

impl Echelon {
    pub fn new(ncols: usize) -> Self {
        Echelon {
            rows: Vec::new(),
            pivots: Vec::new(),
            ncols,
        }
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `v` against the stored rows.
    pub fn reduce(&self, v: &BitVec) -> BitVec {
        let mut v = v.clone();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if v.get(p) {
                v.xor_with(row);
            }
        }
        v
    }

    /// Insert a row, keeping only its independent part. Returns true when the
    /// rank grew.
    pub fn insert(&mut self, v: &BitVec) -> bool {
        let reduced = self.reduce(v);
        match reduced.first_one() {
            None => false,
            Some(p) => {
                self.rows.push(reduced);
                self.pivots.push(p);
                true
            }
        }
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce(v).is_zero()
    }

    /// Pivot columns, unsorted (insertion order).
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Basis of the right nullspace `{x : row . x = 0 for every row}`.
    ///
    /// One basis vector per non-pivot column, with a 1 in that column; this
    /// makes the basis itself an echelon over the free columns.
    pub fn nullspace_basis(&self) -> Vec<BitVec> {
        // Bring to reduced form: clear pivot columns from all other rows.
        let mut rows = self.rows.clone();
        let mut pivots = self.pivots.clone();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.sort_by_key(|&i| pivots[i]);
        let rows_sorted: Vec<BitVec> = order.iter().map(|&i| rows[i].clone()).collect();
        let pivots_sorted: Vec<usize> = order.iter().map(|&i| pivots[i]).collect();
        rows = rows_sorted;
        pivots = pivots_sorted;
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                if i != j && rows[j].get(pivots[i]) {
                    let row_i = rows[i].clone();
                    rows[j].xor_with(&row_i);
                }
            }
        }
        let is_pivot = {
            let mut m = vec![false; self.ncols];
            for &p in &pivots {
                m[p] = true;
            }
            m
        };
        let pivot_row: std::collections::BTreeMap<usize, usize> =
            pivots.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let mut basis = Vec::new();
        for free in (0..self.ncols).filter(|&c| !is_pivot[c]) {
            let mut x = BitVec::zeros(self.ncols);
            x.set(free, true);
            for (&p, &i) in &pivot_row {
                if rows[i].get(free) {
                    x.set(p, true);
                }
            }
            basis.push(x);
        }
        basis
    }
}

/// Lexicographically least odd-weight vector of the span of `basis`
/// (column 0 compared first, 0 before 1), or None when every vector in the
/// span has even weight.
pub fn lex_min_odd_weight(basis: &[BitVec]) -> Option<BitVec> {
    let odd_at = basis.iter().position(|b| b.count_ones() % 2 == 1)?;
    let anchor = basis[odd_at].clone();
    // The odd-weight vectors form the coset anchor + (even-weight subspace).
    let ncols = anchor.len();
    let mut even = Echelon::new(ncols);
    for (i, b) in basis.iter().enumerate() {
        if i == odd_at {
            continue;
        }
        let mut v = b.clone();
        if v.count_ones() % 2 == 1 {
            v.xor_with(&anchor);
        }
        even.insert(&v);
    }
    // Greedy: walking pivots in ascending column order, clear every pivot
    // position we can. Rows below a pivot cannot disturb earlier columns.
    let mut order: Vec<usize> = (0..even.rows.len()).collect();
    order.sort_by_key(|&i| even.pivots[i]);
    let mut y = anchor;
    for i in order {
        if y.get(even.pivots[i]) {
            y.xor_with(&even.rows[i]);
        }
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &[u8]) -> BitVec {
        let mut v = BitVec::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b == 1 {
                v.set(i, true);
            }
        }
        v
    }

    #[test]
    fn rank_and_containment() {
        let mut e = Echelon::new(4);
        assert!(e.insert(&bv(&[1, 1, 0, 0])));
        assert!(e.insert(&bv(&[0, 1, 1, 0])));
        assert!(!e.insert(&bv(&[1, 0, 1, 0]))); // dependent
        assert_eq!(e.rank(), 2);
        assert!(e.contains(&bv(&[1, 0, 1, 0])));
        assert!(!e.contains(&bv(&[0, 0, 0, 1])));
    }

    #[test]
    fn nullspace_is_orthogonal_complement() {
        let mut e = Echelon::new(5);
        e.insert(&bv(&[1, 0, 1, 0, 1]));
        e.insert(&bv(&[0, 1, 1, 1, 0]));
        let ns = e.nullspace_basis();
        assert_eq!(ns.len(), 3);
        for x in &ns {
            assert!(!x.dot_parity(&bv(&[1, 0, 1, 0, 1])));
            assert!(!x.dot_parity(&bv(&[0, 1, 1, 1, 0])));
        }
        // the basis vectors are independent
        let mut check = Echelon::new(5);
        for x in &ns {
            assert!(check.insert(x));
        }
    }

    #[test]
    fn lex_min_over_full_space_is_last_unit_vector() {
        // Basis = identity on 4 columns; the least odd-weight vector is 0001.
        let basis: Vec<BitVec> = (0..4)
            .map(|i| {
                let mut v = BitVec::zeros(4);
                v.set(i, true);
                v
            })
            .collect();
        let y = lex_min_odd_weight(&basis).unwrap();
        assert_eq!(y.iter_ones().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn lex_min_none_when_all_even() {
        let basis = vec![bv(&[1, 1, 0, 0]), bv(&[0, 0, 1, 1])];
        assert!(lex_min_odd_weight(&basis).is_none());
    }

    #[test]
    fn lex_min_is_minimal_by_brute_force() {
        let basis = vec![
            bv(&[1, 1, 1, 0, 0]),
            bv(&[0, 1, 1, 1, 0]),
            bv(&[0, 0, 1, 1, 1]),
        ];
        let got = lex_min_odd_weight(&basis).unwrap();
        // enumerate the span and compare as bit strings
        let mut best: Option<Vec<u8>> = None;
        for mask in 1u32..8 {
            let mut v = BitVec::zeros(5);
            for (i, b) in basis.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    v.xor_with(b);
                }
            }
            if v.count_ones() % 2 == 1 {
                let s: Vec<u8> = (0..5).map(|i| u8::from(v.get(i))).collect();
                if best.as_ref().is_none_or(|b| &s < b) {
                    best = Some(s);
                }
            }
        }
        let got_s: Vec<u8> = (0..5).map(|i| u8::from(got.get(i))).collect();
        assert_eq!(Some(got_s), best);
    }
}
