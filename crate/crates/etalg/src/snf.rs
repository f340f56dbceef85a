//! Smith normal form over the integers.
//!
//! Plain row/column pivoting with exact `BigInt` arithmetic: no modular
//! tricks, no fraction-free shortcuts, because inputs here are tiny gluing
//! matrices and correctness is what matters.  Both transforms are tracked so
//! callers can read off a saturated kernel basis (columns of `right` past the
//! rank) and cokernel invariant factors (the diagonal).

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

/// `left * a * right = diag(diag)` with `left`, `right` unimodular.
#[derive(Debug, Clone)]
pub struct Snf {
    pub rows: usize,
    pub cols: usize,
    /// Nonnegative diagonal in divisibility order; length `min(rows, cols)`.
    pub diag: Vec<BigInt>,
    /// Number of nonzero diagonal entries.
    pub rank: usize,
    /// `rows x rows` unimodular transform acting on the left.
    pub left: Vec<Vec<BigInt>>,
    /// `cols x cols` unimodular transform acting on the right.
    pub right: Vec<Vec<BigInt>>,
}

impl Snf {
    /// Basis of the integer kernel lattice of `a`: columns of `right` with
    /// index `rank..cols`, returned as row vectors.  The basis is saturated
    /// because `right` is unimodular.
    pub fn kernel_basis(&self) -> Vec<Vec<BigInt>> {
        (self.rank..self.cols)
            .map(|c| (0..self.cols).map(|r| self.right[r][c].clone()).collect())
            .collect()
    }

    /// Invariant factors of `Z^rows / im(a)`: the nontrivial torsion factors
    /// (each >= 2) in divisibility order followed by one `0` per free factor.
    pub fn cokernel_factors(&self) -> Vec<BigInt> {
        let mut out: Vec<BigInt> = self
            .diag
            .iter()
            .take(self.rank)
            .filter(|d| **d > BigInt::from(1))
            .cloned()
            .collect();
        out.extend(std::iter::repeat(BigInt::zero()).take(self.rows - self.rank));
        out
    }
}

fn identity(n: usize) -> Vec<Vec<BigInt>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigInt::from(1) } else { BigInt::zero() })
                .collect()
        })
        .collect()
}

struct Work {
    m: Vec<Vec<BigInt>>,
    left: Vec<Vec<BigInt>>,
    right: Vec<Vec<BigInt>>,
    rows: usize,
    cols: usize,
}

impl Work {
    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            self.m.swap(a, b);
            self.left.swap(a, b);
        }
    }
    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for r in 0..self.rows {
                self.m[r].swap(a, b);
            }
            for r in 0..self.cols {
                self.right[r].swap(a, b);
            }
        }
    }
    /// row[a] += c * row[b]
    fn add_row(&mut self, a: usize, b: usize, c: &BigInt) {
        for j in 0..self.cols {
            let t = &self.m[b][j] * c;
            self.m[a][j] += t;
        }
        for j in 0..self.rows {
            let t = &self.left[b][j] * c;
            self.left[a][j] += t;
        }
    }
    /// col[a] += c * col[b]
    fn add_col(&mut self, a: usize, b: usize, c: &BigInt) {
        for r in 0..self.rows {
            let t = &self.m[r][b] * c;
            self.m[r][a] += t;
        }
        for r in 0..self.cols {
            let t = &self.right[r][b] * c;
            self.right[r][a] += t;
        }
    }
    fn negate_row(&mut self, a: usize) {
        for j in 0..self.cols {
            let v = -self.m[a][j].clone();
            self.m[a][j] = v;
        }
        for j in 0..self.rows {
            let v = -self.left[a][j].clone();
            self.left[a][j] = v;
        }
    }

    /// Smallest nonzero entry (by absolute value) in the trailing submatrix.
    fn pivot_at(&self, k: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for r in k..self.rows {
            for c in k..self.cols {
                if !self.m[r][c].is_zero() {
                    match best {
                        None => best = Some((r, c)),
                        Some((br, bc)) => {
                            if self.m[r][c].abs() < self.m[br][bc].abs() {
                                best = Some((r, c));
                            }
                        }
                    }
                }
            }
        }
        best
    }

    /// Clear row and column `k` using the pivot at `(k, k)`.
    fn reduce_cross(&mut self, k: usize) {
        loop {
            let mut dirty = false;
            for r in k + 1..self.rows {
                if !self.m[r][k].is_zero() {
                    let qout = &self.m[r][k] / &self.m[k][k];
                    let c = -qout;
                    self.add_row(r, k, &c);
                    if !self.m[r][k].is_zero() {
                        // Remainder became the new, strictly smaller pivot.
                        self.swap_rows(r, k);
                        dirty = true;
                    }
                }
            }
            for c in k + 1..self.cols {
                if !self.m[k][c].is_zero() {
                    let qout = &self.m[k][c] / &self.m[k][k];
                    let neg = -qout;
                    self.add_col(c, k, &neg);
                    if !self.m[k][c].is_zero() {
                        self.swap_cols(c, k);
                        dirty = true;
                    }
                }
            }
            let row_clear = (k + 1..self.cols).all(|c| self.m[k][c].is_zero());
            let col_clear = (k + 1..self.rows).all(|r| self.m[r][k].is_zero());
            if row_clear && col_clear && !dirty {
                break;
            }
        }
    }
}

/// Smith normal form of an arbitrary (possibly empty) integer matrix.
pub fn smith_normal_form(a: &[Vec<BigInt>], rows: usize, cols: usize) -> Snf {
    debug_assert_eq!(a.len(), rows);
    debug_assert!(a.iter().all(|r| r.len() == cols));
    let mut w = Work {
        m: a.to_vec(),
        left: identity(rows),
        right: identity(cols),
        rows,
        cols,
    };
    let bound = rows.min(cols);
    let mut rank = 0;
    for k in 0..bound {
        let Some((pr, pc)) = w.pivot_at(k) else { break };
        w.swap_rows(k, pr);
        w.swap_cols(k, pc);
        w.reduce_cross(k);
        // Make the pivot divide every entry of the trailing submatrix.
        loop {
            let mut offender = None;
            'scan: for r in k + 1..rows {
                for c in k + 1..cols {
                    if !(&w.m[r][c] % &w.m[k][k]).is_zero() {
                        offender = Some(c);
                        break 'scan;
                    }
                }
            }
            match offender {
                None => break,
                Some(c) => {
                    let one = BigInt::from(1);
                    w.add_col(k, c, &one);
                    w.reduce_cross(k);
                }
            }
        }
        if w.m[k][k].is_negative() {
            w.negate_row(k);
        }
        rank += 1;
    }
    let diag: Vec<BigInt> = (0..bound).map(|k| w.m[k][k].clone()).collect();
    debug_assert!(diag.windows(2).all(|p| {
        p[1].is_zero() || (!p[0].is_zero() && (&p[1] % &p[0]).is_zero())
    }));
    Snf {
        rows,
        cols,
        diag,
        rank,
        left: w.left,
        right: w.right,
    }
}
