//! Dense linear algebra over `F_p`: reduced row echelon form, rank,
//! kernel bases. Sizes here are desk scale, so the plain cubic algorithms
//! with first-nonzero pivoting are fine and fully deterministic.

use super::field::{FieldElement, PrimeField};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct MatFp {
    pub field: PrimeField,
    pub rows: usize,
    pub cols: usize,
    dat: Vec<FieldElement>,
}

impl MatFp {
    pub fn zero(field: PrimeField, rows: usize, cols: usize) -> MatFp {
        MatFp { field, rows, cols, dat: vec![FieldElement::ZERO; rows * cols] }
    }

    pub fn from_rows(field: PrimeField, rows: Vec<Vec<FieldElement>>) -> MatFp {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut m = MatFp::zero(field, r, c);
        for (i, row) in rows.into_iter().enumerate() {
            assert_eq!(row.len(), c, "ragged matrix");
            for (j, v) in row.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// In-place reduced row echelon form; returns the pivot column of each
    /// pivot row, in order.
    pub fn rref(&mut self) -> Vec<usize> {
        let f = self.field;
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(pr) = (row..self.rows).find(|&r| !self[(r, col)].is_zero()) else {
                continue;
            };
            self.swap_rows(row, pr);
            let inv = f.inv(self[(row, col)]).expect("pivot is nonzero");
            for j in col..self.cols {
                self[(row, j)] = f.mul(self[(row, j)], inv);
            }
            for r in 0..self.rows {
                if r != row && !self[(r, col)].is_zero() {
                    let factor = self[(r, col)];
                    for j in col..self.cols {
                        let v = f.sub(self[(r, j)], f.mul(factor, self[(row, j)]));
                        self[(r, j)] = v;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(mut self) -> usize {
        self.rref().len()
    }

    /// Basis of the right kernel `{v : Av = 0}`. Each vector is normalised
    /// so its first nonzero entry is 1, and vectors come out in the order of
    /// their free columns.
    pub fn kernel_basis(mut self) -> Vec<Vec<FieldElement>> {
        let f = self.field;
        let pivots = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if is_pivot[free] {
                continue;
            }
            let mut v = vec![FieldElement::ZERO; self.cols];
            v[free] = f.one();
            for (prow, &pcol) in pivots.iter().enumerate() {
                v[pcol] = f.neg(self[(prow, free)]);
            }
            // normalise: first nonzero entry becomes 1
            if let Some(first) = v.iter().position(|e| !e.is_zero()) {
                let inv = f.inv(v[first]).expect("nonzero");
                for e in v.iter_mut() {
                    *e = f.mul(*e, inv);
                }
            }
            basis.push(v);
        }
        basis
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.dat.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for MatFp {
    type Output = FieldElement;
    fn index(&self, (r, c): (usize, usize)) -> &FieldElement {
        &self.dat[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for MatFp {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut FieldElement {
        &mut self.dat[r * self.cols + c]
    }
}

/// Indices of a maximal independent subset of the given coefficient rows,
/// scanning in order (earlier rows win ties). Rows already spanned by the
/// kept set are reported separately.
pub fn independent_subset(
    field: PrimeField,
    rows: &[Vec<FieldElement>],
) -> Result<(Vec<usize>, Vec<usize>)> {
    let cols = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut kept: Vec<usize> = Vec::new();
    let mut echelon: Vec<Vec<FieldElement>> = Vec::new(); // rows in echelon form
    let mut dropped = Vec::new();
    let f = field;
    for (i, row) in rows.iter().enumerate() {
        let mut v = row.clone();
        assert_eq!(v.len(), cols, "ragged rows");
        for e in &echelon {
            let lead = e.iter().position(|x| !x.is_zero()).unwrap();
            if !v[lead].is_zero() {
                let factor = f.mul(v[lead], f.inv(e[lead])?);
                for j in 0..cols {
                    v[j] = f.sub(v[j], f.mul(factor, e[j]));
                }
            }
        }
        if v.iter().all(|x| x.is_zero()) {
            dropped.push(i);
        } else {
            kept.push(i);
            echelon.push(v);
            echelon.sort_by_key(|e| e.iter().position(|x| !x.is_zero()).unwrap());
        }
    }
    Ok((kept, dropped))
}
