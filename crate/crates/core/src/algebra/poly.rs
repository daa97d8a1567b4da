//! Sparse multivariate polynomials over a prime field.
//!
//! A `Polynomial` is a finite map monomial -> nonzero coefficient, kept in
//! graded-lex order. Exponents are folded by `x^p = x` on every construction
//! and product, so equality of representations is equality of functions
//! `F^n -> F`.

use super::field::{FieldElement, PrimeField};
use super::monomial::Monomial;
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    field: PrimeField,
    nvars: usize,
    terms: BTreeMap<Monomial, FieldElement>,
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if m.is_constant() || c.value() != 1 {
                write!(f, "{}", c)?;
            }
            for (i, &e) in m.exps().iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "x{}", i + 1)?,
                    _ => write!(f, "x{}^{}", i + 1, e)?,
                }
            }
        }
        Ok(())
    }
}

impl Polynomial {
    /// The zero polynomial in `n` variables.
    pub fn zero(field: PrimeField, nvars: usize) -> Polynomial {
        Polynomial { field, nvars, terms: BTreeMap::new() }
    }

    pub fn constant(field: PrimeField, nvars: usize, c: FieldElement) -> Polynomial {
        let mut q = Polynomial::zero(field, nvars);
        q.add_term(Monomial::constant(nvars), c);
        q
    }

    /// The coordinate function `x_i` (zero-based).
    pub fn var(field: PrimeField, nvars: usize, i: usize) -> Polynomial {
        assert!(i < nvars, "variable index out of range");
        let mut q = Polynomial::zero(field, nvars);
        q.add_term(Monomial::var(nvars, i), field.one());
        q
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs, folding
    /// exponents and merging duplicates.
    pub fn from_terms(
        field: PrimeField,
        nvars: usize,
        terms: &[(&[u64], u64)],
    ) -> Result<Polynomial> {
        let mut q = Polynomial::zero(field, nvars);
        for (exps, c) in terms {
            if exps.len() != nvars {
                return Err(Error::DimensionMismatch(format!(
                    "term has {} exponents, polynomial has {} variables",
                    exps.len(),
                    nvars
                )));
            }
            q.add_term(Monomial::new(exps, field.order()), field.elem(*c));
        }
        Ok(q)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, FieldElement)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the function is constant (possibly zero).
    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|m| m.is_constant())
    }

    /// Total degree of the reduced representation; zero polynomial has
    /// degree 0 by convention here (callers check `is_zero` when it matters).
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.total_degree()).max().unwrap_or(0)
    }

    /// The coefficient of the constant monomial.
    pub fn constant_term(&self) -> FieldElement {
        self.terms
            .get(&Monomial::constant(self.nvars))
            .copied()
            .unwrap_or(FieldElement::ZERO)
    }

    pub(crate) fn add_term(&mut self, m: Monomial, c: FieldElement) {
        if c.is_zero() {
            return;
        }
        let f = self.field;
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = f.add(*e.get(), c);
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    fn check_same_space(&self, other: &Polynomial) -> Result<()> {
        if self.field != other.field || self.nvars != other.nvars {
            return Err(Error::DimensionMismatch(format!(
                "mixing F_{}^{} with F_{}^{}",
                self.field.order(),
                self.nvars,
                other.field.order(),
                other.nvars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_space(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_space(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), self.field.neg(*c));
        }
        Ok(out)
    }

    pub fn neg(&self) -> Polynomial {
        let mut out = Polynomial::zero(self.field, self.nvars);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), self.field.neg(*c));
        }
        out
    }

    pub fn scale(&self, c: FieldElement) -> Polynomial {
        let mut out = Polynomial::zero(self.field, self.nvars);
        for (m, k) in &self.terms {
            out.add_term(m.clone(), self.field.mul(*k, c));
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_same_space(other)?;
        let p = self.field.order();
        let mut out = Polynomial::zero(self.field, self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb, p), self.field.mul(*ca, *cb));
            }
        }
        Ok(out)
    }

    pub fn pow(&self, e: usize) -> Result<Polynomial> {
        let mut acc = Polynomial::constant(self.field, self.nvars, self.field.one());
        for _ in 0..e {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Evaluates at a point of `F^n`.
    pub fn eval(&self, x: &[FieldElement]) -> Result<FieldElement> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, polynomial has {} variables",
                x.len(),
                self.nvars
            )));
        }
        let f = self.field;
        let mut acc = f.zero();
        for (m, c) in &self.terms {
            let mut t = *c;
            for (i, &e) in m.exps().iter().enumerate() {
                if e > 0 {
                    t = f.mul(t, f.pow(x[i], e as u64));
                }
            }
            acc = f.add(acc, t);
        }
        Ok(acc)
    }

    /// Substitutes `x_i := subs[i]` where each `subs[i]` is a polynomial
    /// over a common (possibly different) variable set, and expands.
    pub fn substitute(&self, subs: &[Polynomial]) -> Result<Polynomial> {
        if subs.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "{} substitutions for {} variables",
                subs.len(),
                self.nvars
            )));
        }
        let out_n = subs.first().map(|s| s.nvars()).unwrap_or(0);
        for s in subs {
            if s.field != self.field || s.nvars() != out_n {
                return Err(Error::DimensionMismatch(
                    "substitution targets disagree on field or variable count".into(),
                ));
            }
        }
        let mut out = Polynomial::zero(self.field, out_n);
        // Cache powers of each substitution target as they get used.
        let mut powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .map(|s| vec![Polynomial::constant(self.field, out_n, self.field.one()), s.clone()])
            .collect();
        for (m, c) in &self.terms {
            let mut t = Polynomial::constant(self.field, out_n, *c);
            for (i, &e) in m.exps().iter().enumerate() {
                let e = e as usize;
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e {
                    let next = powers[i].last().unwrap().mul(&subs[i])?;
                    powers[i].push(next);
                }
                t = t.mul(&powers[i][e])?;
            }
            out = out.add(&t)?;
        }
        Ok(out)
    }

    /// `P(x + h)` for a constant shift `h`.
    pub fn shift(&self, h: &[FieldElement]) -> Result<Polynomial> {
        if h.len() != self.nvars {
            return Err(Error::DimensionMismatch("shift has wrong length".into()));
        }
        let subs: Vec<Polynomial> = (0..self.nvars)
            .map(|i| {
                let mut s = Polynomial::var(self.field, self.nvars, i);
                s.add_term(Monomial::constant(self.nvars), h[i]);
                s
            })
            .collect();
        self.substitute(&subs)
    }

    /// Embeds into a `(blocks+1)`-block variable space as
    /// `P(x + omega_1 y_1 + .. + omega_k y_k)`, where block 0 holds `x` and
    /// block `j` holds `y_j`. The result has `n*(blocks+1)` variables.
    pub fn shift_into_blocks(&self, blocks: usize, omega: &[FieldElement]) -> Result<Polynomial> {
        if omega.len() != blocks {
            return Err(Error::DimensionMismatch("omega has wrong length".into()));
        }
        let n = self.nvars;
        let out_n = n * (blocks + 1);
        let subs: Vec<Polynomial> = (0..n)
            .map(|i| {
                let mut s = Polynomial::var(self.field, out_n, i);
                for (j, &w) in omega.iter().enumerate() {
                    if !w.is_zero() {
                        let mut m = vec![0u64; out_n];
                        m[(j + 1) * n + i] = 1;
                        s.add_term(Monomial::new(&m, self.field.order()), w);
                    }
                }
                s
            })
            .collect();
        self.substitute(&subs)
    }

    /// Variables that actually occur.
    pub fn support(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nvars];
        for m in self.terms.keys() {
            for i in m.support() {
                seen[i] = true;
            }
        }
        seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect()
    }

    /// Rewrites onto the given (sorted) variable subset, which must contain
    /// the support. Used to enumerate only over variables that matter.
    pub fn restrict_to(&self, vars: &[usize]) -> Result<Polynomial> {
        let mut pos = vec![usize::MAX; self.nvars];
        for (j, &v) in vars.iter().enumerate() {
            pos[v] = j;
        }
        let mut out = Polynomial::zero(self.field, vars.len());
        for (m, c) in &self.terms {
            let mut exps = vec![0u16; vars.len()];
            for i in m.support() {
                if pos[i] == usize::MAX {
                    return Err(Error::DimensionMismatch(
                        "restriction drops a live variable".into(),
                    ));
                }
                exps[pos[i]] = m.exps()[i];
            }
            out.add_term(Monomial::from_reduced(exps), *c);
        }
        Ok(out)
    }

    /// Coefficient of the monomial with the given exponents (post-fold).
    pub fn coeff(&self, exps: &[u64]) -> FieldElement {
        self.terms
            .get(&Monomial::new(exps, self.field.order()))
            .copied()
            .unwrap_or(FieldElement::ZERO)
    }

    /// Splits into homogeneous components, lowest degree first; constants
    /// appear as the degree-0 component when present.
    pub fn homogeneous_parts(&self) -> Vec<(usize, Polynomial)> {
        let mut by_deg: BTreeMap<usize, Polynomial> = BTreeMap::new();
        for (m, c) in &self.terms {
            by_deg
                .entry(m.total_degree())
                .or_insert_with(|| Polynomial::zero(self.field, self.nvars))
                .add_term(m.clone(), *c);
        }
        by_deg.into_iter().collect()
    }

    /// The homogeneous component of the stated degree.
    pub fn homogeneous_part(&self, d: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.field, self.nvars);
        for (m, c) in &self.terms {
            if m.total_degree() == d {
                out.add_term(m.clone(), *c);
            }
        }
        out
    }

    /// Dense coefficient vector over a shared monomial list (for linear
    /// algebra across several polynomials).
    pub(crate) fn coeff_row(&self, basis: &BTreeMap<Monomial, usize>) -> Vec<FieldElement> {
        let mut row = vec![FieldElement::ZERO; basis.len()];
        for (m, c) in &self.terms {
            row[basis[m]] = *c;
        }
        row
    }
}

/// Collects the union of monomials of a family, in graded-lex order.
pub(crate) fn monomial_basis(polys: &[Polynomial]) -> BTreeMap<Monomial, usize> {
    let mut set: BTreeMap<Monomial, usize> = BTreeMap::new();
    for q in polys {
        for (m, _) in q.terms() {
            set.entry(m.clone()).or_insert(0);
        }
    }
    let mut idx = 0;
    for v in set.values_mut() {
        *v = idx;
        idx += 1;
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn eval_example() {
        // (x1*x2 + x3 over F_5) at (2,3,4) -> 2*3+4 = 10 = 0
        let f = fp(5);
        let q = Polynomial::from_terms(f, 3, &[(&[1, 1, 0], 1), (&[0, 0, 1], 1)]).unwrap();
        let v = q.eval(&f.point(&[2, 3, 4])).unwrap();
        assert_eq!(v.value(), 0);
    }

    #[test]
    fn fermat_identification() {
        // Over F_2, x^2 + x is the zero function and the zero representation.
        let f = fp(2);
        let q = Polynomial::from_terms(f, 1, &[(&[2], 1), (&[1], 1)]).unwrap();
        assert!(q.is_zero());
    }

    #[test]
    fn mul_folds_exponents() {
        let f = fp(3);
        let x = Polynomial::var(f, 1, 0);
        let x2 = x.mul(&x).unwrap();
        let x3 = x2.mul(&x).unwrap();
        // x^3 = x as functions
        assert_eq!(x3, x);
    }

    #[test]
    fn shift_expands() {
        // P = x1^2 over F_7, P(x+1) = x^2 + 2x + 1
        let f = fp(7);
        let q = Polynomial::from_terms(f, 1, &[(&[2], 1)]).unwrap();
        let s = q.shift(&[f.elem(1)]).unwrap();
        assert_eq!(s.coeff(&[2]).value(), 1);
        assert_eq!(s.coeff(&[1]).value(), 2);
        assert_eq!(s.coeff(&[0]).value(), 1);
    }

    #[test]
    fn shift_into_blocks_matches_pointwise() {
        let f = fp(5);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 2), (&[1, 0], 3)]).unwrap();
        let w = [f.elem(1), f.elem(2)];
        let big = q.shift_into_blocks(2, &w).unwrap();
        assert_eq!(big.nvars(), 6);
        // spot-check P(x + y1 + 2 y2) at a few points
        for (x, y1, y2) in [([1, 2], [3, 0], [4, 4]), ([0, 1], [2, 2], [1, 3])] {
            let mut pt = Vec::new();
            pt.extend(f.point(&x.map(u64::from)));
            pt.extend(f.point(&y1.map(u64::from)));
            pt.extend(f.point(&y2.map(u64::from)));
            let lhs = big.eval(&pt).unwrap();
            let shifted: Vec<FieldElement> = (0..2)
                .map(|i| {
                    f.add(
                        f.elem(x[i]),
                        f.add(f.elem(y1[i]), f.mul(f.elem(2), f.elem(y2[i]))),
                    )
                })
                .collect();
            assert_eq!(lhs, q.eval(&shifted).unwrap());
        }
    }

    #[test]
    fn support_and_restrict() {
        let f = fp(5);
        let q = Polynomial::from_terms(f, 6, &[(&[0, 1, 0, 1, 0, 0], 1)]).unwrap();
        assert_eq!(q.support(), vec![1, 3]);
        let r = q.restrict_to(&[1, 3]).unwrap();
        assert_eq!(r.nvars(), 2);
        assert_eq!(r.coeff(&[1, 1]).value(), 1);
    }

    #[test]
    fn homogeneous_parts_sum_back() {
        let f = fp(3);
        let q = Polynomial::from_terms(
            f,
            3,
            &[(&[1, 1, 0], 1), (&[0, 0, 1], 2), (&[0, 0, 0], 1)],
        )
        .unwrap();
        let parts = q.homogeneous_parts();
        assert_eq!(parts.len(), 3);
        let mut sum = Polynomial::zero(f, 3);
        for (_, part) in &parts {
            sum = sum.add(part).unwrap();
        }
        assert_eq!(sum, q);
    }
}
