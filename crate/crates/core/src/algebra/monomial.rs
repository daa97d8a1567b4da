//! Monomials in `n` variables with exponents reduced by `x^p = x`.
//!
//! Polynomials here always denote functions `F^n -> F`, so exponents live in
//! `0..p` — an exponent `e >= p` is folded down by repeatedly replacing
//! `x^p` with `x`. Ordering is graded lexicographic, which is also the
//! canonical order used by the `.poly` writer.

use std::cmp::Ordering;

/// Exponent vector of a single monomial; length equals the variable count.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial {
    exps: Vec<u16>,
}

/// Folds one exponent into `0..p` using `x^p = x` (valid pointwise on `F_p`).
pub(crate) fn reduce_exp(mut e: u64, p: u64) -> u16 {
    if e >= p {
        // x^e = x^(e - (p-1)) for e >= p; land in 1..p.
        e = (e - 1) % (p - 1) + 1;
    }
    e as u16
}

impl Monomial {
    /// Builds a monomial, folding every exponent by `x^p = x`.
    pub fn new(exps: &[u64], p: u64) -> Monomial {
        Monomial { exps: exps.iter().map(|&e| reduce_exp(e, p)).collect() }
    }

    pub(crate) fn from_reduced(exps: Vec<u16>) -> Monomial {
        Monomial { exps }
    }

    pub fn constant(n: usize) -> Monomial {
        Monomial { exps: vec![0; n] }
    }

    /// The single variable `x_i` (zero-based index).
    pub fn var(n: usize, i: usize) -> Monomial {
        let mut exps = vec![0u16; n];
        exps[i] = 1;
        Monomial { exps }
    }

    pub fn exps(&self) -> &[u16] {
        &self.exps
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn total_degree(&self) -> usize {
        self.exps.iter().map(|&e| e as usize).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    /// Product of two monomials over the same variables, folded mod `x^p = x`.
    pub fn mul(&self, other: &Monomial, p: u64) -> Monomial {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        let exps = self
            .exps
            .iter()
            .zip(&other.exps)
            .map(|(&a, &b)| reduce_exp(a as u64 + b as u64, p))
            .collect();
        Monomial { exps }
    }

    /// Variables with nonzero exponent.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.exps.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| i)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
