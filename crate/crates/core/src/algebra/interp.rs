//! Interpolation of an explicit polynomial from query access.
//!
//! The monomial set `{e : total deg <= d, every e_i <= p-1}` is downward
//! closed, so the evaluation grid made of the exponent vectors themselves is
//! unisolvent: in the binomial basis `chi_e(x) = prod C(x_i, e_i)` the system
//! is unitriangular and solves by one forward pass. A probe layer at degree
//! `d+1` catches oracles that are not what they claim to be.

use super::field::{FieldElement, PrimeField};
use super::poly::Polynomial;
use crate::error::{Error, Result};

const MAX_BASIS: usize = 200_000;

/// All exponent vectors with the given total degree, entries `< p`,
/// lexicographically ascending.
fn layer(n: usize, total: usize, max_e: usize, out: &mut Vec<Vec<u16>>) {
    fn rec(n: usize, total: usize, max_e: usize, acc: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if acc.len() == n {
            if total == 0 {
                out.push(acc.clone());
            }
            return;
        }
        let remaining_slots = n - acc.len() - 1;
        for e in 0..=total.min(max_e) {
            if total - e <= remaining_slots * max_e {
                acc.push(e as u16);
                rec(n, total - e, max_e, acc, out);
                acc.pop();
            }
        }
    }
    rec(n, total, max_e, &mut Vec::new(), out);
}

/// `C(a, e) mod p` for `a, e < p`, via the falling factorial.
fn binom_mod(field: PrimeField, a: u16, e: u16) -> FieldElement {
    if e > a {
        return FieldElement::ZERO;
    }
    let mut num = field.one();
    let mut fact = 1u64;
    for t in 0..e as u64 {
        num = field.mul(num, field.elem_i64(a as i64 - t as i64));
        fact = fact * (t + 1) % field.order();
    }
    field.mul(num, field.inv(field.elem(fact)).expect("e < p so e! is a unit"))
}

/// The polynomial `C(x, e) = x(x-1)..(x-e+1)/e!` in one designated variable.
fn binom_poly(field: PrimeField, nvars: usize, var: usize, e: u16) -> Result<Polynomial> {
    let mut acc = Polynomial::constant(field, nvars, field.one());
    let mut fact = 1u64;
    for t in 0..e as u64 {
        let x = Polynomial::var(field, nvars, var);
        let shifted = x.sub(&Polynomial::constant(field, nvars, field.elem(t)))?;
        acc = acc.mul(&shifted)?;
        fact = fact * (t + 1) % field.order();
    }
    Ok(acc.scale(field.inv(field.elem(fact)).expect("e < p")))
}

/// Recovers the unique polynomial of total degree `<= d` (individual degrees
/// `< p`) agreeing with the oracle, then probes the oracle on the degree
/// `d+1` grid layer and reports [`Error::Interpolation`] on any mismatch.
pub fn interpolate_from_oracle<O>(
    mut oracle: O,
    field: PrimeField,
    n: usize,
    d: usize,
) -> Result<Polynomial>
where
    O: FnMut(&[FieldElement]) -> FieldElement,
{
    let max_e = (field.order() - 1) as usize;
    let mut exps: Vec<Vec<u16>> = Vec::new();
    for total in 0..=d {
        layer(n, total, max_e, &mut exps);
        if exps.len() > MAX_BASIS {
            return Err(Error::BudgetExceeded {
                need: exps.len() as f64,
                budget: MAX_BASIS as f64,
                what: "interpolation basis".into(),
            });
        }
    }
    // Forward solve in the binomial basis: predecessors of a point are
    // exactly the basis elements componentwise below it, all of lower total
    // degree, so one pass in layer order settles every coefficient.
    let mut coeffs: Vec<FieldElement> = Vec::with_capacity(exps.len());
    for (idx, a) in exps.iter().enumerate() {
        let point: Vec<FieldElement> = a.iter().map(|&v| field.elem(v as u64)).collect();
        let mut rhs = oracle(&point);
        for (j, e) in exps[..idx].iter().enumerate() {
            if coeffs[j].is_zero() || !e.iter().zip(a).all(|(&ei, &ai)| ei <= ai) {
                continue;
            }
            let mut chi = field.one();
            for (i, (&ei, &ai)) in e.iter().zip(a).enumerate() {
                let _ = i;
                chi = field.mul(chi, binom_mod(field, ai, ei));
            }
            rhs = field.sub(rhs, field.mul(coeffs[j], chi));
        }
        coeffs.push(rhs);
    }
    // Expand into the monomial basis.
    let mut out = Polynomial::zero(field, n);
    for (e, &b) in exps.iter().zip(&coeffs) {
        if b.is_zero() {
            continue;
        }
        let mut chi = Polynomial::constant(field, n, b);
        for (i, &ei) in e.iter().enumerate() {
            if ei > 0 {
                chi = chi.mul(&binom_poly(field, n, i, ei)?)?;
            }
        }
        out = out.add(&chi)?;
    }
    // Probe the next grid layer: a residual there means the oracle is not a
    // degree <= d polynomial.
    let mut probe: Vec<Vec<u16>> = Vec::new();
    layer(n, d + 1, max_e, &mut probe);
    for a in probe.iter().take(MAX_BASIS) {
        let point: Vec<FieldElement> = a.iter().map(|&v| field.elem(v as u64)).collect();
        if oracle(&point) != out.eval(&point)? {
            return Err(Error::Interpolation(format!(
                "oracle disagrees with the degree-{d} interpolant at {a:?}"
            )));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn recovers_product_monomial() {
        // oracle = x1*x2*x3 over F_5, d = 3
        let f = fp(5);
        let target = Polynomial::from_terms(f, 3, &[(&[1, 1, 1], 1)]).unwrap();
        let got = interpolate_from_oracle(|x| target.eval(x).unwrap(), f, 3, 3).unwrap();
        assert_eq!(got, target);
    }

    #[test]
    fn rejects_underdeclared_degree() {
        // oracle = x1^2 over F_3 claimed to have degree 1
        let f = fp(3);
        let target = Polynomial::from_terms(f, 1, &[(&[2], 1)]).unwrap();
        let err = interpolate_from_oracle(|x| target.eval(x).unwrap(), f, 1, 1);
        assert!(matches!(err, Err(Error::Interpolation(_))));
    }

    #[test]
    fn multilinear_over_f2() {
        // Over F_2 individual degrees cap at 1; recover a multilinear cubic.
        let f = fp(2);
        let target = Polynomial::from_terms(
            f,
            4,
            &[(&[1, 1, 1, 0], 1), (&[0, 0, 1, 1], 1), (&[1, 0, 0, 0], 1)],
        )
        .unwrap();
        let got = interpolate_from_oracle(|x| target.eval(x).unwrap(), f, 4, 3).unwrap();
        assert_eq!(got, target);
    }

    #[test]
    fn exact_on_full_grid_degree() {
        // Degree cap equal to n*(p-1) covers every function; no probe layer.
        let f = fp(3);
        let target = Polynomial::from_terms(f, 2, &[(&[2, 2], 2), (&[1, 0], 1)]).unwrap();
        let got = interpolate_from_oracle(|x| target.eval(x).unwrap(), f, 2, 4).unwrap();
        assert_eq!(got, target);
    }
}
