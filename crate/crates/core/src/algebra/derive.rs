//! Additive derivatives of polynomials.
//!
//! `D_h P(x) = P(x+h) - P(x)` for a fixed direction, and the symbolic
//! multi-derivative `DP(x, y_1, .., y_k) = sum_{I <= [k]} (-1)^{k-|I|} P(x + y_I)`
//! over a block-structured variable set. Repeated derivatives drop the total
//! degree, which is what the whole refinement machinery runs on.

use super::field::{FieldElement, PrimeField};
use super::monomial::Monomial;
use super::poly::Polynomial;
use crate::error::{Error, Result};

/// `D_h P = P(x+h) - P(x)`; degree drops by at least one for nonzero `h`.
pub fn directional_derivative(p: &Polynomial, h: &[FieldElement]) -> Result<Polynomial> {
    p.shift(h)?.sub(p)
}

/// A polynomial over the block variable set `(x, y_1, .., y_k)` (or just
/// `(y_1, .., y_k)` when the `x` block is dropped). Block `j` of a point is
/// `vars[j*n .. (j+1)*n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedPolynomial {
    poly: Polynomial,
    base_n: usize,
    blocks: usize,
    has_x_block: bool,
}

impl ExtendedPolynomial {
    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn base_n(&self) -> usize {
        self.base_n
    }

    /// Number of `y` blocks.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn has_x_block(&self) -> bool {
        self.has_x_block
    }

    /// Restriction to the diagonal: every block is replaced by one shared
    /// copy of `x`, giving a polynomial over the base `n` variables.
    pub fn diagonal(&self) -> Result<Polynomial> {
        let n = self.base_n;
        let f = self.poly.field();
        let total_blocks = self.blocks + usize::from(self.has_x_block);
        let subs: Vec<Polynomial> = (0..total_blocks * n)
            .map(|v| Polynomial::var(f, n, v % n))
            .collect();
        self.poly.substitute(&subs)
    }
}

/// The symbolic `k`-fold derivative
/// `DP(x, y_1..y_k) = sum_{I subset of [k]} (-1)^(k-|I|) P(x + sum_{i in I} y_i)`.
///
/// When `k >= deg P` the `x` block occurs with degree 0 and is dropped from
/// the variable set, leaving a polynomial over `n*k` variables.
pub fn derivative_polynomial(p: &Polynomial, k: usize) -> Result<ExtendedPolynomial> {
    let f = p.field();
    let n = p.nvars();
    let big_n = n * (k + 1);
    let mut acc = Polynomial::zero(f, big_n);
    for mask in 0u64..(1 << k) {
        let omega: Vec<FieldElement> = (0..k)
            .map(|j| if mask >> j & 1 == 1 { f.one() } else { f.zero() })
            .collect();
        let shifted = p.shift_into_blocks(k, &omega)?;
        let sign_flips = k - mask.count_ones() as usize;
        let term = if sign_flips % 2 == 0 { shifted } else { shifted.neg() };
        acc = acc.add(&term)?;
    }
    // Drop the x block when no term touches it.
    let x_live = acc.support().iter().any(|&v| v < n);
    if !x_live && k > 0 {
        let vars: Vec<usize> = (n..big_n).collect();
        let poly = acc.restrict_to(&vars)?;
        Ok(ExtendedPolynomial { poly, base_n: n, blocks: k, has_x_block: false })
    } else {
        Ok(ExtendedPolynomial { poly: acc, base_n: n, blocks: k, has_x_block: true })
    }
}

/// Derivative in a direction of fresh variables placed at `positions`:
/// returns `Q(v + h) - Q(v)` over `nvars + positions.len()` variables, where
/// the appended variable `j` shadows position `positions[j]` and all other
/// coordinates of the direction are zero.
pub fn symbolic_derivative_at(q: &Polynomial, positions: &[usize]) -> Result<Polynomial> {
    let f = q.field();
    let n = q.nvars();
    let out_n = n + positions.len();
    let subs: Vec<Polynomial> = (0..n)
        .map(|i| {
            let mut s = Polynomial::var(f, out_n, i);
            if let Some(j) = positions.iter().position(|&pv| pv == i) {
                let mut m = vec![0u64; out_n];
                m[n + j] = 1;
                s.add_term(Monomial::new(&m, f.order()), f.one());
            }
            s
        })
        .collect();
    let shifted = q.substitute(&subs)?;
    let widened = q.substitute(
        &(0..n).map(|i| Polynomial::var(f, out_n, i)).collect::<Vec<_>>(),
    )?;
    shifted.sub(&widened)
}

/// Taylor split `Q = head + R` with `head(x) = DQ(x,..,x)/k!` for
/// `k = deg Q` and `deg R < k`. Needs `|F| > deg Q` so `k!` is invertible.
pub fn taylor_split(q: &Polynomial) -> Result<(Polynomial, Polynomial)> {
    let f = q.field();
    let k = q.degree();
    if q.is_zero() || k == 0 {
        return Ok((q.clone(), Polynomial::zero(f, q.nvars())));
    }
    if f.order() <= k as u64 {
        return Err(Error::CharacteristicTooSmall { needed: k as u64, have: f.order() });
    }
    let dq = derivative_polynomial(q, k)?;
    debug_assert!(!dq.has_x_block(), "k-fold derivative of degree-k poly keeps x-degree 0");
    let mut fact = 1u64;
    for i in 2..=k as u64 {
        fact *= i;
    }
    let head = dq.diagonal()?.scale(f.inv_int(fact)?);
    let r = q.sub(&head)?;
    debug_assert!(r.is_zero() || r.degree() < k);
    Ok((head, r))
}

fn field_of(ps: &[Polynomial]) -> PrimeField {
    ps[0].field()
}

/// Finds a nonzero vector `c` with `sum c_i P_i = 0` identically, or `None`
/// when the family is linearly independent. The vector is normalised so its
/// first nonzero entry is 1.
pub fn find_linear_dependency(polys: &[Polynomial]) -> Result<Option<Vec<FieldElement>>> {
    if polys.is_empty() {
        return Ok(None);
    }
    let f = field_of(polys);
    let n = polys[0].nvars();
    for q in polys {
        if q.field() != f || q.nvars() != n {
            return Err(Error::DimensionMismatch(
                "dependency scan requires a common field and variable count".into(),
            ));
        }
    }
    let basis = super::poly::monomial_basis(polys);
    // rows = monomials, columns = polynomials
    let rows = basis.len().max(1);
    let mut m = super::linalg::MatFp::zero(f, rows, polys.len());
    for (j, q) in polys.iter().enumerate() {
        for (mono, c) in q.terms() {
            m[(basis[mono], j)] = c;
        }
    }
    Ok(m.kernel_basis().into_iter().next())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn derivative_drops_degree() {
        // D_h(x1*x2) over F_2 with h = (1,1): (x1+1)(x2+1) - x1x2 = x1+x2+1
        let f = fp(2);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        let d = directional_derivative(&q, &f.point(&[1, 1])).unwrap();
        assert_eq!(d.coeff(&[1, 0]).value(), 1);
        assert_eq!(d.coeff(&[0, 1]).value(), 1);
        assert_eq!(d.coeff(&[0, 0]).value(), 1);
        assert_eq!(d.degree(), 1);
    }

    #[test]
    fn derivative_polynomial_of_product() {
        // DQ for Q = x1*x2 over F_5, k = 2: y1_1*y2_2 + y1_2*y2_1, x dropped.
        let f = fp(5);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        let dq = derivative_polynomial(&q, 2).unwrap();
        assert!(!dq.has_x_block());
        assert_eq!(dq.poly().nvars(), 4);
        let expect = Polynomial::from_terms(
            f,
            4,
            &[(&[1, 0, 0, 1], 1), (&[0, 1, 1, 0], 1)],
        )
        .unwrap();
        assert_eq!(*dq.poly(), expect);
    }

    #[test]
    fn derivative_polynomial_keeps_x_when_underived() {
        // k=1 on a quadratic keeps x alive.
        let f = fp(5);
        let q = Polynomial::from_terms(f, 1, &[(&[2], 1)]).unwrap();
        let dq = derivative_polynomial(&q, 1).unwrap();
        assert!(dq.has_x_block());
        // D_{y}x^2 = 2xy + y^2
        assert_eq!(dq.poly().coeff(&[1, 1]).value(), 2);
        assert_eq!(dq.poly().coeff(&[0, 2]).value(), 1);
    }

    #[test]
    fn derivative_polynomial_matches_pointwise_sum() {
        // Check the defining alternating sum at random-ish points.
        let f = fp(3);
        let q = Polynomial::from_terms(f, 2, &[(&[2, 1], 2), (&[1, 0], 1)]).unwrap();
        let k = 2;
        let dq = derivative_polynomial(&q, k).unwrap();
        assert!(dq.has_x_block()); // deg 3 > k
        for pt_raw in [[0u64, 1, 2, 0, 1, 2], [1, 1, 0, 2, 2, 1]] {
            let pt = f.point(&pt_raw);
            let direct = dq.poly().eval(&pt).unwrap();
            // alternating sum by hand
            let mut acc = f.zero();
            for mask in 0..4u32 {
                let mut shifted = [f.zero(); 2];
                for i in 0..2 {
                    let mut v = pt[i];
                    if mask & 1 == 1 {
                        v = f.add(v, pt[2 + i]);
                    }
                    if mask & 2 == 2 {
                        v = f.add(v, pt[4 + i]);
                    }
                    shifted[i] = v;
                }
                let val = q.eval(&shifted).unwrap();
                if (k - mask.count_ones() as usize) % 2 == 0 {
                    acc = f.add(acc, val);
                } else {
                    acc = f.sub(acc, val);
                }
            }
            assert_eq!(direct, acc);
        }
    }

    #[test]
    fn taylor_split_examples() {
        let f5 = fp(5);
        // x1*x2 -> (x1*x2, 0)
        let q = Polynomial::from_terms(f5, 2, &[(&[1, 1], 1)]).unwrap();
        let (head, r) = taylor_split(&q).unwrap();
        assert_eq!(head, q);
        assert!(r.is_zero());
        // x1 + 3 -> (x1, 3)
        let q = Polynomial::from_terms(f5, 1, &[(&[1], 1), (&[0], 3)]).unwrap();
        let (head, r) = taylor_split(&q).unwrap();
        assert_eq!(head, Polynomial::from_terms(f5, 1, &[(&[1], 1)]).unwrap());
        assert_eq!(r, Polynomial::constant(f5, 1, f5.elem(3)));
        // x1^2 + x2 over F_7 -> (x1^2, x2)
        let f7 = fp(7);
        let q = Polynomial::from_terms(f7, 2, &[(&[2, 0], 1), (&[0, 1], 1)]).unwrap();
        let (head, r) = taylor_split(&q).unwrap();
        assert_eq!(head, Polynomial::from_terms(f7, 2, &[(&[2, 0], 1)]).unwrap());
        assert_eq!(r, Polynomial::from_terms(f7, 2, &[(&[0, 1], 1)]).unwrap());
    }

    #[test]
    fn taylor_needs_large_field() {
        // deg 2 over F_2: 2! = 0, not invertible
        let f = fp(2);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        assert!(matches!(
            taylor_split(&q),
            Err(Error::CharacteristicTooSmall { .. })
        ));
    }

    #[test]
    fn head_plus_remainder_everywhere() {
        let f = fp(7);
        let q = Polynomial::from_terms(
            f,
            2,
            &[(&[2, 1], 3), (&[1, 0], 2), (&[0, 0], 5)],
        )
        .unwrap();
        let (head, r) = taylor_split(&q).unwrap();
        let sum = head.add(&r).unwrap();
        assert_eq!(sum, q);
    }

    #[test]
    fn dependency_examples() {
        let f3 = fp(3);
        let x1 = Polynomial::var(f3, 2, 0);
        let x2 = Polynomial::var(f3, 2, 1);
        let s = x1.add(&x2).unwrap();
        let c = find_linear_dependency(&[x1.clone(), x2.clone(), s]).unwrap().unwrap();
        assert_eq!(c.iter().map(|e| e.value()).collect::<Vec<_>>(), vec![1, 1, 2]);

        let f2 = fp(2);
        let a = Polynomial::from_terms(f2, 3, &[(&[1, 1, 0], 1)]).unwrap();
        let b = Polynomial::from_terms(f2, 3, &[(&[1, 1, 0], 1), (&[0, 0, 1], 1)]).unwrap();
        let c3 = Polynomial::from_terms(f2, 3, &[(&[0, 0, 1], 1)]).unwrap();
        let dep = find_linear_dependency(&[a, b, c3]).unwrap().unwrap();
        assert_eq!(dep.iter().map(|e| e.value()).collect::<Vec<_>>(), vec![1, 1, 1]);

        let f3 = fp(3);
        let x1 = Polynomial::var(f3, 2, 0);
        let x2 = Polynomial::var(f3, 2, 1);
        assert!(find_linear_dependency(&[x1, x2]).unwrap().is_none());
    }

    #[test]
    fn symbolic_derivative_at_positions() {
        // Q = x1*x2 over F_3; derive in a fresh direction at position 0:
        // Q(x1+h, x2) - Q = h*x2
        let f = fp(3);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        let d = symbolic_derivative_at(&q, &[0]).unwrap();
        assert_eq!(d.nvars(), 3);
        assert_eq!(d.coeff(&[0, 1, 1]).value(), 1);
        assert_eq!(d.num_terms(), 1);
    }
}
