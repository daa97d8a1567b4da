//! Line-oriented text formats for fixtures: `.poly` and `.fac`.
//!
//! A `.poly` file is a header line `p n d` (field order, variable count,
//! total degree) followed by one term per line, `c e1 e2 .. en`. Every
//! entry must be a residue in `0..p`: the parser rejects out-of-range
//! values rather than reducing, since a fixture that needs reduction was
//! probably mis-written. The canonical writer emits terms in ascending
//! graded-lexicographic order, so equal polynomials produce identical
//! files. Repeated monomials accumulate.
//!
//! A `.fac` file is a header `p n d m` followed by `m` term blocks in the
//! same syntax, separated by `%` lines, with an optional final
//! `DELTA d1 .. dm` line carrying per-polynomial degree bounds. Blank
//! lines and `#` comments are allowed everywhere in both formats; declared
//! degrees and counts are cross-checked against the parsed content.

use std::fmt::Write as _;

use crate::algebra::{Monomial, Polynomial, PrimeField};
use crate::error::{Error, Result};
use crate::factor::Factor;

fn significant_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn parse_int(tok: &str, what: &str) -> Result<u64> {
    tok.parse()
        .map_err(|_| Error::Parse(format!("{what}: expected a nonnegative integer, got {tok:?}")))
}

fn parse_header(line: &str, fields: usize, shape: &str) -> Result<Vec<u64>> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != fields {
        return Err(Error::Parse(format!(
            "header must be `{shape}`, got {} fields in {line:?}",
            toks.len()
        )));
    }
    toks.iter().map(|t| parse_int(t, "header field")).collect()
}

fn parse_term(field: PrimeField, n: usize, line: &str) -> Result<(Vec<u64>, u64)> {
    let p = field.order();
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != n + 1 {
        return Err(Error::Parse(format!(
            "term line {line:?} has {} entries, expected a coefficient plus {n} exponents",
            toks.len()
        )));
    }
    let c = parse_int(toks[0], "coefficient")?;
    if c >= p {
        return Err(Error::Parse(format!("coefficient {c} is not a residue mod {p}")));
    }
    let mut exps = Vec::with_capacity(n);
    for t in &toks[1..] {
        let e = parse_int(t, "exponent")?;
        if e >= p {
            return Err(Error::Parse(format!(
                "exponent {e} is not reduced: powers fold as x^{p} = x, so exponents stay below {p}"
            )));
        }
        exps.push(e);
    }
    Ok((exps, c))
}

fn build_poly(field: PrimeField, n: usize, terms: &[(Vec<u64>, u64)]) -> Result<Polynomial> {
    let borrowed: Vec<(&[u64], u64)> = terms.iter().map(|(e, c)| (e.as_slice(), *c)).collect();
    Polynomial::from_terms(field, n, &borrowed)
}

/// Parses `.poly` text. The declared degree must match the parsed terms
/// (after any cancellation), which catches stale headers in hand-edited
/// fixtures.
pub fn parse_poly(text: &str) -> Result<Polynomial> {
    let mut lines = significant_lines(text);
    let header = lines.next().ok_or_else(|| Error::Parse("empty .poly input".into()))?;
    let h = parse_header(header, 3, "p n d")?;
    let field = PrimeField::new(h[0])?;
    let n = h[1] as usize;
    let d = h[2] as usize;
    let mut terms = Vec::new();
    for line in lines {
        terms.push(parse_term(field, n, line)?);
    }
    let q = build_poly(field, n, &terms)?;
    if q.degree() != d {
        return Err(Error::Parse(format!(
            "header declares degree {d}, terms have degree {}",
            q.degree()
        )));
    }
    Ok(q)
}

fn write_terms(out: &mut String, q: &Polynomial) {
    for (m, c) in q.terms() {
        let _ = write!(out, "{}", c.value());
        for &e in m.exps() {
            let _ = write!(out, " {e}");
        }
        out.push('\n');
    }
}

/// Canonical `.poly` text: header plus one line per term in ascending
/// graded-lexicographic order.
pub fn write_poly(q: &Polynomial) -> String {
    let mut out = format!("{} {} {}\n", q.field().order(), q.nvars(), q.degree());
    write_terms(&mut out, q);
    out
}

/// Parses `.fac` text into a factor, with degree bounds when a `DELTA`
/// line is present.
pub fn parse_factor(text: &str) -> Result<Factor> {
    let mut lines = significant_lines(text);
    let header = lines.next().ok_or_else(|| Error::Parse("empty .fac input".into()))?;
    let h = parse_header(header, 4, "p n d m")?;
    let field = PrimeField::new(h[0])?;
    let n = h[1] as usize;
    let d = h[2] as usize;
    let m = h[3] as usize;
    let mut blocks: Vec<Vec<(Vec<u64>, u64)>> = vec![Vec::new()];
    let mut delta: Option<Vec<u16>> = None;
    for line in lines {
        if delta.is_some() {
            return Err(Error::Parse("DELTA must be the final line of a .fac file".into()));
        }
        if line == "%" {
            blocks.push(Vec::new());
        } else if let Some(rest) = line.strip_prefix("DELTA") {
            let mut bounds = Vec::new();
            for t in rest.split_whitespace() {
                let b = parse_int(t, "degree bound")?;
                let b = u16::try_from(b)
                    .map_err(|_| Error::Parse(format!("degree bound {b} is out of range")))?;
                bounds.push(b);
            }
            if bounds.len() != m {
                return Err(Error::Parse(format!(
                    "DELTA lists {} bounds for {m} polynomials",
                    bounds.len()
                )));
            }
            delta = Some(bounds);
        } else {
            blocks.last_mut().expect("at least one block").push(parse_term(field, n, line)?);
        }
    }
    if m == 0 {
        if blocks.len() != 1 || !blocks[0].is_empty() {
            return Err(Error::Parse("header declares an empty factor but blocks follow".into()));
        }
        return Ok(Factor::empty(field, n));
    }
    if blocks.len() != m {
        return Err(Error::Parse(format!(
            "found {} `%`-separated blocks, header declares {m} polynomials",
            blocks.len()
        )));
    }
    let mut polys = Vec::with_capacity(m);
    for block in &blocks {
        polys.push(build_poly(field, n, block)?);
    }
    let factor = Factor::new(field, n, polys)?;
    if factor.degree() != d {
        return Err(Error::Parse(format!(
            "header declares factor degree {d}, polynomials have degree {}",
            factor.degree()
        )));
    }
    match delta {
        Some(bounds) => factor.with_delta(bounds),
        None => Ok(factor),
    }
}

/// Canonical `.fac` text: header, `%`-separated term blocks, and a `DELTA`
/// line when the factor carries degree bounds.
pub fn write_factor(f: &Factor) -> String {
    let mut out =
        format!("{} {} {} {}\n", f.field().order(), f.nvars(), f.degree(), f.dim());
    for (i, q) in f.polys().iter().enumerate() {
        if i > 0 {
            out.push_str("%\n");
        }
        write_terms(&mut out, q);
    }
    if let Some(delta) = f.delta() {
        out.push_str("DELTA");
        for d in delta {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::FieldElement;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn product(field: PrimeField, nvars: usize, i: usize, j: usize) -> Polynomial {
        let mut e = vec![0u64; nvars];
        e[i] += 1;
        e[j] += 1;
        Polynomial::from_terms(field, nvars, &[(&e, 1)]).unwrap()
    }

    #[test]
    fn poly_writer_is_canonical() {
        let f5 = fp(5);
        let p = product(f5, 2, 0, 1)
            .add(&Polynomial::constant(f5, 2, f5.elem(3)))
            .unwrap();
        assert_eq!(write_poly(&p), "5 2 2\n3 0 0\n1 1 1\n");
        assert_eq!(parse_poly(&write_poly(&p)).unwrap(), p);
    }

    #[test]
    fn zero_polynomial_round_trips() {
        let z = Polynomial::zero(fp(2), 3);
        assert_eq!(write_poly(&z), "2 3 0\n");
        assert_eq!(parse_poly("2 3 0\n").unwrap(), z);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# a fixture\n\n3 2 1\n# the linear term\n2 1 0\n";
        let p = parse_poly(text).unwrap();
        assert_eq!(p, Polynomial::var(fp(3), 2, 0).scale(fp(3).elem(2)));
    }

    #[test]
    fn out_of_range_entries_are_rejected() {
        assert!(matches!(parse_poly("5 2 1\n6 1 0\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_poly("5 2 1\n1 5 0\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_poly("5 2 1\n1 1\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_poly(""), Err(Error::Parse(_))));
        assert!(matches!(parse_poly("4 2 1\n1 1 0\n"), Err(Error::NotPrime(4))));
    }

    #[test]
    fn stale_degree_headers_are_caught() {
        // the two terms cancel, leaving degree 0 against a declared 2
        assert!(matches!(parse_poly("3 2 2\n1 1 1\n2 1 1\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn factor_round_trips_with_delta() {
        let f3 = fp(3);
        let f = Factor::new(f3, 3, vec![product(f3, 3, 0, 1), Polynomial::var(f3, 3, 2)])
            .unwrap()
            .with_delta(vec![1, 1])
            .unwrap();
        let text = write_factor(&f);
        assert_eq!(text, "3 3 2 2\n1 1 1 0\n%\n1 0 0 1\nDELTA 1 1\n");
        let back = parse_factor(&text).unwrap();
        assert_eq!(back.polys(), f.polys());
        assert_eq!(back.delta(), f.delta());
    }

    #[test]
    fn empty_factor_round_trips() {
        let f = Factor::empty(fp(7), 4);
        let text = write_factor(&f);
        assert_eq!(text, "7 4 0 0\n");
        let back = parse_factor(&text).unwrap();
        assert_eq!(back.dim(), 0);
        assert_eq!(back.nvars(), 4);
    }

    #[test]
    fn factor_block_count_must_match_header() {
        // two blocks against a declared three
        let text = "3 2 2 3\n1 1 1\n%\n1 1 0\n";
        assert!(matches!(parse_factor(text), Err(Error::Parse(_))));
    }

    #[test]
    fn constant_blocks_are_rejected() {
        let text = "3 2 1 1\n2 0 0\n";
        assert!(matches!(parse_factor(text), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn misplaced_delta_is_rejected() {
        let text = "3 2 1 2\n1 1 0\nDELTA 1 1\n%\n1 0 1\n";
        assert!(matches!(parse_factor(text), Err(Error::Parse(_))));
    }

    #[test]
    fn field_element_display_matches_value() {
        let f7 = fp(7);
        assert_eq!(format!("{}", f7.elem(9)), "2");
        assert_eq!(FieldElement::ZERO.value(), 0);
    }
}
