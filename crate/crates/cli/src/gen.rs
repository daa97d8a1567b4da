//! Seeded fixture generators: random polynomials, random factors, and
//! planted decoding instances with an enumerable ground truth.

use polyreg::algebra::{Polynomial, PrimeField};
use polyreg::estimators::{branch_seed, SampleStream};
use polyreg::factor::Factor;
use polyreg::{Error, Result};
use rand::seq::index::sample;
use rand::Rng;

/// A random sum of `terms` square-free monomials over distinct variables,
/// the first of exactly `degree`, the rest of degree `1..=degree`, all with
/// nonzero coefficients. Retries (on fresh derived streams) until the terms
/// neither cancel nor collide below the requested degree.
pub fn random_poly(
    field: PrimeField,
    n: usize,
    degree: usize,
    terms: usize,
    seed: u64,
) -> Result<Polynomial> {
    if degree == 0 || degree > n || terms == 0 {
        return Err(Error::DimensionMismatch(format!(
            "random polynomials need 1 <= degree <= nvars and at least one term, \
             got degree {degree} over {n} variables"
        )));
    }
    let p = field.order();
    let mut stream = SampleStream::new(seed);
    for attempt in 0..64 {
        let rng = stream.at(attempt);
        let mut spec: Vec<(Vec<u64>, u64)> = Vec::with_capacity(terms);
        for i in 0..terms {
            let d = if i == 0 { degree } else { rng.gen_range(1..=degree) };
            let mut exps = vec![0u64; n];
            for v in sample(rng, n, d) {
                exps[v] = 1;
            }
            let c = rng.gen_range(1..p);
            spec.push((exps, c));
        }
        let borrowed: Vec<(&[u64], u64)> =
            spec.iter().map(|(e, c)| (e.as_slice(), *c)).collect();
        let q = Polynomial::from_terms(field, n, &borrowed)?;
        if q.degree() == degree && !q.is_constant() {
            return Ok(q);
        }
    }
    Err(Error::DimensionMismatch(
        "random terms kept cancelling; the requested shape is too tight".into(),
    ))
}

/// A random factor of `dim` distinct polynomials with degrees cycling
/// through `1..=degree`, at least one of the full degree.
pub fn random_factor(
    field: PrimeField,
    n: usize,
    degree: usize,
    dim: usize,
    seed: u64,
) -> Result<Factor> {
    if dim == 0 {
        return Ok(Factor::empty(field, n));
    }
    let mut polys: Vec<Polynomial> = Vec::with_capacity(dim);
    for i in 0..dim {
        let d = if i == 0 { degree } else { 1 + (i - 1) % degree.max(1) };
        let mut attempt = 0u64;
        loop {
            let q = random_poly(field, n, d, 2.min(n), branch_seed(seed, i as u64 + 64 * attempt))?;
            if !polys.contains(&q) {
                polys.push(q);
                break;
            }
            attempt += 1;
            if attempt > 64 {
                return Err(Error::DimensionMismatch(format!(
                    "could not draw {dim} distinct polynomials of degree <= {degree} \
                     over {n} variables"
                )));
            }
        }
    }
    Factor::new(field, n, polys)
}

/// A planted decoding instance `P = Q + E`: a random codeword `Q` of degree
/// exactly `k` and a single-monomial structured noise `E` of degree
/// `noise_degree > k` over distinct variables. The exact agreement of `P`
/// with `Q` is `Pr[E = 0]`, enumerable over the noise monomial's variables.
pub struct Planted {
    pub poly: Polynomial,
    pub codeword: Polynomial,
    pub noise: Polynomial,
}

pub fn planted_rm(
    field: PrimeField,
    n: usize,
    k: usize,
    noise_degree: usize,
    seed: u64,
) -> Result<Planted> {
    if k == 0 || noise_degree <= k || noise_degree > n {
        return Err(Error::DimensionMismatch(format!(
            "planted instances need 1 <= k < noise degree <= nvars, \
             got k = {k}, noise degree {noise_degree}, {n} variables"
        )));
    }
    let codeword = random_poly(field, n, k, 2.min(k + 1), branch_seed(seed, 1))?;
    let noise = random_poly(field, n, noise_degree, 1, branch_seed(seed, 2))?;
    let poly = codeword.add(&noise)?;
    Ok(Planted { poly, codeword, noise })
}
