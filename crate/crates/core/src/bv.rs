//! Approximating a biased polynomial by lower-degree derivatives.
//!
//! Given `bias(P) >= delta`, a biased degree-`d` polynomial can be computed,
//! up to a `sigma`-fraction of errors, from `C` of its additive derivatives
//! `D_{h_j} P`, each of degree `< d`. The construction estimates the value
//! distribution of `P` once from `C` uniform samples, then freezes `C`
//! uniform directions; the approximation at `x` picks the field element
//! whose reference distribution best matches the observed distribution of
//! `{D_{h_j} P(x)}_j` in l1.

use crate::algebra::{directional_derivative, FieldElement, Polynomial};
use crate::error::{Error, Result};
use crate::estimators::{enumerate_points, enumeration_cost, l1_distance, rand_point, SampleStream};
use crate::factor::Factor;

/// Default ceiling on the number of directions; the bound
/// `|F|^5/(delta^2 sigma beta)` explodes for small `delta` while desk
/// instances succeed with far fewer.
pub const DEFAULT_C_CAP: usize = 5000;

/// A frozen approximation of a biased polynomial by `C` derivatives.
#[derive(Clone, Debug)]
pub struct BvApprox {
    source: Polynomial,
    directions: Vec<Vec<FieldElement>>,
    /// `reference[a][t]` estimates `mu_a(t) = Pr_x(P(x) = a + t)`.
    reference: Vec<Vec<f64>>,
    seed: u64,
    capped: bool,
}

impl BvApprox {
    pub fn source(&self) -> &Polynomial {
        &self.source
    }

    pub fn directions(&self) -> &[Vec<FieldElement>] {
        &self.directions
    }

    pub fn c(&self) -> usize {
        self.directions.len()
    }

    pub fn reference_measures(&self) -> &[Vec<f64>] {
        &self.reference
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Whether the direction count hit the configured cap instead of the
    /// full `|F|^5/(delta^2 sigma beta)` bound.
    pub fn was_capped(&self) -> bool {
        self.capped
    }

    /// The derivative polynomials `P_j = D_{h_j} P`, degree `< deg(P)`.
    pub fn derived_polys(&self) -> Result<Vec<Polynomial>> {
        self.directions.iter().map(|h| directional_derivative(&self.source, h)).collect()
    }

    /// The derivatives as a factor: constants dropped (they carry no
    /// information) and exact duplicates collapsed.
    pub fn derived_factor(&self) -> Result<Factor> {
        let mut polys: Vec<Polynomial> = Vec::new();
        for q in self.derived_polys()? {
            if !q.is_constant() && !polys.contains(&q) {
                polys.push(q);
            }
        }
        Factor::new(self.source.field(), self.source.nvars(), polys)
    }

    /// Exact `Pr_x(P~(x) != P(x))` by enumeration over the source's live
    /// variables (the approximation depends on nothing else).
    pub fn exact_disagreement(&self, budget: f64) -> Result<f64> {
        let field = self.source.field();
        let supp = self.source.support();
        let cost = enumeration_cost(field, supp.len());
        if cost > budget {
            return Err(Error::BudgetExceeded {
                need: cost,
                budget,
                what: format!("exact disagreement over {} live variables", supp.len()),
            });
        }
        let n = self.source.nvars();
        let mut bad = 0u64;
        let mut full = vec![field.zero(); n];
        enumerate_points(field, supp.len(), |x| {
            for (j, &v) in supp.iter().enumerate() {
                full[v] = x[j];
            }
            let truth = self.source.eval(&full).unwrap();
            if eval_bv(self, &full).unwrap() != truth {
                bad += 1;
            }
        });
        Ok(bad as f64 / cost)
    }
}

/// Builds a [`BvApprox`] for `P` under the caller's promise
/// `bias(P) >= delta`, with the default direction cap.
pub fn bv_approximate(
    p: &Polynomial,
    delta: f64,
    sigma: f64,
    beta: f64,
    seed: u64,
) -> Result<BvApprox> {
    bv_approximate_capped(p, delta, sigma, beta, DEFAULT_C_CAP, seed)
}

/// As [`bv_approximate`] with an explicit ceiling on `C`.
pub fn bv_approximate_capped(
    p: &Polynomial,
    delta: f64,
    sigma: f64,
    beta: f64,
    cap: usize,
    seed: u64,
) -> Result<BvApprox> {
    for (name, v) in [("delta", delta), ("sigma", sigma), ("beta", beta)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::DimensionMismatch(format!("{name} must lie in (0,1]")));
        }
    }
    let field = p.field();
    let ord = field.order() as usize;
    let bound = (field.order() as f64).powi(5) / (delta * delta * sigma * beta);
    let capped = bound > cap as f64;
    let c = if capped { cap } else { bound.ceil() as usize };
    let c = c.max(1);

    let mut stream = SampleStream::new(seed);
    // estimation phase: one shared sample set for every reference measure
    let mut hist = vec![0u64; ord];
    for i in 0..c {
        let rng = stream.at(i as u64);
        let x = rand_point(field, p.nvars(), rng);
        hist[p.eval(&x)?.value() as usize] += 1;
    }
    let reference: Vec<Vec<f64>> = (0..ord)
        .map(|a| {
            (0..ord)
                .map(|t| hist[field.add(field.elem(a as u64), field.elem(t as u64)).value() as usize] as f64 / c as f64)
                .collect()
        })
        .collect();
    // direction phase
    let directions: Vec<Vec<FieldElement>> = (0..c)
        .map(|i| {
            let rng = stream.at((c + i) as u64);
            rand_point(field, p.nvars(), rng)
        })
        .collect();
    Ok(BvApprox { source: p.clone(), directions, reference, seed, capped })
}

/// `P~(x) = argmin_r || mu~_r - mu_obs^(x) ||_1`, ties broken by the
/// smallest field element. Pure and deterministic given the frozen approx.
pub fn eval_bv(approx: &BvApprox, x: &[FieldElement]) -> Result<FieldElement> {
    let p = &approx.source;
    let field = p.field();
    if x.len() != p.nvars() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, approximation lives on {}",
            x.len(),
            p.nvars()
        )));
    }
    let base = p.eval(x)?;
    let ord = field.order() as usize;
    let mut obs = vec![0.0f64; ord];
    let mut shifted = vec![field.zero(); x.len()];
    for h in &approx.directions {
        for i in 0..x.len() {
            shifted[i] = field.add(x[i], h[i]);
        }
        let dv = field.sub(p.eval(&shifted)?, base);
        obs[dv.value() as usize] += 1.0;
    }
    let c = approx.c() as f64;
    for slot in &mut obs {
        *slot /= c;
    }
    let mut best = field.zero();
    let mut best_dist = f64::INFINITY;
    for r in 0..ord {
        let d = l1_distance(&approx.reference[r], &obs);
        if d < best_dist {
            best_dist = d;
            best = field.elem(r as u64);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PrimeField;
    use crate::estimators::{derivative_distribution, l1_distance, EstimatorPlan};

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn constant_is_reproduced_exactly() {
        let f5 = fp(5);
        let p = Polynomial::constant(f5, 3, f5.elem(3));
        let approx = bv_approximate(&p, 1.0, 0.1, 0.1, 99).unwrap();
        for x in [[0, 0, 0], [1, 2, 3], [4, 4, 4]] {
            assert_eq!(eval_bv(&approx, &f5.point(&x)).unwrap(), f5.elem(3));
        }
        assert_eq!(approx.exact_disagreement(1e6).unwrap(), 0.0);
    }

    #[test]
    fn separation_premise_holds_for_biased_product() {
        // bias(x1x2 over F_2) = 1/2, so ||mu_a - mu_b|| >= 4 delta / |F| = 1
        let f2 = fp(2);
        let p = Polynomial::from_terms(f2, 6, &[(&[1, 1, 0, 0, 0, 0], 1)]).unwrap();
        let plan = EstimatorPlan::exact();
        let mu0 = derivative_distribution(&p, f2.zero(), &plan).unwrap();
        let mu1 = derivative_distribution(&p, f2.one(), &plan).unwrap();
        assert!(l1_distance(&mu0, &mu1) >= 4.0 * 0.5 / 2.0 - 1e-12);
    }

    #[test]
    fn biased_product_is_approximated_in_most_runs() {
        let f2 = fp(2);
        let p = Polynomial::from_terms(f2, 6, &[(&[1, 1, 0, 0, 0, 0], 1)]).unwrap();
        let mut good = 0;
        for seed in 0..10u64 {
            let approx = bv_approximate(&p, 0.4, 0.1, 0.1, seed).unwrap();
            assert!(approx.was_capped());
            assert_eq!(approx.c(), DEFAULT_C_CAP);
            if approx.exact_disagreement(1e6).unwrap() <= 0.1 {
                good += 1;
            }
        }
        assert!(good >= 9, "only {good}/10 runs met the disagreement bound");
    }

    #[test]
    fn derivatives_have_lower_degree() {
        let f3 = fp(3);
        let p = Polynomial::from_terms(f3, 4, &[(&[1, 1, 1, 0], 1), (&[0, 0, 0, 2], 2)]).unwrap();
        let approx = bv_approximate_capped(&p, 0.5, 0.25, 0.25, 40, 5).unwrap();
        assert_eq!(approx.c(), 40);
        for q in approx.derived_polys().unwrap() {
            assert!(q.degree() < p.degree());
        }
        let f = approx.derived_factor().unwrap();
        assert!(f.polys().iter().all(|q| !q.is_constant()));
        assert!(f.degree() <= 2);
    }

    #[test]
    fn reference_measures_are_distributions() {
        let f3 = fp(3);
        let p = Polynomial::from_terms(f3, 3, &[(&[2, 0, 0], 1), (&[0, 1, 1], 2)]).unwrap();
        let approx = bv_approximate_capped(&p, 0.3, 0.2, 0.2, 100, 17).unwrap();
        for mu in approx.reference_measures() {
            let total: f64 = mu.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(mu.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn argmin_ties_take_smallest_element() {
        let f2 = fp(2);
        let p = Polynomial::var(f2, 2, 0);
        let mut approx = bv_approximate_capped(&p, 0.4, 0.2, 0.2, 8, 1).unwrap();
        // force perfectly symmetric references so every distance ties
        approx.reference = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        for x in [[0, 0], [1, 0], [0, 1], [1, 1]] {
            assert_eq!(eval_bv(&approx, &f2.point(&x)).unwrap(), f2.zero());
        }
    }

    #[test]
    fn violated_promise_still_runs() {
        // a nonzero linear form has bias 0; the construction must not crash,
        // but its guarantee is void
        let f2 = fp(2);
        let p = Polynomial::var(f2, 4, 2);
        let approx = bv_approximate_capped(&p, 0.4, 0.1, 0.1, 64, 21).unwrap();
        assert_eq!(approx.c(), 64);
        let _ = approx.exact_disagreement(1e6).unwrap();
    }

    #[test]
    fn approximation_is_seed_deterministic() {
        let f3 = fp(3);
        let p = Polynomial::from_terms(f3, 3, &[(&[1, 1, 0], 1)]).unwrap();
        let a = bv_approximate_capped(&p, 0.2, 0.2, 0.2, 50, 33).unwrap();
        let b = bv_approximate_capped(&p, 0.2, 0.2, 0.2, 50, 33).unwrap();
        assert_eq!(a.directions(), b.directions());
        assert_eq!(a.reference_measures(), b.reference_measures());
        let x = f3.point(&[1, 2, 0]);
        assert_eq!(eval_bv(&a, &x).unwrap(), eval_bv(&b, &x).unwrap());
    }
}
