//! Bias, Gowers norms and derivative distributions.
//!
//! Every estimator runs in one of two modes: `Exact` enumerates the point
//! space (restricted to the variables that actually occur, with an explicit
//! budget), `MonteCarlo` samples with a ChaCha8 stream keyed by a 64-bit
//! seed. Exact mode also knows a few closed forms — the bias of an affine
//! polynomial, `U^k` of anything of lower degree, and `U^2` of a quadratic
//! over odd characteristic via the rank of its symmetrised matrix — which
//! agree with enumeration wherever both apply and keep the refinement loops
//! exact far beyond the raw point budget.

use crate::algebra::{
    derivative_polynomial, linalg::MatFp, FieldElement, Polynomial, PrimeField,
};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default cap on exact enumeration, in points.
pub const DEFAULT_EXACT_BUDGET: f64 = 1e7;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorMode {
    Exact,
    MonteCarlo,
}

/// How an estimate should be produced: the mode, the sample count and
/// failure probability for Monte Carlo, the seed, and the exact-mode budget.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorPlan {
    pub mode: EstimatorMode,
    pub samples: usize,
    pub failure_prob: f64,
    pub seed: u64,
    pub exact_budget: f64,
}

impl EstimatorPlan {
    pub fn exact() -> EstimatorPlan {
        EstimatorPlan {
            mode: EstimatorMode::Exact,
            samples: 0,
            failure_prob: 0.0,
            seed: 0,
            exact_budget: DEFAULT_EXACT_BUDGET,
        }
    }

    pub fn exact_with_budget(budget: f64) -> EstimatorPlan {
        EstimatorPlan { exact_budget: budget, ..EstimatorPlan::exact() }
    }

    pub fn monte_carlo(samples: usize, failure_prob: f64, seed: u64) -> EstimatorPlan {
        EstimatorPlan {
            mode: EstimatorMode::MonteCarlo,
            samples,
            failure_prob,
            seed,
            exact_budget: DEFAULT_EXACT_BUDGET,
        }
    }

    /// Monte Carlo plan sized by Hoeffding for additive error `eps` on each
    /// of the real and imaginary parts with failure probability `rho`.
    pub fn for_accuracy(eps: f64, rho: f64, seed: u64) -> EstimatorPlan {
        EstimatorPlan::monte_carlo(hoeffding_samples(eps, rho), rho, seed)
    }

    pub fn with_seed(mut self, seed: u64) -> EstimatorPlan {
        self.seed = seed;
        self
    }

    /// The additive error this plan guarantees (per real/imaginary part)
    /// with probability `1 - failure_prob`, by inverting the Hoeffding count.
    pub fn planned_epsilon(&self) -> Option<f64> {
        if self.mode == EstimatorMode::Exact || self.samples == 0 || self.failure_prob <= 0.0 {
            return None;
        }
        Some((2.0 / self.samples as f64 * (4.0 / self.failure_prob).ln()).sqrt())
    }
}

/// Samples sufficient for additive error `eps` with failure probability
/// `rho`: `ceil((2/eps^2) * ln(4/rho))`, Hoeffding on the real and imaginary
/// parts separately with a union bound.
pub fn hoeffding_samples(eps: f64, rho: f64) -> usize {
    assert!(eps > 0.0 && rho > 0.0 && rho < 1.0, "need eps > 0 and rho in (0,1)");
    ((2.0 / (eps * eps)) * (4.0 / rho).ln()).ceil() as usize
}

/// Deterministic derivation of a child seed for a named branch of a
/// pipeline (per-t scans, per-alpha scans, recursive refinement calls),
/// so concurrent schedules cannot change any stream. SplitMix64 finaliser.
pub fn branch_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// ChaCha8 keyed by the seed; sample `i` reads from stream `i`, which is the
/// counter-based discipline that makes partitioned sampling loops agree with
/// the sequential one.
pub struct SampleStream {
    rng: ChaCha8Rng,
}

impl SampleStream {
    pub fn new(seed: u64) -> SampleStream {
        SampleStream { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn at(&mut self, index: u64) -> &mut ChaCha8Rng {
        self.rng.set_stream(index);
        self.rng.set_word_pos(0);
        &mut self.rng
    }
}

pub fn rand_elem(field: PrimeField, rng: &mut ChaCha8Rng) -> FieldElement {
    field.elem(rng.gen_range(0..field.order()))
}

pub fn rand_point(field: PrimeField, n: usize, rng: &mut ChaCha8Rng) -> Vec<FieldElement> {
    (0..n).map(|_| rand_elem(field, rng)).collect()
}

/// `e_F(c) = exp(2 pi i c / p)` as a lookup table over the field.
pub(crate) fn character_table(field: PrimeField) -> Vec<Complex64> {
    let p = field.order() as f64;
    (0..field.order())
        .map(|c| {
            let theta = 2.0 * std::f64::consts::PI * c as f64 / p;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Runs `body` over every point of `F^nvars` in odometer order.
pub(crate) fn enumerate_points<B>(field: PrimeField, nvars: usize, mut body: B)
where
    B: FnMut(&[FieldElement]),
{
    let p = field.order();
    let mut raw = vec![0u64; nvars];
    let mut point = vec![field.zero(); nvars];
    loop {
        body(&point);
        let mut i = 0;
        loop {
            if i == nvars {
                return;
            }
            raw[i] += 1;
            if raw[i] < p {
                point[i] = field.elem(raw[i]);
                break;
            }
            raw[i] = 0;
            point[i] = field.zero();
            i += 1;
        }
    }
}

pub(crate) fn enumeration_cost(field: PrimeField, nvars: usize) -> f64 {
    (field.order() as f64).powi(nvars as i32)
}

/// A complex empirical (or exact) mean of `e_F(P(x))` and its magnitude.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct BiasValue {
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

impl BiasValue {
    fn from_mean(m: Complex64) -> BiasValue {
        BiasValue { re: m.re, im: m.im, magnitude: m.norm() }
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A Gowers-norm estimate: the `2^k`-power mean (the quantity estimates
/// compare against thresholds) and the norm itself.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct GowersValue {
    pub k: usize,
    pub power_mean: f64,
    pub norm: f64,
}

impl GowersValue {
    fn from_power(k: usize, power: f64) -> GowersValue {
        let power = power.clamp(0.0, 1.0);
        GowersValue { k, power_mean: power, norm: power.powf(1.0 / (1u64 << k) as f64) }
    }
}

fn exact_bias_mean(p: &Polynomial, budget: f64) -> Result<Complex64> {
    let f = p.field();
    if p.is_constant() {
        let chars = character_table(f);
        return Ok(chars[p.constant_term().value() as usize]);
    }
    if p.degree() == 1 {
        // A nonconstant affine form is a nontrivial character times a unit:
        // its mean is exactly zero.
        return Ok(Complex64::new(0.0, 0.0));
    }
    let supp = p.support();
    let cost = enumeration_cost(f, supp.len());
    if cost > budget {
        return Err(Error::BudgetExceeded {
            need: cost,
            budget,
            what: format!("exact bias over {} live variables", supp.len()),
        });
    }
    let q = p.restrict_to(&supp)?;
    let chars = character_table(f);
    let mut acc = Complex64::new(0.0, 0.0);
    enumerate_points(f, supp.len(), |x| {
        let v = q.eval(x).expect("point width matches");
        acc += chars[v.value() as usize];
    });
    Ok(acc / cost)
}

/// `bias(P) = E_x e_F(P(x))` with its magnitude.
pub fn estimate_bias(p: &Polynomial, plan: &EstimatorPlan) -> Result<BiasValue> {
    match plan.mode {
        EstimatorMode::Exact => Ok(BiasValue::from_mean(exact_bias_mean(p, plan.exact_budget)?)),
        EstimatorMode::MonteCarlo => {
            let f = p.field();
            let chars = character_table(f);
            let mut stream = SampleStream::new(plan.seed);
            let mut acc = Complex64::new(0.0, 0.0);
            let samples = plan.samples.max(1);
            for i in 0..samples {
                let rng = stream.at(i as u64);
                let x = rand_point(f, p.nvars(), rng);
                let v = p.eval(&x)?;
                acc += chars[v.value() as usize];
            }
            Ok(BiasValue::from_mean(acc / samples as f64))
        }
    }
}

/// Rank of the symmetrised coefficient matrix of the degree-2 part,
/// restricted to the support. Only meaningful over odd characteristic.
fn quadratic_symmetrised_rank(p: &Polynomial) -> usize {
    let f = p.field();
    let supp = p.support();
    let pos: std::collections::BTreeMap<usize, usize> =
        supp.iter().enumerate().map(|(j, &v)| (v, j)).collect();
    let s = supp.len();
    let mut a = MatFp::zero(f, s, s);
    for (m, c) in p.terms() {
        if m.total_degree() != 2 {
            continue;
        }
        let live: Vec<(usize, u16)> =
            m.support().map(|i| (pos[&i], m.exps()[i])).collect();
        match live.as_slice() {
            [(i, 2)] => {
                // x_i^2 contributes 2c on the diagonal
                let two_c = f.add(c, c);
                a[(*i, *i)] = f.add(a[(*i, *i)], two_c);
            }
            [(i, 1), (j, 1)] => {
                a[(*i, *j)] = f.add(a[(*i, *j)], c);
                a[(*j, *i)] = f.add(a[(*j, *i)], c);
            }
            _ => unreachable!("degree-2 monomial has one square or two singles"),
        }
    }
    a.rank()
}

fn exact_gowers_power(p: &Polynomial, k: usize, budget: f64) -> Result<f64> {
    let f = p.field();
    let d = if p.is_zero() { 0 } else { p.degree() };
    if p.is_constant() || k > d {
        // The k-fold derivative vanishes identically.
        return Ok(1.0);
    }
    if k == 1 {
        let b = exact_bias_mean(p, budget)?;
        return Ok(b.norm_sqr());
    }
    if k == 2 && d == 2 && f.order() % 2 == 1 {
        // E e(y1^T A y2) = Pr[A y2 = 0] = p^{-rank(A)} with A = M + M^T.
        let r = quadratic_symmetrised_rank(p);
        return Ok((f.order() as f64).powi(-(r as i32)));
    }
    let dp = derivative_polynomial(p, k)?;
    let mean = exact_bias_mean(dp.poly(), budget)?;
    debug_assert!(mean.im.abs() < 1e-9, "Gowers power means are real");
    Ok(mean.re)
}

/// `|| e_F(P) ||_{U^k}` via its `2^k`-power mean
/// `E_{x,y_1..y_k} e_F( sum_I (-1)^(k-|I|) P(x + y_I) )`.
pub fn estimate_gowers(p: &Polynomial, k: usize, plan: &EstimatorPlan) -> Result<GowersValue> {
    if k == 0 {
        return Err(Error::DimensionMismatch("Gowers norms need k >= 1".into()));
    }
    let f = p.field();
    match plan.mode {
        EstimatorMode::Exact => {
            Ok(GowersValue::from_power(k, exact_gowers_power(p, k, plan.exact_budget)?))
        }
        EstimatorMode::MonteCarlo => {
            let chars = character_table(f);
            let n = p.nvars();
            let mut stream = SampleStream::new(plan.seed);
            let mut acc = Complex64::new(0.0, 0.0);
            let samples = plan.samples.max(1);
            let mut shifted = vec![f.zero(); n];
            for i in 0..samples {
                let rng = stream.at(i as u64);
                let x = rand_point(f, n, rng);
                let ys: Vec<Vec<FieldElement>> =
                    (0..k).map(|_| rand_point(f, n, rng)).collect();
                let mut body = f.zero();
                for mask in 0u64..(1 << k) {
                    for j in 0..n {
                        let mut v = x[j];
                        for (b, y) in ys.iter().enumerate() {
                            if mask >> b & 1 == 1 {
                                v = f.add(v, y[j]);
                            }
                        }
                        shifted[j] = v;
                    }
                    let val = p.eval(&shifted)?;
                    if (k - mask.count_ones() as usize) % 2 == 0 {
                        body = f.add(body, val);
                    } else {
                        body = f.sub(body, val);
                    }
                }
                acc += chars[body.value() as usize];
            }
            Ok(GowersValue::from_power(k, (acc / samples as f64).re))
        }
    }
}

/// `mu_a(t) = Pr_x[ P(x) = a + t ]`, returned as a probability vector
/// indexed by `t in F`. This is the distribution of the derivative
/// `D_h P(x)` over uniform `h`, conditioned on `P(x) = a`.
pub fn derivative_distribution(
    p: &Polynomial,
    a: FieldElement,
    plan: &EstimatorPlan,
) -> Result<Vec<f64>> {
    let f = p.field();
    let ord = f.order() as usize;
    let mut hist = vec![0u64; ord];
    let total;
    match plan.mode {
        EstimatorMode::Exact => {
            let supp = p.support();
            let cost = enumeration_cost(f, supp.len());
            if cost > plan.exact_budget {
                return Err(Error::BudgetExceeded {
                    need: cost,
                    budget: plan.exact_budget,
                    what: format!("exact value distribution over {} live variables", supp.len()),
                });
            }
            let q = p.restrict_to(&supp)?;
            enumerate_points(f, supp.len(), |x| {
                let v = q.eval(x).expect("point width matches");
                hist[v.value() as usize] += 1;
            });
            total = cost as u64;
        }
        EstimatorMode::MonteCarlo => {
            let mut stream = SampleStream::new(plan.seed);
            let samples = plan.samples.max(1);
            for i in 0..samples {
                let rng = stream.at(i as u64);
                let x = rand_point(f, p.nvars(), rng);
                hist[p.eval(&x)?.value() as usize] += 1;
            }
            total = samples as u64;
        }
    }
    let mut out = vec![0.0; ord];
    for (t, slot) in out.iter_mut().enumerate() {
        let idx = f.add(a, f.elem(t as u64)).value() as usize;
        *slot = hist[idx] as f64 / total as f64;
    }
    Ok(out)
}

/// Total variation times two: the l1 distance between probability vectors.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PrimeField;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn hoeffding_count() {
        // eps = 0.1, rho = 0.05: (2/0.01) ln(80) = 200 * 4.382 -> 877
        assert_eq!(hoeffding_samples(0.1, 0.05), 877);
    }

    #[test]
    fn bias_of_product_over_f2() {
        let f = fp(2);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        let b = estimate_bias(&q, &EstimatorPlan::exact()).unwrap();
        assert!((b.magnitude - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bias_of_linear_form_is_zero() {
        let f = fp(7);
        let q = Polynomial::from_terms(f, 3, &[(&[1, 0, 0], 3), (&[0, 0, 0], 2)]).unwrap();
        let b = estimate_bias(&q, &EstimatorPlan::exact()).unwrap();
        assert_eq!(b.magnitude, 0.0);
        // and the closed form agrees with brute enumeration
        let full = Polynomial::from_terms(f, 1, &[(&[1], 3), (&[0], 2)]).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        let chars = character_table(f);
        for x in f.elements() {
            acc += chars[full.eval(&[x]).unwrap().value() as usize];
        }
        assert!(acc.norm() < 1e-12);
    }

    #[test]
    fn gowers_u2_of_product_f2() {
        // power mean 1/4, norm (1/4)^(1/4)
        let f = fp(2);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        let g = estimate_gowers(&q, 2, &EstimatorPlan::exact()).unwrap();
        assert!((g.power_mean - 0.25).abs() < 1e-12);
        assert!((g.norm - 0.25f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn gowers_u2_of_product_f5_matches_rank_form() {
        let f = fp(5);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        let g = estimate_gowers(&q, 2, &EstimatorPlan::exact()).unwrap();
        // 5^(-1/2)
        assert!((g.norm - 5f64.powf(-0.5)).abs() < 1e-12);
        // cross-check the closed form against full tuple enumeration
        let dp = derivative_polynomial(&q, 2).unwrap();
        let mut acc = Complex64::new(0.0, 0.0);
        let chars = character_table(f);
        enumerate_points(f, 4, |y| {
            let v = dp.poly().eval(y).unwrap();
            acc += chars[v.value() as usize];
        });
        let brute = (acc / 625.0).re;
        assert!((g.power_mean - brute).abs() < 1e-12);
    }

    #[test]
    fn gowers_above_degree_is_one() {
        let f = fp(3);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        let g = estimate_gowers(&q, 3, &EstimatorPlan::exact()).unwrap();
        assert_eq!(g.power_mean, 1.0);
        assert_eq!(g.norm, 1.0);
    }

    #[test]
    fn gowers_monotone_in_k() {
        let f = fp(2);
        let q = Polynomial::from_terms(
            f,
            4,
            &[(&[1, 1, 0, 0], 1), (&[0, 0, 1, 1], 1), (&[1, 0, 1, 0], 1)],
        )
        .unwrap();
        let plan = EstimatorPlan::exact();
        let mut prev = 0.0;
        for k in 1..=3 {
            let g = estimate_gowers(&q, k, &plan).unwrap();
            assert!(g.norm >= prev - 1e-12, "U^{k} dropped below U^{}", k - 1);
            prev = g.norm;
        }
    }

    #[test]
    fn derivative_distribution_example() {
        let f = fp(2);
        let q = Polynomial::from_terms(f, 2, &[(&[1, 1], 1)]).unwrap();
        let mu = derivative_distribution(&q, f.zero(), &EstimatorPlan::exact()).unwrap();
        assert_eq!(mu, vec![0.75, 0.25]);
        let mu1 = derivative_distribution(&q, f.one(), &EstimatorPlan::exact()).unwrap();
        assert_eq!(mu1, vec![0.25, 0.75]);
    }

    #[test]
    fn monte_carlo_is_seed_deterministic() {
        let f = fp(3);
        let q = Polynomial::from_terms(f, 4, &[(&[1, 1, 0, 0], 1), (&[0, 0, 2, 0], 2)]).unwrap();
        let plan = EstimatorPlan::monte_carlo(500, 0.1, 42);
        let a = estimate_bias(&q, &plan).unwrap();
        let b = estimate_bias(&q, &plan).unwrap();
        assert_eq!(a.mean(), b.mean());
        let g1 = estimate_gowers(&q, 2, &plan).unwrap();
        let g2 = estimate_gowers(&q, 2, &plan).unwrap();
        assert_eq!(g1.power_mean, g2.power_mean);
    }

    #[test]
    fn monte_carlo_concentrates() {
        let f = fp(3);
        let q = Polynomial::from_terms(f, 4, &[(&[1, 1, 0, 0], 1)]).unwrap();
        let exact = estimate_bias(&q, &EstimatorPlan::exact()).unwrap();
        let plan = EstimatorPlan::for_accuracy(0.05, 0.05, 7);
        let eps = plan.planned_epsilon().unwrap();
        let mut bad = 0;
        for run in 0..50 {
            let got = estimate_bias(&q, &plan.with_seed(branch_seed(7, run))).unwrap();
            if (got.magnitude - exact.magnitude).abs() > eps {
                bad += 1;
            }
        }
        assert!(bad <= 3, "{bad} of 50 runs outside planned eps");
    }

    #[test]
    fn budget_is_enforced() {
        let f = fp(5);
        // 10 live variables, budget 1000 points
        let q = Polynomial::from_terms(
            f,
            10,
            &[(&[1, 1, 1, 1, 1, 1, 1, 1, 1, 1], 1), (&[2, 0, 0, 0, 0, 0, 0, 0, 0, 0], 1)],
        )
        .unwrap();
        let plan = EstimatorPlan::exact_with_budget(1000.0);
        assert!(matches!(
            estimate_bias(&q, &plan),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn support_reduction_matches_full_enumeration() {
        // A polynomial in 6 declared variables using only 2: exact bias must
        // equal the mean over the full 6-dim space, which factorises.
        let f = fp(3);
        let q = Polynomial::from_terms(f, 6, &[(&[0, 2, 0, 0, 1, 0], 2)]).unwrap();
        let b = estimate_bias(&q, &EstimatorPlan::exact()).unwrap();
        let chars = character_table(f);
        let mut acc = Complex64::new(0.0, 0.0);
        enumerate_points(f, 6, |x| {
            acc += chars[q.eval(x).unwrap().value() as usize];
        });
        let brute = acc / 729.0;
        assert!((b.mean() - brute).norm() < 1e-12);
    }
}
