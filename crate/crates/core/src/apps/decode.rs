//! Local decoding of low-degree codes far beyond half the minimum
//! distance: given a polynomial `P` promised to agree with some unknown
//! codeword of degree at most `k` on a `1/|F| + epsilon` fraction of
//! points, produce a degree-`<= k` polynomial realizing such an agreement.
//!
//! The promise cannot be checked on entry. Each stage converts it into the
//! next stage's promise and fails with a named error where its own step
//! finds nothing — a scan of the multiples `tP` for a large `U^{k+1}` norm,
//! a factor computing the correlated multiple, a uniformity refinement
//! tight enough for single-query atom access, a Fourier search over the
//! atom space for a heavy low-degree combination, and a shift fix-up. The
//! reported agreement at the exit is re-measured, exactly when the point
//! space fits the budget.

use std::cell::Cell;
use std::time::Instant;

use crate::algebra::{FieldElement, Polynomial};
use crate::error::{Error, Result};
use crate::estimators::{
    branch_seed, derivative_distribution, estimate_bias, estimate_gowers, hoeffding_samples,
    EstimatorMode, EstimatorPlan,
};
use crate::factor::{
    measurability_check, query_gamma, Atom, Factor, GammaSchedule, MeasurabilityOutcome,
};
use crate::refine::combination;

use super::factorize::gowers_to_factor;
use super::fourier::goldreich_levin;
use super::PipelineTrace;

/// Everything the decoder hands back: the multiple it worked on, the factor
/// whose atoms carried the Fourier search, the decoded polynomial, and the
/// re-measured agreement (`agreement_exact` tells enumeration from
/// sampling). The trace records one line per stage with its derived seed.
#[derive(Clone, Debug)]
pub struct DecodingResult {
    pub t: FieldElement,
    pub factor: Factor,
    pub q_tilde: Polynomial,
    pub agreement: f64,
    pub agreement_exact: bool,
    pub trace: PipelineTrace,
}

fn validate_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::DimensionMismatch(format!("{name} must lie in (0, 1], got {v}")));
    }
    Ok(())
}

/// Scans `t = 1, .., |F| - 1` for a multiple with `‖e_F(tP)‖_{U^{k+1}} >=
/// (3/4) epsilon` and returns the first passing `t`.
///
/// Under the agreement promise some multiple must pass with margin `epsilon`
/// (distance implies correlation, and the `U^{k+1}` norm dominates the
/// correlation with any degree-`k` polynomial), so a miss across the whole
/// scan refutes the promise: [`Error::NoCorrelatedMultiple`]. No degree
/// precondition is imposed — a `P` of degree `<= k` has `U^{k+1}` norm one
/// and accepts `t = 1` immediately.
///
/// Monte Carlo plans without an explicit sample count get one sized for the
/// gap between the `2^{k+1}`-power thresholds at `(3/4) epsilon` and
/// `(1/2) epsilon`, splitting `beta` across the scan.
pub fn find_correlated_multiple(
    p: &Polynomial,
    k: usize,
    epsilon: f64,
    beta: f64,
    plan: &EstimatorPlan,
) -> Result<FieldElement> {
    validate_unit("epsilon", epsilon)?;
    validate_unit("beta", beta)?;
    let field = p.field();
    let exp = 1 << (k + 1).min(26);
    let threshold = (0.75 * epsilon).powi(exp);
    for t in 1..field.order() {
        let tp = p.scale(field.elem(t));
        let mut local = plan.with_seed(branch_seed(plan.seed, t));
        if local.mode == EstimatorMode::MonteCarlo && local.samples == 0 {
            let margin =
                (threshold - (0.5 * epsilon).powi(exp)).max(f64::MIN_POSITIVE);
            let rho = (beta / (field.order() - 1) as f64).clamp(1e-12, 0.5);
            local.samples = hoeffding_samples(margin, rho);
        }
        let value = estimate_gowers(&tp, k + 1, &local)?;
        if value.power_mean >= threshold {
            return Ok(field.elem(t));
        }
    }
    Err(Error::NoCorrelatedMultiple)
}

/// Finds the constant `h` on which `P - Q` concentrates: the argmax of the
/// value distribution `mu(r) = Pr_x[(P - Q)(x) = r]`, smallest value on
/// ties. Monte Carlo plans without a sample count get one resolving the
/// distribution to `delta_prime / (8 |F|^2)` per coordinate.
pub fn find_shift(
    p: &Polynomial,
    q: &Polynomial,
    delta_prime: f64,
    beta: f64,
    plan: &EstimatorPlan,
) -> Result<FieldElement> {
    validate_unit("delta_prime", delta_prime)?;
    validate_unit("beta", beta)?;
    let field = p.field();
    let diff = p.sub(q)?;
    let mut local = *plan;
    if local.mode == EstimatorMode::MonteCarlo && local.samples == 0 {
        let ord = field.order() as f64;
        let rho = (beta / ord).clamp(1e-12, 0.5);
        local.samples = hoeffding_samples(delta_prime / (8.0 * ord * ord), rho);
    }
    let mu = derivative_distribution(&diff, field.zero(), &local)?;
    let mut best = 0usize;
    for (r, &mass) in mu.iter().enumerate() {
        if mass > mu[best] {
            best = r;
        }
    }
    Ok(field.elem(best as u64))
}

/// Re-measures the agreement `Pr_x[Q(x) = P(x)]`: exactly when the support
/// fits the plan's budget, otherwise by sampling. The flag says which.
fn agreement_of(
    p: &Polynomial,
    q: &Polynomial,
    beta: f64,
    plan: &EstimatorPlan,
) -> Result<(f64, bool)> {
    let field = p.field();
    let diff = p.sub(q)?;
    let exact_plan = EstimatorPlan { mode: EstimatorMode::Exact, ..*plan };
    match derivative_distribution(&diff, field.zero(), &exact_plan) {
        Ok(mu) => Ok((mu[0], true)),
        Err(Error::BudgetExceeded { .. }) => {
            let samples =
                if plan.samples > 0 { plan.samples } else { hoeffding_samples(0.02, beta) };
            let mc = EstimatorPlan::monte_carlo(samples, beta, plan.seed);
            let mu = derivative_distribution(&diff, field.zero(), &mc)?;
            Ok((mu[0], false))
        }
        Err(e) => Err(e),
    }
}

/// Decodes `P` under the promise that some polynomial of degree at most
/// `k >= 1` agrees with it on at least a `1/|F| + epsilon` fraction of
/// points, `|F| > deg P`.
///
/// Stages, each on a seed derived from the plan's and with failure budget
/// `beta/6` where it samples (exact plans make all but the atom-access
/// fallback deterministic):
///
/// 1. scan multiples for `‖e_F(tP)‖_{U^{k+1}} >= (3/4) epsilon`;
/// 2. build a factor computing `tP` from its large Gowers norm;
/// 3. re-refine to uniformity `sigma |F|^{-2m}`, `sigma =
///    epsilon^{2^{k+1}}/4`, tight enough that every atom is hit and
///    single-query access works;
/// 4. certify measurability of `tP` (a counterexample here means the
///    agreement promise was false);
/// 5. recover heavy Fourier characters of the decomposition `tP =
///    Gamma(F(x))` over the atom space at threshold `zeta = delta'/2`,
///    `delta' = epsilon^{2^{k+1}} / (2 |F|^m)`, and keep the first
///    low-degree combination whose bias against `tP` re-checks at
///    `delta'/4` on the original space — the Fourier search weighs atoms
///    uniformly, so the certificate is re-measured under the true point
///    measure;
/// 6. fix the constant shift, undo the multiplier, and re-measure the
///    agreement of the result.
pub fn decode_rm(
    p: &Polynomial,
    k: usize,
    epsilon: f64,
    beta: f64,
    plan: &EstimatorPlan,
) -> Result<DecodingResult> {
    validate_unit("epsilon", epsilon)?;
    validate_unit("beta", beta)?;
    if k == 0 {
        return Err(Error::DimensionMismatch(
            "decoding targets degree k >= 1; constants have no shift structure".into(),
        ));
    }
    let field = p.field();
    let n = p.nvars();
    let d = p.degree();
    let mut trace = PipelineTrace::default();
    if d <= k {
        // The input is itself a codeword and realizes agreement one.
        let started = Instant::now();
        trace.record(
            "trivial",
            plan.seed,
            true,
            started,
            format!("input degree {d} <= k = {k}; decoding is the identity"),
        );
        return Ok(DecodingResult {
            t: field.one(),
            factor: Factor::empty(field, n),
            q_tilde: p.clone(),
            agreement: 1.0,
            agreement_exact: true,
            trace,
        });
    }
    if field.order() <= d as u64 {
        return Err(Error::CharacteristicTooSmall { needed: d as u64, have: field.order() });
    }
    let beta6 = beta / 6.0;
    let exp = 1 << (k + 1).min(26);

    let started = Instant::now();
    let seed1 = branch_seed(plan.seed, 1);
    let t = find_correlated_multiple(p, k, epsilon, beta6, &plan.with_seed(seed1))?;
    trace.record(
        "find-correlated-multiple",
        seed1,
        plan.mode == EstimatorMode::Exact,
        started,
        format!("t = {}", t.value()),
    );
    let p_tilde = p.scale(t);

    let started = Instant::now();
    let seed2 = branch_seed(plan.seed, 2);
    let (f0, _) = gowers_to_factor(&p_tilde, epsilon / 2.0, beta6, &plan.with_seed(seed2))?;
    trace.record(
        "gowers-to-factor",
        seed2,
        plan.mode == EstimatorMode::Exact,
        started,
        format!("dim {}", f0.dim()),
    );

    let started = Instant::now();
    let seed3 = branch_seed(plan.seed, 3);
    let sigma = (epsilon.powi(exp) / 4.0).max(f64::MIN_POSITIVE);
    let schedule = GammaSchedule::new(sigma, 2.0)?;
    let f = if f0.dim() == 0 {
        f0.clone()
    } else {
        crate::refine::refine_uniform(&f0, schedule, beta6, &plan.with_seed(seed3))?.0
    };
    trace.record(
        "refine-uniform",
        seed3,
        plan.mode == EstimatorMode::Exact,
        started,
        format!("dim {} -> {}", f0.dim(), f.dim()),
    );

    let started = Instant::now();
    let w = match measurability_check(&p_tilde, &f, plan)? {
        MeasurabilityOutcome::Measurable(w) => w,
        MeasurabilityOutcome::Counterexample { .. } => {
            return Err(Error::PromiseViolated(
                "the refined factor does not determine the multiple; the agreement promise \
                 likely does not hold"
                    .into(),
            ));
        }
    };
    trace.record(
        "measurability",
        plan.seed,
        w.is_exact(),
        started,
        format!("{} atoms", w.table().len()),
    );

    let m = f.dim();
    let size = f.size();
    let delta_prime = (epsilon.powi(exp) / (2.0 * size)).max(f64::MIN_POSITIVE);
    let zeta = delta_prime / 2.0;
    let started = Instant::now();
    let gl_seed = branch_seed(plan.seed, 4);
    let fallback = Cell::new(0u64);
    let degraded = Cell::new(false);
    let oracle = |x: &[FieldElement]| -> FieldElement {
        let atom = Atom::new(x.to_vec());
        if let Some(v) = w.gamma(&atom) {
            return v;
        }
        if w.is_exact() {
            // An exhaustive table missing the atom means no point reaches
            // it; the value there cannot matter to the true decomposition.
            return field.zero();
        }
        let i = fallback.get();
        fallback.set(i + 1);
        match query_gamma(
            &f,
            &atom,
            |y: &[FieldElement]| p_tilde.eval(y).expect("factor and multiple share a space"),
            beta6,
            schedule,
            branch_seed(gl_seed, 1_000_000 + i),
        ) {
            Ok(v) => v,
            Err(_) => {
                degraded.set(true);
                field.zero()
            }
        }
    };
    let entries = goldreich_levin(field, m, &oracle, zeta, beta6, gl_seed)?;
    trace.record(
        "goldreich-levin",
        gl_seed,
        w.is_exact(),
        started,
        format!(
            "{} entries{}",
            entries.len(),
            if degraded.get() { ", degraded atom access" } else { "" }
        ),
    );

    let started = Instant::now();
    let mut chosen: Option<Polynomial> = None;
    let mut chosen_index = 0usize;
    for (i, entry) in entries.iter().enumerate() {
        let q_i = combination(&f, &entry.eta)?;
        if q_i.degree() > k {
            continue;
        }
        let diff = p_tilde.sub(&q_i)?;
        let mut local = plan.with_seed(branch_seed(plan.seed, 5 + i as u64));
        if local.mode == EstimatorMode::MonteCarlo && local.samples == 0 {
            let rho = (beta6 / entries.len() as f64).clamp(1e-12, 0.5);
            local.samples = hoeffding_samples(delta_prime / 8.0, rho);
        }
        if estimate_bias(&diff, &local)?.magnitude >= delta_prime / 4.0 {
            chosen = Some(q_i);
            chosen_index = i;
            break;
        }
    }
    let Some(q0) = chosen else {
        return Err(Error::NoHeavyLowDegreeCoefficient);
    };
    trace.record(
        "heavy-coefficient",
        branch_seed(plan.seed, 5 + chosen_index as u64),
        plan.mode == EstimatorMode::Exact,
        started,
        format!("entry {chosen_index}, degree {}", q0.degree()),
    );

    let started = Instant::now();
    let seed6 = branch_seed(plan.seed, 6);
    let h = find_shift(&p_tilde, &q0, delta_prime, beta6, &plan.with_seed(seed6))?;
    trace.record(
        "find-shift",
        seed6,
        plan.mode == EstimatorMode::Exact,
        started,
        format!("shift {}", h.value()),
    );

    let q_tilde =
        q0.add(&Polynomial::constant(field, n, h))?.scale(field.inv(t)?);
    debug_assert!(q_tilde.degree() <= k, "the heavy pick filtered on degree");

    let started = Instant::now();
    let seed7 = branch_seed(plan.seed, 7);
    let (agreement, agreement_exact) =
        agreement_of(p, &q_tilde, beta6, &plan.with_seed(seed7))?;
    trace.record(
        "agreement",
        seed7,
        agreement_exact,
        started,
        format!("{agreement:.6}"),
    );

    Ok(DecodingResult { t, factor: f, q_tilde, agreement, agreement_exact, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PrimeField;

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
    fn low_degree_inputs_decode_to_themselves() {
        let f5 = fp(5);
        let p = Polynomial::var(f5, 2, 0);
        let r = decode_rm(&p, 1, 0.2, 0.1, &EstimatorPlan::exact()).unwrap();
        assert_eq!(r.t, f5.one());
        assert_eq!(r.q_tilde, p);
        assert_eq!(r.agreement, 1.0);
        assert!(r.agreement_exact);
        assert_eq!(r.factor.dim(), 0);
    }

    #[test]
    fn degree_k_inputs_accept_the_first_multiple() {
        let f5 = fp(5);
        let p = product(f5, 2, 0, 1);
        let t = find_correlated_multiple(&p, 2, 0.5, 0.1, &EstimatorPlan::exact()).unwrap();
        assert_eq!(t, f5.one());
    }

    #[test]
    fn a_full_rank_quadratic_has_no_correlated_multiple() {
        // U^2(t(x1x2 + x3x4)) = 5^{-2/4} ~ 0.447^2: every multiple's norm is
        // exactly 1/sqrt(5) ... the 4-dimensional rank makes it 0.2, below
        // the 0.3 threshold for epsilon = 0.4.
        let f5 = fp(5);
        let p = product(f5, 4, 0, 1).add(&product(f5, 4, 2, 3)).unwrap();
        let err =
            find_correlated_multiple(&p, 1, 0.4, 0.1, &EstimatorPlan::exact()).unwrap_err();
        assert!(matches!(err, Error::NoCorrelatedMultiple));
    }

    #[test]
    fn find_shift_locates_point_masses() {
        let f5 = fp(5);
        let q = product(f5, 2, 0, 1);
        let shifted = q.add(&Polynomial::constant(f5, 2, f5.elem(3))).unwrap();
        let h = find_shift(&shifted, &q, 0.5, 0.1, &EstimatorPlan::exact()).unwrap();
        assert_eq!(h, f5.elem(3));
        let h = find_shift(&q, &q, 0.5, 0.1, &EstimatorPlan::exact()).unwrap();
        assert_eq!(h, f5.zero());
    }

    #[test]
    fn find_shift_locates_a_peaked_distribution() {
        // x1x2 + 2 takes the value 2 on 9/25 points and each other value on
        // 4/25: the argmax is the planted constant.
        let f5 = fp(5);
        let p = product(f5, 2, 0, 1).add(&Polynomial::constant(f5, 2, f5.elem(2))).unwrap();
        let q = Polynomial::zero(f5, 2);
        let h = find_shift(&p, &q, 0.2, 0.1, &EstimatorPlan::exact()).unwrap();
        assert_eq!(h, f5.elem(2));
    }

    #[test]
    fn decode_attains_the_list_optimal_agreement() {
        // P = x1 + x2x3 agrees with the planted codeword x1 on the 9/25 of
        // points where x2x3 = 0 — but so do x1 + a*x2 and x1 + b*x3 for
        // nonzero a, b (x2x3 = a*x2 on 5 + 4 points), a nine-way tie at the
        // top of the list. Any of them is a correct decoding; what is
        // pinned is that the result is linear and attains the optimum.
        let f5 = fp(5);
        let planted = Polynomial::var(f5, 3, 0);
        let p = planted.add(&product(f5, 3, 1, 2)).unwrap();
        let plan = EstimatorPlan::exact().with_seed(17);
        let r = decode_rm(&p, 1, 0.15, 0.1, &plan).unwrap();
        assert!(r.q_tilde.degree() <= 1);
        assert!(r.agreement_exact);
        assert!((r.agreement - 9.0 / 25.0).abs() < 1e-12);
        assert!(r.trace.stages.len() >= 6);
    }
}
