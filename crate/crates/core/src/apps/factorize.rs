//! Factors that compute a structured polynomial: from a bias promise in
//! either characteristic regime, from a large Gowers norm, and the
//! worst-case to average-case reduction over a given factor.
//!
//! All three pipelines share a skeleton: approximate the target by a
//! function of its derivatives, refine the derived factor until it is
//! regular, then certify by an exact (where the budget allows)
//! measurability check. The certificate is the product — a caller holding
//! the returned [`MeasurabilityWitness`] can evaluate the computed
//! polynomial from atom labels alone, or through
//! [`MeasurabilityWitness::query`] with per-query failure probability β.

use serde::Serialize;

use crate::algebra::{derivative_polynomial, taylor_split, FieldElement, Polynomial};
use crate::bv::bv_approximate;
use crate::error::{Error, Result};
use crate::estimators::{
    branch_seed, derivative_distribution, hoeffding_samples, EstimatorMode, EstimatorPlan,
};
use crate::factor::{
    measurability_check, Factor, GammaSchedule, MeasurabilityOutcome, MeasurabilityWitness,
};
use crate::refine::{
    combination, default_sigma_d, drop_dependencies, refine_strongly_unbiased, refine_uniform,
};

/// Characteristic regime for [`bias_to_factor`].
///
/// Over large characteristic (`|F| > deg P`) the derived factor is made
/// uniform; over small characteristic uniformity is unattainable in general
/// and the factor is made strongly unbiased instead.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum BiasMode {
    HighChar,
    LowChar,
}

fn validate_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::DimensionMismatch(format!("{name} must lie in (0, 1], got {v}")));
    }
    Ok(())
}

/// Runs a measurability check and converts a counterexample into the named
/// promise error: by the time a pipeline certifies, the only way two points
/// of one atom can disagree is that the promise it was sold did not hold.
fn confirm_measurable(
    p: &Polynomial,
    f: &Factor,
    plan: &EstimatorPlan,
    promise: &str,
) -> Result<MeasurabilityWitness> {
    match measurability_check(p, f, plan)? {
        MeasurabilityOutcome::Measurable(w) => Ok(w),
        MeasurabilityOutcome::Counterexample { .. } => Err(Error::PromiseViolated(format!(
            "the refined factor does not determine the polynomial; {promise}"
        ))),
    }
}

/// Computes a biased polynomial from a factor of lower degree.
///
/// Under the promise `bias(P) >= delta`, approximates `P` by a function of
/// `C` directional derivatives, keeps an independent core of them, refines
/// it — uniformly in `HighChar` mode, strongly-unbiased in `LowChar` mode —
/// and certifies that `P` is determined by the refined factor's atoms.
///
/// The dropped derivatives are combinations (modulo constants) of the kept
/// ones, so any refinement of the core refines them all; keeping only the
/// core is what makes the per-polynomial exit checks of the refinement
/// affordable.
///
/// A false promise is not detected on entry; it surfaces as a
/// [`Error::PromiseViolated`] when the exit check finds an atom whose
/// points disagree on `P`.
pub fn bias_to_factor(
    p: &Polynomial,
    delta: f64,
    beta: f64,
    mode: BiasMode,
    plan: &EstimatorPlan,
) -> Result<(Factor, MeasurabilityWitness)> {
    validate_unit("delta", delta)?;
    validate_unit("beta", beta)?;
    let d = p.degree();
    if mode == BiasMode::HighChar && p.field().order() <= d as u64 {
        return Err(Error::CharacteristicTooSmall { needed: d as u64, have: p.field().order() });
    }
    if p.is_constant() {
        let factor = Factor::empty(p.field(), p.nvars());
        let witness = confirm_measurable(p, &factor, plan, "a constant must compute itself")?;
        return Ok((factor, witness));
    }
    let sigma_d = default_sigma_d(d);
    let bv = bv_approximate(p, delta, sigma_d / 2.0, beta / 2.0, branch_seed(plan.seed, 0))?;
    let (derived, _) = drop_dependencies(&bv.derived_factor()?)?;
    let refine_plan = plan.with_seed(branch_seed(plan.seed, 1));
    let schedule = GammaSchedule::query_access_default();
    let factor = if derived.dim() == 0 {
        derived
    } else {
        match mode {
            BiasMode::HighChar => refine_uniform(&derived, schedule, beta / 2.0, &refine_plan)?.0,
            BiasMode::LowChar => {
                refine_strongly_unbiased(&derived, schedule, sigma_d / 2.0, beta / 2.0, &refine_plan)?.0
            }
        }
    };
    let witness =
        confirm_measurable(p, &factor, plan, "the bias promise likely does not hold")?;
    Ok((factor, witness))
}

/// Computes a polynomial with a large Gowers norm from a factor of degree
/// `d - 1` plus the Taylor remainder.
///
/// Under the promise `‖e_F(P)‖_{U^d} >= delta` for `d = deg P`, the
/// `d`-fold derivative has `bias(∂^d P) = ‖e_F(P)‖_{U^d}^{2^d} >=
/// delta^{2^d}`, so [`bias_to_factor`] yields a factor computing `∂^d P`.
/// Restricting that factor to the diagonal `y_1 = … = y_d = x` and adding
/// the remainder `R` of the Taylor split `P(x) = ∂^d P(x,…,x)/d! + R(x)`
/// gives a factor of degree `d - 1` computing `P` itself, which is then
/// refined to uniformity and certified.
pub fn gowers_to_factor(
    p: &Polynomial,
    delta: f64,
    beta: f64,
    plan: &EstimatorPlan,
) -> Result<(Factor, MeasurabilityWitness)> {
    validate_unit("delta", delta)?;
    validate_unit("beta", beta)?;
    let field = p.field();
    let n = p.nvars();
    let d = p.degree();
    if d < 2 {
        return Err(Error::DimensionMismatch(format!(
            "the Gowers pipeline needs |F| > deg P >= 2, got degree {d}"
        )));
    }
    if field.order() <= d as u64 {
        return Err(Error::CharacteristicTooSmall { needed: d as u64, have: field.order() });
    }
    let dp = derivative_polynomial(p, d)?;
    let bias_floor = delta.powi(1 << d.min(26)).max(f64::MIN_POSITIVE);
    let sub_plan = plan.with_seed(branch_seed(plan.seed, 0));
    let (ftilde, _) = bias_to_factor(dp.poly(), bias_floor, beta / 2.0, BiasMode::HighChar, &sub_plan)?;
    // Diagonal restriction y_j -> x of the factor for the derivative, plus
    // the Taylor remainder; constants and duplicates carry no atoms.
    let subs: Vec<Polynomial> =
        (0..dp.poly().nvars()).map(|v| Polynomial::var(field, n, v % n)).collect();
    let mut polys: Vec<Polynomial> = Vec::new();
    for q in ftilde.polys() {
        let r = q.substitute(&subs)?;
        if !r.is_constant() && !polys.contains(&r) {
            polys.push(r);
        }
    }
    let (_, tail) = taylor_split(p)?;
    if !tail.is_constant() && !polys.contains(&tail) {
        polys.push(tail);
    }
    let factor = if polys.is_empty() {
        Factor::empty(field, n)
    } else {
        let combined = Factor::new(field, n, polys)?;
        let refine_plan = plan.with_seed(branch_seed(plan.seed, 1));
        refine_uniform(&combined, GammaSchedule::query_access_default(), beta / 2.0, &refine_plan)?.0
    };
    let witness =
        confirm_measurable(p, &factor, plan, "the Gowers-norm promise likely does not hold")?;
    Ok((factor, witness))
}

/// One step of the worst-case to average-case reduction's combination scan:
/// estimate the agreement of `P` with `Q_alpha = <alpha, F>`.
fn try_alpha(
    p: &Polynomial,
    f: &Factor,
    coeffs: &[FieldElement],
    delta_prime: f64,
    beta: f64,
    plan: &EstimatorPlan,
    index: u64,
) -> Result<Option<(Vec<FieldElement>, Polynomial, f64)>> {
    let field = p.field();
    let q = combination(f, coeffs)?;
    let diff = p.sub(&q)?;
    let mut local = plan.with_seed(branch_seed(plan.seed, 8 + index));
    if local.mode == EstimatorMode::MonteCarlo && local.samples == 0 {
        let rho = (beta / (3.0 * f.size())).clamp(1e-12, 0.5);
        local.samples = hoeffding_samples(delta_prime / 4.0, rho);
    }
    let mu = derivative_distribution(&diff, field.zero(), &local)?;
    if mu[0] >= 1.0 / field.order() as f64 + 0.75 * delta_prime {
        Ok(Some((coeffs.to_vec(), q, mu[0])))
    } else {
        Ok(None)
    }
}

/// Worst-case to average-case reduction: from a function of the factor
/// that merely agrees with `P` on a `1/|F| + delta` fraction of points, to
/// a factor extending `F` that computes `P` everywhere.
///
/// The promise witness `lambda` fixes the atom space but is deliberately
/// not evaluated: the scan itself finds a combination `Q_alpha` of the
/// factor's polynomials agreeing with `P` on at least `1/|F| + (3/4)
/// delta'` of points, `delta' = delta / |F|^m`. Then `P - Q_alpha` is
/// biased, [`bias_to_factor`] produces a factor computing it, and the
/// output factor keeps the original polynomials so `Q_alpha` stays
/// computable from its atoms: `P = Gamma'(F') + Q_alpha`.
///
/// The zero vector is scanned last: it reduces `P` to computing `P`
/// outright and is only the degenerate resort (an approximating function
/// that is constant on atoms).
pub fn worst_to_average(
    p: &Polynomial,
    f: &Factor,
    lambda: &MeasurabilityWitness,
    delta: f64,
    beta: f64,
    plan: &EstimatorPlan,
) -> Result<(Factor, MeasurabilityWitness)> {
    validate_unit("delta", delta)?;
    validate_unit("beta", beta)?;
    let field = p.field();
    if f.field() != field || f.nvars() != p.nvars() {
        return Err(Error::DimensionMismatch(
            "polynomial and factor live on different spaces".into(),
        ));
    }
    if lambda.factor().field() != field || lambda.factor().dim() != f.dim() {
        return Err(Error::DimensionMismatch(
            "approximation witness does not live on the factor's atom space".into(),
        ));
    }
    let m = f.dim();
    let size = f.size();
    if size > plan.exact_budget {
        return Err(Error::BudgetExceeded {
            need: size,
            budget: plan.exact_budget,
            what: format!("combination scan over {m} factor polynomials"),
        });
    }
    let delta_prime = delta / size;
    let mut coeffs = vec![field.zero(); m];
    let mut raw = vec![0u64; m];
    let mut index = 0u64;
    let mut chosen: Option<(Vec<FieldElement>, Polynomial, f64)> = None;
    'scan: loop {
        let mut i = 0;
        loop {
            if i == m {
                break 'scan;
            }
            raw[i] += 1;
            if raw[i] < field.order() {
                coeffs[i] = field.elem(raw[i]);
                break;
            }
            raw[i] = 0;
            coeffs[i] = field.zero();
            i += 1;
        }
        index += 1;
        if let Some(hit) = try_alpha(p, f, &coeffs, delta_prime, beta, plan, index)? {
            chosen = Some(hit);
            break 'scan;
        }
    }
    if chosen.is_none() {
        let zero = vec![field.zero(); m];
        chosen = try_alpha(p, f, &zero, delta_prime, beta, plan, index + 1)?;
    }
    let Some((_alpha, q_alpha, _agreement)) = chosen else {
        return Err(Error::NoApproximation(format!(
            "no combination of the {m} factor polynomials agrees with the polynomial on a \
             1/|F| + {:.3e} fraction of points",
            0.75 * delta_prime
        )));
    };
    let diff = p.sub(&q_alpha)?;
    let mode = if field.order() > diff.degree() as u64 {
        BiasMode::HighChar
    } else {
        BiasMode::LowChar
    };
    let sub_plan = plan.with_seed(branch_seed(plan.seed, 1));
    let (fa, _) = bias_to_factor(&diff, (delta_prime / 2.0).min(1.0), beta / 3.0, mode, &sub_plan)?;
    let mut polys: Vec<Polynomial> = f.polys().to_vec();
    for q in fa.polys() {
        if !q.is_constant() && !polys.contains(q) {
            polys.push(q.clone());
        }
    }
    let out = if polys.is_empty() {
        Factor::empty(field, p.nvars())
    } else {
        drop_dependencies(&Factor::new(field, p.nvars(), polys)?)?.0
    };
    let witness =
        confirm_measurable(p, &out, plan, "the approximation promise likely does not hold")?;
    Ok((out, witness))
}
