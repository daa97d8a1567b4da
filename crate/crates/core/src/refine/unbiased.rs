//! Refinement to a `gamma`-unbiased factor, valid in any characteristic.
//!
//! The loop removes linear dependencies (modulo constants), scans for a
//! combination whose bias exceeds `3/4 * gamma(dim)`, approximates the
//! offender by derivative polynomials of lower degree and swaps them in
//! for the highest-degree participant. Each swap trades closeness for
//! degree: the output only *almost* refines the input, within `sigma`.
//! Degree-1 factors stop the induction — independent nonconstant affine
//! forms have bias exactly zero.

use super::{
    audit_check, closeness_to_refinement, drop_dependencies, replace_poly, replacement_target,
    scan_combinations, validate_unit, RefinementReport, RegularityNotion, ITERATION_CAP,
};
use crate::bv::bv_approximate;
use crate::error::{Error, Result};
use crate::estimators::{branch_seed, EstimatorPlan};
use crate::factor::{Factor, GammaSchedule};

/// Refines `f` into a factor every nonzero combination of which has bias
/// at most `gamma(dim)`, while staying `sigma`-close to refining `f`; the
/// guarantee holds with probability `1 - rho` under Monte Carlo plans and
/// unconditionally under exact plans. The closeness budget halves at each
/// step and the failure budget quarters, so the totals telescope below
/// `sigma` and `rho` regardless of how many steps the induction takes.
pub fn refine_unbiased(
    f: &Factor,
    schedule: GammaSchedule,
    sigma: f64,
    rho: f64,
    plan: &EstimatorPlan,
) -> Result<(Factor, RefinementReport)> {
    validate_unit("sigma", sigma)?;
    validate_unit("rho", rho)?;
    let mut report = RefinementReport::new(RegularityNotion::Unbiased, f);
    // degree bounds are a strong-mode concern; run on the bare polynomials
    let mut current = Factor::new(f.field(), f.nvars(), f.polys().to_vec())?;
    let mut converged = false;
    for t in 0..ITERATION_CAP {
        let (slim, dropped) = drop_dependencies(&current)?;
        if !dropped.is_empty() {
            let action = format!(
                "removed {} polynomial(s) expressible in the others up to a constant",
                dropped.len()
            );
            report.push_step(None, action, &current, &slim);
            current = slim;
        }
        if current.degree() <= 1 {
            // independent nonconstant affine forms are 0-unbiased
            converged = true;
            break;
        }
        let mut scan_plan = *plan;
        scan_plan.failure_prob = plan.failure_prob * 0.25f64.powi(t as i32);
        scan_plan.seed = branch_seed(plan.seed, 2 * t as u64);
        let (det, _, _) =
            scan_combinations(&current, RegularityNotion::Unbiased, schedule, &scan_plan)?;
        let Some(det) = det else {
            converged = true;
            break;
        };
        let delta = schedule.gamma(current.field(), current.dim()) / 2.0;
        let sigma_step = sigma * 0.5f64.powi(t as i32 + 1);
        let beta_step = rho * 0.25f64.powi(t as i32 + 1);
        let approx = bv_approximate(
            &det.combo,
            delta,
            sigma_step,
            beta_step,
            branch_seed(plan.seed, 2 * t as u64 + 1),
        )?;
        let replacement = approx.derived_factor()?;
        let target = replacement_target(&current, &det.witness.coeffs);
        let next = replace_poly(&current, target, replacement.polys())?;
        let action = format!(
            "replaced polynomial {} (degree {}) with {} derivative polynomial(s) of lower degree \
             ({} directions)",
            target,
            current.polys()[target].degree(),
            replacement.dim(),
            approx.c(),
        );
        report.push_step(Some(det.witness), action, &current, &next);
        current = next;
    }
    if !converged {
        return Err(Error::Diverged { iterations: ITERATION_CAP });
    }
    let verdict = audit_check(&current, RegularityNotion::Unbiased, schedule, plan)?;
    let audit_plan = EstimatorPlan { mode: crate::estimators::EstimatorMode::Exact, ..*plan };
    let closeness = closeness_to_refinement(f.polys(), &current, &audit_plan)?;
    report.output_dims = current.dim_vector();
    report.success = verdict.pass && closeness.max_disagreement <= sigma;
    report.final_verdict = Some(verdict);
    report.closeness = Some(closeness);
    Ok((current, report))
}
