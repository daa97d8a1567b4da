//! Refinement to a `gamma`-uniform factor, for fields larger than the
//! factor's degree.
//!
//! Uniformity bounds the `U^k` norm of every combination by its degree's
//! `gamma(dim)`, which is stronger than mere unbiasedness and buys exact
//! refinement: a detected combination `Q` of degree `k` has
//! `bias(DQ) = ||e(Q)||_{U^k}^{2^k}` for its `k`-fold derivative `DQ`, so
//! `DQ` can be approximated by derivatives, the approximating family
//! recursively refined to a uniform factor, and — once an exact
//! measurability check confirms the factor computes `DQ` — the Taylor
//! identity `Q = DQ(x,..,x)/k! + R` replaces the top participant of `Q`
//! by diagonal restrictions and `R`, with nothing lost. Polynomials are
//! split into homogeneous parts on entry, which the induction assumes.

use super::{
    audit_check, closeness_to_refinement, default_sigma_d, drop_dependencies, replace_poly,
    replacement_target, scan_combinations, validate_unit, RefinementReport, RegularityNotion,
    ITERATION_CAP,
};
use crate::algebra::{derivative_polynomial, taylor_split, Polynomial};
use crate::bv::bv_approximate;
use crate::error::{Error, Result};
use crate::estimators::{branch_seed, EstimatorMode, EstimatorPlan};
use crate::factor::{measurability_check, Factor, GammaSchedule, MeasurabilityOutcome};

/// Refines `f` into an exact refinement every nonzero combination of which
/// has `U^k` norm at most `gamma(dim)` (with `k` the combination's degree),
/// with probability `1 - rho` under Monte Carlo plans. Requires the field
/// order to exceed the factor's degree.
pub fn refine_uniform(
    f: &Factor,
    schedule: GammaSchedule,
    rho: f64,
    plan: &EstimatorPlan,
) -> Result<(Factor, RefinementReport)> {
    validate_unit("rho", rho)?;
    let d = f.degree();
    if f.field().order() <= d as u64 {
        return Err(Error::CharacteristicTooSmall { needed: d as u64, have: f.field().order() });
    }
    let (out, mut report) = refine_at_depth(f, schedule, rho, plan, 0)?;
    // the output must compute every input polynomial exactly, not just the
    // homogeneous pieces the induction worked on
    let audit_plan = EstimatorPlan { mode: EstimatorMode::Exact, ..*plan };
    for (i, q) in f.polys().iter().enumerate() {
        match measurability_check(q, &out, &audit_plan)? {
            MeasurabilityOutcome::Measurable(_) => {}
            MeasurabilityOutcome::Counterexample { x, y, .. } => {
                return Err(Error::RefinementBroken(format!(
                    "input polynomial {i} takes different values at two points of one output \
                     atom ({x:?} vs {y:?}); closeness constants are too lax for this degree"
                )));
            }
        }
    }
    let closeness = closeness_to_refinement(f.polys(), &out, &audit_plan)?;
    debug_assert!(!closeness.exact || closeness.max_disagreement == 0.0);
    report.closeness = Some(closeness);
    Ok((out, report))
}

fn refine_at_depth(
    f: &Factor,
    schedule: GammaSchedule,
    rho: f64,
    plan: &EstimatorPlan,
    depth: usize,
) -> Result<(Factor, RefinementReport)> {
    debug_assert!(depth <= 64, "recursion outlived the degree bound");
    let field = f.field();
    let n = f.nvars();
    let mut report = RefinementReport::new(RegularityNotion::Uniform, f);

    // the induction assumes homogeneous polynomials: split every input into
    // its homogeneous parts, dropping constants
    let mut homog: Vec<Polynomial> = Vec::new();
    for q in f.polys() {
        for (deg, part) in q.homogeneous_parts() {
            if deg >= 1 && !homog.contains(&part) {
                homog.push(part);
            }
        }
    }
    let mut current = Factor::new(field, n, homog)?;
    if current.polys() != f.polys() {
        report.push_preparation(
            format!("split {} polynomial(s) into {} homogeneous part(s)", f.dim(), current.dim()),
            f,
            &current,
        );
    }

    let mut converged = false;
    for t in 0..ITERATION_CAP {
        let (slim, dropped) = drop_dependencies(&current)?;
        if !dropped.is_empty() {
            let action = format!("removed {} linearly dependent polynomial(s)", dropped.len());
            report.push_step(None, action, &current, &slim);
            current = slim;
        }
        if current.degree() <= 1 {
            // an independent homogeneous linear factor is 0-uniform
            converged = true;
            break;
        }
        let rho_level = rho * 0.25f64.powi(t as i32);
        let mut scan_plan = *plan;
        scan_plan.failure_prob = rho_level;
        scan_plan.seed = branch_seed(plan.seed, 3 * t as u64);
        let (det, _, _) =
            scan_combinations(&current, RegularityNotion::Uniform, schedule, &scan_plan)?;
        let Some(det) = det else {
            converged = true;
            break;
        };
        let k = det.witness.degree;
        debug_assert!(k >= 2, "independent homogeneous combinations of lower degree cannot offend");

        // bias(DQ) = U^k(Q)^{2^k} >= gamma(m)^{2^k} / 2 for the detected Q
        let ext = derivative_polynomial(&det.combo, k)?;
        debug_assert!(!ext.has_x_block());
        let dq = ext.poly().clone();
        let gamma_m = schedule.gamma(field, current.dim());
        let delta = (0.5 * gamma_m.powi(1 << k.min(30) as i32)).max(f64::MIN_POSITIVE);
        let sigma_tilde = default_sigma_d(k);
        let approx = bv_approximate(
            &dq,
            delta,
            sigma_tilde,
            rho_level / 4.0,
            branch_seed(plan.seed, 3 * t as u64 + 1),
        )?;
        let derived = approx.derived_factor()?;

        // refine the approximating family itself to a uniform factor, then
        // insist — exactly — that it computes DQ, replacing the assumption
        // that sufficiently rapid closeness constants exist
        let mut rec_plan = *plan;
        rec_plan.seed = branch_seed(plan.seed, 3 * t as u64 + 2);
        let (ftilde, sub) =
            refine_at_depth(&derived, schedule, rho_level / 4.0, &rec_plan, depth + 1)?;
        let audit_plan = EstimatorPlan { mode: EstimatorMode::Exact, ..*plan };
        match measurability_check(&dq, &ftilde, &audit_plan)? {
            MeasurabilityOutcome::Measurable(_) => {}
            MeasurabilityOutcome::Counterexample { .. } => {
                return Err(Error::RefinementBroken(format!(
                    "the {k}-fold derivative of the detected combination is not measurable in \
                     its refined approximating factor; closeness constants are too lax"
                )));
            }
        }

        // Q = DQ(x,..,x)/k! + R: swap the top participant for the diagonal
        // restrictions of the refined factor plus R, split homogeneous
        let (_, r_poly) = taylor_split(&det.combo)?;
        let diag_subs: Vec<Polynomial> =
            (0..dq.nvars()).map(|v| Polynomial::var(field, n, v % n)).collect();
        let mut with: Vec<Polynomial> = Vec::new();
        for q in ftilde.polys() {
            for (deg, part) in q.substitute(&diag_subs)?.homogeneous_parts() {
                if deg >= 1 {
                    with.push(part);
                }
            }
        }
        for (deg, part) in r_poly.homogeneous_parts() {
            if deg >= 1 {
                with.push(part);
            }
        }
        let target = replacement_target(&current, &det.witness.coeffs);
        let next = replace_poly(&current, target, &with)?;
        let action = format!(
            "replaced polynomial {} (degree {k}) via Taylor split: {} diagonal restriction(s) \
             of a recursively refined factor (dimension {}, {} step(s)) plus the remainder",
            target,
            ftilde.dim(),
            ftilde.dim(),
            sub.steps.len(),
        );
        report.push_step(Some(det.witness), action, &current, &next);
        current = next;
    }
    if !converged {
        return Err(Error::Diverged { iterations: ITERATION_CAP });
    }
    let verdict = audit_check(&current, RegularityNotion::Uniform, schedule, plan)?;
    report.output_dims = current.dim_vector();
    report.success = verdict.pass;
    report.final_verdict = Some(verdict);
    Ok((current, report))
}
