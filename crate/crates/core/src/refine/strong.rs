//! Refinement to a strongly unbiased factor, the low-characteristic
//! workhorse.
//!
//! Strong unbiasedness extends the combination space to shifted
//! evaluations `P_i(x + y_I)` over subsets `I` of up to `Delta(P_i)` shift
//! directions, where the per-polynomial degree bound `Delta` starts at the
//! degree (making the factor `Delta`-bounded for free via the derivative
//! identity) and shrinks whenever a shifted combination turns out to be an
//! exact identity: the identity itself proves the top shifted evaluation
//! is a function of the remaining ones, so the pair leaves the combination
//! space instead of being reported as bias. Detected genuinely biased
//! combinations are handled as in the unbiased refinement, except the
//! replacement polynomials `D_{h_x + h_I} P_i` are read off the derivative
//! structure of the offender so that the new factor stays `Delta`-bounded.

use super::{
    audit_check, closeness_to_refinement, pair_poly, scan_strong, strong_pairs, validate_unit,
    Detection, RefinementReport, RegularityNotion, ITERATION_CAP,
};
use crate::algebra::{directional_derivative, poly, FieldElement, Polynomial};
use crate::algebra::linalg::MatFp;
use crate::bv::bv_approximate;
use crate::error::{Error, Result};
use crate::estimators::{branch_seed, EstimatorPlan};
use crate::factor::{Factor, GammaSchedule};

/// Refines `f` into a `Delta`-bounded factor every nonzero shifted
/// combination of which (over `r <= degree` shift blocks) has bias at most
/// `gamma(dim)`, `sigma`-close to refining `f`; the guarantee holds with
/// probability `1 - beta` under Monte Carlo plans. Works in any
/// characteristic. An input that already carries degree bounds keeps them;
/// otherwise every bound starts at the polynomial's degree.
pub fn refine_strongly_unbiased(
    f: &Factor,
    schedule: GammaSchedule,
    sigma: f64,
    beta: f64,
    plan: &EstimatorPlan,
) -> Result<(Factor, RefinementReport)> {
    validate_unit("sigma", sigma)?;
    validate_unit("beta", beta)?;
    let mut report = RefinementReport::new(RegularityNotion::Strong, f);
    let mut current = match f.delta() {
        Some(delta) => f.clone().with_delta(delta.to_vec())?,
        None => {
            let delta = f.polys().iter().map(|q| q.degree() as u16).collect();
            Factor::new(f.field(), f.nvars(), f.polys().to_vec())?.with_delta(delta)?
        }
    };
    let mut converged = false;
    for t in 0..ITERATION_CAP {
        // absorb exact identities among the shifted evaluations into Delta
        loop {
            let Some((poly_idx, mask)) = find_identity(&current)? else {
                break;
            };
            let next = decrement_delta(&current, poly_idx, mask)?;
            let action = identity_action(&current, poly_idx, mask, &next);
            report.push_step(None, action, &current, &next);
            current = next;
        }
        if current.degree() <= 1 {
            // independent linear shifted evaluations are affine and
            // nonconstant in the joint variables: strongly 0-unbiased
            converged = true;
            break;
        }
        let beta_level = beta * 0.25f64.powi(t as i32);
        let mut scan_plan = *plan;
        scan_plan.failure_prob = beta_level;
        scan_plan.seed = branch_seed(plan.seed, 2 * t as u64);
        let (det, _, _) = scan_strong(&current, current.degree(), schedule, &scan_plan)?;
        let Some(det) = det else {
            converged = true;
            break;
        };
        let next = replace_strong(
            &current,
            &det,
            schedule,
            sigma * 0.5f64.powi(t as i32 + 1),
            beta_level / 4.0,
            branch_seed(plan.seed, 2 * t as u64 + 1),
            &mut report,
        )?;
        current = next;
    }
    if !converged {
        return Err(Error::Diverged { iterations: ITERATION_CAP });
    }
    let verdict = audit_check(&current, RegularityNotion::Strong, schedule, plan)?;
    let audit_plan =
        EstimatorPlan { mode: crate::estimators::EstimatorMode::Exact, ..*plan };
    let closeness = closeness_to_refinement(f.polys(), &current, &audit_plan)?;
    report.output_dims = current.dim_vector();
    report.success = verdict.pass && closeness.max_disagreement <= sigma;
    report.final_verdict = Some(verdict);
    report.closeness = Some(closeness);
    Ok((current, report))
}

/// Searches the shifted evaluations at `r = degree` for an exact linear
/// dependency modulo constants. Returns the chosen pair: the one with the
/// largest shift set among nonzero coefficients (ties to the larger index,
/// then mask), whose `Delta` the identity lets us lower.
fn find_identity(f: &Factor) -> Result<Option<(usize, u32)>> {
    if f.dim() == 0 {
        return Ok(None);
    }
    let r = f.degree();
    let pairs = strong_pairs(f, r);
    let shifted: Vec<Polynomial> = pairs
        .iter()
        .map(|&(i, mask)| pair_poly(f, r, i, mask))
        .collect::<Result<_>>()?;
    // columns = pairs, rows = nonconstant monomial coordinates; a kernel
    // vector is a combination that is identically constant
    let stripped: Vec<Polynomial> = shifted
        .iter()
        .map(|q| {
            let c = q.constant_term();
            q.sub(&Polynomial::constant(q.field(), q.nvars(), c)).expect("same space")
        })
        .collect();
    let basis = poly::monomial_basis(&stripped);
    let cols: Vec<Vec<FieldElement>> = stripped.iter().map(|q| q.coeff_row(&basis)).collect();
    let rows: Vec<Vec<FieldElement>> = (0..basis.len())
        .map(|m| cols.iter().map(|c| c[m]).collect())
        .collect();
    let kernel = MatFp::from_rows(f.field(), rows).kernel_basis();
    let Some(vec) = kernel.into_iter().next() else {
        return Ok(None);
    };
    let pair = vec
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(idx, _)| pairs[idx])
        .max_by_key(|&(i, mask)| (mask.count_ones(), i, mask))
        .expect("kernel vectors are nonzero");
    Ok(Some(pair))
}

/// Sets `Delta(P_i) := |I| - 1`, discarding the polynomial when the bound
/// would fall below 1.
fn decrement_delta(f: &Factor, poly_idx: usize, mask: u32) -> Result<Factor> {
    let new_bound = mask.count_ones() as i64 - 1;
    let delta = f.delta().expect("strong refinement factors carry bounds");
    if new_bound < 1 {
        let mut polys = Vec::new();
        let mut bounds = Vec::new();
        for (j, q) in f.polys().iter().enumerate() {
            if j != poly_idx {
                polys.push(q.clone());
                bounds.push(delta[j]);
            }
        }
        return Factor::new(f.field(), f.nvars(), polys)?.with_delta(bounds);
    }
    let mut bounds = delta.to_vec();
    debug_assert!((new_bound as u16) < bounds[poly_idx]);
    bounds[poly_idx] = new_bound as u16;
    f.clone().with_delta(bounds)
}

fn identity_action(before: &Factor, poly_idx: usize, mask: u32, after: &Factor) -> String {
    if after.dim() < before.dim() {
        format!(
            "identity among shifted evaluations: discarded polynomial {poly_idx} \
             (shift set of size {})",
            mask.count_ones()
        )
    } else {
        format!(
            "identity among shifted evaluations: lowered the bound of polynomial {poly_idx} \
             to {}",
            mask.count_ones() - 1
        )
    }
}

/// One biased-combination replacement step: approximate the offender over
/// the joint variables, read off the direction `h_x + h_I` of each derived
/// polynomial for the chosen maximal pair, add those base-space derivatives
/// with fresh degree bounds, and lower the chosen polynomial's bound.
#[allow(clippy::too_many_arguments)]
fn replace_strong(
    f: &Factor,
    det: &Detection,
    schedule: GammaSchedule,
    sigma_step: f64,
    beta_step: f64,
    seed: u64,
    report: &mut RefinementReport,
) -> Result<Factor> {
    let field = f.field();
    let n = f.nvars();
    let pairs = det.witness.pairs.as_ref().expect("strong detections carry pair layouts");
    let r = det.witness.r.expect("strong detections carry the shift count");
    let delta_bv = schedule.gamma(field, f.dim()) / 2.0;
    let approx = bv_approximate(&det.combo, delta_bv, sigma_step, beta_step, seed)?;

    // the polynomial of maximum degree that appears (ties to the larger
    // index), then its maximal shift set among nonzero coefficients
    let participants: Vec<(usize, u32)> = det
        .witness
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(idx, _)| pairs[idx])
        .collect();
    let poly_idx = participants
        .iter()
        .map(|&(i, _)| i)
        .max_by_key(|&i| (f.polys()[i].degree(), i))
        .expect("offending combinations have a nonzero coefficient");
    let mask = participants
        .iter()
        .filter(|&&(i, _)| i == poly_idx)
        .map(|&(_, m)| m)
        .max_by_key(|&m| (m.count_ones(), m))
        .expect("the chosen polynomial appears");

    // each derived polynomial is sum_{i,I} c_{i,I} D_{h_x + h_I} P_i(x+y_I);
    // record D_{h_x + h_I} P_i for the chosen pair, per direction
    let mut fresh: Vec<Polynomial> = Vec::new();
    for h in approx.directions() {
        let mut v: Vec<FieldElement> = h[..n].to_vec();
        for j in 0..r {
            if mask >> j & 1 == 1 {
                for c in 0..n {
                    v[c] = field.add(v[c], h[n * (j + 1) + c]);
                }
            }
        }
        let derived = directional_derivative(&f.polys()[poly_idx], &v)?;
        if !derived.is_constant() && !fresh.contains(&derived) {
            fresh.push(derived);
        }
    }

    let delta = f.delta().expect("strong refinement factors carry bounds");
    let new_bound = mask.count_ones() as i64 - 1;
    let mut polys = Vec::new();
    let mut bounds = Vec::new();
    for (j, q) in f.polys().iter().enumerate() {
        if j == poly_idx && new_bound < 1 {
            continue;
        }
        polys.push(q.clone());
        bounds.push(if j == poly_idx { new_bound as u16 } else { delta[j] });
    }
    for q in &fresh {
        if !polys.contains(q) {
            polys.push(q.clone());
            bounds.push(q.degree() as u16);
        }
    }
    let next = Factor::new(field, n, polys)?.with_delta(bounds)?;
    let action = if new_bound < 1 {
        format!(
            "biased shifted combination at r={r}: discarded polynomial {poly_idx} and added \
             {} derivative polynomial(s)",
            fresh.len()
        )
    } else {
        format!(
            "biased shifted combination at r={r}: lowered the bound of polynomial {poly_idx} \
             to {new_bound} and added {} derivative polynomial(s)",
            fresh.len()
        )
    };
    report.push_step(Some(det.witness.clone()), action, f, &next);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PrimeField;
    use crate::refine::{check_regularity, scan_strong, RegularityVerdict};

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    /// gamma(m) = 2^(-m-2) over F_2.
    fn schedule_strong() -> GammaSchedule {
        GammaSchedule::new(0.25, 1.0).unwrap()
    }

    /// Verdict for the exhaustive strong check up to a caller-chosen `r`,
    /// independent of the factor's own degree.
    fn check_up_to(f: &Factor, r_max: usize, schedule: GammaSchedule) -> RegularityVerdict {
        let plan = EstimatorPlan::exact();
        let (det, max_stat, exact) = scan_strong(f, r_max, schedule, &plan).unwrap();
        let gamma_m = schedule.gamma(f.field(), f.dim());
        assert!(exact);
        RegularityVerdict {
            notion: RegularityNotion::Strong,
            pass: det.is_none(),
            measured: det.as_ref().map(|d| d.witness.statistic).unwrap_or(max_stat),
            witness: det.map(|d| d.witness),
            threshold: 0.75 * gamma_m,
            exact,
            structural: false,
        }
    }

    #[test]
    fn single_linear_polynomial_is_strongly_zero_unbiased() {
        let f2 = fp(2);
        let f = Factor::new(f2, 1, vec![Polynomial::var(f2, 1, 0)]).unwrap();
        let (out, report) = refine_strongly_unbiased(
            &f,
            schedule_strong(),
            0.1,
            0.1,
            &EstimatorPlan::exact(),
        )
        .unwrap();
        assert!(report.success);
        assert!(report.steps.is_empty());
        assert_eq!(out.dim(), 1);
        assert_eq!(out.delta(), Some(&[1u16][..]));
        let verdict = report.final_verdict.unwrap();
        assert!(verdict.pass && verdict.structural);
        // the full second-derivative identity needs |I| = 2 > Delta and is
        // absorbed, never reported as a bias witness, even at r = 2
        let v2 = check_up_to(&out, 2, schedule_strong());
        assert!(v2.pass);
        assert_eq!(v2.measured, 0.0);
    }

    #[test]
    fn product_over_f2_refines_to_degree_one() {
        let f2 = fp(2);
        let prod = Polynomial::from_terms(f2, 2, &[(&[1, 1], 1)]).unwrap();
        let f = Factor::new(f2, 2, vec![prod]).unwrap();
        let plan = EstimatorPlan::exact().with_seed(5);
        let (out, report) =
            refine_strongly_unbiased(&f, schedule_strong(), 0.1, 0.1, &plan).unwrap();
        assert!(report.success);
        assert_eq!(out.degree(), 1);
        assert!(out.delta().unwrap().iter().all(|&d| d == 1));
        // the offender is the product itself, at r = 0 with bias 1/2
        let first = report
            .steps
            .iter()
            .find_map(|s| s.detected.as_ref())
            .expect("a biased combination was detected");
        assert_eq!(first.r, Some(0));
        assert!((first.statistic - 0.5).abs() < 1e-12);
        // exhaustive strong check passes for every r <= 2
        for r_max in 0..=2 {
            assert!(check_up_to(&out, r_max, schedule_strong()).pass, "failed at r={r_max}");
        }
        // the linear output determines the product exactly
        let closeness = report.closeness.unwrap();
        assert!(closeness.exact);
        assert_eq!(closeness.max_disagreement, 0.0);
    }

    #[test]
    fn dependent_linear_inputs_are_eliminated_as_identities() {
        let f2 = fp(2);
        let x1 = Polynomial::var(f2, 2, 0);
        let x2 = Polynomial::var(f2, 2, 1);
        let sum_shift =
            Polynomial::from_terms(f2, 2, &[(&[1, 0], 1), (&[0, 1], 1), (&[0, 0], 1)]).unwrap();
        let f = Factor::new(f2, 2, vec![x1, x2, sum_shift]).unwrap();
        let (out, report) = refine_strongly_unbiased(
            &f,
            schedule_strong(),
            0.1,
            0.1,
            &EstimatorPlan::exact(),
        )
        .unwrap();
        assert!(report.success);
        assert_eq!(out.dim(), 2);
        assert_eq!(report.steps.len(), 1);
        assert!(report.steps[0].action.contains("identity"));
        assert_eq!(report.closeness.unwrap().max_disagreement, 0.0);
    }

    #[test]
    fn provided_degree_bounds_are_respected() {
        let f3 = fp(3);
        let quad = Polynomial::from_terms(f3, 2, &[(&[1, 1], 1)]).unwrap();
        let f = Factor::new(f3, 2, vec![quad]).unwrap().with_delta(vec![2]).unwrap();
        let plan = EstimatorPlan::exact().with_seed(9);
        let (out, report) =
            refine_strongly_unbiased(&f, schedule_strong(), 0.2, 0.2, &plan).unwrap();
        assert!(report.success);
        let verdict =
            check_regularity(&out, RegularityNotion::Strong, schedule_strong(), &plan).unwrap();
        assert!(verdict.pass);
    }

    #[test]
    fn output_is_deterministic_for_a_fixed_seed() {
        let f2 = fp(2);
        let prod = Polynomial::from_terms(f2, 2, &[(&[1, 1], 1)]).unwrap();
        let f = Factor::new(f2, 2, vec![prod]).unwrap();
        let plan = EstimatorPlan { seed: 123, ..EstimatorPlan::exact() };
        let (a, _) = refine_strongly_unbiased(&f, schedule_strong(), 0.1, 0.1, &plan).unwrap();
        let (b, _) = refine_strongly_unbiased(&f, schedule_strong(), 0.1, 0.1, &plan).unwrap();
        assert_eq!(a.polys(), b.polys());
        assert_eq!(a.delta(), b.delta());
    }
}
