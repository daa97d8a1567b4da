//! Regularity notions and their algorithmic refinements.
//!
//! Three notions, in increasing strength: every nonzero combination of the
//! factor's polynomials has small bias (*unbiased*), small `U^k` norm for
//! `k` its degree (*uniform*), and — extending combinations to shifted
//! evaluations `P_i(x + y_I)` under per-polynomial degree bounds `Delta` —
//! small bias again (*strongly unbiased*, the low-characteristic workhorse).
//!
//! [`check_regularity`] certifies or falsifies each notion against a
//! threshold schedule; the `refine_*` functions repeatedly detect an
//! offending combination, approximate it by lower-degree derivatives, and
//! replace a polynomial until the check passes. Linear factors that are
//! independent modulo constants are certified structurally — a nonconstant
//! affine form has bias exactly zero — so refinement outputs never depend
//! on enumerating spaces that outgrew the point budget.

mod strong;
mod unbiased;
mod uniform;

pub use strong::refine_strongly_unbiased;
pub use unbiased::refine_unbiased;
pub use uniform::refine_uniform;

use crate::algebra::{linalg::independent_subset, poly, FieldElement, Polynomial};
use crate::error::{Error, Result};
use crate::estimators::{
    branch_seed, estimate_bias, estimate_gowers, hoeffding_samples, EstimatorMode, EstimatorPlan,
};
use crate::factor::{Atom, Factor, GammaSchedule};
use serde::Serialize;
use std::collections::BTreeMap;

/// Hard cap on refinement steps; desk instances converge in a handful.
pub const ITERATION_CAP: usize = 64;

/// The closeness constant `sigma_d = 2^(-4(d+1))` used when approximating a
/// detected degree-`d` combination before a recursive refinement.
pub fn default_sigma_d(d: usize) -> f64 {
    (2.0f64).powi(-4 * (d as i32 + 1))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum RegularityNotion {
    Unbiased,
    Uniform,
    Strong,
}

/// A combination that exceeded its threshold: the coefficients (per
/// polynomial, or per `(i, I)` pair in strong mode with `pairs` giving the
/// layout), the combination's degree and the measured statistic.
#[derive(Clone, Debug, Serialize)]
pub struct OffendingCombination {
    pub coeffs: Vec<FieldElement>,
    pub pairs: Option<Vec<(usize, u32)>>,
    pub r: Option<usize>,
    pub degree: usize,
    pub statistic: f64,
}

/// Outcome of a regularity check.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityVerdict {
    pub notion: RegularityNotion,
    pub pass: bool,
    pub witness: Option<OffendingCombination>,
    /// Statistic of the witness, or the maximum observed when passing.
    pub measured: f64,
    pub threshold: f64,
    /// Whether every statistic was computed exactly.
    pub exact: bool,
    /// Whether the pass is certified structurally (independent linear
    /// factor) rather than by enumeration.
    pub structural: bool,
}

/// One refinement step: what was detected and what was done, with the
/// dimension vector and the termination key on both sides.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementStep {
    pub detected: Option<OffendingCombination>,
    pub action: String,
    pub dim_before: Vec<usize>,
    pub dim_after: Vec<usize>,
    pub key_before: Vec<u64>,
    pub key_after: Vec<u64>,
}

/// Exact-or-sampled measurement of how close an output factor is to
/// refining a set of original polynomials: for each original, the smallest
/// disagreement achievable by any function of the output's atoms.
#[derive(Clone, Debug, Serialize)]
pub struct ClosenessCertificate {
    pub per_poly: Vec<f64>,
    pub max_disagreement: f64,
    pub exact: bool,
    pub points_checked: u64,
}

/// Audit trail of a refinement run.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub notion: RegularityNotion,
    pub input_dims: Vec<usize>,
    pub output_dims: Vec<usize>,
    pub steps: Vec<RefinementStep>,
    pub closeness: Option<ClosenessCertificate>,
    pub final_verdict: Option<RegularityVerdict>,
    pub success: bool,
}

impl RefinementReport {
    pub(crate) fn new(notion: RegularityNotion, input: &Factor) -> RefinementReport {
        RefinementReport {
            notion,
            input_dims: input.dim_vector(),
            output_dims: Vec::new(),
            steps: Vec::new(),
            closeness: None,
            final_verdict: None,
            success: false,
        }
    }

    pub(crate) fn push_step(
        &mut self,
        detected: Option<OffendingCombination>,
        action: String,
        before: &Factor,
        after: &Factor,
    ) {
        let step = RefinementStep {
            detected,
            action,
            dim_before: before.dim_vector(),
            dim_after: after.dim_vector(),
            key_before: termination_key(before),
            key_after: termination_key(after),
        };
        debug_assert!(
            revlex_lt(&step.key_after, &step.key_before),
            "refinement step failed to decrease the termination key"
        );
        self.steps.push(step);
    }

    /// Records a preparatory transformation (homogenization) that is not an
    /// induction step and therefore not bound by the decreasing-key rule.
    pub(crate) fn push_preparation(&mut self, action: String, before: &Factor, after: &Factor) {
        self.steps.push(RefinementStep {
            detected: None,
            action,
            dim_before: before.dim_vector(),
            dim_after: after.dim_vector(),
            key_before: termination_key(before),
            key_after: termination_key(after),
        });
    }
}

/// Strict reverse-lexicographic comparison of degree-indexed count vectors:
/// compares the highest degree first, shorter vectors padded with zeros.
pub fn revlex_lt(a: &[u64], b: &[u64]) -> bool {
    let len = a.len().max(b.len());
    for i in (0..len).rev() {
        let av = a.get(i).copied().unwrap_or(0);
        let bv = b.get(i).copied().unwrap_or(0);
        if av != bv {
            return av < bv;
        }
    }
    false
}

/// Per-degree sum of degree bounds (`Delta = deg` when unset). Every
/// refinement action — replacing a polynomial by lower-degree ones,
/// dropping a dependency, or decrementing a `Delta` — strictly decreases
/// this vector reverse-lexicographically, which is the termination measure.
pub fn termination_key(f: &Factor) -> Vec<u64> {
    let mut key = vec![0u64; f.degree()];
    for (i, q) in f.polys().iter().enumerate() {
        let delta = f.delta().map(|d| d[i] as u64).unwrap_or(q.degree() as u64);
        key[q.degree() - 1] += delta;
    }
    key
}

/// Indices of a maximal subset of the polynomials that is linearly
/// independent modulo constants (earlier polynomials preferred), plus the
/// dropped indices. A dropped polynomial is a combination of the kept ones
/// up to an additive constant, hence exactly measurable in them.
pub(crate) fn independent_mod_constants(polys: &[Polynomial]) -> Result<(Vec<usize>, Vec<usize>)> {
    if polys.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let field = polys[0].field();
    let stripped: Vec<Polynomial> = polys
        .iter()
        .map(|q| {
            let c = q.constant_term();
            q.sub(&Polynomial::constant(q.field(), q.nvars(), c)).expect("same space")
        })
        .collect();
    let basis = poly::monomial_basis(&stripped);
    let rows: Vec<Vec<FieldElement>> = stripped.iter().map(|q| q.coeff_row(&basis)).collect();
    independent_subset(field, &rows)
}

/// Removes polynomials dependent (mod constants) on earlier ones. Returns
/// the slimmed factor and the dropped indices; `delta` entries follow their
/// polynomials.
pub(crate) fn drop_dependencies(f: &Factor) -> Result<(Factor, Vec<usize>)> {
    let (kept, dropped) = independent_mod_constants(f.polys())?;
    if dropped.is_empty() {
        return Ok((f.clone(), dropped));
    }
    let polys: Vec<Polynomial> = kept.iter().map(|&i| f.polys()[i].clone()).collect();
    let mut out = Factor::new(f.field(), f.nvars(), polys)?;
    if let Some(delta) = f.delta() {
        out = out.with_delta(kept.iter().map(|&i| delta[i]).collect())?;
    }
    Ok((out, dropped))
}

/// `sum_i coeffs[i] * P_i`.
pub(crate) fn combination(f: &Factor, coeffs: &[FieldElement]) -> Result<Polynomial> {
    let mut acc = Polynomial::zero(f.field(), f.nvars());
    for (q, &c) in f.polys().iter().zip(coeffs) {
        if !c.is_zero() {
            acc = acc.add(&q.scale(c))?;
        }
    }
    Ok(acc)
}

/// The shifted-combination pairs `(i, I)` of strong mode at level `r`:
/// every polynomial index with every subset mask of `[r]` of size at most
/// `Delta(P_i)`, in `(i, mask)` order.
pub(crate) fn strong_pairs(f: &Factor, r: usize) -> Vec<(usize, u32)> {
    let delta = f.delta().expect("strong pairs need a delta-bounded factor");
    let mut pairs = Vec::new();
    for i in 0..f.dim() {
        for mask in 0u32..(1 << r) {
            if mask.count_ones() <= delta[i] as u32 {
                pairs.push((i, mask));
            }
        }
    }
    pairs
}

/// `P_i(x + y_I)` as a polynomial over `F^{n(r+1)}` (block 0 is `x`).
pub(crate) fn pair_poly(f: &Factor, r: usize, i: usize, mask: u32) -> Result<Polynomial> {
    let field = f.field();
    let omega: Vec<FieldElement> =
        (0..r).map(|j| if mask >> j & 1 == 1 { field.one() } else { field.zero() }).collect();
    f.polys()[i].shift_into_blocks(r, &omega)
}

/// A detected offending combination together with the combination
/// polynomial itself (over the joint space in strong mode).
#[derive(Clone, Debug)]
pub(crate) struct Detection {
    pub combo: Polynomial,
    pub witness: OffendingCombination,
}

/// Index of the polynomial of highest degree that appears in the
/// combination (nonzero coefficient); ties broken towards the largest
/// index for determinism.
pub(crate) fn replacement_target(f: &Factor, coeffs: &[FieldElement]) -> usize {
    let mut best: Option<(usize, usize)> = None;
    for (i, c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let d = f.polys()[i].degree();
        if best.map_or(true, |(bd, bi)| d > bd || (d == bd && i > bi)) {
            best = Some((d, i));
        }
    }
    best.expect("an offending combination has a nonzero coefficient").1
}

/// The factor with polynomial `idx` removed and the given polynomials
/// appended (constants skipped, exact duplicates collapsed). Any surviving
/// linear dependency is removed by the next iteration's collapse.
pub(crate) fn replace_poly(f: &Factor, idx: usize, with: &[Polynomial]) -> Result<Factor> {
    let mut polys: Vec<Polynomial> = Vec::with_capacity(f.dim() + with.len());
    for (i, q) in f.polys().iter().enumerate() {
        if i != idx {
            polys.push(q.clone());
        }
    }
    for q in with {
        if !q.is_constant() && !polys.contains(q) {
            polys.push(q.clone());
        }
    }
    Factor::new(f.field(), f.nvars(), polys)
}

/// Post-refinement verification: always re-checks in exact mode, falling
/// back to the run's own plan only when the exact statistics are over
/// budget (possible for Monte Carlo runs on large supports).
pub(crate) fn audit_check(
    f: &Factor,
    notion: RegularityNotion,
    schedule: GammaSchedule,
    plan: &EstimatorPlan,
) -> Result<RegularityVerdict> {
    let exact = EstimatorPlan { mode: EstimatorMode::Exact, ..*plan };
    match check_regularity(f, notion, schedule, &exact) {
        Err(Error::BudgetExceeded { .. }) if plan.mode == EstimatorMode::MonteCarlo => {
            check_regularity(f, notion, schedule, plan)
        }
        other => other,
    }
}

pub(crate) fn validate_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::PromiseViolated(format!("{name} must lie in (0, 1], got {v}")));
    }
    Ok(())
}

/// The statistic a notion assigns to a combination: bias magnitude for
/// unbiased/strong, the `2^k`-power mean of `U^k` (with `k` the
/// combination's degree) for uniform. Degree-0 combinations fall back to
/// bias, which is 1 for a nonzero constant — dependent factors fail.
pub(crate) fn combo_statistic(
    q: &Polynomial,
    notion: RegularityNotion,
    plan: &EstimatorPlan,
) -> Result<(f64, usize)> {
    let deg = if q.is_zero() { 0 } else { q.degree() };
    match notion {
        RegularityNotion::Unbiased | RegularityNotion::Strong => {
            Ok((estimate_bias(q, plan)?.magnitude, deg))
        }
        RegularityNotion::Uniform => {
            if deg == 0 {
                Ok((estimate_bias(q, plan)?.magnitude, 0))
            } else {
                Ok((estimate_gowers(q, deg, plan)?.power_mean, deg))
            }
        }
    }
}

/// Threshold the statistic is compared against: `3/4 * gamma(m)` raised to
/// `2^k` in uniform mode (where the statistic is the `2^k`-power mean).
fn statistic_threshold(notion: RegularityNotion, gamma_m: f64, deg: usize) -> f64 {
    match notion {
        RegularityNotion::Unbiased | RegularityNotion::Strong => 0.75 * gamma_m,
        RegularityNotion::Uniform => 0.75 * gamma_m.powi(1 << deg.min(30) as i32),
    }
}

fn mc_plan_for_scan(
    plan: &EstimatorPlan,
    gamma_m: f64,
    combos: f64,
    index: u64,
) -> EstimatorPlan {
    let mut p = *plan;
    if p.mode == EstimatorMode::MonteCarlo && p.samples == 0 {
        let rho_prime = (p.failure_prob / (4.0 * combos)).max(1e-12);
        p.samples = hoeffding_samples(gamma_m / 4.0, rho_prime);
    }
    p.seed = branch_seed(plan.seed, index);
    p
}

/// Scans all nonzero coefficient vectors over the factor's polynomials and
/// returns the first combination whose statistic exceeds the threshold,
/// along with the maximum statistic seen and whether estimates were exact.
///
/// The enumeration budget binds lazily: an offender found early is returned
/// no matter how large the full combination space is, and `BudgetExceeded`
/// is raised only once the scan would have to walk past `plan.exact_budget`
/// combinations to certify a pass.
pub(crate) fn scan_combinations(
    f: &Factor,
    notion: RegularityNotion,
    schedule: GammaSchedule,
    plan: &EstimatorPlan,
) -> Result<(Option<Detection>, f64, bool)> {
    let field = f.field();
    let m = f.dim();
    let gamma_m = schedule.gamma(field, m);
    let combos = (field.order() as f64).powi(m as i32);
    let exact = plan.mode == EstimatorMode::Exact;
    let mut max_stat = 0.0f64;
    let mut coeffs = vec![field.zero(); m];
    let mut raw = vec![0u64; m];
    let mut index = 0u64;
    loop {
        // advance odometer; the all-zero vector is skipped by advancing first
        let mut i = 0;
        loop {
            if i == m {
                return Ok((None, max_stat, exact));
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
        if index as f64 > plan.exact_budget {
            return Err(Error::BudgetExceeded {
                need: combos,
                budget: plan.exact_budget,
                what: format!("{} combination scan over {m} polynomials", field.order()),
            });
        }
        let q = combination(f, &coeffs)?;
        let local = mc_plan_for_scan(plan, gamma_m, combos, index);
        let (stat, deg) = combo_statistic(&q, notion, &local)?;
        max_stat = max_stat.max(stat);
        if stat > statistic_threshold(notion, gamma_m, deg) {
            let witness = OffendingCombination {
                coeffs: coeffs.clone(),
                pairs: None,
                r: None,
                degree: deg,
                statistic: stat,
            };
            return Ok((Some(Detection { combo: q, witness }), max_stat, exact));
        }
    }
}

/// Strong-mode scan: for each `r = 0..=r_max`, all nonzero coefficient
/// vectors over the pairs `(i, I)` with `|I| <= Delta(P_i)`, statistic =
/// bias of `sum c_{i,I} P_i(x + y_I)` over `F^{n(r+1)}`. The enumeration
/// budget binds lazily, as in [`scan_combinations`]: the total number of
/// combinations walked across all `r` levels may not exceed it.
pub(crate) fn scan_strong(
    f: &Factor,
    r_max: usize,
    schedule: GammaSchedule,
    plan: &EstimatorPlan,
) -> Result<(Option<Detection>, f64, bool)> {
    let field = f.field();
    let m = f.dim();
    let gamma_m = schedule.gamma(field, m);
    let threshold = 0.75 * gamma_m;
    let exact = plan.mode == EstimatorMode::Exact;
    let mut max_stat = 0.0f64;
    let mut index = 0u64;
    for r in 0..=r_max {
        let pairs = strong_pairs(f, r);
        let b = pairs.len();
        let combos = (field.order() as f64).powi(b as i32);
        let shifted: Vec<Polynomial> =
            pairs.iter().map(|&(i, mask)| pair_poly(f, r, i, mask)).collect::<Result<_>>()?;
        let mut coeffs = vec![field.zero(); b];
        let mut raw = vec![0u64; b];
        'combos: loop {
            let mut i = 0;
            loop {
                if i == b {
                    break 'combos;
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
            if index as f64 > plan.exact_budget {
                return Err(Error::BudgetExceeded {
                    need: combos,
                    budget: plan.exact_budget,
                    what: format!("strong scan at r={r} over {b} shifted pairs"),
                });
            }
            let mut q = Polynomial::zero(field, f.nvars() * (r + 1));
            for (s, &c) in shifted.iter().zip(&coeffs) {
                if !c.is_zero() {
                    q = q.add(&s.scale(c))?;
                }
            }
            let local = mc_plan_for_scan(plan, gamma_m, combos, index);
            let (stat, deg) = combo_statistic(&q, RegularityNotion::Strong, &local)?;
            max_stat = max_stat.max(stat);
            if stat > threshold {
                let witness = OffendingCombination {
                    coeffs: coeffs.clone(),
                    pairs: Some(pairs.clone()),
                    r: Some(r),
                    degree: deg,
                    statistic: stat,
                };
                let combo = q;
                return Ok((Some(Detection { combo, witness }), max_stat, exact));
            }
        }
    }
    Ok((None, max_stat, exact))
}

/// Certifies or falsifies a regularity notion for a factor. Linear factors
/// that are independent modulo constants pass unbiased/uniform checks
/// structurally; otherwise all `|F|^dim` combinations (or all `|F|^{B(r)}`
/// shifted combinations for `r <= deg` in strong mode) are scanned and the
/// first offender is returned as the witness. A failing combination found
/// early short-circuits the scan, so verdicts on badly irregular factors
/// stay cheap at any dimension; certifying a pass requires the full walk
/// and aborts with `BudgetExceeded` when that walk would outgrow
/// `plan.exact_budget`.
pub fn check_regularity(
    f: &Factor,
    notion: RegularityNotion,
    schedule: GammaSchedule,
    plan: &EstimatorPlan,
) -> Result<RegularityVerdict> {
    let gamma_m = schedule.gamma(f.field(), f.dim());
    if f.dim() == 0 {
        return Ok(RegularityVerdict {
            notion,
            pass: true,
            witness: None,
            measured: 0.0,
            threshold: 0.75 * gamma_m,
            exact: true,
            structural: true,
        });
    }
    match notion {
        RegularityNotion::Strong => {
            if f.delta().is_none() {
                return Err(Error::PromiseViolated(
                    "strong regularity check needs a delta-bounded factor".into(),
                ));
            }
            if let Some(v) = structural_strong_verdict(f, gamma_m) {
                return Ok(v);
            }
            let (det, max_stat, exact) = scan_strong(f, f.degree(), schedule, plan)?;
            Ok(verdict_from_scan(notion, det, max_stat, exact, 0.75 * gamma_m))
        }
        RegularityNotion::Unbiased | RegularityNotion::Uniform => {
            if f.degree() <= 1 {
                let (_, dropped) = independent_mod_constants(f.polys())?;
                if dropped.is_empty() {
                    return Ok(RegularityVerdict {
                        notion,
                        pass: true,
                        witness: None,
                        measured: 0.0,
                        threshold: 0.75 * gamma_m,
                        exact: true,
                        structural: true,
                    });
                }
            }
            let (det, max_stat, exact) = scan_combinations(f, notion, schedule, plan)?;
            Ok(verdict_from_scan(notion, det, max_stat, exact, 0.75 * gamma_m))
        }
    }
}

/// An independent linear factor is strongly 0-unbiased provided its pair
/// set carries no identities: every combination is then a nonconstant
/// affine form over the joint variables, of bias exactly zero.
fn structural_strong_verdict(f: &Factor, gamma_m: f64) -> Option<RegularityVerdict> {
    if f.degree() > 1 {
        return None;
    }
    let r = f.degree();
    let pairs = strong_pairs(f, r);
    let shifted: Vec<Polynomial> = pairs
        .iter()
        .map(|&(i, mask)| pair_poly(f, r, i, mask).expect("pair expansion"))
        .collect();
    match independent_mod_constants(&shifted) {
        Ok((_, dropped)) if dropped.is_empty() => Some(RegularityVerdict {
            notion: RegularityNotion::Strong,
            pass: true,
            witness: None,
            measured: 0.0,
            threshold: 0.75 * gamma_m,
            exact: true,
            structural: true,
        }),
        _ => None,
    }
}

fn verdict_from_scan(
    notion: RegularityNotion,
    det: Option<Detection>,
    max_stat: f64,
    exact: bool,
    threshold: f64,
) -> RegularityVerdict {
    match det {
        Some(d) => RegularityVerdict {
            notion,
            pass: false,
            measured: d.witness.statistic,
            witness: Some(d.witness),
            threshold,
            exact,
            structural: false,
        },
        None => RegularityVerdict {
            notion,
            pass: true,
            witness: None,
            measured: max_stat,
            threshold,
            exact,
            structural: false,
        },
    }
}

/// Measures, per original polynomial, the smallest disagreement achievable
/// by any function of the output factor's atoms (the majority value on each
/// atom), exactly over the union support when in budget, else sampled.
pub fn closeness_to_refinement(
    originals: &[Polynomial],
    output: &Factor,
    plan: &EstimatorPlan,
) -> Result<ClosenessCertificate> {
    use crate::estimators::{enumerate_points, enumeration_cost, rand_point, SampleStream};
    let field = output.field();
    let mut supp = output.support();
    for q in originals {
        for v in q.support() {
            if !supp.contains(&v) {
                supp.push(v);
            }
        }
    }
    supp.sort_unstable();
    let cost = enumeration_cost(field, supp.len());
    let exact = plan.mode == EstimatorMode::Exact && cost <= plan.exact_budget;
    let ord = field.order() as usize;
    // per original: atom -> value histogram
    let mut tables: Vec<BTreeMap<Atom, Vec<u64>>> = vec![BTreeMap::new(); originals.len()];
    let total;
    if exact {
        let rpolys: Vec<Polynomial> =
            output.polys().iter().map(|q| q.restrict_to(&supp)).collect::<Result<_>>()?;
        let rorig: Vec<Polynomial> =
            originals.iter().map(|q| q.restrict_to(&supp)).collect::<Result<_>>()?;
        enumerate_points(field, supp.len(), |x| {
            let atom = Atom::new(rpolys.iter().map(|q| q.eval(x).unwrap()).collect());
            for (t, q) in tables.iter_mut().zip(&rorig) {
                let v = q.eval(x).unwrap().value() as usize;
                t.entry(atom.clone()).or_insert_with(|| vec![0; ord])[v] += 1;
            }
        });
        total = cost as u64;
    } else {
        let samples = if plan.samples > 0 { plan.samples } else { crate::factor::DEFAULT_SAMPLED_CHECK };
        let mut stream = SampleStream::new(plan.seed);
        for i in 0..samples {
            let rng = stream.at(i as u64);
            let x = rand_point(field, output.nvars(), rng);
            let atom = output.eval(&x)?;
            for (t, q) in tables.iter_mut().zip(originals) {
                let v = q.eval(&x)?.value() as usize;
                t.entry(atom.clone()).or_insert_with(|| vec![0; ord])[v] += 1;
            }
        }
        total = samples as u64;
    }
    let per_poly: Vec<f64> = tables
        .iter()
        .map(|t| {
            let agree: u64 = t.values().map(|hist| *hist.iter().max().unwrap()).sum();
            1.0 - agree as f64 / total as f64
        })
        .collect();
    let max_disagreement = per_poly.iter().cloned().fold(0.0, f64::max);
    Ok(ClosenessCertificate { per_poly, max_disagreement, exact, points_checked: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PrimeField;
    use crate::estimators::EstimatorPlan;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn product_factor(field: PrimeField, nvars: usize) -> Factor {
        let mut exps = vec![0u64; nvars];
        exps[0] = 1;
        exps[1] = 1;
        let q = Polynomial::from_terms(field, nvars, &[(&exps, 1)]).unwrap();
        Factor::new(field, nvars, vec![q]).unwrap()
    }

    #[test]
    fn independent_linear_factor_passes_structurally() {
        let f3 = fp(3);
        let f = Factor::new(
            f3,
            2,
            vec![Polynomial::var(f3, 2, 0), Polynomial::var(f3, 2, 1)],
        )
        .unwrap();
        for notion in [RegularityNotion::Unbiased, RegularityNotion::Uniform] {
            let v = check_regularity(
                &f,
                notion,
                GammaSchedule::new(0.5, 1.0).unwrap(),
                &EstimatorPlan::exact(),
            )
            .unwrap();
            assert!(v.pass && v.structural && v.exact);
            assert_eq!(v.measured, 0.0);
        }
    }

    #[test]
    fn biased_product_fails_unbiased_check() {
        let f2 = fp(2);
        let f = product_factor(f2, 2);
        // gamma(1) = 0.3 < 2/3 * bias
        let v = check_regularity(
            &f,
            RegularityNotion::Unbiased,
            GammaSchedule::new(0.6, 1.0).unwrap(),
            &EstimatorPlan::exact(),
        )
        .unwrap();
        assert!(!v.pass);
        let w = v.witness.unwrap();
        assert_eq!(w.coeffs, vec![f2.one()]);
        assert!((w.statistic - 0.5).abs() < 1e-12);
        assert!((v.threshold - 0.225).abs() < 1e-12);
    }

    #[test]
    fn quadratic_fails_uniform_check_with_exact_u2() {
        let f5 = fp(5);
        let f = product_factor(f5, 2);
        // gamma(1) = 0.4: U^2 norm = 5^(-1/2) ~ 0.447 > 0.4.
        // the scan compares power means: 1/25 > 0.75 * 0.4^4 = 0.0192
        let v = check_regularity(
            &f,
            RegularityNotion::Uniform,
            GammaSchedule::new(0.4, 0.0).unwrap(),
            &EstimatorPlan::exact(),
        )
        .unwrap();
        assert!(!v.pass);
        let w = v.witness.unwrap();
        assert_eq!(w.degree, 2);
        assert!((w.statistic - 1.0 / 25.0).abs() < 1e-12);
        assert!((w.statistic.powf(0.25) - 5f64.powf(-0.5)).abs() < 1e-9);
    }

    #[test]
    fn dependent_factor_fails_any_threshold() {
        let f3 = fp(3);
        let x1 = Polynomial::var(f3, 2, 0);
        let f = Factor::new(f3, 2, vec![x1.clone(), x1.scale(f3.elem(2))]).unwrap();
        let v = check_regularity(
            &f,
            RegularityNotion::Unbiased,
            GammaSchedule::new(0.5, 0.0).unwrap(),
            &EstimatorPlan::exact(),
        )
        .unwrap();
        assert!(!v.pass);
        assert_eq!(v.measured, 1.0);
    }

    #[test]
    fn strong_check_requires_delta() {
        let f2 = fp(2);
        let f = product_factor(f2, 2);
        let err = check_regularity(
            &f,
            RegularityNotion::Strong,
            GammaSchedule::new(0.25, 1.0).unwrap(),
            &EstimatorPlan::exact(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PromiseViolated(_)));
    }

    #[test]
    fn strong_check_flags_biased_product() {
        let f2 = fp(2);
        let f = product_factor(f2, 2).with_delta(vec![2]).unwrap();
        // gamma(m) = 2^(-m-2): gamma(1) = 1/8, threshold 3/32
        let v = check_regularity(
            &f,
            RegularityNotion::Strong,
            GammaSchedule::new(0.25, 1.0).unwrap(),
            &EstimatorPlan::exact(),
        )
        .unwrap();
        assert!(!v.pass);
        let w = v.witness.unwrap();
        assert_eq!(w.r, Some(0));
        assert!((w.statistic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn strong_shift_identity_is_absorbed_by_delta() {
        // {x1} with Delta = 1: the full second-derivative identity involves
        // |I| = 2 > Delta and never enters the scan, so the factor passes
        // exactly even at r = 2
        let f2 = fp(2);
        let f = Factor::new(f2, 1, vec![Polynomial::var(f2, 1, 0)])
            .unwrap()
            .with_delta(vec![1])
            .unwrap();
        let schedule = GammaSchedule::new(0.25, 1.0).unwrap();
        let (det, max_stat, exact) = scan_strong(&f, 2, schedule, &EstimatorPlan::exact()).unwrap();
        assert!(det.is_none());
        assert_eq!(max_stat, 0.0);
        assert!(exact);
    }

    #[test]
    fn revlex_and_termination_key() {
        assert!(revlex_lt(&[5, 0], &[0, 1]));
        assert!(revlex_lt(&[9, 2], &[0, 3]));
        assert!(!revlex_lt(&[0, 3], &[9, 2]));
        assert!(!revlex_lt(&[1, 2], &[1, 2]));
        // shorter vectors are padded
        assert!(revlex_lt(&[7], &[0, 1]));

        let f3 = fp(3);
        let quad = Polynomial::from_terms(f3, 2, &[(&[1, 1], 1)]).unwrap();
        let f = Factor::new(f3, 2, vec![quad, Polynomial::var(f3, 2, 0)]).unwrap();
        assert_eq!(termination_key(&f), vec![1, 2]);
        let fd = f.with_delta(vec![1, 1]).unwrap();
        assert_eq!(termination_key(&fd), vec![1, 1]);
    }

    #[test]
    fn dependency_mod_constants_detected() {
        let f2 = fp(2);
        let x1 = Polynomial::var(f2, 2, 0);
        let x2 = Polynomial::var(f2, 2, 1);
        let sum_shift =
            Polynomial::from_terms(f2, 2, &[(&[1, 0], 1), (&[0, 1], 1), (&[0, 0], 1)]).unwrap();
        let (kept, dropped) =
            independent_mod_constants(&[x1.clone(), x2.clone(), sum_shift]).unwrap();
        assert_eq!(kept, vec![0, 1]);
        assert_eq!(dropped, vec![2]);
    }

    #[test]
    fn closeness_zero_when_output_refines_exactly() {
        let f2 = fp(2);
        let prod = Polynomial::from_terms(f2, 2, &[(&[1, 1], 1)]).unwrap();
        let coords = Factor::new(
            f2,
            2,
            vec![Polynomial::var(f2, 2, 0), Polynomial::var(f2, 2, 1)],
        )
        .unwrap();
        let cert = closeness_to_refinement(&[prod], &coords, &EstimatorPlan::exact()).unwrap();
        assert!(cert.exact);
        assert_eq!(cert.max_disagreement, 0.0);

        // x1x2 against {x1} disagrees on a quarter of points at best
        let single = Factor::new(f2, 2, vec![Polynomial::var(f2, 2, 0)]).unwrap();
        let prod2 = Polynomial::from_terms(f2, 2, &[(&[1, 1], 1)]).unwrap();
        let cert = closeness_to_refinement(&[prod2], &single, &EstimatorPlan::exact()).unwrap();
        assert_eq!(cert.max_disagreement, 0.25);
    }

    #[test]
    fn scan_budget_binds_only_on_full_walks() {
        // Ten dependent linear forms over F_5: the structural fast path is
        // unavailable, every combination is affine with bias exactly 0 or 1,
        // and the lone offending combinations sit deep in the odometer. A
        // small budget therefore trips before any offender is reached.
        let f5 = fp(5);
        let mut polys: Vec<Polynomial> = (0..9).map(|i| Polynomial::var(f5, 10, i)).collect();
        polys.push(Polynomial::var(f5, 10, 0).add(&Polynomial::var(f5, 10, 1)).unwrap());
        let f = Factor::new(f5, 10, polys).unwrap();
        let plan = EstimatorPlan::exact_with_budget(2e4);
        let err = check_regularity(
            &f,
            RegularityNotion::Unbiased,
            GammaSchedule::new(0.5, 1.0).unwrap(),
            &plan,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn early_offender_beats_scan_budget() {
        // Twelve chained quadratics over F_5^13: the combination space holds
        // 5^12 vectors, far past the budget, but the very first combination
        // x1*x2 already has bias 1/5 against a threshold near zero, so the
        // scan reports the offender instead of giving up.
        let f5 = fp(5);
        let polys: Vec<Polynomial> = (0..12)
            .map(|i| {
                let mut e = vec![0u64; 13];
                e[i] = 1;
                e[i + 1] = 1;
                Polynomial::from_terms(f5, 13, &[(&e, 1)]).unwrap()
            })
            .collect();
        let f = Factor::new(f5, 13, polys).unwrap();
        let plan = EstimatorPlan::exact_with_budget(1e6);
        let verdict = check_regularity(
            &f,
            RegularityNotion::Unbiased,
            GammaSchedule::new(0.5, 1.0).unwrap(),
            &plan,
        )
        .unwrap();
        assert!(!verdict.pass);
        let witness = verdict.witness.expect("offending combination");
        assert!((witness.statistic - 0.2).abs() < 1e-12);
    }
}
