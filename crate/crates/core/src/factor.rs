//! Polynomial factors: joint evaluation maps, atoms, degree bookkeeping,
//! measurability witnesses with query access, and the consistency space of
//! parallelepiped evaluation patterns.
//!
//! A factor is an ordered list of nonconstant polynomials; its atoms are the
//! level sets of the joint evaluation map. Everything downstream (refinement,
//! decoding) manipulates factors, so the bookkeeping here is deliberately
//! exact: distributions and measurability are decided by enumeration over
//! the variables the factor actually touches whenever that fits the budget,
//! and degrade to seeded sampling with an explicit flag otherwise.

use crate::algebra::{linalg::MatFp, poly, FieldElement, Polynomial, PrimeField};
use crate::error::{Error, Result};
use crate::estimators::{
    enumerate_points, enumeration_cost, rand_point, EstimatorMode, EstimatorPlan, SampleStream,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Sample count used when a check has to fall back from exact to sampled.
pub const DEFAULT_SAMPLED_CHECK: usize = 20_000;

/// An ordered collection of nonconstant polynomials over a common variable
/// space, optionally carrying a per-polynomial degree bound `Delta` used by
/// the strong refinement notion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    field: PrimeField,
    nvars: usize,
    polys: Vec<Polynomial>,
    delta: Option<Vec<u16>>,
}

impl Factor {
    pub fn new(field: PrimeField, nvars: usize, polys: Vec<Polynomial>) -> Result<Factor> {
        for q in &polys {
            if q.field() != field || q.nvars() != nvars {
                return Err(Error::DimensionMismatch(
                    "factor polynomials must share field and variable count".into(),
                ));
            }
            if q.is_constant() {
                return Err(Error::DimensionMismatch(
                    "factors store nonconstant polynomials only".into(),
                ));
            }
        }
        Ok(Factor { field, nvars, polys, delta: None })
    }

    pub fn empty(field: PrimeField, nvars: usize) -> Factor {
        Factor { field, nvars, polys: Vec::new(), delta: None }
    }

    /// Attaches a degree-bound map; each bound must sit in `1..=deg(P_i)`.
    pub fn with_delta(mut self, delta: Vec<u16>) -> Result<Factor> {
        if delta.len() != self.polys.len() {
            return Err(Error::DimensionMismatch("delta length != factor dimension".into()));
        }
        for (q, &d) in self.polys.iter().zip(&delta) {
            if d == 0 || d as usize > q.degree() {
                return Err(Error::DimensionMismatch(format!(
                    "delta bound {d} outside 1..=deg for a degree-{} polynomial",
                    q.degree()
                )));
            }
        }
        self.delta = Some(delta);
        Ok(self)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn delta(&self) -> Option<&[u16]> {
        self.delta.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.polys.len()
    }

    /// Counts `(M_1, .., M_d)` of polynomials by degree, up to the factor's
    /// maximum degree. Empty for the empty factor.
    pub fn dim_vector(&self) -> Vec<usize> {
        let d = self.degree();
        let mut m = vec![0usize; d];
        for q in &self.polys {
            m[q.degree() - 1] += 1;
        }
        m
    }

    /// Largest degree among the polynomials (0 for the empty factor).
    pub fn degree(&self) -> usize {
        self.polys.iter().map(|q| q.degree()).max().unwrap_or(0)
    }

    /// `|F|^dim`, the number of atom labels.
    pub fn size(&self) -> f64 {
        (self.field.order() as f64).powi(self.dim() as i32)
    }

    /// Union of the supports of the stored polynomials, sorted.
    pub fn support(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nvars];
        for q in &self.polys {
            for i in q.support() {
                seen[i] = true;
            }
        }
        seen.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect()
    }

    /// The joint evaluation map `x -> (P_1(x), .., P_m(x))`.
    pub fn eval(&self, x: &[FieldElement]) -> Result<Atom> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, factor lives on {}",
                x.len(),
                self.nvars
            )));
        }
        let label = self.polys.iter().map(|q| q.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok(Atom { label })
    }

    pub fn degree_bound_profile(&self) -> Option<DegreeBoundProfile> {
        self.delta.clone().map(DegreeBoundProfile::new)
    }
}

/// A level set of the factor's evaluation map, keyed by its label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    label: Vec<FieldElement>,
}

impl Atom {
    pub fn new(label: Vec<FieldElement>) -> Atom {
        Atom { label }
    }

    pub fn label(&self) -> &[FieldElement] {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }
}

/// `F(x)` in the stored polynomial order.
pub fn factor_eval(f: &Factor, x: &[FieldElement]) -> Result<Atom> {
    f.eval(x)
}

/// The threshold schedule `gamma(m) = min(A, A * p^(-B*m))`.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct GammaSchedule {
    pub a: f64,
    pub b: f64,
}

impl GammaSchedule {
    pub fn new(a: f64, b: f64) -> Result<GammaSchedule> {
        if !(a > 0.0 && a <= 1.0) || b < 0.0 {
            return Err(Error::DimensionMismatch(
                "gamma schedule needs A in (0,1] and B >= 0".into(),
            ));
        }
        Ok(GammaSchedule { a, b })
    }

    /// The schedule `1/(2 p^m)` under which single-query atom access works.
    pub fn query_access_default() -> GammaSchedule {
        GammaSchedule { a: 0.5, b: 1.0 }
    }

    pub fn gamma(&self, field: PrimeField, m: usize) -> f64 {
        let decayed = self.a * (field.order() as f64).powf(-self.b * m as f64);
        self.a.min(decayed)
    }
}

/// Per-polynomial degree bounds with the derived pair count
/// `B(r) = sum_i sum_{0<=j<=Delta_i} C(r,j)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeBoundProfile {
    delta: Vec<u16>,
}

impl DegreeBoundProfile {
    pub fn new(delta: Vec<u16>) -> DegreeBoundProfile {
        DegreeBoundProfile { delta }
    }

    pub fn delta(&self) -> &[u16] {
        &self.delta
    }

    /// Number of pairs `(i, I)` with `I` a subset of `[r]`, `|I| <= Delta_i`.
    pub fn b_count(&self, r: usize) -> u64 {
        self.delta
            .iter()
            .map(|&d| (0..=d as u64).map(|j| binom_u64(r as u64, j)).sum::<u64>())
            .sum()
    }
}

pub(crate) fn binom_u64(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Exact or empirical `Pr[F(x) = b]` for every observed atom label `b`.
/// Exact mode enumerates the coordinates the factor touches (the rest are
/// irrelevant to the distribution) and reports every label, including the
/// empty ones; Monte Carlo reports only the labels it saw.
pub fn atom_distribution(f: &Factor, plan: &EstimatorPlan) -> Result<BTreeMap<Atom, f64>> {
    let field = f.field();
    let mut out = BTreeMap::new();
    if f.dim() == 0 {
        out.insert(Atom::new(Vec::new()), 1.0);
        return Ok(out);
    }
    match plan.mode {
        EstimatorMode::Exact => {
            let supp = f.support();
            let cost = enumeration_cost(field, supp.len());
            if cost > plan.exact_budget {
                return Err(Error::BudgetExceeded {
                    need: cost,
                    budget: plan.exact_budget,
                    what: format!("atom distribution over {} live variables", supp.len()),
                });
            }
            let restricted: Vec<Polynomial> =
                f.polys.iter().map(|q| q.restrict_to(&supp)).collect::<Result<_>>()?;
            let mut counts: BTreeMap<Atom, u64> = BTreeMap::new();
            enumerate_points(field, supp.len(), |x| {
                let label = restricted.iter().map(|q| q.eval(x).unwrap()).collect();
                *counts.entry(Atom::new(label)).or_insert(0) += 1;
            });
            // list every label so empty atoms show up as exact zeros
            let mut label = vec![0u64; f.dim()];
            loop {
                let atom = Atom::new(label.iter().map(|&v| field.elem(v)).collect());
                let c = counts.get(&atom).copied().unwrap_or(0);
                out.insert(atom, c as f64 / cost);
                let mut i = 0;
                loop {
                    if i == label.len() {
                        return Ok(out);
                    }
                    label[i] += 1;
                    if label[i] < field.order() {
                        break;
                    }
                    label[i] = 0;
                    i += 1;
                }
            }
        }
        EstimatorMode::MonteCarlo => {
            let mut counts: BTreeMap<Atom, u64> = BTreeMap::new();
            let mut stream = SampleStream::new(plan.seed);
            let samples = plan.samples.max(1);
            for i in 0..samples {
                let rng = stream.at(i as u64);
                let x = rand_point(field, f.nvars(), rng);
                *counts.entry(f.eval(&x)?).or_insert(0) += 1;
            }
            for (a, c) in counts {
                out.insert(a, c as f64 / samples as f64);
            }
            Ok(out)
        }
    }
}

/// Evidence that a polynomial is constant on every atom of a factor: the
/// (partial) value table `Gamma: atoms -> F`, with `exact` recording whether
/// it came from exhaustive enumeration or a sampled pass. Atoms absent from
/// the table are empty (exact mode) or unseen (sampled mode); `Gamma` is
/// undefined there.
#[derive(Clone, Debug)]
pub struct MeasurabilityWitness {
    factor: Factor,
    table: BTreeMap<Atom, FieldElement>,
    exact: bool,
    samples_checked: u64,
}

impl MeasurabilityWitness {
    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    pub fn table(&self) -> &BTreeMap<Atom, FieldElement> {
        &self.table
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn samples_checked(&self) -> u64 {
        self.samples_checked
    }

    /// Looks up `Gamma` on an atom; `None` marks an empty/unseen atom.
    pub fn gamma(&self, a: &Atom) -> Option<FieldElement> {
        self.table.get(a).copied()
    }

    /// Evaluates the represented function at a point via the table.
    pub fn eval(&self, x: &[FieldElement]) -> Result<Option<FieldElement>> {
        Ok(self.gamma(&self.factor.eval(x)?))
    }

    /// Append-only insert; concurrent fills must agree on shared keys.
    pub(crate) fn insert(&mut self, a: Atom, v: FieldElement) {
        let prev = self.table.insert(a, v);
        debug_assert!(prev.is_none() || prev == Some(v), "witness table fill disagreed");
    }

    /// Fills the table entry for `a` by querying the oracle at a sampled
    /// point of the atom (the fallback when no exhaustive table exists).
    pub fn query<O>(
        &mut self,
        a: &Atom,
        oracle: O,
        beta: f64,
        schedule: GammaSchedule,
        seed: u64,
    ) -> Result<FieldElement>
    where
        O: Fn(&[FieldElement]) -> FieldElement,
    {
        let v = query_gamma(&self.factor, a, oracle, beta, schedule, seed)?;
        self.insert(a.clone(), v);
        Ok(v)
    }
}

/// Outcome of a measurability check: either a witness table, or two points
/// in one atom on which the polynomial disagrees.
#[derive(Clone, Debug)]
pub enum MeasurabilityOutcome {
    Measurable(MeasurabilityWitness),
    Counterexample {
        atom: Atom,
        x: Vec<FieldElement>,
        y: Vec<FieldElement>,
        value_x: FieldElement,
        value_y: FieldElement,
    },
}

impl MeasurabilityOutcome {
    pub fn is_measurable(&self) -> bool {
        matches!(self, MeasurabilityOutcome::Measurable(_))
    }

    pub fn witness(&self) -> Option<&MeasurabilityWitness> {
        match self {
            MeasurabilityOutcome::Measurable(w) => Some(w),
            MeasurabilityOutcome::Counterexample { .. } => None,
        }
    }
}

/// Decides whether `P` is constant on every atom of `F` by bucketing points
/// by atom. Enumerates exactly over the union of supports when that fits
/// `plan.exact_budget`; otherwise falls back to a sampled pass (flagged on
/// the witness). Counterexamples are always genuine points.
pub fn measurability_check(
    p: &Polynomial,
    f: &Factor,
    plan: &EstimatorPlan,
) -> Result<MeasurabilityOutcome> {
    if p.field() != f.field() || p.nvars() != f.nvars() {
        return Err(Error::DimensionMismatch(
            "polynomial and factor live on different spaces".into(),
        ));
    }
    let field = f.field();
    let mut supp = f.support();
    for v in p.support() {
        if !supp.contains(&v) {
            supp.push(v);
        }
    }
    supp.sort_unstable();
    let cost = enumeration_cost(field, supp.len());
    let exact = plan.mode == EstimatorMode::Exact && cost <= plan.exact_budget;

    let mut witness = MeasurabilityWitness {
        factor: f.clone(),
        table: BTreeMap::new(),
        exact,
        samples_checked: 0,
    };
    // representative point per atom, in restricted coordinates
    let mut reps: BTreeMap<Atom, Vec<FieldElement>> = BTreeMap::new();
    let lift = |restricted: &[FieldElement]| -> Vec<FieldElement> {
        let mut full = vec![field.zero(); f.nvars()];
        for (j, &v) in supp.iter().enumerate() {
            full[v] = restricted[j];
        }
        full
    };

    if exact {
        let q = p.restrict_to(&supp)?;
        let restricted: Vec<Polynomial> =
            f.polys.iter().map(|r| r.restrict_to(&supp)).collect::<Result<_>>()?;
        let mut bad: Option<(Atom, Vec<FieldElement>, Vec<FieldElement>)> = None;
        enumerate_points(field, supp.len(), |x| {
            if bad.is_some() {
                return;
            }
            let atom = Atom::new(restricted.iter().map(|r| r.eval(x).unwrap()).collect());
            let v = q.eval(x).unwrap();
            match reps.get(&atom) {
                None => {
                    reps.insert(atom.clone(), x.to_vec());
                    witness.insert(atom, v);
                }
                Some(first) => {
                    if witness.gamma(&atom) != Some(v) {
                        bad = Some((atom, first.clone(), x.to_vec()));
                    }
                }
            }
        });
        witness.samples_checked = cost as u64;
        if let Some((atom, x0, x1)) = bad {
            let x = lift(&x0);
            let y = lift(&x1);
            let value_x = p.eval(&x)?;
            let value_y = p.eval(&y)?;
            return Ok(MeasurabilityOutcome::Counterexample { atom, x, y, value_x, value_y });
        }
        Ok(MeasurabilityOutcome::Measurable(witness))
    } else {
        let samples = if plan.samples > 0 { plan.samples } else { DEFAULT_SAMPLED_CHECK };
        let mut stream = SampleStream::new(plan.seed);
        for i in 0..samples {
            let rng = stream.at(i as u64);
            let x = rand_point(field, f.nvars(), rng);
            let atom = f.eval(&x)?;
            let v = p.eval(&x)?;
            match reps.get(&atom) {
                None => {
                    reps.insert(atom.clone(), x.clone());
                    witness.insert(atom, v);
                }
                Some(first) => {
                    if witness.gamma(&atom) != Some(v) {
                        let y = first.clone();
                        let value_y = p.eval(&y)?;
                        return Ok(MeasurabilityOutcome::Counterexample {
                            atom,
                            x,
                            y,
                            value_x: v,
                            value_y,
                        });
                    }
                }
            }
        }
        witness.samples_checked = samples as u64;
        Ok(MeasurabilityOutcome::Measurable(witness))
    }
}

/// Single-query atom access: rejection-samples up to
/// `K = ceil(2 |F|^m ln(1/beta))` points and returns the oracle value at the
/// first one landing in atom `a`. Under the `gamma(m) <= 1/(2 p^m)`
/// unbiasedness precondition this is correct with probability `>= 1 - beta`.
pub fn query_gamma<O>(
    f: &Factor,
    a: &Atom,
    oracle: O,
    beta: f64,
    schedule: GammaSchedule,
    seed: u64,
) -> Result<FieldElement>
where
    O: Fn(&[FieldElement]) -> FieldElement,
{
    if a.len() != f.dim() {
        return Err(Error::DimensionMismatch("atom label length != factor dimension".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::DimensionMismatch("failure probability must lie in (0,1)".into()));
    }
    debug_assert!(
        schedule.gamma(f.field(), f.dim()) <= 0.5 / f.size() + 1e-12,
        "query access expects gamma(m) <= 1/(2 p^m)"
    );
    let draws = (2.0 * f.size() * (1.0 / beta).ln()).ceil() as u64;
    let draws = draws.max(1);
    let mut stream = SampleStream::new(seed);
    for i in 0..draws {
        let rng = stream.at(i);
        let x = rand_point(f.field(), f.nvars(), rng);
        if f.eval(&x)? == *a {
            return Ok(oracle(&x));
        }
    }
    Err(Error::AtomNotHit { draws })
}

/// `dim(Sigma_box)` by the closed formula `sum_{i in [d]} sum_{0<=j<=i} C(k,j)`
/// for `k` exceeding the factor degree `d`. The formula as printed ignores
/// the multiplicities `M_i`; see [`sigma_box_dim_weighted`] for the reading
/// that multiplies each inner sum by `M_i`, and [`consistency_basis`] for
/// the linear-algebra ground truth.
pub fn sigma_box_dim(f: &Factor, k: usize) -> Result<u64> {
    let d = f.degree();
    if k <= d {
        return Err(Error::DimensionMismatch(format!(
            "sigma_box needs k > factor degree ({k} <= {d})"
        )));
    }
    Ok((1..=d as u64).map(|i| (0..=i).map(|j| binom_u64(k as u64, j)).sum::<u64>()).sum())
}

/// The multiplicity-weighted reading of the same formula:
/// `sum_{i in [d]} M_i * sum_{0<=j<=i} C(k,j)`.
pub fn sigma_box_dim_weighted(f: &Factor, k: usize) -> Result<u64> {
    let d = f.degree();
    if k <= d {
        return Err(Error::DimensionMismatch(format!(
            "sigma_box needs k > factor degree ({k} <= {d})"
        )));
    }
    let m = f.dim_vector();
    Ok((1..=d as u64)
        .map(|i| {
            m[i as usize - 1] as u64 * (0..=i).map(|j| binom_u64(k as u64, j)).sum::<u64>()
        })
        .sum())
}

/// The space of linear identities among the shifted evaluations
/// `P_i(x + omega . y)`, `omega in {0,1}^k`, found by coefficient
/// elimination over the `(x, y_1..y_k)` variable space. The value space of
/// consistent parallelepiped patterns has dimension
/// `m * 2^k - identity_dim()`.
#[derive(Clone, Debug)]
pub struct ConsistencySpace {
    k: usize,
    rows: Vec<(usize, u32)>,
    identity_basis: Vec<Vec<FieldElement>>,
    value_dim: usize,
}

impl ConsistencySpace {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Row order of the coefficient vectors: `(poly index, omega mask)`,
    /// masks counting `0..2^k` with bit `j` selecting `y_{j+1}`.
    pub fn rows(&self) -> &[(usize, u32)] {
        &self.rows
    }

    pub fn identity_basis(&self) -> &[Vec<FieldElement>] {
        &self.identity_basis
    }

    pub fn identity_dim(&self) -> usize {
        self.identity_basis.len()
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }
}

/// Finds all coefficient vectors `Lambda` with
/// `sum_{i,omega} lambda_{i,omega} P_i(x + omega . y) == 0` identically.
pub fn consistency_basis(f: &Factor, k: usize) -> Result<ConsistencySpace> {
    if k == 0 || k > 20 {
        return Err(Error::DimensionMismatch("consistency space needs 1 <= k <= 20".into()));
    }
    let field = f.field();
    let mut rows = Vec::new();
    let mut shifted = Vec::new();
    for (i, q) in f.polys.iter().enumerate() {
        for mask in 0u32..(1 << k) {
            let omega: Vec<FieldElement> = (0..k)
                .map(|j| if mask >> j & 1 == 1 { field.one() } else { field.zero() })
                .collect();
            rows.push((i, mask));
            shifted.push(q.shift_into_blocks(k, &omega)?);
        }
    }
    if rows.is_empty() {
        return Ok(ConsistencySpace { k, rows, identity_basis: Vec::new(), value_dim: 0 });
    }
    let basis = poly::monomial_basis(&shifted);
    // kernel of the transpose: combinations of rows that cancel every monomial
    let mat_rows: Vec<Vec<FieldElement>> =
        (0..basis.len()).map(|c| shifted.iter().map(|q| q.coeff_row(&basis)[c]).collect()).collect();
    let identity_basis = MatFp::from_rows(field, mat_rows).kernel_basis();
    let value_dim = rows.len() - identity_basis.len();
    Ok(ConsistencySpace { k, rows, identity_basis, value_dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::PrimeField;

    fn fp(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn coords(field: PrimeField, nvars: usize, vars: &[usize]) -> Factor {
        let polys = vars.iter().map(|&i| Polynomial::var(field, nvars, i)).collect();
        Factor::new(field, nvars, polys).unwrap()
    }

    fn product_factor(field: PrimeField, nvars: usize) -> Factor {
        let mut exps = vec![0u64; nvars];
        exps[0] = 1;
        exps[1] = 1;
        let q = Polynomial::from_terms(field, nvars, &[(&exps, 1)]).unwrap();
        Factor::new(field, nvars, vec![q]).unwrap()
    }

    #[test]
    fn eval_in_stored_order() {
        let f3 = fp(3);
        let f = coords(f3, 2, &[0, 1]);
        let a = f.eval(&f3.point(&[1, 0])).unwrap();
        assert_eq!(a.label(), &[f3.elem(1), f3.elem(0)]);
        let empty = Factor::empty(f3, 2);
        assert_eq!(empty.eval(&f3.point(&[2, 2])).unwrap().label().len(), 0);
        let f2 = fp(2);
        let prod = product_factor(f2, 2);
        assert_eq!(prod.eval(&f2.point(&[1, 1])).unwrap().label(), &[f2.one()]);
    }

    #[test]
    fn constant_polynomials_rejected() {
        let f3 = fp(3);
        let c = Polynomial::constant(f3, 2, f3.elem(2));
        assert!(Factor::new(f3, 2, vec![c]).is_err());
    }

    #[test]
    fn dim_vector_counts_by_degree() {
        let f3 = fp(3);
        let lin = Polynomial::var(f3, 3, 0);
        let quad = Polynomial::from_terms(f3, 3, &[(&[1, 1, 0], 1)]).unwrap();
        let f = Factor::new(f3, 3, vec![quad, lin]).unwrap();
        assert_eq!(f.dim_vector(), vec![1, 1]);
        assert_eq!(f.degree(), 2);
        assert_eq!(f.size(), 9.0);
    }

    #[test]
    fn atom_distribution_examples() {
        let f2 = fp(2);
        // {x1} on F_2^3: both atoms 1/2
        let f = coords(f2, 3, &[0]);
        let dist = atom_distribution(&f, &EstimatorPlan::exact()).unwrap();
        assert_eq!(dist.len(), 2);
        for pr in dist.values() {
            assert!((pr - 0.5).abs() < 1e-12);
        }
        // {x1, x1x2} on F_2^2
        let q = Polynomial::from_terms(f2, 2, &[(&[1, 1], 1)]).unwrap();
        let f = Factor::new(f2, 2, vec![Polynomial::var(f2, 2, 0), q]).unwrap();
        let dist = atom_distribution(&f, &EstimatorPlan::exact()).unwrap();
        let at = |a: u64, b: u64| dist[&Atom::new(vec![f2.elem(a), f2.elem(b)])];
        assert_eq!(at(0, 0), 0.5);
        assert_eq!(at(1, 0), 0.25);
        assert_eq!(at(1, 1), 0.25);
        assert_eq!(at(0, 1), 0.0);
        // {x1,x2} on F_3: all nine atoms 1/9
        let f3 = fp(3);
        let f = coords(f3, 2, &[0, 1]);
        let dist = atom_distribution(&f, &EstimatorPlan::exact()).unwrap();
        assert_eq!(dist.len(), 9);
        for pr in dist.values() {
            assert!((pr - 1.0 / 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn measurability_table_and_counterexample() {
        let f2 = fp(2);
        let plan = EstimatorPlan::exact();
        // x1 + x2 is measurable in {x1, x2} with Gamma(a,b) = a + b
        let sum = Polynomial::from_terms(f2, 2, &[(&[1, 0], 1), (&[0, 1], 1)]).unwrap();
        let f = coords(f2, 2, &[0, 1]);
        let out = measurability_check(&sum, &f, &plan).unwrap();
        let w = out.witness().expect("measurable");
        assert!(w.is_exact());
        for a in 0..2 {
            for b in 0..2 {
                let atom = Atom::new(vec![f2.elem(a), f2.elem(b)]);
                assert_eq!(w.gamma(&atom), Some(f2.elem((a + b) % 2)));
            }
        }
        // x1x2 is not measurable in {x1}
        let prod = Polynomial::from_terms(f2, 2, &[(&[1, 1], 1)]).unwrap();
        let f = coords(f2, 2, &[0]);
        match measurability_check(&prod, &f, &plan).unwrap() {
            MeasurabilityOutcome::Counterexample { atom, x, y, value_x, value_y } => {
                assert_eq!(atom, Atom::new(vec![f2.one()]));
                assert_eq!(f.eval(&x).unwrap(), f.eval(&y).unwrap());
                assert_ne!(value_x, value_y);
                assert_eq!(prod.eval(&x).unwrap(), value_x);
                assert_eq!(prod.eval(&y).unwrap(), value_y);
            }
            MeasurabilityOutcome::Measurable(_) => panic!("x1x2 measurable in {{x1}}"),
        }
        // constants are measurable in anything
        let c = Polynomial::constant(f2, 2, f2.one());
        let out = measurability_check(&c, &f, &plan).unwrap();
        assert!(out.is_measurable());
    }

    #[test]
    fn oversized_check_downgrades_to_sampled() {
        let f2 = fp(2);
        let n = 40;
        let mut vars = Vec::new();
        for i in 0..n {
            vars.push(i);
        }
        let f = coords(f2, n, &vars);
        let sum = Polynomial::from_terms(
            f2,
            n,
            &(0..n)
                .map(|i| {
                    let mut e = vec![0u64; n];
                    e[i] = 1;
                    e
                })
                .collect::<Vec<_>>()
                .iter()
                .map(|e| (e.as_slice(), 1u64))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let mut plan = EstimatorPlan::exact_with_budget(1e6);
        plan.samples = 200;
        let out = measurability_check(&sum, &f, &plan).unwrap();
        let w = out.witness().expect("measurable");
        assert!(!w.is_exact());
        assert_eq!(w.samples_checked(), 200);
    }

    #[test]
    fn query_gamma_examples() {
        let f5 = fp(5);
        let f = coords(f5, 2, &[0, 1]);
        let sum = Polynomial::from_terms(f5, 2, &[(&[1, 0], 1), (&[0, 1], 1)]).unwrap();
        let got = query_gamma(
            &f,
            &Atom::new(vec![f5.elem(1), f5.elem(2)]),
            |x| sum.eval(x).unwrap(),
            0.01,
            GammaSchedule::query_access_default(),
            11,
        )
        .unwrap();
        assert_eq!(got, f5.elem(3));

        let sq = Polynomial::from_terms(f5, 1, &[(&[2], 1)]).unwrap();
        let f = coords(f5, 1, &[0]);
        let got = query_gamma(
            &f,
            &Atom::new(vec![f5.elem(2)]),
            |x| sq.eval(x).unwrap(),
            0.01,
            GammaSchedule::query_access_default(),
            12,
        )
        .unwrap();
        assert_eq!(got, f5.elem(4));

        let f2 = fp(2);
        let prod = product_factor(f2, 2);
        let shifted = Polynomial::from_terms(f2, 2, &[(&[1, 1], 1), (&[0, 0], 1)]).unwrap();
        let got = query_gamma(
            &prod,
            &Atom::new(vec![f2.one()]),
            |x| shifted.eval(x).unwrap(),
            0.01,
            GammaSchedule::query_access_default(),
            13,
        )
        .unwrap();
        assert_eq!(got, f2.zero());
    }

    #[test]
    fn query_gamma_reports_unhit_atoms() {
        let f2 = fp(2);
        // {x1, x1x2}: the atom (0,1) is empty
        let q = Polynomial::from_terms(f2, 2, &[(&[1, 1], 1)]).unwrap();
        let f = Factor::new(f2, 2, vec![Polynomial::var(f2, 2, 0), q]).unwrap();
        let err = query_gamma(
            &f,
            &Atom::new(vec![f2.zero(), f2.one()]),
            |_| f2.zero(),
            0.05,
            GammaSchedule::query_access_default(),
            3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::AtomNotHit { .. }));
    }

    #[test]
    fn sigma_box_values() {
        let f2 = fp(2);
        let lin = coords(f2, 2, &[0]);
        assert_eq!(sigma_box_dim(&lin, 2).unwrap(), 3);
        let f5 = fp(5);
        let quad = product_factor(f5, 2);
        assert_eq!(sigma_box_dim(&quad, 3).unwrap(), 11);
        assert!(sigma_box_dim(&quad, 2).is_err());
        // weighted reading with M_1 = 0, M_2 = 1 keeps only the inner sum 7
        assert_eq!(sigma_box_dim_weighted(&quad, 3).unwrap(), 7);
        assert_eq!(sigma_box_dim_weighted(&lin, 2).unwrap(), 3);
    }

    #[test]
    fn consistency_space_dimensions() {
        let f2 = fp(2);
        let lin = coords(f2, 1, &[0]);
        let cs = consistency_basis(&lin, 2).unwrap();
        assert_eq!(cs.identity_dim(), 1);
        assert_eq!(cs.value_dim(), 3);
        // the identity is the full alternating second derivative
        let lambda = &cs.identity_basis()[0];
        let nonzero = lambda.iter().filter(|c| !c.is_zero()).count();
        assert_eq!(nonzero, 4);

        let f5 = fp(5);
        let quad = product_factor(f5, 2);
        let cs = consistency_basis(&quad, 3).unwrap();
        assert_eq!(cs.identity_dim(), 1);
        assert_eq!(cs.value_dim(), 7);
        let cs = consistency_basis(&quad, 2).unwrap();
        assert_eq!(cs.identity_dim(), 0);
        assert_eq!(cs.value_dim(), 4);
    }

    #[test]
    fn consistency_identities_really_vanish() {
        let f3 = fp(3);
        let q = Polynomial::from_terms(f3, 2, &[(&[1, 1], 1), (&[1, 0], 2)]).unwrap();
        let f = Factor::new(f3, 2, vec![q]).unwrap();
        let cs = consistency_basis(&f, 3).unwrap();
        for lambda in cs.identity_basis() {
            let mut acc = Polynomial::zero(f3, 2 * (3 + 1));
            for (r, (i, mask)) in cs.rows().iter().enumerate() {
                let omega: Vec<FieldElement> = (0..3)
                    .map(|j| if mask >> j & 1 == 1 { f3.one() } else { f3.zero() })
                    .collect();
                let shifted = f.polys()[*i].shift_into_blocks(3, &omega).unwrap();
                acc = acc.add(&shifted.scale(lambda[r])).unwrap();
            }
            assert!(acc.is_zero());
        }
    }

    #[test]
    fn b_count_matches_brute_force() {
        let profile = DegreeBoundProfile::new(vec![1, 2, 2]);
        for r in 0..6usize {
            let mut brute = 0u64;
            for &d in profile.delta() {
                for mask in 0u64..(1 << r) {
                    if mask.count_ones() as u16 <= d {
                        brute += 1;
                    }
                }
            }
            assert_eq!(profile.b_count(r), brute, "B({r})");
        }
    }

    #[test]
    fn gamma_schedule_decays() {
        let f3 = fp(3);
        let g = GammaSchedule::new(0.6, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for m in 0..6 {
            let v = g.gamma(f3, m);
            assert!(v > 0.0 && v <= prev);
            prev = v;
        }
        assert_eq!(g.gamma(f3, 0), 0.6);
        assert!((g.gamma(f3, 2) - 0.6 / 9.0).abs() < 1e-12);
        assert!(GammaSchedule::new(0.0, 1.0).is_err());
        assert!(GammaSchedule::new(0.5, -1.0).is_err());
    }

    #[test]
    fn delta_bounds_validated() {
        let f2 = fp(2);
        let prod = product_factor(f2, 2);
        assert!(prod.clone().with_delta(vec![0]).is_err());
        assert!(prod.clone().with_delta(vec![3]).is_err());
        let ok = prod.with_delta(vec![2]).unwrap();
        assert_eq!(ok.degree_bound_profile().unwrap().b_count(2), 4);
    }
}
