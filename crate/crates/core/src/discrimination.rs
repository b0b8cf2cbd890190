//! Discrimination bounds from the non-locality cost, and distinguishers
//! for extremal boxes.

use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::catalog::{build_b_in, isotropic, local_deterministic_vertices, IsotropicSpec, MaxNonlocalLabel};
use crate::cost::{nonlocal_cost, CostCertificate, CostProblem, LocalModel};
use crate::error::{BoxError, Result};
use crate::layout::{decode, SystemLayout};
use crate::nonsignaling::single_subsystem_equalities;
use crate::rational::{self, Rational};
use crate::simplex::{LinearProgram, LpOutcome, Relation};
use crate::table::{variational_distance, BoxTable};
use crate::transforms::ComparingOperation;

/// Ensemble `{p_i, B^{alpha_i}_{f(i)}}` with flag parameters `beta_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscriminationScenario {
    pub members: Vec<(Rational, IsotropicSpec)>,
    pub betas: Vec<Rational>,
}

impl DiscriminationScenario {
    pub fn new(members: Vec<(Rational, IsotropicSpec)>, betas: Vec<Rational>) -> Result<Self> {
        if members.is_empty() || members.len() != betas.len() {
            return Err(BoxError::Argument(format!(
                "{} members but {} betas",
                members.len(),
                betas.len()
            )));
        }
        let total: Rational = members.iter().map(|(p, _)| p).sum();
        if !total.is_one() || members.iter().any(|(p, _)| p.is_negative()) {
            return Err(BoxError::Argument("weights must form a distribution".into()));
        }
        let half = rational::half();
        let in_range = |v: &Rational| *v >= half && *v <= Rational::one();
        if !members.iter().all(|(_, s)| in_range(&s.alpha)) || !betas.iter().all(in_range) {
            return Err(BoxError::Argument("alpha and beta must lie in [1/2, 1]".into()));
        }
        Ok(Self { members, betas })
    }

    /// Equal weights over `labels`, common `alpha`, `beta = 1`.
    pub fn equal_weight(labels: &[MaxNonlocalLabel], alpha: &Rational) -> Result<Self> {
        let w = rational::ratio(1, labels.len().max(1) as i64);
        let members = labels
            .iter()
            .map(|&l| Ok((w.clone(), IsotropicSpec::new(l, alpha.clone())?)))
            .collect::<Result<_>>()?;
        Self::new(members, vec![Rational::one(); labels.len()])
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn labels(&self) -> Vec<MaxNonlocalLabel> {
        self.members.iter().map(|(_, s)| s.label).collect()
    }

    pub fn max_beta(&self) -> Rational {
        self.betas.iter().max().cloned().unwrap_or_else(Rational::zero)
    }

    /// `sum_i p_i B^{alpha_i}_i (x) B^{beta_i}_i` on `[[A, C], [B, D]]`.
    pub fn b_in(&self) -> Result<BoxTable> {
        let pairs: Vec<_> = self
            .members
            .iter()
            .zip(&self.betas)
            .map(|((_, s), beta)| Ok((s.clone(), IsotropicSpec::new(s.label, beta.clone())?)))
            .collect::<Result<_>>()?;
        let weights: Vec<Rational> = self.members.iter().map(|(p, _)| p.clone()).collect();
        build_b_in(&pairs, &weights)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundFormula {
    Theorem1,
    CorollaryAlpha,
    CorollaryMaxFlags,
}

impl fmt::Display for BoundFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundFormula::Theorem1 => "theorem1",
            BoundFormula::CorollaryAlpha => "corollary-alpha",
            BoundFormula::CorollaryMaxFlags => "corollary-maxflags",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundReport {
    /// Right-hand side of the bound under `formula`.
    pub bound: Rational,
    /// Upper bound on the success probability implied by `bound`, when one
    /// follows (common beta above 1/2 for theorem1).
    pub success_bound: Option<Rational>,
    pub cost_used: Rational,
    pub formula: BoundFormula,
    pub model: LocalModel,
    pub certificate: CostCertificate,
}

fn cost_of(b_in: BoxTable, model: LocalModel) -> Result<CostCertificate> {
    nonlocal_cost(&CostProblem::with_model(b_in, model)?)
}

/// `(C + 3) / 4`.
pub fn maxflags_formula(cost: &Rational) -> Rational {
    (cost + rational::int(3)) / rational::int(4)
}

/// `(C - 1 + 4 alpha) / (4 (2 alpha - 1))`; undefined at `alpha = 1/2`.
pub fn alpha_formula(cost: &Rational, alpha: &Rational) -> Result<Rational> {
    let den = rational::int(4) * (rational::int(2) * alpha - rational::int(1));
    if den.is_zero() {
        return Err(BoxError::Argument("bound undefined at alpha = 1/2".into()));
    }
    Ok((cost - rational::int(1) + rational::int(4) * alpha) / den)
}

/// `(C + 3)/4 + max beta - 1`, and `p_s <= rhs / (2 beta - 1)` for a
/// common `beta > 1/2`.
pub fn theorem1_bound(scenario: &DiscriminationScenario, model: LocalModel) -> Result<BoundReport> {
    let certificate = cost_of(scenario.b_in()?, model)?;
    let max = scenario.max_beta();
    let rhs = maxflags_formula(&certificate.p) + &max - rational::int(1);
    let common = scenario.betas.iter().all(|b| *b == max);
    let slope = rational::int(2) * &max - rational::int(1);
    let success_bound = (common && slope.is_positive()).then(|| &rhs / &slope);
    Ok(BoundReport {
        bound: rhs,
        success_bound,
        cost_used: certificate.p.clone(),
        formula: BoundFormula::Theorem1,
        model,
        certificate,
    })
}

/// Bound for `alpha_i = beta_i = alpha` from `sum_i p_i B^alpha_i (x) B^alpha_i`.
pub fn corollary_alpha_bound(
    labels: &[MaxNonlocalLabel],
    weights: &[Rational],
    alpha: &Rational,
    model: LocalModel,
) -> Result<BoundReport> {
    if *alpha == rational::half() {
        return Err(BoxError::Argument("bound undefined at alpha = 1/2".into()));
    }
    let pairs: Vec<_> = labels
        .iter()
        .map(|&l| {
            let s = IsotropicSpec::new(l, alpha.clone())?;
            Ok((s.clone(), s))
        })
        .collect::<Result<_>>()?;
    let certificate = cost_of(build_b_in(&pairs, weights)?, model)?;
    let bound = alpha_formula(&certificate.p, alpha)?;
    Ok(BoundReport {
        success_bound: Some(bound.clone()),
        bound,
        cost_used: certificate.p.clone(),
        formula: BoundFormula::CorollaryAlpha,
        model,
        certificate,
    })
}

/// `(C + 3)/4` from `sum_i p_i B^alpha_i (x) B^1_i`.
pub fn corollary_maxflags_bound(
    labels: &[MaxNonlocalLabel],
    weights: &[Rational],
    alpha: &Rational,
    model: LocalModel,
) -> Result<BoundReport> {
    let pairs: Vec<_> = labels
        .iter()
        .map(|&l| Ok((IsotropicSpec::new(l, alpha.clone())?, IsotropicSpec::maximal(l))))
        .collect::<Result<_>>()?;
    let certificate = cost_of(build_b_in(&pairs, weights)?, model)?;
    let bound = maxflags_formula(&certificate.p);
    Ok(BoundReport {
        success_bound: Some(bound.clone()),
        bound,
        cost_used: certificate.p.clone(),
        formula: BoundFormula::CorollaryMaxFlags,
        model,
        certificate,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepRow {
    pub labels: Vec<MaxNonlocalLabel>,
    pub cost: Rational,
    pub bound: Rational,
}

impl SweepRow {
    pub fn label_string(&self) -> String {
        self.labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Aggregation {
    #[default]
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepTable {
    pub k: usize,
    pub alpha: Rational,
    pub model: LocalModel,
    /// One row per `k`-subset of the eight labels, in lexicographic order.
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// First row attaining the smallest bound.
    pub fn min_row(&self) -> &SweepRow {
        self.rows
            .iter()
            .min_by(|a, b| a.bound.cmp(&b.bound))
            .expect("sweeps are nonempty")
    }

    /// First row attaining the largest bound.
    pub fn max_row(&self) -> &SweepRow {
        self.rows
            .iter()
            .rev()
            .max_by(|a, b| a.bound.cmp(&b.bound))
            .expect("sweeps are nonempty")
    }

    pub fn aggregate(&self, aggregation: Aggregation) -> &SweepRow {
        match aggregation {
            Aggregation::Min => self.min_row(),
            Aggregation::Max => self.max_row(),
        }
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] != i + n - k) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Corollary bound `(C + 3)/4` for every equal-weight `k`-ensemble of
/// distinct `B^alpha_rst` with maximal flags.
pub fn universal_bound_sweep(k: usize, alpha: &Rational, model: LocalModel) -> Result<SweepTable> {
    if !(2..=8).contains(&k) {
        return Err(BoxError::Argument(format!("k = {k} outside 2..=8")));
    }
    let all: Vec<MaxNonlocalLabel> = MaxNonlocalLabel::all().collect();
    let w = vec![rational::ratio(1, k as i64); k];
    let rows = combinations(8, k)
        .into_par_iter()
        .map(|subset| {
            let labels: Vec<_> = subset.iter().map(|&i| all[i]).collect();
            let report = corollary_maxflags_bound(&labels, &w, alpha, model)?;
            Ok(SweepRow {
                labels,
                cost: report.cost_used,
                bound: report.bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        k,
        alpha: alpha.clone(),
        model,
        rows,
    })
}

fn require_bipartite_single(a: &BoxTable, b: &BoxTable) -> Result<()> {
    if !a.compatible(b) {
        return Err(BoxError::Incompatible(format!("{} vs {}", a.layout(), b.layout())));
    }
    let l = a.layout();
    if l.num_sites() != 2 || l.num_subsystems() != 2 {
        return Err(BoxError::Layout(format!("expected one subsystem per party, got {l}")));
    }
    Ok(())
}

/// Comparing operation and the success probability it reaches with equal
/// priors; flag 0 guesses the first box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistinguishStrategy {
    pub operation: ComparingOperation,
    pub success_probability: Rational,
}

fn strategy_for(x1: &BoxTable, x2: &BoxTable, input: usize, first: impl Fn(usize) -> bool) -> DistinguishStrategy {
    let l = x1.layout();
    let tuple = l.decode_input(input);
    let out_b = l.subsystems()[1].outputs;
    let mut partition = vec![Vec::new(), Vec::new()];
    let mut success = Rational::zero();
    for o in 0..l.num_outputs() {
        let pair = (o / out_b, o % out_b);
        if first(o) {
            partition[0].push(pair);
            success += &x1.row(input)[o];
        } else {
            partition[1].push(pair);
            success += &x2.row(input)[o];
        }
    }
    DistinguishStrategy {
        operation: ComparingOperation::new((tuple[0], tuple[1]), partition),
        success_probability: success / rational::int(2),
    }
}

/// `1/2 + max_{x,y} |P_1 - P_2|_1 / 4`, with the Helstrom comparing
/// operation at a maximizing measurement. Ties go to the lexicographically
/// largest measurement, which picks `(1, 1)` for PR against anti-PR.
pub fn helstrom_lower_bound(x1: &BoxTable, x2: &BoxTable) -> Result<(Rational, DistinguishStrategy)> {
    require_bipartite_single(x1, x2)?;
    let mut best: Option<(Rational, usize)> = None;
    for x in 0..x1.layout().num_inputs() {
        let d = variational_distance(x1.row(x), x2.row(x))?;
        if best.as_ref().is_none_or(|(bd, _)| d >= *bd) {
            best = Some((d, x));
        }
    }
    let (d, x) = best.expect("layouts have at least one input");
    let bound = rational::half() + d / rational::int(4);
    let strategy = strategy_for(x1, x2, x, |o| x1.row(x)[o] >= x2.row(x)[o]);
    debug_assert_eq!(strategy.success_probability, bound);
    Ok((bound, strategy))
}

/// First joint input where the two rows have disjoint supports.
pub fn perfect_distinguish_search(e1: &BoxTable, e2: &BoxTable) -> Result<Option<DistinguishStrategy>> {
    require_bipartite_single(e1, e2)?;
    for x in 0..e1.layout().num_inputs() {
        let (r1, r2) = (e1.row(x), e2.row(x));
        if r1.iter().zip(r2).all(|(p, q)| p.is_zero() || q.is_zero()) {
            return Ok(Some(strategy_for(e1, e2, x, |o| r1[o].is_positive())));
        }
    }
    Ok(None)
}

/// Measurement and outcomes that occur under one box and never under the
/// other.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConclusiveEvent {
    pub measurement: Vec<usize>,
    pub outcomes: Vec<Vec<usize>>,
    pub probability: Rational,
}

/// Best conclusive event for `x` against `y`: the mass of `supp x \ supp y`
/// maximized over joint inputs, first maximizer on ties.
pub fn conclusive_distinguish(x: &BoxTable, y: &BoxTable) -> Result<Option<ConclusiveEvent>> {
    if !x.compatible(y) {
        return Err(BoxError::Incompatible(format!("{} vs {}", x.layout(), y.layout())));
    }
    let l = x.layout();
    let out_r = l.output_radices();
    let mut best: Option<(Rational, usize)> = None;
    for i in 0..l.num_inputs() {
        let mass: Rational = x
            .row(i)
            .iter()
            .zip(y.row(i))
            .filter(|(p, q)| q.is_zero() && p.is_positive())
            .map(|(p, _)| p)
            .sum();
        if mass.is_positive() && best.as_ref().is_none_or(|(m, _)| mass > *m) {
            best = Some((mass, i));
        }
    }
    Ok(best.map(|(probability, i)| ConclusiveEvent {
        measurement: l.decode_input(i),
        outcomes: (0..l.num_outputs())
            .filter(|&o| x.row(i)[o].is_positive() && y.row(i)[o].is_zero())
            .map(|o| decode(o, &out_r))
            .collect(),
        probability,
    }))
}

pub fn support_containment(e1: &BoxTable, e2: &BoxTable) -> Result<bool> {
    if !e1.compatible(e2) {
        return Err(BoxError::Incompatible(format!("{} vs {}", e1.layout(), e2.layout())));
    }
    Ok(e1
        .entries()
        .iter()
        .zip(e2.entries())
        .all(|(p, q)| p.is_zero() || q.is_positive()))
}

/// Joint distribution `p(i, j)` of sending member `i` and reading flag `j`
/// when `op` acts on each `B^{alpha_i}`.
pub fn simulate_discriminator(
    scenario: &DiscriminationScenario,
    op: &ComparingOperation,
) -> Result<Vec<Vec<Rational>>> {
    let n = scenario.len();
    if op.flags() != n {
        return Err(BoxError::Argument(format!("{} flags for {n} members", op.flags())));
    }
    scenario
        .members
        .iter()
        .map(|(p, spec)| {
            let img = op.apply(&isotropic(spec))?;
            Ok((0..n).map(|j| p * &img.entries()[j * n + j]).collect())
        })
        .collect()
}

/// Both sides of the theorem1 inequality for a simulated discriminator:
/// `sum_i p(i,i)(beta_i + max beta - 1)` and `(C + 3)/4 + max beta - 1`.
pub fn theorem1_sides(
    scenario: &DiscriminationScenario,
    op: &ComparingOperation,
    model: LocalModel,
) -> Result<(Rational, Rational)> {
    let p = simulate_discriminator(scenario, op)?;
    let max = scenario.max_beta();
    let lhs = scenario
        .betas
        .iter()
        .enumerate()
        .map(|(i, b)| &p[i][i] * (b + &max - rational::int(1)))
        .sum();
    Ok((lhs, theorem1_bound(scenario, model)?.bound))
}

/// Extremal boxes of a two-input bipartite scenario: the deterministic
/// vertices plus distinct random vertices that pass the rank test.
pub fn sampled_extremal_boxes(layout: &SystemLayout, candidates: usize, rng: &mut impl Rng) -> Result<Vec<BoxTable>> {
    let mut out = local_deterministic_vertices(layout).vertices;
    for _ in 0..candidates {
        let v = random_ns_vertex(layout, rng)?;
        if is_extremal(&v) && !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Local deterministic vertices against every other sampled extremal box;
/// returns the pairs with no perfect strategy.
pub fn deterministic_vs_extremal(
    layout: &SystemLayout,
    candidates: usize,
    rng: &mut impl Rng,
) -> Result<(usize, Vec<(usize, usize)>)> {
    let boxes = sampled_extremal_boxes(layout, candidates, rng)?;
    let det = local_deterministic_vertices(layout).vertices.len();
    let mut checked = 0;
    let mut missing = Vec::new();
    for d in 0..det {
        for e in 0..boxes.len() {
            if d == e {
                continue;
            }
            checked += 1;
            if perfect_distinguish_search(&boxes[d], &boxes[e])?.is_none() {
                missing.push((d, e));
            }
        }
    }
    Ok((checked, missing))
}

/// Rank of a dense rational matrix.
pub fn rank(mut rows: Vec<Vec<Rational>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r][c].clone();
        let prow: Vec<Rational> = rows[r].iter().map(|v| v / &pivot).collect();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (v, pv) in row.iter_mut().zip(&prow).skip(c) {
                    *v -= &f * pv;
                }
            }
        }
        rows[r] = prow;
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    r
}

/// Vertex test for the no-signaling polytope: the normalization and
/// single-subsystem no-signaling equalities, restricted to the support,
/// must have full column rank.
pub fn is_extremal(b: &BoxTable) -> bool {
    let l = b.layout();
    let support = b.support();
    if support.is_empty() {
        return false;
    }
    let col: std::collections::HashMap<usize, usize> = support.iter().enumerate().map(|(c, &i)| (i, c)).collect();
    let n_out = l.num_outputs();
    let mut rows = Vec::new();
    for x in 0..l.num_inputs() {
        let mut row = vec![Rational::zero(); support.len()];
        for o in 0..n_out {
            if let Some(&c) = col.get(&(x * n_out + o)) {
                row[c] = Rational::one();
            }
        }
        rows.push(row);
    }
    for eq in single_subsystem_equalities(l) {
        let mut row = vec![Rational::zero(); support.len()];
        for (i, coeff) in eq {
            if let Some(&c) = col.get(&i) {
                row[c] += rational::int(coeff.into());
            }
        }
        if row.iter().any(|v| !v.is_zero()) {
            rows.push(row);
        }
    }
    rank(rows) == support.len()
}

/// Optimal basic solution of a random linear objective over the
/// no-signaling polytope of `layout`; a vertex by construction.
pub fn random_ns_vertex(layout: &SystemLayout, rng: &mut impl Rng) -> Result<BoxTable> {
    let n_out = layout.num_outputs();
    let mut lp = LinearProgram::new(layout.num_entries());
    lp.objective = (0..layout.num_entries())
        .map(|i| (i, rational::int(rng.gen_range(-20..=20))))
        .collect();
    for x in 0..layout.num_inputs() {
        lp.add(
            (0..n_out).map(|o| (x * n_out + o, Rational::one())).collect(),
            Relation::Eq,
            Rational::one(),
        );
    }
    for eq in single_subsystem_equalities(layout) {
        lp.add(
            eq.into_iter().map(|(i, c)| (i, rational::int(c.into()))).collect(),
            Relation::Eq,
            Rational::zero(),
        );
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => BoxTable::new(layout.clone(), x),
        other => Err(BoxError::Solver(format!("no vertex found: {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{b_rst, flag_box, isotropic, ns_extremal_vertices_2x2};
    use crate::rational::{int, ratio};

    fn iso(alpha: Rational) -> BoxTable {
        isotropic(&IsotropicSpec::new(MaxNonlocalLabel::PR, alpha).unwrap())
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        let total: usize = (2..=8).map(|k| combinations(8, k).len()).sum();
        assert_eq!(total, 247);
    }

    #[test]
    fn helstrom_examples() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let apr = b_rst(MaxNonlocalLabel::ANTI_PR);
        let (bound, s) = helstrom_lower_bound(&pr, &apr).unwrap();
        assert_eq!(bound, int(1));
        assert_eq!(s.operation.measurement, (1, 1));
        assert_eq!(helstrom_lower_bound(&pr, &pr).unwrap().0, ratio(1, 2));
        let a = ratio(7, 8);
        let (bound, _) = helstrom_lower_bound(&iso(a.clone()), &apr).unwrap();
        assert_eq!(bound, ratio(1, 2) + a / int(2));
    }

    #[test]
    fn support_containment_examples() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let apr = b_rst(MaxNonlocalLabel::ANTI_PR);
        assert!(support_containment(&pr, &iso(ratio(7, 8))).unwrap());
        assert!(!support_containment(&pr, &apr).unwrap());
        assert!(support_containment(&pr, &pr).unwrap());
    }

    #[test]
    fn perfect_search_examples() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        assert!(perfect_distinguish_search(&pr, &iso(ratio(7, 8))).unwrap().is_none());
        let s = perfect_distinguish_search(&pr, &b_rst(MaxNonlocalLabel::ANTI_PR))
            .unwrap()
            .unwrap();
        assert_eq!(s.success_probability, int(1));
    }

    #[test]
    fn conclusive_examples() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let apr = b_rst(MaxNonlocalLabel::ANTI_PR);
        assert_eq!(conclusive_distinguish(&pr, &pr).unwrap(), None);
        let e = conclusive_distinguish(&pr, &apr).unwrap().unwrap();
        assert_eq!(e.probability, int(1));
        assert_eq!(e.measurement, vec![0, 0]);
        assert_eq!(e.outcomes, vec![vec![0, 0], vec![1, 1]]);
    }

    #[test]
    fn extremality_by_rank() {
        for v in &ns_extremal_vertices_2x2().vertices {
            assert!(is_extremal(v));
        }
        assert!(!is_extremal(&iso(ratio(7, 8))));
        assert!(is_extremal(&flag_box(0, 2).unwrap()));
    }

    #[test]
    fn alpha_formula_undefined_at_half() {
        assert!(alpha_formula(&int(0), &ratio(1, 2)).is_err());
        assert_eq!(alpha_formula(&int(1), &int(1)).unwrap(), int(1));
        assert_eq!(
            alpha_formula(&ratio(1, 2), &int(1)).unwrap(),
            maxflags_formula(&ratio(1, 2))
        );
    }

    #[test]
    fn theorem1_reduces_to_maxflags_at_beta_one() {
        let labels = [MaxNonlocalLabel::PR, MaxNonlocalLabel::ANTI_PR, "010".parse().unwrap()];
        let s = DiscriminationScenario::equal_weight(&labels, &int(1)).unwrap();
        let t = theorem1_bound(&s, LocalModel::Deterministic).unwrap();
        let w = vec![ratio(1, 3); 3];
        let c = corollary_maxflags_bound(&labels, &w, &int(1), LocalModel::Deterministic).unwrap();
        assert_eq!(t.success_bound, Some(c.bound));
    }

    #[test]
    fn simulated_comparing_discriminator_respects_theorem1() {
        let labels = [MaxNonlocalLabel::PR, MaxNonlocalLabel::ANTI_PR];
        let s = DiscriminationScenario::equal_weight(&labels, &int(1)).unwrap();
        let (lhs, rhs) = theorem1_sides(&s, &ComparingOperation::pr_vs_anti_pr(), LocalModel::Deterministic).unwrap();
        assert_eq!((lhs, rhs), (int(1), int(1)));
        let swapped = ComparingOperation::new((1, 1), vec![vec![(0, 0), (1, 1)], vec![(0, 1), (1, 0)]]);
        let (lhs, _) = theorem1_sides(&s, &swapped, LocalModel::Deterministic).unwrap();
        assert_eq!(lhs, int(0));
    }

    #[test]
    fn deterministic_boxes_separate_from_ternary_extremal_boxes() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let l = SystemLayout::bipartite(crate::SubsystemSpec::new(2, 3), crate::SubsystemSpec::new(2, 2));
        let (checked, missing) = deterministic_vs_extremal(&l, 20, &mut rng).unwrap();
        assert!(checked > 0);
        assert!(missing.is_empty(), "{missing:?}");
    }

    #[test]
    fn random_vertices_pass_the_rank_test() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let l = SystemLayout::bipartite(crate::SubsystemSpec::new(2, 3), crate::SubsystemSpec::new(2, 2));
        for _ in 0..10 {
            let v = random_ns_vertex(&l, &mut rng).unwrap();
            assert!(is_extremal(&v));
        }
    }
}
