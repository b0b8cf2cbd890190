//! Non-locality cost `C(P) = min { p : P = pX + (1-p)L, X in NS, L in LR_ns }`
//! as an exact linear program with a checkable certificate.
//!
//! Writing `L = sum_m lambda_m V_m / (1 - p)` over the local vertices and
//! `Y = pX`, the decomposition becomes `P = Y + sum_m lambda_m V_m`. Since
//! `P` and every vertex are fully no-signaling, `Y = P - sum lambda V` is
//! automatically no-signaling with all row sums equal to `1 - sum lambda`,
//! so the program reduces to
//!
//! ```text
//! maximize sum_m lambda_m  subject to  sum_m lambda_m V_m <= P,  lambda >= 0
//! ```
//!
//! and `C(P) = 1 - max`. Coordinates where `P` vanishes force every vertex
//! touching them to weight zero, so those vertices and rows are dropped up
//! front. [`Formulation::Explicit`] keeps `Y` as variables with the
//! no-signaling and equal-row-sum equalities spelled out; it is slower and
//! exists to cross-check the reduced program.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::catalog::{local_deterministic_vertices, ns_extremal_single_site, VertexKind, VertexSet};
use crate::error::{BoxError, Result};
use crate::layout::{SubsystemSpec, SystemLayout};
use crate::nonsignaling::{self, CutMode};
use crate::rational::{self, Rational};
use crate::simplex::{LinearProgram, LpOutcome, Relation};
use crate::table::BoxTable;

/// Which local boxes `L` may be built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LocalModel {
    /// Products of per-subsystem deterministic functions.
    Deterministic,
    /// Products across the two sites of fully no-signaling single-site
    /// vertices; nonlocal correlations inside one site are allowed.
    LrnsProducts,
}

impl LocalModel {
    pub fn vertices(self, layout: &SystemLayout) -> Result<VertexSet> {
        match self {
            LocalModel::Deterministic => Ok(local_deterministic_vertices(layout)),
            LocalModel::LrnsProducts => lrns_vertices(layout),
        }
    }
}

impl fmt::Display for LocalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocalModel::Deterministic => "deterministic",
            LocalModel::LrnsProducts => "lrns-products",
        })
    }
}

/// Vertices of the fully no-signaling polytope of a single site, for the
/// site shapes that show up here.
fn site_vertices(site: &[SubsystemSpec]) -> Result<Vec<BoxTable>> {
    let layout = SystemLayout::single_site(site.to_vec())?;
    let multi_input = site.iter().filter(|s| s.inputs > 1).count();
    if multi_input <= 1 {
        // At most one subsystem has a choice of input: every no-signaling
        // box is local, so the deterministic boxes are the vertices.
        return Ok(local_deterministic_vertices(&layout).vertices);
    }
    if site == [SubsystemSpec::BINARY; 2] {
        return Ok(ns_extremal_single_site());
    }
    Err(BoxError::Argument(format!(
        "no vertex enumeration for a site of shape {layout}"
    )))
}

fn lrns_vertices(layout: &SystemLayout) -> Result<VertexSet> {
    if layout.num_sites() != 2 {
        return Err(BoxError::Layout(format!("LR_ns products need two sites, got {layout}")));
    }
    let alice = site_vertices(&layout.sites()[0])?;
    let bob = site_vertices(&layout.sites()[1])?;
    let mut vertices = Vec::with_capacity(alice.len() * bob.len());
    for a in &alice {
        for b in &bob {
            vertices.push(a.tensor_new_sites(b)?);
        }
    }
    VertexSet::new(layout.clone(), vertices, VertexKind::LrnsProduct)
}

#[derive(Clone, Debug)]
pub struct CostProblem {
    pub target: BoxTable,
    pub local_model: VertexSet,
}

impl CostProblem {
    pub fn new(target: BoxTable, local_model: VertexSet) -> Result<Self> {
        if !target.layout().compatible(&local_model.layout) {
            return Err(BoxError::Incompatible(format!(
                "target on {} but local model on {}",
                target.layout(),
                local_model.layout
            )));
        }
        Ok(Self { target, local_model })
    }

    pub fn with_model(target: BoxTable, model: LocalModel) -> Result<Self> {
        let vertices = model.vertices(target.layout())?;
        Self::new(target, vertices)
    }
}

/// Witness `target = y + sum_m lambda[m] * vertex_m` with every row of `y`
/// summing to `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostCertificate {
    pub p: Rational,
    pub y: Vec<Rational>,
    pub lambda: BTreeMap<usize, Rational>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Formulation {
    #[default]
    Reduced,
    Explicit,
}

pub fn nonlocal_cost(problem: &CostProblem) -> Result<CostCertificate> {
    nonlocal_cost_with(problem, Formulation::Reduced)
}

pub fn nonlocal_cost_with(problem: &CostProblem, formulation: Formulation) -> Result<CostCertificate> {
    if let Some(w) = nonsignaling::fully_nonsignaling_witness(
        problem.target.layout(),
        problem.target.entries(),
        CutMode::SingleSubsystem,
    ) {
        return Err(BoxError::Contract(format!(
            "cost target is not fully no-signaling: {w}"
        )));
    }
    match formulation {
        Formulation::Reduced => solve_reduced(problem),
        Formulation::Explicit => solve_explicit(problem),
    }
}

fn solve_reduced(problem: &CostProblem) -> Result<CostCertificate> {
    let target = problem.target.entries();
    let support: Vec<usize> = problem.target.support();
    let mut row_of = vec![usize::MAX; target.len()];
    for (r, &e) in support.iter().enumerate() {
        row_of[e] = r;
    }
    let eligible: Vec<usize> = problem
        .local_model
        .vertices
        .iter()
        .enumerate()
        .filter(|(_, v)| {
            v.entries()
                .iter()
                .zip(target)
                .all(|(vp, tp)| vp.is_zero() || tp.is_positive())
        })
        .map(|(m, _)| m)
        .collect();

    let mut lp = LinearProgram::new(eligible.len());
    lp.objective = (0..eligible.len()).map(|j| (j, Rational::one())).collect();
    let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); support.len()];
    for (j, &m) in eligible.iter().enumerate() {
        for (e, v) in problem.local_model.vertices[m].entries().iter().enumerate() {
            if !v.is_zero() {
                rows[row_of[e]].push((j, v.clone()));
            }
        }
    }
    for (terms, &e) in rows.into_iter().zip(&support) {
        lp.add(terms, Relation::Le, target[e].clone());
    }
    let (x, local_weight) = match lp.solve() {
        LpOutcome::Optimal { x, value } => (x, value),
        other => {
            return Err(BoxError::Solver(format!(
                "returned {other:?} for a no-signaling target"
            )))
        }
    };
    let mut lambda = BTreeMap::new();
    let mut y = target.to_vec();
    for (j, w) in x.into_iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let m = eligible[j];
        for (ye, v) in y.iter_mut().zip(problem.local_model.vertices[m].entries()) {
            if !v.is_zero() {
                *ye -= &w * v;
            }
        }
        lambda.insert(m, w);
    }
    Ok(CostCertificate {
        p: Rational::one() - local_weight,
        y,
        lambda,
    })
}

fn solve_explicit(problem: &CostProblem) -> Result<CostCertificate> {
    let layout = problem.target.layout();
    let target = problem.target.entries();
    let n = target.len();
    let n_out = layout.num_outputs();
    let verts = &problem.local_model.vertices;
    let mut lp = LinearProgram::new(n + verts.len());
    // minimize p = row sum of Y at input 0
    lp.objective = (0..n_out).map(|a| (a, -Rational::one())).collect();
    for (e, t) in target.iter().enumerate() {
        let mut terms = vec![(e, Rational::one())];
        for (m, v) in verts.iter().enumerate() {
            if !v.entries()[e].is_zero() {
                terms.push((n + m, v.entries()[e].clone()));
            }
        }
        lp.add(terms, Relation::Eq, t.clone());
    }
    for row in nonsignaling::single_subsystem_equalities(layout) {
        let terms = row
            .into_iter()
            .map(|(e, c)| (e, Rational::from_integer(c.into())))
            .collect();
        lp.add(terms, Relation::Eq, Rational::zero());
    }
    for x in 1..layout.num_inputs() {
        let mut terms: Vec<(usize, Rational)> = (0..n_out).map(|a| (x * n_out + a, Rational::one())).collect();
        terms.extend((0..n_out).map(|a| (a, -Rational::one())));
        lp.add(terms, Relation::Eq, Rational::zero());
    }
    let (x, value) = match lp.solve() {
        LpOutcome::Optimal { x, value } => (x, value),
        other => {
            return Err(BoxError::Solver(format!(
                "returned {other:?} for a no-signaling target"
            )))
        }
    };
    let lambda = x[n..]
        .iter()
        .enumerate()
        .filter(|(_, w)| !w.is_zero())
        .map(|(m, w)| (m, w.clone()))
        .collect();
    Ok(CostCertificate {
        p: -value,
        y: x[..n].to_vec(),
        lambda,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CertificateCheck {
    pub violations: Vec<String>,
}

impl CertificateCheck {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks every certificate invariant exactly, independently of the
/// solver that produced it.
pub fn verify_certificate(target: &BoxTable, cert: &CostCertificate, model: &VertexSet) -> CertificateCheck {
    let mut bad = Vec::new();
    let layout = target.layout();
    if !layout.compatible(&model.layout) {
        bad.push(format!("model layout {} differs from target {}", model.layout, layout));
        return CertificateCheck { violations: bad };
    }
    if cert.y.len() != layout.num_entries() {
        bad.push(format!(
            "Y has {} entries, expected {}",
            cert.y.len(),
            layout.num_entries()
        ));
        return CertificateCheck { violations: bad };
    }
    if let Some((e, v)) = cert.y.iter().enumerate().find(|(_, v)| v.is_negative()) {
        bad.push(format!("Y[{e}] = {} is negative", rational::format(v)));
    }
    let n_out = layout.num_outputs();
    for (x, row) in cert.y.chunks(n_out).enumerate() {
        let s: Rational = row.iter().sum();
        if s != cert.p {
            bad.push(format!(
                "Y row {x} sums to {}, expected p = {}",
                rational::format(&s),
                rational::format(&cert.p)
            ));
            break;
        }
    }
    if let Some(w) = nonsignaling::fully_nonsignaling_witness(layout, &cert.y, CutMode::SingleSubsystem) {
        bad.push(format!("Y is signaling: {w}"));
    }
    let mut total = Rational::zero();
    let mut recon = cert.y.clone();
    for (&m, w) in &cert.lambda {
        if w.is_negative() {
            bad.push(format!("lambda[{m}] = {} is negative", rational::format(w)));
        }
        let Some(v) = model.vertices.get(m) else {
            bad.push(format!("lambda refers to vertex {m} of {}", model.len()));
            continue;
        };
        total += w;
        for (r, p) in recon.iter_mut().zip(v.entries()) {
            if !p.is_zero() {
                *r += w * p;
            }
        }
    }
    if total != Rational::one() - &cert.p {
        bad.push(format!(
            "lambda sums to {}, expected 1 - p = {}",
            rational::format(&total),
            rational::format(&(Rational::one() - &cert.p))
        ));
    }
    if recon != target.entries() {
        bad.push("Y + sum lambda V does not reproduce the target".into());
    }
    CertificateCheck { violations: bad }
}

/// `<00> + <01> + <10> - <11>` with `<ij> = P(a = b | ij) - P(a != b | ij)`.
pub fn chsh_gamma(b: &BoxTable) -> Result<Rational> {
    if !b.layout().is_2x2() {
        return Err(BoxError::Layout(format!("CHSH needs a 2x2 box, got {}", b.layout())));
    }
    let mut gamma = Rational::zero();
    for x in 0..2 {
        for y in 0..2 {
            let row = b.row(x * 2 + y);
            // outputs 00, 01, 10, 11
            let corr = &row[0] + &row[3] - &row[1] - &row[2];
            if x == 1 && y == 1 {
                gamma -= corr;
            } else {
                gamma += corr;
            }
        }
    }
    Ok(gamma)
}

/// Cost of `alpha B_000 + (1 - alpha) B_001`: `4 alpha - 3` above `3/4`,
/// zero on the local segment `[1/4, 3/4]`, and `1 - 4 alpha` below `1/4`
/// where the anti-PR component dominates.
pub fn isotropic_cost_closed_form(alpha: &Rational) -> Result<Rational> {
    if alpha.is_negative() || *alpha > Rational::one() {
        return Err(BoxError::Argument(format!(
            "alpha = {} outside [0, 1]",
            rational::format(alpha)
        )));
    }
    let four = rational::int(4);
    let upper = &four * alpha - rational::int(3);
    let lower = Rational::one() - &four * alpha;
    Ok(upper.max(lower).max(Rational::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{b_rst, isotropic, IsotropicSpec, MaxNonlocalLabel};
    use crate::rational::{int, ratio};

    fn iso(alpha: Rational) -> BoxTable {
        isotropic(&IsotropicSpec::new(MaxNonlocalLabel::PR, alpha).unwrap())
    }

    fn det16() -> VertexSet {
        local_deterministic_vertices(&SystemLayout::bipartite_2x2())
    }

    #[test]
    fn chsh_values() {
        assert_eq!(chsh_gamma(&b_rst(MaxNonlocalLabel::PR)).unwrap(), int(4));
        assert_eq!(chsh_gamma(&b_rst(MaxNonlocalLabel::ANTI_PR)).unwrap(), int(-4));
        for v in det16().vertices {
            let g = chsh_gamma(&v).unwrap();
            assert!(g >= int(-2) && g <= int(2));
        }
        assert!(chsh_gamma(&crate::catalog::flag_box(0, 2).unwrap()).is_err());
    }

    #[test]
    fn pr_costs_one() {
        let p = CostProblem::new(b_rst(MaxNonlocalLabel::PR), det16()).unwrap();
        let c = nonlocal_cost(&p).unwrap();
        assert_eq!(c.p, int(1));
        assert!(verify_certificate(&p.target, &c, &p.local_model).is_ok());
    }

    #[test]
    fn iso_seven_eighths_costs_half() {
        let p = CostProblem::new(iso(ratio(7, 8)), det16()).unwrap();
        let c = nonlocal_cost(&p).unwrap();
        assert_eq!(c.p, ratio(1, 2));
        assert!(verify_certificate(&p.target, &c, &p.local_model).is_ok());
    }

    #[test]
    fn deterministic_vertices_cost_zero() {
        let model = det16();
        for v in &model.vertices {
            let c = nonlocal_cost(&CostProblem::new(v.clone(), model.clone()).unwrap()).unwrap();
            assert_eq!(c.p, int(0));
            assert!(c.y.iter().all(|y| y.is_zero()));
        }
    }

    #[test]
    fn tampered_certificate_fails() {
        let p = CostProblem::new(iso(ratio(13, 16)), det16()).unwrap();
        let mut c = nonlocal_cost(&p).unwrap();
        let (&k, w) = c.lambda.iter().next().unwrap();
        let neg = -w.clone();
        c.lambda.insert(k, neg);
        assert!(!verify_certificate(&p.target, &c, &p.local_model).is_ok());
    }

    #[test]
    fn hand_built_pr_certificate() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let c = CostCertificate {
            p: int(1),
            y: pr.entries().to_vec(),
            lambda: BTreeMap::new(),
        };
        assert!(verify_certificate(&pr, &c, &det16()).is_ok());
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(isotropic_cost_closed_form(&int(1)).unwrap(), int(1));
        assert_eq!(isotropic_cost_closed_form(&ratio(3, 4)).unwrap(), int(0));
        assert_eq!(isotropic_cost_closed_form(&ratio(13, 16)).unwrap(), ratio(1, 4));
        assert_eq!(isotropic_cost_closed_form(&ratio(1, 8)).unwrap(), ratio(1, 2));
        assert!(isotropic_cost_closed_form(&ratio(9, 8)).is_err());
    }

    #[test]
    fn explicit_formulation_agrees_on_2x2() {
        for alpha in [ratio(1, 8), ratio(1, 2), ratio(13, 16), int(1)] {
            let p = CostProblem::new(iso(alpha), det16()).unwrap();
            let a = nonlocal_cost_with(&p, Formulation::Reduced).unwrap();
            let b = nonlocal_cost_with(&p, Formulation::Explicit).unwrap();
            assert_eq!(a.p, b.p);
            assert!(verify_certificate(&p.target, &b, &p.local_model).is_ok());
        }
    }

    #[test]
    fn signaling_target_is_rejected() {
        let b = BoxTable::from_fn(SystemLayout::bipartite_2x2(), |x, a| {
            if a[0] == x[1] && a[1] == 0 {
                int(1)
            } else {
                int(0)
            }
        })
        .unwrap();
        let p = CostProblem::new(b, det16()).unwrap();
        assert!(matches!(nonlocal_cost(&p), Err(BoxError::Contract(_))));
    }

    #[test]
    fn lrns_model_sizes() {
        assert_eq!(
            LocalModel::LrnsProducts.vertices(&SystemLayout::abcd()).unwrap().len(),
            576
        );
        assert_eq!(
            LocalModel::LrnsProducts
                .vertices(&SystemLayout::bipartite_2x2())
                .unwrap()
                .len(),
            16
        );
        let flagged = SystemLayout::new(vec![
            vec![SubsystemSpec::flag(3), SubsystemSpec::BINARY],
            vec![SubsystemSpec::flag(3), SubsystemSpec::BINARY],
        ])
        .unwrap();
        assert_eq!(LocalModel::LrnsProducts.vertices(&flagged).unwrap().len(), 144);
    }
}
