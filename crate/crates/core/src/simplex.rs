//! Dense two-phase simplex over exact rationals.
//!
//! Entering variables follow the largest reduced cost until a run of
//! degenerate pivots is seen, after which the phase switches to Bland's
//! smallest-index rule, which cannot cycle. Ratio-test ties always go to
//! the smallest basic index.
//!
//! [`LinearProgram::solve`] first runs the same tableau in `f64`, on
//! slightly perturbed right-hand sides, to guess an optimal basis. The exact
//! tableau is pivoted into that basis, repaired with a single artificial
//! column if it is infeasible, and the exact simplex finishes from there. Every reported optimum is exact; the float
//! pass only chooses the starting point. [`LinearProgram::solve_cold`]
//! skips the guess.

use std::cmp::Ordering;

use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub terms: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// `maximize objective . x` subject to `constraints`, `x >= 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<(usize, Rational)>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

const DEGENERATE_STREAK: usize = 50;
const PARALLEL_ROWS: usize = 64;
const F64_EPS: f64 = 1e-12;
const F64_PERTURBATION: f64 = 1e-8;
const DD_EPS: f64 = 1e-24;
const PIVOT_TOL: f64 = 1e-9;
const DD_PERTURBATION: f64 = 1e-18;
const FLOAT_PIVOT_FACTOR: usize = 10;

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            ..Self::default()
        }
    }

    pub fn add(&mut self, terms: Vec<(usize, Rational)>, relation: Relation, rhs: Rational) {
        self.constraints.push(Constraint { terms, relation, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        let coarse = self.guide::<f64>(F64_PERTURBATION, None);
        if let Some(basis) = coarse.and_then(|b| self.guide::<TwoFloat>(DD_PERTURBATION, Some(&b))) {
            let mut exact = Tableau::<Rational>::build(self);
            exact.crash(&basis);
            exact.restore_feasibility();
            return match exact.phase_one(None) {
                Some(true) => exact.phase_two(self, None).expect("no pivot limit"),
                _ => LpOutcome::Infeasible,
            };
        }
        self.solve_cold()
    }

    /// Exact simplex from the slack/artificial basis.
    pub fn solve_cold(&self) -> LpOutcome {
        let mut t = Tableau::<Rational>::build(self);
        match t.phase_one(None) {
            Some(true) => t.phase_two(self, None).expect("no pivot limit"),
            _ => LpOutcome::Infeasible,
        }
    }

    /// Basis reached by an inexact tableau started from `start`, optimal or
    /// not once the pivot budget runs out. `None` when the pass calls the
    /// program infeasible.
    fn guide<T: Scalar>(&self, perturbation: f64, start: Option<&[usize]>) -> Option<Vec<usize>> {
        let mut t = Tableau::<T>::build(self);
        // Spread inequality right-hand sides apart to break degeneracy.
        let width = t.width();
        for (i, c) in self.constraints.iter().enumerate() {
            if c.relation != Relation::Eq {
                let spread = ((i * 7919) % 997) as f64 / 997.0;
                let delta = Rational::from_float(perturbation * (1.0 + spread)).expect("finite");
                t.rows[i][width].add_assign(&T::from_rational(&delta));
            }
        }
        if let Some(start) = start {
            t.crash(start);
            t.restore_feasibility();
        }
        let limit = FLOAT_PIVOT_FACTOR * (t.rows.len() + t.width());
        match t.phase_one(Some(limit)) {
            Some(false) => return None,
            Some(true) => {
                let _ = t.phase_two(self, Some(limit));
            }
            None => {}
        }
        let kinds = &t.kinds;
        Some(
            t.basis
                .iter()
                .copied()
                .filter(|&b| kinds[b] != ColumnKind::Artificial)
                .collect(),
        )
    }
}

/// Arithmetic the tableau needs. Exact for [`Rational`], tolerance-based
/// for `f64`.
trait Scalar: Clone + Send + Sync {
    fn zero() -> Self;
    fn from_rational(v: &Rational) -> Self;
    fn is_zero(&self) -> bool;
    fn is_positive(&self) -> bool;
    fn add_assign(&mut self, v: &Self);
    fn div_assign(&mut self, v: &Self);
    /// `self -= f * p`
    fn sub_mul(&mut self, f: &Self, p: &Self);
    fn div(&self, v: &Self) -> Self;
    fn neg(&self) -> Self;
    fn compare(&self, other: &Self) -> Ordering;
    /// Positive beyond the pivot tolerance, for reduced costs and pivot
    /// candidates. Tableau coefficients come from integer data, so the
    /// inexact passes can use a much coarser tolerance here than for values.
    fn clearly_positive(&self) -> bool;
    /// Zero for entries that must not be pivoted on; larger is safer.
    fn pivot_quality(&self) -> f64;
    fn to_exact(&self) -> Option<Rational>;
}

impl Scalar for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_rational(v: &Rational) -> Self {
        v.clone()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn add_assign(&mut self, v: &Self) {
        *self += v;
    }
    fn div_assign(&mut self, v: &Self) {
        *self /= v;
    }
    fn sub_mul(&mut self, f: &Self, p: &Self) {
        *self -= f * p;
    }
    fn div(&self, v: &Self) -> Self {
        self / v
    }
    fn neg(&self) -> Self {
        -self
    }
    fn compare(&self, other: &Self) -> Ordering {
        self.cmp(other)
    }
    fn clearly_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn pivot_quality(&self) -> f64 {
        if Zero::is_zero(self) {
            0.0
        } else {
            1.0
        }
    }
    fn to_exact(&self) -> Option<Rational> {
        Some(self.clone())
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_rational(v: &Rational) -> Self {
        v.to_f64().unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        self.abs() <= F64_EPS
    }
    fn is_positive(&self) -> bool {
        *self > F64_EPS
    }
    fn add_assign(&mut self, v: &Self) {
        *self += v;
    }
    fn div_assign(&mut self, v: &Self) {
        *self /= v;
    }
    fn sub_mul(&mut self, f: &Self, p: &Self) {
        *self -= f * p;
    }
    fn div(&self, v: &Self) -> Self {
        self / v
    }
    fn neg(&self) -> Self {
        -self
    }
    fn compare(&self, other: &Self) -> Ordering {
        if (self - other).abs() <= F64_EPS {
            Ordering::Equal
        } else {
            self.total_cmp(other)
        }
    }
    fn clearly_positive(&self) -> bool {
        *self > PIVOT_TOL
    }
    fn pivot_quality(&self) -> f64 {
        if self.abs() > PIVOT_TOL {
            self.abs()
        } else {
            0.0
        }
    }
    fn to_exact(&self) -> Option<Rational> {
        None
    }
}

impl Scalar for TwoFloat {
    fn zero() -> Self {
        TwoFloat::from(0.0)
    }
    fn from_rational(v: &Rational) -> Self {
        let hi = v.to_f64().unwrap_or(f64::NAN);
        let lo = Rational::from_float(hi).and_then(|h| (v - h).to_f64()).unwrap_or(0.0);
        TwoFloat::new_add(hi, lo)
    }
    fn is_zero(&self) -> bool {
        self.abs() <= DD_EPS
    }
    fn is_positive(&self) -> bool {
        *self > DD_EPS
    }
    fn add_assign(&mut self, v: &Self) {
        *self += *v;
    }
    fn div_assign(&mut self, v: &Self) {
        *self /= *v;
    }
    fn sub_mul(&mut self, f: &Self, p: &Self) {
        *self -= *f * *p;
    }
    fn div(&self, v: &Self) -> Self {
        *self / *v
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn compare(&self, other: &Self) -> Ordering {
        let d = *self - *other;
        if d.abs() <= DD_EPS {
            Ordering::Equal
        } else if d.is_sign_negative() {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
    fn clearly_positive(&self) -> bool {
        *self > PIVOT_TOL
    }
    fn pivot_quality(&self) -> f64 {
        let m = self.hi().abs();
        if m > PIVOT_TOL {
            m
        } else {
            0.0
        }
    }
    fn to_exact(&self) -> Option<Rational> {
        None
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Original,
    Slack,
    Artificial,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    /// Reduced costs; the last slot holds minus the objective value.
    cost: Vec<T>,
    basis: Vec<usize>,
    kinds: Vec<ColumnKind>,
    banned: Vec<bool>,
}

/// Terms, whether the row was negated, relation and right-hand side.
type NormalizedRow<'a> = (&'a [(usize, Rational)], bool, Relation, &'a Rational);

impl<T: Scalar> Tableau<T> {
    fn width(&self) -> usize {
        self.kinds.len()
    }

    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars;
        let m = lp.constraints.len();
        let mut kinds = vec![ColumnKind::Original; n];
        // Normalize to non-negative right-hand sides first.
        let normalized: Vec<NormalizedRow> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs.is_negative() {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (&c.terms[..], true, rel, &c.rhs)
                } else {
                    (&c.terms[..], false, c.relation, &c.rhs)
                }
            })
            .collect();
        let mut slack_col = vec![None; m];
        let mut art_col = vec![None; m];
        for (i, (_, _, rel, _)) in normalized.iter().enumerate() {
            if *rel != Relation::Eq {
                slack_col[i] = Some(kinds.len());
                kinds.push(ColumnKind::Slack);
            }
        }
        for (i, (_, _, rel, _)) in normalized.iter().enumerate() {
            if *rel != Relation::Le {
                art_col[i] = Some(kinds.len());
                kinds.push(ColumnKind::Artificial);
            }
        }
        let width = kinds.len();
        let one = T::from_rational(&Rational::from_integer(1.into()));
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        for (i, (terms, flip, rel, rhs)) in normalized.into_iter().enumerate() {
            let mut row = vec![T::zero(); width + 1];
            for (j, v) in terms {
                assert!(*j < n, "constraint refers to variable {j} of {n}");
                let v = T::from_rational(v);
                row[*j].add_assign(&if flip { v.neg() } else { v });
            }
            if let Some(s) = slack_col[i] {
                row[s] = if rel == Relation::Le { one.clone() } else { one.neg() };
            }
            if let Some(a) = art_col[i] {
                row[a] = one.clone();
                basis.push(a);
            } else {
                basis.push(slack_col[i].expect("Le rows have a slack"));
            }
            let rhs = T::from_rational(rhs);
            row[width] = if flip { rhs.neg() } else { rhs };
            rows.push(row);
        }
        Self {
            rows,
            cost: vec![T::zero(); width + 1],
            basis,
            banned: vec![false; width],
            kinds,
        }
    }

    /// Maximizes minus the sum of artificials, then expels them. `None`
    /// when the pivot limit runs out.
    fn phase_one(&mut self, limit: Option<usize>) -> Option<bool> {
        let width = self.width();
        if !self.basis.iter().any(|&b| self.kinds[b] == ColumnKind::Artificial) {
            self.expel_artificials();
            return Some(true);
        }
        let mut cost = vec![T::zero(); width + 1];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if self.kinds[b] == ColumnKind::Artificial {
                for (j, v) in row.iter().enumerate() {
                    if (j == width || self.kinds[j] != ColumnKind::Artificial) && !v.is_zero() {
                        cost[j].add_assign(v);
                    }
                }
            }
        }
        self.cost = cost;
        if !self.optimize(limit)? {
            unreachable!("phase 1 objective is bounded above by zero");
        }
        if self.cost[width].is_positive() {
            return Some(false);
        }
        self.expel_artificials();
        Some(true)
    }

    fn phase_two(&mut self, lp: &LinearProgram, limit: Option<usize>) -> Option<LpOutcome> {
        let width = self.width();
        let mut c = vec![T::zero(); width + 1];
        for (j, v) in &lp.objective {
            c[*j].add_assign(&T::from_rational(v));
        }
        let mut cost = c.clone();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = &c[b];
            if cb.is_zero() {
                continue;
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    cost[j].sub_mul(cb, v);
                }
            }
        }
        self.cost = cost;
        if !self.optimize(limit)? {
            return Some(LpOutcome::Unbounded);
        }
        // The float pass reports zeros; only its basis is used.
        let mut x = vec![<Rational as Zero>::zero(); lp.num_vars];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < lp.num_vars {
                x[b] = row[width].to_exact().unwrap_or_default();
            }
        }
        let value = lp.objective.iter().map(|(j, v)| v * &x[*j]).sum();
        Some(LpOutcome::Optimal { x, value })
    }

    /// Runs pivots to optimality. Returns `Some(false)` when unbounded and
    /// `None` when `limit` pivots were not enough.
    fn optimize(&mut self, limit: Option<usize>) -> Option<bool> {
        let width = self.width();
        let mut bland = false;
        let mut streak = 0;
        let mut pivots = 0;
        loop {
            let entering = if bland {
                (0..width).find(|&j| !self.banned[j] && self.cost[j].clearly_positive())
            } else {
                let mut best: Option<usize> = None;
                for j in 0..width {
                    if self.banned[j] || !self.cost[j].clearly_positive() {
                        continue;
                    }
                    if best.is_none_or(|b| self.cost[j].compare(&self.cost[b]) == Ordering::Greater) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = entering else {
                return Some(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[col];
                if !a.clearly_positive() {
                    continue;
                }
                let ratio = row[width].div(a);
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => match ratio.compare(lr) {
                        Ordering::Less => true,
                        Ordering::Equal => self.basis[i] < self.basis[*li],
                        Ordering::Greater => false,
                    },
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((row, ratio)) = leave else {
                return Some(false);
            };
            if ratio.is_zero() {
                streak += 1;
                if streak >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            self.pivot(row, col);
            pivots += 1;
            if limit.is_some_and(|l| pivots > l) {
                return None;
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let pivot = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                v.div_assign(&pivot);
            }
        }
        let prow = std::mem::take(&mut self.rows[r]);
        let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
        let eliminate = |row: &mut Vec<T>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for &j in &nz {
                row[j].sub_mul(&f, &prow[j]);
            }
            row[c] = T::zero();
        };
        if self.rows.len() >= PARALLEL_ROWS {
            self.rows.par_iter_mut().for_each(|row| {
                if !row.is_empty() {
                    eliminate(row)
                }
            });
        } else {
            for row in self.rows.iter_mut() {
                if !row.is_empty() {
                    eliminate(row);
                }
            }
        }
        eliminate(&mut self.cost);
        self.rows[r] = prow;
        self.basis[r] = c;
    }

    /// Pivots the given columns into the basis, skipping any that depend
    /// on those already placed. Returns the number skipped.
    fn crash(&mut self, columns: &[usize]) -> usize {
        let mut skipped = 0;
        let mut fixed = vec![false; self.rows.len()];
        for &c in columns {
            if let Some(r) = self.basis.iter().position(|&b| b == c) {
                fixed[r] = true;
                continue;
            }
            let best = (0..self.rows.len())
                .filter(|&i| !fixed[i])
                .map(|i| (i, self.rows[i][c].pivot_quality()))
                .filter(|&(_, q)| q > 0.0)
                .fold(None, |acc: Option<(usize, f64)>, (i, q)| match acc {
                    Some((_, bq)) if bq >= q => acc,
                    _ => Some((i, q)),
                });
            let Some((r, _)) = best else {
                skipped += 1;
                continue;
            };
            self.pivot(r, c);
            fixed[r] = true;
        }
        skipped
    }

    /// Makes a basis with negative values primal feasible by pivoting in one
    /// artificial column with `-1` on every negative row; phase 1 then
    /// drives it out.
    fn restore_feasibility(&mut self) {
        let width = self.width();
        let negative: Vec<usize> = (0..self.rows.len())
            .filter(|&i| self.rows[i][width].neg().is_positive())
            .collect();
        let Some(&worst) = negative
            .iter()
            .min_by(|&&a, &&b| self.rows[a][width].compare(&self.rows[b][width]))
        else {
            return;
        };
        let minus_one = T::from_rational(&Rational::from_integer((-1).into()));
        for (i, row) in self.rows.iter_mut().enumerate() {
            let v = if negative.contains(&i) {
                minus_one.clone()
            } else {
                T::zero()
            };
            row.insert(width, v);
        }
        self.cost.insert(width, T::zero());
        self.kinds.push(ColumnKind::Artificial);
        self.banned.push(false);
        self.pivot(worst, width);
    }

    /// After phase 1: pivot zero-valued artificials out of the basis, drop
    /// redundant rows, and ban artificial columns from re-entering.
    fn expel_artificials(&mut self) {
        let width = self.width();
        let mut i = 0;
        while i < self.rows.len() {
            if self.kinds[self.basis[i]] == ColumnKind::Artificial {
                let col = (0..width)
                    .find(|&j| self.kinds[j] != ColumnKind::Artificial && self.rows[i][j].pivot_quality() > 0.0);
                match col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for j in 0..width {
            if self.kinds[j] == ColumnKind::Artificial {
                self.banned[j] = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn t(pairs: &[(usize, i64)]) -> Vec<(usize, Rational)> {
        pairs.iter().map(|&(j, v)| (j, int(v))).collect()
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y; x <= 4; 2y <= 12; 3x + 2y <= 18  -> (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = t(&[(0, 3), (1, 5)]);
        lp.add(t(&[(0, 1)]), Relation::Le, int(4));
        lp.add(t(&[(1, 2)]), Relation::Le, int(12));
        lp.add(t(&[(0, 3), (1, 2)]), Relation::Le, int(18));
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(value, int(36));
                assert_eq!(x, vec![int(2), int(6)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_and_ge_need_phase_one() {
        // min x + y (max -x - y); x + 2y = 3; x >= 1/2
        let mut lp = LinearProgram::new(2);
        lp.objective = t(&[(0, -1), (1, -1)]);
        lp.add(t(&[(0, 1), (1, 2)]), Relation::Eq, int(3));
        lp.add(t(&[(0, 1)]), Relation::Ge, ratio(1, 2));
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert_eq!(x, vec![ratio(1, 2), ratio(5, 4)]);
                assert_eq!(value, ratio(-7, 4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add(t(&[(0, 1)]), Relation::Ge, int(2));
        lp.add(t(&[(0, 1)]), Relation::Le, int(1));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.objective = t(&[(0, 1)]);
        lp.add(t(&[(0, 1), (1, -1)]), Relation::Le, int(1));
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(2);
        lp.objective = t(&[(0, 1)]);
        lp.add(t(&[(0, 1), (1, 1)]), Relation::Eq, int(1));
        lp.add(t(&[(0, 2), (1, 2)]), Relation::Eq, int(2));
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, int(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_rhs_is_normalized() {
        // max -x; -x <= -3  -> x = 3
        let mut lp = LinearProgram::new(1);
        lp.objective = t(&[(0, -1)]);
        lp.add(t(&[(0, -1)]), Relation::Le, int(-3));
        match lp.solve() {
            LpOutcome::Optimal { x, .. } => assert_eq!(x, vec![int(3)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn warm_and_cold_agree() {
        let mut lp = LinearProgram::new(3);
        lp.objective = t(&[(0, 2), (1, 3), (2, 1)]);
        lp.add(t(&[(0, 1), (1, 1), (2, 1)]), Relation::Le, int(4));
        lp.add(t(&[(0, 1), (1, 3)]), Relation::Le, int(6));
        lp.add(t(&[(1, 1), (2, -1)]), Relation::Ge, int(1));
        assert_eq!(lp.solve(), lp.solve_cold());
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's classic cycling example for the largest-coefficient rule.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![(0, ratio(3, 4)), (1, int(-150)), (2, ratio(1, 50)), (3, int(-6))];
        lp.add(
            vec![(0, ratio(1, 4)), (1, int(-60)), (2, ratio(-1, 25)), (3, int(9))],
            Relation::Le,
            int(0),
        );
        lp.add(
            vec![(0, ratio(1, 2)), (1, int(-90)), (2, ratio(-1, 50)), (3, int(3))],
            Relation::Le,
            int(0),
        );
        lp.add(t(&[(2, 1)]), Relation::Le, int(1));
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, ratio(1, 20)),
            other => panic!("{other:?}"),
        }
    }
}
