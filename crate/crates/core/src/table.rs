//! Exact conditional probability tables and their algebra.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{BoxError, Result};
use crate::layout::{decode, encode_unchecked, SystemLayout};
use crate::nonsignaling;
use crate::rational::{self, Rational};

/// A box `P(outputs | inputs)` over a [`SystemLayout`].
///
/// Entries are stored at `input_index * num_outputs + output_index`. A
/// `BoxTable` is always valid: entries are non-negative and every input row
/// sums to exactly one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoxTable {
    layout: SystemLayout,
    entries: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Negative {
        input: Vec<usize>,
        output: Vec<usize>,
        value: Rational,
    },
    Normalization {
        input: Vec<usize>,
        sum: Rational,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Negative { input, output, value } => write!(
                f,
                "negative entry {} at input {:?} output {:?}",
                rational::format(value),
                input,
                output
            ),
            Violation::Normalization { input, sum } => {
                write!(f, "row for input {:?} sums to {}", input, rational::format(sum))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks non-negativity and per-input normalization exactly.
///
/// Fails only when `entries` does not have the shape `layout` demands.
pub fn validate_entries(layout: &SystemLayout, entries: &[Rational]) -> Result<ValidationReport> {
    if entries.len() != layout.num_entries() {
        return Err(BoxError::Malformed(format!(
            "layout {} needs {} entries, got {}",
            layout,
            layout.num_entries(),
            entries.len()
        )));
    }
    let n_out = layout.num_outputs();
    let mut report = ValidationReport::default();
    for (x, row) in entries.chunks(n_out).enumerate() {
        for (a, p) in row.iter().enumerate() {
            if p.is_negative() {
                report.violations.push(Violation::Negative {
                    input: layout.decode_input(x),
                    output: layout.decode_output(a),
                    value: p.clone(),
                });
            }
        }
        let sum: Rational = row.iter().sum();
        if !sum.is_one() {
            report.violations.push(Violation::Normalization {
                input: layout.decode_input(x),
                sum,
            });
        }
    }
    Ok(report)
}

impl BoxTable {
    pub fn new(layout: SystemLayout, entries: Vec<Rational>) -> Result<Self> {
        let report = validate_entries(&layout, &entries)?;
        if !report.is_ok() {
            return Err(BoxError::Invalid(report.to_string()));
        }
        Ok(Self { layout, entries })
    }

    /// Skips validation; callers guarantee validity by construction.
    pub(crate) fn new_unchecked(layout: SystemLayout, entries: Vec<Rational>) -> Self {
        debug_assert_eq!(entries.len(), layout.num_entries());
        Self { layout, entries }
    }

    /// Builds a table from `f(inputs, outputs)` and validates it.
    pub fn from_fn(layout: SystemLayout, f: impl FnMut(&[usize], &[usize]) -> Rational) -> Result<Self> {
        let entries = entries_from_fn(&layout, f);
        Self::new(layout, entries)
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Rational> {
        self.entries
    }

    pub fn row(&self, input: usize) -> &[Rational] {
        let n = self.layout.num_outputs();
        &self.entries[input * n..(input + 1) * n]
    }

    pub fn prob(&self, inputs: &[usize], outputs: &[usize]) -> Result<&Rational> {
        let x = self.layout.encode_input(inputs)?;
        let a = self.layout.encode_output(outputs)?;
        Ok(&self.entries[x * self.layout.num_outputs() + a])
    }

    pub fn compatible(&self, other: &BoxTable) -> bool {
        self.layout.compatible(&other.layout)
    }

    /// Entry indices with positive probability.
    pub fn support(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, p)| p.is_positive())
            .map(|(i, _)| i)
            .collect()
    }

    /// Same entries under a different site grouping of the same subsystems.
    pub fn regroup(&self, layout: SystemLayout) -> Result<Self> {
        if layout.subsystems() != self.layout.subsystems() {
            return Err(BoxError::Layout(format!(
                "cannot regroup {} as {}",
                self.layout, layout
            )));
        }
        Ok(Self::new_unchecked(layout, self.entries.clone()))
    }

    /// Conditional output distribution for one joint input.
    pub fn measure(&self, inputs: &[usize]) -> Result<Vec<Rational>> {
        let x = self.layout.encode_input(inputs)?;
        Ok(self.row(x).to_vec())
    }

    /// Relabels the box through a local wiring.
    ///
    /// `map(outer_in, outer_out, inner_in, inner_out)` fills the inner tuples
    /// and the result is `P'(outer_out | outer_in) = P(inner_out | inner_in)`.
    /// The output is validated, so a map that is not a bijection on outputs
    /// for some input is reported as a contract violation.
    pub fn rewire(
        &self,
        layout: SystemLayout,
        mut map: impl FnMut(&[usize], &[usize], &mut [usize], &mut [usize]),
    ) -> Result<Self> {
        let n = self.layout.num_subsystems();
        let in_r = self.layout.input_radices();
        let out_r = self.layout.output_radices();
        let n_out = self.layout.num_outputs();
        let mut xi = vec![0; n];
        let mut ai = vec![0; n];
        let entries = entries_from_fn(&layout, |x, a| {
            map(x, a, &mut xi, &mut ai);
            let xi_idx = encode_unchecked(&xi, &in_r);
            let ai_idx = encode_unchecked(&ai, &out_r);
            self.entries[xi_idx * n_out + ai_idx].clone()
        });
        Self::new(layout, entries).map_err(|e| match e {
            BoxError::Invalid(msg) => BoxError::Contract(format!("rewiring broke validity: {msg}")),
            other => other,
        })
    }

    /// Marginal on the subsystems not listed in `traced`.
    ///
    /// The traced inputs are fixed to zero and their outputs summed; the
    /// result is then checked to be the same for every other choice of
    /// traced inputs, which holds whenever the box is fully non-signaling.
    pub fn trace_out(&self, traced: &[usize]) -> Result<Self> {
        let n = self.layout.num_subsystems();
        if let Some(&k) = traced.iter().find(|&&k| k >= n) {
            return Err(BoxError::OutOfRange(format!("subsystem {k} not in layout")));
        }
        let keep: Vec<usize> = (0..n).filter(|k| !traced.contains(k)).collect();
        if keep.is_empty() {
            return Err(BoxError::Argument("cannot trace out every subsystem".into()));
        }
        let layout = self.layout.restrict(&keep)?;
        if let Some(w) = nonsignaling::group_signaling_witness(&self.layout, &self.entries, traced) {
            return Err(BoxError::Contract(format!("traced subsystems signal to the rest: {w}")));
        }
        let marginal = nonsignaling::marginal(&self.layout, &self.entries, &keep);
        let kept_out = layout.num_outputs();
        let in_r = self.layout.input_radices();
        let kept_in_r: Vec<usize> = keep.iter().map(|&k| in_r[k]).collect();
        let mut entries = Vec::with_capacity(layout.num_entries());
        for xk in 0..layout.num_inputs() {
            let kept_x = decode(xk, &kept_in_r);
            let mut full = vec![0; n];
            for (slot, &k) in keep.iter().enumerate() {
                full[k] = kept_x[slot];
            }
            let x = encode_unchecked(&full, &in_r);
            entries.extend_from_slice(&marginal[x * kept_out..(x + 1) * kept_out]);
        }
        Ok(Self::new_unchecked(layout, entries))
    }

    /// Product box. `site_assignment[k]` is the result site receiving the
    /// subsystems of `other`'s site `k`: an existing site of `self`, or the
    /// next new site index.
    pub fn tensor(&self, other: &BoxTable, site_assignment: &[usize]) -> Result<Self> {
        if site_assignment.len() != other.layout.num_sites() {
            return Err(BoxError::Argument(format!(
                "site assignment has {} entries, second box has {} sites",
                site_assignment.len(),
                other.layout.num_sites()
            )));
        }
        let mut sites: Vec<Vec<_>> = self.layout.sites().to_vec();
        // (source, flat index) per slot, grouped per result site.
        let mut origin: Vec<Vec<(u8, usize)>> = (0..sites.len())
            .map(|s| self.layout.site_subsystems(s).into_iter().map(|k| (0u8, k)).collect())
            .collect();
        for (k, &target) in site_assignment.iter().enumerate() {
            if target > sites.len() {
                return Err(BoxError::Argument(format!(
                    "site assignment {target} skips past the next new site {}",
                    sites.len()
                )));
            }
            if target == sites.len() {
                sites.push(Vec::new());
                origin.push(Vec::new());
            }
            for j in other.layout.site_subsystems(k) {
                sites[target].push(other.layout.subsystems()[j]);
                origin[target].push((1, j));
            }
        }
        let layout = SystemLayout::new(sites)?;
        let origin: Vec<(u8, usize)> = origin.into_iter().flatten().collect();
        let (n1, n2) = (self.layout.num_subsystems(), other.layout.num_subsystems());
        let (in1, out1) = (self.layout.input_radices(), self.layout.output_radices());
        let (in2, out2) = (other.layout.input_radices(), other.layout.output_radices());
        let (no1, no2) = (self.layout.num_outputs(), other.layout.num_outputs());
        let mut x1 = vec![0; n1];
        let mut a1 = vec![0; n1];
        let mut x2 = vec![0; n2];
        let mut a2 = vec![0; n2];
        let entries = entries_from_fn(&layout, |x, a| {
            for (slot, &(src, j)) in origin.iter().enumerate() {
                if src == 0 {
                    x1[j] = x[slot];
                    a1[j] = a[slot];
                } else {
                    x2[j] = x[slot];
                    a2[j] = a[slot];
                }
            }
            let p = &self.entries[encode_unchecked(&x1, &in1) * no1 + encode_unchecked(&a1, &out1)];
            if p.is_zero() {
                return Rational::zero();
            }
            p * &other.entries[encode_unchecked(&x2, &in2) * no2 + encode_unchecked(&a2, &out2)]
        });
        Ok(Self::new_unchecked(layout, entries))
    }

    /// Product placing `other` on brand-new sites after `self`'s.
    pub fn tensor_new_sites(&self, other: &BoxTable) -> Result<Self> {
        let base = self.layout.num_sites();
        let assignment: Vec<usize> = (0..other.layout.num_sites()).map(|k| base + k).collect();
        self.tensor(other, &assignment)
    }

    /// Product placing `other`'s site `k` on `self`'s site `k`.
    pub fn tensor_sitewise(&self, other: &BoxTable) -> Result<Self> {
        let assignment: Vec<usize> = (0..other.layout.num_sites()).collect();
        self.tensor(other, &assignment)
    }
}

pub(crate) fn entries_from_fn(
    layout: &SystemLayout,
    mut f: impl FnMut(&[usize], &[usize]) -> Rational,
) -> Vec<Rational> {
    let in_r = layout.input_radices();
    let out_r = layout.output_radices();
    let mut entries = Vec::with_capacity(layout.num_entries());
    let mut x = vec![0; in_r.len()];
    for _ in 0..layout.num_inputs() {
        let mut a = vec![0; out_r.len()];
        for _ in 0..layout.num_outputs() {
            entries.push(f(&x, &a));
            increment(&mut a, &out_r);
        }
        increment(&mut x, &in_r);
    }
    entries
}

pub(crate) fn increment(tuple: &mut [usize], radices: &[usize]) {
    for k in (0..tuple.len()).rev() {
        tuple[k] += 1;
        if tuple[k] < radices[k] {
            return;
        }
        tuple[k] = 0;
    }
}

/// Unnormalized L1 distance `sum |p - q|`.
pub fn variational_distance(p: &[Rational], q: &[Rational]) -> Result<Rational> {
    if p.len() != q.len() {
        return Err(BoxError::Incompatible(format!(
            "outcome spaces of size {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// Weighted family of compatible boxes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ensemble {
    members: Vec<(Rational, BoxTable)>,
}

impl Ensemble {
    pub fn new(members: Vec<(Rational, BoxTable)>) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(BoxError::Argument("empty ensemble".into()));
        };
        if let Some((_, b)) = members.iter().find(|(_, b)| !b.compatible(first)) {
            return Err(BoxError::Incompatible(format!("{} vs {}", first.layout(), b.layout())));
        }
        if members.iter().any(|(w, _)| w.is_negative()) {
            return Err(BoxError::Argument("negative ensemble weight".into()));
        }
        let total: Rational = members.iter().map(|(w, _)| w).sum();
        if !total.is_one() {
            return Err(BoxError::Argument(format!(
                "ensemble weights sum to {}",
                rational::format(&total)
            )));
        }
        Ok(Self { members })
    }

    pub fn uniform(boxes: Vec<BoxTable>) -> Result<Self> {
        let w = rational::ratio(1, boxes.len().max(1) as i64);
        Self::new(boxes.into_iter().map(|b| (w.clone(), b)).collect())
    }

    pub fn members(&self) -> &[(Rational, BoxTable)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Convex combination of the ensemble's boxes.
pub fn mix(ensemble: &Ensemble) -> BoxTable {
    let layout = ensemble.members[0].1.layout.clone();
    let mut entries = vec![Rational::zero(); layout.num_entries()];
    for (w, b) in &ensemble.members {
        if w.is_zero() {
            continue;
        }
        for (e, p) in entries.iter_mut().zip(&b.entries) {
            if !p.is_zero() {
                *e += w * p;
            }
        }
    }
    BoxTable::new_unchecked(layout, entries)
}

/// `w * p + (1 - w) * q` for two compatible boxes.
pub fn mix2(w: &Rational, p: &BoxTable, q: &BoxTable) -> Result<BoxTable> {
    let ens = Ensemble::new(vec![(w.clone(), p.clone()), (rational::one() - w, q.clone())])?;
    Ok(mix(&ens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{b_rst, flag_box, MaxNonlocalLabel};
    use crate::rational::{int, ratio};

    fn pr() -> BoxTable {
        b_rst(MaxNonlocalLabel::PR)
    }

    fn apr() -> BoxTable {
        b_rst(MaxNonlocalLabel::ANTI_PR)
    }

    #[test]
    fn negative_entry_is_reported() {
        let layout = SystemLayout::bipartite_2x2();
        let mut e = pr().into_entries();
        e[0] = ratio(-1, 4);
        e[1] = ratio(3, 4);
        let r = validate_entries(&layout, &e).unwrap();
        assert!(matches!(r.violations[0], Violation::Negative { .. }));
        assert!(BoxTable::new(layout, e).is_err());
    }

    #[test]
    fn row_sum_below_one_is_reported() {
        let layout = SystemLayout::bipartite_2x2();
        let mut e = vec![ratio(1, 4); 16];
        e[5] = ratio(3, 20);
        let r = validate_entries(&layout, &e).unwrap();
        assert_eq!(
            r.violations,
            vec![Violation::Normalization {
                input: vec![0, 1],
                sum: ratio(9, 10)
            }]
        );
    }

    #[test]
    fn shape_mismatch_is_malformed() {
        let layout = SystemLayout::bipartite_2x2();
        assert!(matches!(
            validate_entries(&layout, &[int(1)]),
            Err(BoxError::Malformed(_))
        ));
    }

    #[test]
    fn measure_pr_rows() {
        let m = pr().measure(&[1, 1]).unwrap();
        // outputs ordered (a,b) = 00, 01, 10, 11
        assert_eq!(m, vec![int(0), ratio(1, 2), ratio(1, 2), int(0)]);
        let m = apr().measure(&[0, 0]).unwrap();
        assert_eq!(m, vec![int(0), ratio(1, 2), ratio(1, 2), int(0)]);
        assert!(pr().measure(&[2, 0]).is_err());
    }

    #[test]
    fn mixing_pr_and_anti_pr_is_uniform() {
        let u = mix(&Ensemble::uniform(vec![pr(), apr()]).unwrap());
        assert!(u.entries().iter().all(|p| *p == ratio(1, 4)));
        let same = mix(&Ensemble::new(vec![(int(1), pr())]).unwrap());
        assert_eq!(same, pr());
    }

    #[test]
    fn ensemble_rejects_bad_weights() {
        assert!(Ensemble::new(vec![(ratio(1, 2), pr())]).is_err());
        assert!(Ensemble::new(vec![(ratio(3, 2), pr()), (ratio(-1, 2), apr())]).is_err());
        assert!(Ensemble::new(vec![(ratio(1, 2), pr()), (ratio(1, 2), flag_box(0, 2).unwrap())]).is_err());
    }

    #[test]
    fn pr_tensor_pr() {
        let t = pr().tensor_sitewise(&pr()).unwrap();
        assert_eq!(t.layout(), &SystemLayout::abcd());
        assert!(t.entries().iter().all(|p| p.is_zero() || *p == ratio(1, 4)));
        assert_eq!(t.prob(&[0, 0, 0, 0], &[0, 0, 0, 0]).unwrap(), &ratio(1, 4));
        assert!(pr().tensor(&pr(), &[0, 3]).is_err());
    }

    #[test]
    fn flag_tensor_pr_has_flag_marginal() {
        let f = flag_box(0, 2).unwrap();
        let t = f.tensor_new_sites(&pr()).unwrap();
        let m = t.trace_out(&[1, 2]).unwrap();
        assert_eq!(m, f);
    }

    #[test]
    fn trace_out_flags_recovers_pr() {
        let f = flag_box(1, 3).unwrap();
        let ff = f.tensor_new_sites(&f).unwrap();
        let t = ff.tensor_sitewise(&pr()).unwrap();
        assert_eq!(t.trace_out(&[0, 2]).unwrap(), pr());
    }

    #[test]
    fn trace_out_signaling_box_is_rejected() {
        // a = y: Alice's output copies Bob's input.
        let b = BoxTable::from_fn(SystemLayout::bipartite_2x2(), |x, a| {
            if a[0] == x[1] && a[1] == 0 {
                int(1)
            } else {
                int(0)
            }
        })
        .unwrap();
        assert!(matches!(b.trace_out(&[1]), Err(BoxError::Contract(_))));
    }

    #[test]
    fn distances() {
        let p = pr().measure(&[1, 1]).unwrap();
        let q = apr().measure(&[1, 1]).unwrap();
        assert_eq!(variational_distance(&p, &q).unwrap(), int(2));
        assert_eq!(variational_distance(&p, &p).unwrap(), int(0));
        assert!(variational_distance(&p, &q[..2]).is_err());
    }
}
