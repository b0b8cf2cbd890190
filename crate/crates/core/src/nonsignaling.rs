//! No-signaling checks over subsystem cuts.
//!
//! A group `G` does not signal to its complement `R` when the marginal on
//! `R` is independent of the inputs of `G`. Full no-signaling asks this for
//! every nonempty proper group. It is enough to check the single-subsystem
//! groups: if each `{k}` leaves the marginal on the rest unchanged, then
//! summing further outputs keeps every smaller marginal independent of
//! `x_k`, and changing the inputs of a larger group one at a time never
//! moves the marginal. [`CutMode::Exhaustive`] checks every group directly.

use std::fmt;

use num_traits::Zero;

use crate::layout::{decode, encode_unchecked, Bipartition, SystemLayout};
use crate::rational::{self, Rational};
use crate::table::{increment, BoxTable};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CutMode {
    #[default]
    SingleSubsystem,
    Exhaustive,
}

/// Two joint inputs differing only on `senders` that give different
/// marginals on `receivers`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViolationWitness {
    pub senders: Vec<usize>,
    pub receivers: Vec<usize>,
    pub input_a: Vec<usize>,
    pub input_b: Vec<usize>,
    pub receiver_outputs: Vec<usize>,
    pub marginal_a: Rational,
    pub marginal_b: Rational,
}

impl fmt::Display for ViolationWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "subsystems {:?} signal to {:?}: outputs {:?} have marginal {} at input {:?} but {} at input {:?}",
            self.senders,
            self.receivers,
            self.receiver_outputs,
            rational::format(&self.marginal_a),
            self.input_a,
            rational::format(&self.marginal_b),
            self.input_b
        )
    }
}

/// Marginal on `keep`, still indexed by the full joint input:
/// `result[x * kept_outputs + a_keep]`.
pub fn marginal(layout: &SystemLayout, entries: &[Rational], keep: &[usize]) -> Vec<Rational> {
    let out_r = layout.output_radices();
    let kept_r: Vec<usize> = keep.iter().map(|&k| out_r[k]).collect();
    let kept_out: usize = kept_r.iter().product();
    let n_out = layout.num_outputs();
    let mut projection = Vec::with_capacity(n_out);
    let mut a = vec![0; out_r.len()];
    let mut sub = vec![0; keep.len()];
    for _ in 0..n_out {
        for (slot, &k) in keep.iter().enumerate() {
            sub[slot] = a[k];
        }
        projection.push(encode_unchecked(&sub, &kept_r));
        increment(&mut a, &out_r);
    }
    let mut result = vec![Rational::zero(); layout.num_inputs() * kept_out];
    for (x, row) in entries.chunks(n_out).enumerate() {
        let base = x * kept_out;
        for (p, &j) in row.iter().zip(&projection) {
            if !p.is_zero() {
                result[base + j] += p;
            }
        }
    }
    result
}

/// First witness that `senders` signal to the remaining subsystems.
pub fn group_signaling_witness(
    layout: &SystemLayout,
    entries: &[Rational],
    senders: &[usize],
) -> Option<ViolationWitness> {
    let n = layout.num_subsystems();
    let receivers: Vec<usize> = (0..n).filter(|k| !senders.contains(k)).collect();
    if receivers.is_empty() || senders.is_empty() {
        return None;
    }
    let m = marginal(layout, entries, &receivers);
    let out_r = layout.output_radices();
    let kept_r: Vec<usize> = receivers.iter().map(|&k| out_r[k]).collect();
    let kept_out: usize = kept_r.iter().product();
    let in_r = layout.input_radices();
    let mut x = vec![0; n];
    for xi in 0..layout.num_inputs() {
        if senders.iter().any(|&k| x[k] != 0) {
            let mut base = x.clone();
            for &k in senders {
                base[k] = 0;
            }
            let bi = encode_unchecked(&base, &in_r);
            for j in 0..kept_out {
                let (pa, pb) = (&m[bi * kept_out + j], &m[xi * kept_out + j]);
                if pa != pb {
                    return Some(ViolationWitness {
                        senders: senders.to_vec(),
                        receivers,
                        input_a: base,
                        input_b: x,
                        receiver_outputs: decode(j, &kept_r),
                        marginal_a: pa.clone(),
                        marginal_b: pb.clone(),
                    });
                }
            }
        }
        increment(&mut x, &in_r);
    }
    None
}

/// Both directions of the given cut.
pub fn cut_witness(layout: &SystemLayout, entries: &[Rational], cut: &Bipartition) -> Option<ViolationWitness> {
    let left: Vec<usize> = cut.left().iter().copied().collect();
    let right: Vec<usize> = cut.right().iter().copied().collect();
    group_signaling_witness(layout, entries, &left).or_else(|| group_signaling_witness(layout, entries, &right))
}

pub fn fully_nonsignaling_witness(
    layout: &SystemLayout,
    entries: &[Rational],
    mode: CutMode,
) -> Option<ViolationWitness> {
    let n = layout.num_subsystems();
    if n < 2 {
        return None;
    }
    match mode {
        CutMode::SingleSubsystem => (0..n).find_map(|k| group_signaling_witness(layout, entries, &[k])),
        CutMode::Exhaustive => (1..(1usize << n) - 1).find_map(|mask| {
            let group: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
            group_signaling_witness(layout, entries, &group)
        }),
    }
}

pub fn is_nonsignaling(b: &BoxTable, cut: &Bipartition) -> (bool, Option<ViolationWitness>) {
    let w = cut_witness(b.layout(), b.entries(), cut);
    (w.is_none(), w)
}

pub fn is_fully_nonsignaling(b: &BoxTable) -> (bool, Option<ViolationWitness>) {
    let w = fully_nonsignaling_witness(b.layout(), b.entries(), CutMode::SingleSubsystem);
    (w.is_none(), w)
}

/// Exhaustive-cut variant used to audit the single-subsystem shortcut.
pub fn is_fully_nonsignaling_exhaustive(b: &BoxTable) -> (bool, Option<ViolationWitness>) {
    let w = fully_nonsignaling_witness(b.layout(), b.entries(), CutMode::Exhaustive);
    (w.is_none(), w)
}

pub fn fully_ns(b: &BoxTable) -> bool {
    is_fully_nonsignaling(b).0
}

/// Sparse homogeneous equalities `sum coeff * P[index] = 0` expressing
/// single-subsystem no-signaling: for each subsystem `k`, each joint input
/// with `x_k != 0`, and each output tuple of the other subsystems, the sum
/// over `a_k` equals the same sum at `x_k = 0`.
pub fn single_subsystem_equalities(layout: &SystemLayout) -> Vec<Vec<(usize, i32)>> {
    let n = layout.num_subsystems();
    let in_r = layout.input_radices();
    let out_r = layout.output_radices();
    let n_out = layout.num_outputs();
    let mut rows = Vec::new();
    for k in 0..n {
        if in_r[k] < 2 {
            continue;
        }
        let mut x = vec![0; n];
        for _ in 0..layout.num_inputs() {
            if x[k] != 0 {
                let xi = encode_unchecked(&x, &in_r);
                let mut base = x.clone();
                base[k] = 0;
                let bi = encode_unchecked(&base, &in_r);
                let mut a = vec![0; n];
                for _ in 0..n_out {
                    if a[k] == 0 {
                        let mut row = Vec::with_capacity(2 * out_r[k]);
                        for ak in 0..out_r[k] {
                            a[k] = ak;
                            let ai = encode_unchecked(&a, &out_r);
                            row.push((xi * n_out + ai, 1));
                            row.push((bi * n_out + ai, -1));
                        }
                        a[k] = 0;
                        rows.push(row);
                    }
                    increment(&mut a, &out_r);
                }
            }
            increment(&mut x, &in_r);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{b_rst, flag_box, MaxNonlocalLabel};
    use crate::rational::int;

    fn copy_y_box() -> BoxTable {
        BoxTable::from_fn(SystemLayout::bipartite_2x2(), |x, a| {
            if a[0] == x[1] && a[1] == 0 {
                int(1)
            } else {
                int(0)
            }
        })
        .unwrap()
    }

    #[test]
    fn pr_is_nonsignaling_across_parties() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let cut = Bipartition::by_site(pr.layout()).unwrap();
        assert!(is_nonsignaling(&pr, &cut).0);
        assert!(fully_ns(&pr));
    }

    #[test]
    fn copying_bobs_input_signals() {
        let b = copy_y_box();
        let cut = Bipartition::by_site(b.layout()).unwrap();
        let (ok, w) = is_nonsignaling(&b, &cut);
        assert!(!ok);
        let w = w.unwrap();
        assert_eq!(w.senders, vec![1]);
        assert_eq!(w.receivers, vec![0]);
        assert_ne!(w.input_a[1], w.input_b[1]);
        assert_ne!(w.marginal_a, w.marginal_b);
        assert!(!is_fully_nonsignaling_exhaustive(&b).0);
    }

    #[test]
    fn deterministic_product_cannot_signal() {
        let d = BoxTable::from_fn(SystemLayout::bipartite_2x2(), |x, a| {
            if a[0] == x[0] && a[1] == 1 - x[1] {
                int(1)
            } else {
                int(0)
            }
        })
        .unwrap();
        let cut = Bipartition::by_site(d.layout()).unwrap();
        assert!(is_nonsignaling(&d, &cut).0);
    }

    #[test]
    fn single_subsystem_box_has_no_cut() {
        assert!(is_fully_nonsignaling(&flag_box(2, 3).unwrap()).0);
    }

    #[test]
    fn equalities_vanish_on_pr() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let rows = single_subsystem_equalities(pr.layout());
        assert_eq!(rows.len(), 8);
        for row in rows {
            let s: Rational = row
                .iter()
                .map(|&(i, c)| &pr.entries()[i] * Rational::from_integer(c.into()))
                .sum();
            assert!(s.is_zero());
        }
    }
}
