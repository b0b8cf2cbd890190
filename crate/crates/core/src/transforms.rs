//! Local operations on boxes: relabelings, twirling, the `O_j` rotations,
//! control-`O_j`, comparing operations and the subsystem swap.
//!
//! A relabeling acts on one subsystem at a time. It picks which inner input
//! to feed for each outer input and, for each outer input, a bijection from
//! outer outputs to inner outputs:
//! `P'(a | x) = P(g_x(a) | pi(x))`.

use num_traits::{One, Zero};

use crate::catalog::{flag_box, isotropic, IsotropicSpec, MaxNonlocalLabel};
use crate::error::{BoxError, Result};
use crate::layout::{encode_unchecked, SubsystemSpec, SystemLayout};
use crate::nonsignaling;
use crate::rational::{self, Rational};
use crate::table::{entries_from_fn, mix, BoxTable, Ensemble};

/// Relabeling of one subsystem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemMap {
    /// `input[x_outer] = x_inner`
    pub input: Vec<usize>,
    /// `output[x_outer][a_outer] = a_inner`
    pub output: Vec<Vec<usize>>,
}

impl SubsystemMap {
    pub fn identity(spec: SubsystemSpec) -> Self {
        Self {
            input: (0..spec.inputs).collect(),
            output: vec![(0..spec.outputs).collect(); spec.inputs],
        }
    }

    /// Binary subsystem: `x -> x ^ flip_x`, `a -> a ^ flip_a(x)`.
    pub fn binary(flip_x: bool, flip_a: impl Fn(usize) -> bool) -> Self {
        let fx = flip_x as usize;
        Self {
            input: vec![fx, 1 ^ fx],
            output: (0..2)
                .map(|x| {
                    let fa = flip_a(x) as usize;
                    vec![fa, 1 ^ fa]
                })
                .collect(),
        }
    }

    fn check(&self, spec: SubsystemSpec) -> Result<()> {
        let is_perm = |v: &[usize], n: usize| {
            let mut seen = vec![false; n];
            v.len() == n && v.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
        };
        if self.input.len() != spec.inputs || self.input.iter().any(|&x| x >= spec.inputs) {
            return Err(BoxError::Argument("input map does not fit the subsystem".into()));
        }
        if self.output.len() != spec.inputs || !self.output.iter().all(|o| is_perm(o, spec.outputs)) {
            return Err(BoxError::Argument(
                "output map must be a bijection for every input".into(),
            ));
        }
        Ok(())
    }
}

/// Product of per-subsystem relabelings; local and reversible whenever the
/// input maps are bijections too.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relabeling {
    pub maps: Vec<SubsystemMap>,
}

impl Relabeling {
    pub fn identity(layout: &SystemLayout) -> Self {
        Self {
            maps: layout.subsystems().iter().map(|&s| SubsystemMap::identity(s)).collect(),
        }
    }

    pub fn with(mut self, subsystem: usize, map: SubsystemMap) -> Self {
        self.maps[subsystem] = map;
        self
    }

    pub fn apply(&self, b: &BoxTable) -> Result<BoxTable> {
        let layout = b.layout();
        if self.maps.len() != layout.num_subsystems() {
            return Err(BoxError::Layout(format!(
                "relabeling of {} subsystems applied to {}",
                self.maps.len(),
                layout
            )));
        }
        for (m, &s) in self.maps.iter().zip(layout.subsystems()) {
            m.check(s)?;
        }
        b.rewire(layout.clone(), |x, a, xi, ai| {
            for (k, m) in self.maps.iter().enumerate() {
                xi[k] = m.input[x[k]];
                ai[k] = m.output[x[k]][a[k]];
            }
        })
    }
}

fn require_2x2(b: &BoxTable, what: &str) -> Result<()> {
    if b.layout().is_2x2() {
        Ok(())
    } else {
        Err(BoxError::Layout(format!("{what} needs a 2x2 box, got {}", b.layout())))
    }
}

/// Pair of binary subsystems, one per site, that a 2x2 operation acts on.
fn require_binary_pair(layout: &SystemLayout, acted: (usize, usize)) -> Result<()> {
    let n = layout.num_subsystems();
    if acted.0 >= n || acted.1 >= n {
        return Err(BoxError::OutOfRange(format!("subsystems {acted:?} not in {layout}")));
    }
    if layout.site_of(acted.0) == layout.site_of(acted.1) {
        return Err(BoxError::Layout("acted subsystems must sit on different sites".into()));
    }
    let s = layout.subsystems();
    if s[acted.0] != SubsystemSpec::BINARY || s[acted.1] != SubsystemSpec::BINARY {
        return Err(BoxError::Layout("acted subsystems must be binary".into()));
    }
    Ok(())
}

/// One of the eight twirl relabelings on the pair `acted`:
/// `x -> x ^ delta`, `y -> y ^ gamma`, `a -> a ^ gamma x ^ delta gamma ^ theta`,
/// `b -> b ^ delta y ^ theta`.
///
/// The substitution is read as `P'(a, b | x, y) = P(a', b' | x', y')` with
/// the primed values computed from the unprimed ones. This reading keeps
/// `B_000` and `B_001` fixed and sends the other six `B_rst` to the
/// midpoint of the two; the opposite reading does not.
pub fn twirl_relabeling(
    layout: &SystemLayout,
    acted: (usize, usize),
    delta: bool,
    gamma: bool,
    theta: bool,
) -> Relabeling {
    let (d, g, t) = (delta as usize, gamma as usize, theta as usize);
    Relabeling::identity(layout)
        .with(acted.0, SubsystemMap::binary(delta, |x| (g & x) ^ (d & g) ^ t == 1))
        .with(acted.1, SubsystemMap::binary(gamma, |y| (d & y) ^ t == 1))
}

/// Uniform average of the eight twirl relabelings of a 2x2 box.
pub fn twirl(b: &BoxTable) -> Result<BoxTable> {
    require_2x2(b, "twirl")?;
    twirl_on(b, (0, 1))
}

/// Twirl of the binary pair `acted`, identity elsewhere.
pub fn twirl_on(b: &BoxTable, acted: (usize, usize)) -> Result<BoxTable> {
    require_binary_pair(b.layout(), acted)?;
    let mut branches = Vec::with_capacity(8);
    for bits in 0..8u8 {
        let r = twirl_relabeling(b.layout(), acted, bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
        branches.push(r.apply(b)?);
    }
    Ok(mix(&Ensemble::uniform(branches)?))
}

/// Weight `q` with `b = q B_000 + (1 - q) B_001`, if `b` lies on that line.
pub fn isotropic_weight(b: &BoxTable) -> Option<Rational> {
    if !b.layout().is_2x2() {
        return None;
    }
    let q: Rational = b.prob(&[0, 0], &[0, 0]).ok()?.clone() * rational::int(2);
    let expected = isotropic(&IsotropicSpec::new(MaxNonlocalLabel::PR, q.clone()).ok()?);
    (expected == *b).then_some(q)
}

/// `O_j` for `f(j) = rst`: x-flip when `s`, y-flip when `r`, b-flip when
/// `t ^ (r & s)`.
pub fn o_rotation(label: MaxNonlocalLabel) -> Relabeling {
    o_rotation_on(&SystemLayout::bipartite_2x2(), (0, 1), label)
}

pub fn o_rotation_on(layout: &SystemLayout, acted: (usize, usize), label: MaxNonlocalLabel) -> Relabeling {
    Relabeling::identity(layout)
        .with(acted.0, SubsystemMap::binary(label.s, |_| false))
        .with(
            acted.1,
            SubsystemMap::binary(label.r, |_| label.t ^ (label.r & label.s)),
        )
}

pub fn apply_o(label: MaxNonlocalLabel, b: &BoxTable) -> Result<BoxTable> {
    require_2x2(b, "O rotation")?;
    o_rotation(label).apply(b)
}

/// Flag alphabet with the label each flag value selects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlRotation {
    pub labels: Vec<MaxNonlocalLabel>,
}

impl ControlRotation {
    pub fn new(labels: Vec<MaxNonlocalLabel>) -> Result<Self> {
        if labels.is_empty() {
            return Err(BoxError::Argument("control rotation needs at least one flag".into()));
        }
        Ok(Self { labels })
    }

    pub fn flags(&self) -> usize {
        self.labels.len()
    }

    /// Layout `[[E, C], [F, D]]` with `E`, `F` flags and `C`, `D` binary.
    pub fn layout(&self) -> SystemLayout {
        let flag = SubsystemSpec::flag(self.flags());
        SystemLayout::new(vec![
            vec![flag, SubsystemSpec::BINARY],
            vec![flag, SubsystemSpec::BINARY],
        ])
        .expect("fixed layout is valid")
    }

    /// Applies `O_{e}` to `CD`, Alice reading her flag `e` and Bob his flag
    /// `f`. Both read the same value on inputs of the flagged form.
    pub fn apply(&self, b: &BoxTable) -> Result<BoxTable> {
        let layout = self.layout();
        if !b.layout().compatible(&layout) || b.layout().sites() != layout.sites() {
            return Err(BoxError::Layout(format!(
                "control-O expects {layout}, got {}",
                b.layout()
            )));
        }
        // Discriminator form: the flags agree with certainty.
        let flags = nonsignaling::marginal(b.layout(), b.entries(), &[0, 2]);
        let n = self.flags();
        for x in 0..4 {
            for e in 0..n {
                for f in 0..n {
                    if e != f && !flags[x * n * n + e * n + f].is_zero() {
                        return Err(BoxError::Contract(format!(
                            "Alice's flag {e} and Bob's flag {f} occur together"
                        )));
                    }
                }
            }
        }
        self.apply_on(b, (0, 2), (1, 3))
    }

    /// The wiring alone on any layout: the subsystem `targets.0` is
    /// relabeled by the label its site reads from `flags.0`, `targets.1` by
    /// the label read from `flags.1`. No agreement between the flags is
    /// required.
    pub fn apply_on(&self, b: &BoxTable, flags: (usize, usize), targets: (usize, usize)) -> Result<BoxTable> {
        let layout = b.layout();
        let specs = layout.subsystems();
        let n = layout.num_subsystems();
        if [flags.0, flags.1, targets.0, targets.1].iter().any(|&k| k >= n) {
            return Err(BoxError::OutOfRange(format!("control-O subsystems outside {layout}")));
        }
        let flag = SubsystemSpec::flag(self.flags());
        if specs[flags.0] != flag || specs[flags.1] != flag {
            return Err(BoxError::Layout(format!("control-O flags must be {flag:?}")));
        }
        if specs[targets.0] != SubsystemSpec::BINARY || specs[targets.1] != SubsystemSpec::BINARY {
            return Err(BoxError::Layout("control-O targets must be binary".into()));
        }
        if layout.site_of(flags.0) != layout.site_of(targets.0) || layout.site_of(flags.1) != layout.site_of(targets.1)
        {
            return Err(BoxError::Layout("each target must share a site with its flag".into()));
        }
        b.rewire(layout.clone(), |x, a, xi, ai| {
            let alice = self.labels[a[flags.0]];
            let bob = self.labels[a[flags.1]];
            xi.copy_from_slice(x);
            ai.copy_from_slice(a);
            xi[targets.0] = x[targets.0] ^ alice.s as usize;
            xi[targets.1] = x[targets.1] ^ bob.r as usize;
            ai[targets.1] = a[targets.1] ^ (bob.t ^ (bob.r & bob.s)) as usize;
        })
    }
}

/// Measure `(i, j)` on one subsystem per site, compare, and emit flag pair
/// `(k, k)` for outcome class `partition[k]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparingOperation {
    pub measurement: (usize, usize),
    pub partition: Vec<Vec<(usize, usize)>>,
}

impl ComparingOperation {
    pub fn new(measurement: (usize, usize), partition: Vec<Vec<(usize, usize)>>) -> Self {
        Self { measurement, partition }
    }

    /// Operation separating PR from anti-PR: measure `(1, 1)`, flag 0 when
    /// the outputs differ, flag 1 when they agree.
    pub fn pr_vs_anti_pr() -> Self {
        Self::new((1, 1), vec![vec![(0, 1), (1, 0)], vec![(0, 0), (1, 1)]])
    }

    pub fn flags(&self) -> usize {
        self.partition.len()
    }

    /// Class index for each outcome pair, indexed `a * outputs_b + b`.
    fn classes(&self, alice: SubsystemSpec, bob: SubsystemSpec) -> Result<Vec<usize>> {
        let (i, j) = self.measurement;
        if i >= alice.inputs || j >= bob.inputs {
            return Err(BoxError::OutOfRange(format!(
                "measurement ({i}, {j}) outside inputs ({}, {})",
                alice.inputs, bob.inputs
            )));
        }
        let mut class = vec![usize::MAX; alice.outputs * bob.outputs];
        for (k, set) in self.partition.iter().enumerate() {
            for &(a, b) in set {
                if a >= alice.outputs || b >= bob.outputs {
                    return Err(BoxError::Argument(format!("outcome ({a}, {b}) out of range")));
                }
                let slot = &mut class[a * bob.outputs + b];
                if *slot != usize::MAX {
                    return Err(BoxError::Argument(format!("outcome ({a}, {b}) in two classes")));
                }
                *slot = k;
            }
        }
        if let Some(idx) = class.iter().position(|&c| c == usize::MAX) {
            return Err(BoxError::Argument(format!(
                "outcome ({}, {}) in no class",
                idx / bob.outputs,
                idx % bob.outputs
            )));
        }
        Ok(class)
    }

    /// Flag-pair box `sum_k w_k F(k) (x) F(k)` of a bipartite box.
    pub fn apply(&self, b: &BoxTable) -> Result<BoxTable> {
        let layout = b.layout();
        if layout.num_sites() != 2 || layout.num_subsystems() != 2 {
            return Err(BoxError::Layout(format!(
                "comparing operation expects one subsystem per site, got {layout}"
            )));
        }
        self.apply_tensored(b, (0, 1))
    }

    /// `Lambda (x) I`: acts on `acted`, keeps the rest, and puts the flags
    /// in the acted subsystems' slots.
    pub fn apply_tensored(&self, b: &BoxTable, acted: (usize, usize)) -> Result<BoxTable> {
        let layout = b.layout();
        let n = layout.num_subsystems();
        if acted.0 >= n || acted.1 >= n || layout.site_of(acted.0) == layout.site_of(acted.1) {
            return Err(BoxError::Layout(format!(
                "acted subsystems {acted:?} must be one per site of {layout}"
            )));
        }
        let specs = layout.subsystems();
        let (sa, sb) = (specs[acted.0], specs[acted.1]);
        let class = self.classes(sa, sb)?;
        let flags = self.flags();
        let sites = layout
            .sites()
            .iter()
            .enumerate()
            .map(|(s, site)| {
                let first = layout.site_subsystems(s)[0];
                site.iter()
                    .enumerate()
                    .map(|(off, &spec)| {
                        let k = first + off;
                        if k == acted.0 || k == acted.1 {
                            SubsystemSpec::flag(flags)
                        } else {
                            spec
                        }
                    })
                    .collect()
            })
            .collect();
        let out_layout = SystemLayout::new(sites)?;
        let in_r = layout.input_radices();
        let out_r = layout.output_radices();
        let n_out = layout.num_outputs();
        let mut xi = vec![0; n];
        let mut ai = vec![0; n];
        let entries = entries_from_fn(&out_layout, |x, a| {
            let (e, f) = (a[acted.0], a[acted.1]);
            if e != f {
                return Rational::zero();
            }
            xi.copy_from_slice(x);
            ai.copy_from_slice(a);
            xi[acted.0] = self.measurement.0;
            xi[acted.1] = self.measurement.1;
            let row = encode_unchecked(&xi, &in_r) * n_out;
            let mut total = Rational::zero();
            for (idx, &c) in class.iter().enumerate() {
                if c != e {
                    continue;
                }
                ai[acted.0] = idx / sb.outputs;
                ai[acted.1] = idx % sb.outputs;
                let p = &b.entries()[row + encode_unchecked(&ai, &out_r)];
                if !p.is_zero() {
                    total += p;
                }
            }
            total
        });
        BoxTable::new(out_layout, entries)
    }
}

/// Exchanges the contents of two compatible subsystems, usually on
/// different sites. In LP but not CLP.
pub fn swap_subsystems(b: &BoxTable, pair: (usize, usize)) -> Result<BoxTable> {
    let layout = b.layout();
    let n = layout.num_subsystems();
    if pair.0 >= n || pair.1 >= n {
        return Err(BoxError::OutOfRange(format!("subsystems {pair:?} not in {layout}")));
    }
    if layout.subsystems()[pair.0] != layout.subsystems()[pair.1] {
        return Err(BoxError::Incompatible(
            "swapped subsystems differ in cardinality".into(),
        ));
    }
    b.rewire(layout.clone(), |x, a, xi, ai| {
        xi.copy_from_slice(x);
        ai.copy_from_slice(a);
        xi.swap(pair.0, pair.1);
        ai.swap(pair.0, pair.1);
    })
}

/// `sum_{i,j} p[i][j] F(j) (x) F(j) (x) B^{beta_i}_{f(i)}` on `[[E, C], [F, D]]`.
pub fn build_b_out(p: &[Vec<Rational>], f: &ControlRotation, betas: &[Rational]) -> Result<BoxTable> {
    let n = f.flags();
    if p.len() != n || p.iter().any(|row| row.len() != n) || betas.len() != n {
        return Err(BoxError::Argument(format!(
            "joint distribution and betas must be {n} x {n} and {n}"
        )));
    }
    let total: Rational = p.iter().flatten().sum();
    if !total.is_one() || p.iter().flatten().any(|w| *w < Rational::zero()) {
        return Err(BoxError::Argument("p must be a joint distribution".into()));
    }
    let mut members = Vec::new();
    for (i, row) in p.iter().enumerate() {
        let target = isotropic(&IsotropicSpec::new(f.labels[i], betas[i].clone())?);
        for (j, w) in row.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            let flag = flag_box(j, n)?;
            // Alice: [E, C]; Bob: [F, D].
            let flags = flag.tensor_new_sites(&flag)?;
            members.push((w.clone(), flags.tensor_sitewise(&target)?));
        }
    }
    Ok(mix(&Ensemble::new(members)?))
}

/// Post-processing of `B_out`: control-`O_j`, trace out the
/// flags, twirl. Returns `q` with `B'_out = q B_000 + (1 - q) B_001`.
pub fn theorem1_pipeline(b_out: &BoxTable, f: &ControlRotation) -> Result<(Rational, BoxTable)> {
    let rotated = f.apply(b_out)?;
    let target = rotated.trace_out(&[0, 2])?;
    let iso = twirl(&target)?;
    let q = isotropic_weight(&iso).ok_or_else(|| BoxError::Contract("twirl left the isotropic line".into()))?;
    Ok((q, iso))
}

/// Coefficient of `B_000` in `B'_out`, term by term. The sums over
/// `j|i = 000` and `j|i = 001` run over `i != j`, the diagonal being the
/// first sum.
pub fn theorem1_coefficient(p: &[Vec<Rational>], f: &ControlRotation, betas: &[Rational]) -> Rational {
    let half = rational::half();
    let mut q = Rational::zero();
    for (i, row) in p.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            if i == j {
                q += w * &betas[i];
                continue;
            }
            let ji = f.labels[j].rotate(f.labels[i]);
            q += w * match (ji.r, ji.s, ji.t) {
                (false, false, false) => betas[i].clone(),
                (false, false, true) => Rational::one() - &betas[i],
                _ => half.clone(),
            };
        }
    }
    q
}

/// Right-hand side of the aim inequality:
/// `sum_i p(i,i) (beta_i + max beta - 1) + (1 - max beta)`.
pub fn theorem1_aim(p: &[Vec<Rational>], betas: &[Rational]) -> Rational {
    let max = betas.iter().max().cloned().unwrap_or_else(Rational::zero);
    let one = Rational::one();
    let diag: Rational = p
        .iter()
        .enumerate()
        .map(|(i, row)| &row[i] * (&betas[i] + &max - &one))
        .sum();
    diag + (one - max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::b_rst;
    use crate::nonsignaling::is_fully_nonsignaling_exhaustive;
    use crate::rational::{int, ratio};

    fn label(s: &str) -> MaxNonlocalLabel {
        s.parse().unwrap()
    }

    fn uniform_2x2() -> BoxTable {
        BoxTable::from_fn(SystemLayout::bipartite_2x2(), |_, _| ratio(1, 4)).unwrap()
    }

    #[test]
    fn twirl_fixes_pr_and_anti_pr() {
        for l in [MaxNonlocalLabel::PR, MaxNonlocalLabel::ANTI_PR] {
            assert_eq!(twirl(&b_rst(l)).unwrap(), b_rst(l));
        }
        assert_eq!(twirl(&uniform_2x2()).unwrap(), uniform_2x2());
    }

    #[test]
    fn twirl_sends_other_labels_to_midpoint() {
        let mid = isotropic(&IsotropicSpec::new(MaxNonlocalLabel::PR, ratio(1, 2)).unwrap());
        for l in MaxNonlocalLabel::all().skip(2) {
            assert_eq!(twirl(&b_rst(l)).unwrap(), mid, "label {l}");
        }
    }

    #[test]
    fn twirl_of_deterministic_box_has_weight_three_quarters() {
        let d = BoxTable::from_fn(
            SystemLayout::bipartite_2x2(),
            |_, a| {
                if a == [0, 0] {
                    int(1)
                } else {
                    int(0)
                }
            },
        )
        .unwrap();
        assert_eq!(isotropic_weight(&twirl(&d).unwrap()), Some(ratio(3, 4)));
    }

    #[test]
    fn o_rotation_label_arithmetic_for_all_pairs() {
        for j in MaxNonlocalLabel::all() {
            for i in MaxNonlocalLabel::all() {
                assert_eq!(apply_o(j, &b_rst(i)).unwrap(), b_rst(j.rotate(i)), "O_{j} on B_{i}");
            }
        }
    }

    #[test]
    fn o_rotation_examples() {
        let beta = ratio(7, 8);
        let iso = |l: &str| isotropic(&IsotropicSpec::new(label(l), beta.clone()).unwrap());
        assert_eq!(apply_o(label("001"), &iso("001")).unwrap(), iso("000"));
        assert_eq!(apply_o(label("000"), &uniform_2x2()).unwrap(), uniform_2x2());
        // r's = 1 contributes to t.
        assert_eq!(apply_o(label("010"), &iso("100")).unwrap(), iso("111"));
    }

    #[test]
    fn comparing_example_one() {
        let op = ComparingOperation::pr_vs_anti_pr();
        let pr = op.apply(&b_rst(MaxNonlocalLabel::PR)).unwrap();
        assert_eq!(
            pr,
            flag_box(0, 2)
                .unwrap()
                .tensor_new_sites(&flag_box(0, 2).unwrap())
                .unwrap()
        );
        let apr = op.apply(&b_rst(MaxNonlocalLabel::ANTI_PR)).unwrap();
        assert_eq!(
            apr,
            flag_box(1, 2)
                .unwrap()
                .tensor_new_sites(&flag_box(1, 2).unwrap())
                .unwrap()
        );
        let u = op.apply(&uniform_2x2()).unwrap();
        assert_eq!(*u.prob(&[0, 0], &[0, 0]).unwrap(), ratio(1, 2));
        assert_eq!(*u.prob(&[0, 0], &[1, 1]).unwrap(), ratio(1, 2));
    }

    #[test]
    fn comparing_rejects_bad_partitions() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let gap = ComparingOperation::new((0, 0), vec![vec![(0, 0), (1, 1)], vec![(0, 1)]]);
        assert!(matches!(gap.apply(&pr), Err(BoxError::Argument(_))));
        let overlap = ComparingOperation::new((0, 0), vec![vec![(0, 0), (0, 1), (1, 0), (1, 1)], vec![(0, 0)]]);
        assert!(matches!(overlap.apply(&pr), Err(BoxError::Argument(_))));
        let far = ComparingOperation::new((2, 0), vec![vec![(0, 0), (0, 1), (1, 0), (1, 1)]]);
        assert!(matches!(far.apply(&pr), Err(BoxError::OutOfRange(_))));
    }

    #[test]
    fn tensored_comparing_keeps_the_bystander() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let both = pr.tensor_sitewise(&pr).unwrap();
        let out = ComparingOperation::pr_vs_anti_pr()
            .apply_tensored(&both, (0, 2))
            .unwrap();
        let f = flag_box(0, 2).unwrap();
        assert_eq!(out, f.tensor_new_sites(&f).unwrap().tensor_sitewise(&pr).unwrap());
        assert!(is_fully_nonsignaling_exhaustive(&out).0);
    }

    #[test]
    fn tensored_comparing_on_two_member_b_in() {
        let weights = [ratio(1, 3), ratio(2, 3)];
        let beta = ratio(7, 8);
        let labels = [MaxNonlocalLabel::PR, MaxNonlocalLabel::ANTI_PR];
        let pairs: Vec<_> = labels
            .iter()
            .map(|&l| (IsotropicSpec::maximal(l), IsotropicSpec::new(l, beta.clone()).unwrap()))
            .collect();
        let b_in = crate::catalog::build_b_in(&pairs, &weights).unwrap();
        let out = ComparingOperation::pr_vs_anti_pr()
            .apply_tensored(&b_in, (0, 2))
            .unwrap();
        let f = ControlRotation::new(labels.to_vec()).unwrap();
        let p = vec![vec![weights[0].clone(), int(0)], vec![int(0), weights[1].clone()]];
        assert_eq!(out, build_b_out(&p, &f, &[beta.clone(), beta]).unwrap());
    }

    #[test]
    fn control_o_rotates_matching_flags_to_pr() {
        let f = ControlRotation::new(vec![label("000"), label("011"), label("110")]).unwrap();
        let beta = ratio(5, 6);
        for i in 0..3 {
            let mut p = vec![vec![int(0); 3]; 3];
            p[i][i] = int(1);
            let b_out = build_b_out(&p, &f, &vec![beta.clone(); 3]).unwrap();
            let rotated = f.apply(&b_out).unwrap();
            let target = rotated.trace_out(&[0, 2]).unwrap();
            assert_eq!(
                target,
                isotropic(&IsotropicSpec::new(MaxNonlocalLabel::PR, beta.clone()).unwrap())
            );
            assert!(is_fully_nonsignaling_exhaustive(&rotated).0);
        }
    }

    #[test]
    fn control_o_rejects_disagreeing_flags() {
        let f = ControlRotation::new(vec![label("000"), label("001")]).unwrap();
        let e = flag_box(0, 2).unwrap();
        let g = flag_box(1, 2).unwrap();
        let bad = e
            .tensor_new_sites(&g)
            .unwrap()
            .tensor_sitewise(&b_rst(MaxNonlocalLabel::PR))
            .unwrap();
        assert!(matches!(f.apply(&bad), Err(BoxError::Contract(_))));
    }

    #[test]
    fn pipeline_identity_and_uniform_guess() {
        let f = ControlRotation::new(vec![label("000"), label("001"), label("010")]).unwrap();
        let ones = vec![int(1); 3];
        let diag: Vec<Vec<Rational>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { ratio(1, 3) } else { int(0) }).collect())
            .collect();
        let (q, iso) = theorem1_pipeline(&build_b_out(&diag, &f, &ones).unwrap(), &f).unwrap();
        assert_eq!(q, int(1));
        assert_eq!(iso, b_rst(MaxNonlocalLabel::PR));

        let uniform = vec![vec![ratio(1, 9); 3]; 3];
        let (q, _) = theorem1_pipeline(&build_b_out(&uniform, &f, &ones).unwrap(), &f).unwrap();
        assert_eq!(q, theorem1_coefficient(&uniform, &f, &ones));
        assert!(q >= theorem1_aim(&uniform, &ones));
    }

    #[test]
    fn swap_is_a_relabeling_of_sites() {
        let pr = b_rst(MaxNonlocalLabel::PR);
        let swapped = swap_subsystems(&pr, (0, 1)).unwrap();
        // a ^ b = xy is symmetric under exchanging the parties.
        assert_eq!(swapped, pr);
        let b010 = b_rst(label("010"));
        assert_eq!(swap_subsystems(&b010, (0, 1)).unwrap(), b_rst(label("100")));
    }

    #[test]
    fn relabeling_rejects_non_bijections() {
        let bad = Relabeling::identity(&SystemLayout::bipartite_2x2()).with(
            0,
            SubsystemMap {
                input: vec![0, 1],
                output: vec![vec![0, 0], vec![0, 1]],
            },
        );
        assert!(bad.apply(&b_rst(MaxNonlocalLabel::PR)).is_err());
    }
}
