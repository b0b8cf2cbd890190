//! Property checks for operations on boxes: validity, linearity,
//! no-signaling preservation, locality preservation and discriminating
//! form.
//!
//! Locality preservation is checked two ways. Operations with a known
//! construction map an explicit `LR_ns` witness of the input to a witness
//! of the image, which must reconstruct the image exactly. Independently,
//! the cost LP over `LR_ns` products must report zero for the image. Swap
//! and the signaling copy have no witness construction and are checked by
//! the LP alone.

use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::catalog::{b_in_maximal_flags, b_rst, ns_extremal_single_site, MaxNonlocalLabel};
use crate::cost::{nonlocal_cost, CostProblem, LocalModel};
use crate::error::{BoxError, Result};
use crate::json::box_to_json;
use crate::layout::{decode, encode_unchecked, SubsystemSpec, SystemLayout};
use crate::nonsignaling::is_fully_nonsignaling_exhaustive;
use crate::rational::{self, Rational};
use crate::table::{entries_from_fn, mix2, validate_entries, BoxTable};
use crate::transforms::{swap_subsystems, twirl_on, twirl_relabeling, ComparingOperation, ControlRotation, Relabeling};

/// An operation on boxes. Subsystem indices refer to the layout the
/// operation is applied to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Operation {
    Comparing {
        op: ComparingOperation,
        acted: (usize, usize),
    },
    ControlO {
        rotation: ControlRotation,
        flags: (usize, usize),
        targets: (usize, usize),
    },
    Twirl {
        acted: (usize, usize),
    },
    TraceOut {
        traced: Vec<usize>,
    },
    /// Steps applied left to right.
    Compose(Vec<Operation>),
    /// Exchanges two subsystems on different sites. Negative control.
    Swap {
        pair: (usize, usize),
    },
    /// Replaces the output of `into` by the input of `from`. Negative
    /// control.
    SignalingCopy {
        from: usize,
        into: usize,
    },
    /// Measures `acted` at `measurement` and hands each party its own
    /// outcome as a flag. Negative control for the discriminating form.
    AsymmetricFlag {
        measurement: (usize, usize),
        acted: (usize, usize),
    },
}

fn replace_specs(layout: &SystemLayout, replace: &[(usize, SubsystemSpec)]) -> Result<SystemLayout> {
    let mut k = 0;
    let sites = layout
        .sites()
        .iter()
        .map(|site| {
            site.iter()
                .map(|&spec| {
                    let out = replace.iter().find(|(i, _)| *i == k).map_or(spec, |(_, s)| *s);
                    k += 1;
                    out
                })
                .collect()
        })
        .collect();
    SystemLayout::new(sites)
}

fn check_index(layout: &SystemLayout, k: usize) -> Result<()> {
    if k < layout.num_subsystems() {
        Ok(())
    } else {
        Err(BoxError::OutOfRange(format!("subsystem {k} not in {layout}")))
    }
}

impl Operation {
    pub fn name(&self) -> String {
        match self {
            Operation::Comparing { .. } => "comparing".into(),
            Operation::ControlO { .. } => "control-o".into(),
            Operation::Twirl { .. } => "twirl".into(),
            Operation::TraceOut { .. } => "trace".into(),
            Operation::Compose(steps) => steps.iter().map(Operation::name).collect::<Vec<_>>().join("+"),
            Operation::Swap { .. } => "swap".into(),
            Operation::SignalingCopy { .. } => "signaling-copy".into(),
            Operation::AsymmetricFlag { .. } => "asymmetric-flag".into(),
        }
    }

    /// Whether the operation claims to output flag pairs of the form
    /// `sum_j q_j F(j) (x) F(j)`.
    pub fn is_discriminator(&self) -> bool {
        match self {
            Operation::Comparing { .. } | Operation::AsymmetricFlag { .. } => true,
            Operation::Compose(steps) => steps.last().is_some_and(Operation::is_discriminator),
            _ => false,
        }
    }

    pub fn image_layout(&self, layout: &SystemLayout) -> Result<SystemLayout> {
        match self {
            Operation::Comparing { op, acted } => {
                check_index(layout, acted.0.max(acted.1))?;
                let f = SubsystemSpec::flag(op.flags());
                replace_specs(layout, &[(acted.0, f), (acted.1, f)])
            }
            Operation::AsymmetricFlag { acted, .. } => {
                check_index(layout, acted.0.max(acted.1))?;
                let s = layout.subsystems();
                replace_specs(
                    layout,
                    &[
                        (acted.0, SubsystemSpec::flag(s[acted.0].outputs)),
                        (acted.1, SubsystemSpec::flag(s[acted.1].outputs)),
                    ],
                )
            }
            Operation::TraceOut { traced } => {
                let keep: Vec<usize> = (0..layout.num_subsystems()).filter(|k| !traced.contains(k)).collect();
                layout.restrict(&keep)
            }
            Operation::Compose(steps) => steps.iter().try_fold(layout.clone(), |l, s| s.image_layout(&l)),
            _ => Ok(layout.clone()),
        }
    }

    pub fn apply(&self, b: &BoxTable) -> Result<BoxTable> {
        match self {
            Operation::Comparing { op, acted } => op.apply_tensored(b, *acted),
            Operation::ControlO {
                rotation,
                flags,
                targets,
            } => rotation.apply_on(b, *flags, *targets),
            Operation::Twirl { acted } => twirl_on(b, *acted),
            Operation::TraceOut { traced } => b.trace_out(traced),
            Operation::Compose(steps) => steps.iter().try_fold(b.clone(), |acc, s| s.apply(&acc)),
            Operation::Swap { pair } => swap_subsystems(b, *pair),
            Operation::SignalingCopy { from, into } => signaling_copy(b, *from, *into),
            Operation::AsymmetricFlag { measurement, acted } => asymmetric_flag(b, *measurement, *acted),
        }
    }

    /// Same operation with every subsystem index sent through `map`, the
    /// images of `layout`'s subsystems in a larger layout.
    fn reindexed(&self, layout: &SystemLayout, map: &dyn Fn(&SystemLayout, usize) -> usize) -> Result<Self> {
        let m = |k: usize| map(layout, k);
        Ok(match self {
            Operation::Comparing { op, acted } => Operation::Comparing {
                op: op.clone(),
                acted: (m(acted.0), m(acted.1)),
            },
            Operation::ControlO {
                rotation,
                flags,
                targets,
            } => Operation::ControlO {
                rotation: rotation.clone(),
                flags: (m(flags.0), m(flags.1)),
                targets: (m(targets.0), m(targets.1)),
            },
            Operation::Twirl { acted } => Operation::Twirl {
                acted: (m(acted.0), m(acted.1)),
            },
            Operation::TraceOut { traced } => Operation::TraceOut {
                traced: traced.iter().map(|&k| m(k)).collect(),
            },
            Operation::Compose(steps) => {
                let mut current = layout.clone();
                let mut out = Vec::with_capacity(steps.len());
                for s in steps {
                    out.push(s.reindexed(&current, map)?);
                    current = s.image_layout(&current)?;
                }
                Operation::Compose(out)
            }
            Operation::Swap { pair } => Operation::Swap {
                pair: (m(pair.0), m(pair.1)),
            },
            Operation::SignalingCopy { from, into } => Operation::SignalingCopy {
                from: m(*from),
                into: m(*into),
            },
            Operation::AsymmetricFlag { measurement, acted } => Operation::AsymmetricFlag {
                measurement: *measurement,
                acted: (m(acted.0), m(acted.1)),
            },
        })
    }

    /// `LR_ns` witness of the image from one of the input, or `None` when
    /// the operation has no such construction.
    pub fn transform_witness(&self, layout: &SystemLayout, w: &LrnsWitness) -> Option<Result<LrnsWitness>> {
        match self {
            Operation::Comparing { op, acted } => {
                let specs = layout.subsystems();
                let class = match comparing_classes(op, specs[acted.0], specs[acted.1]) {
                    Ok(c) => c,
                    Err(e) => return Some(Err(e)),
                };
                let n = op.flags();
                let outs_b = specs[acted.1].outputs;
                Some(measure_witness(layout, w, op.measurement, *acted, |a, b| {
                    let k = class[a * outs_b + b];
                    ((k, n), (k, n))
                }))
            }
            Operation::AsymmetricFlag { measurement, acted } => {
                let specs = layout.subsystems();
                let (na, nb) = (specs[acted.0].outputs, specs[acted.1].outputs);
                Some(measure_witness(layout, w, *measurement, *acted, |a, b| {
                    ((a, na), (b, nb))
                }))
            }
            Operation::Twirl { acted } => Some(twirl_witness(layout, w, *acted)),
            Operation::ControlO {
                rotation,
                flags,
                targets,
            } => Some(control_witness(layout, w, rotation, *flags, *targets)),
            Operation::TraceOut { traced } => Some(trace_witness(layout, w, traced)),
            Operation::Compose(steps) => {
                let mut current = layout.clone();
                let mut acc = w.clone();
                for s in steps {
                    acc = match s.transform_witness(&current, &acc)? {
                        Ok(next) => next,
                        Err(e) => return Some(Err(e)),
                    };
                    current = match s.image_layout(&current) {
                        Ok(l) => l,
                        Err(e) => return Some(Err(e)),
                    };
                }
                Some(Ok(acc))
            }
            Operation::Swap { .. } | Operation::SignalingCopy { .. } => None,
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn comparing_classes(op: &ComparingOperation, a: SubsystemSpec, b: SubsystemSpec) -> Result<Vec<usize>> {
    let mut class = vec![usize::MAX; a.outputs * b.outputs];
    for (k, set) in op.partition.iter().enumerate() {
        for &(x, y) in set {
            if x < a.outputs && y < b.outputs {
                class[x * b.outputs + y] = k;
            }
        }
    }
    if class.contains(&usize::MAX) {
        return Err(BoxError::Argument("partition does not cover every outcome pair".into()));
    }
    Ok(class)
}

fn signaling_copy(b: &BoxTable, from: usize, into: usize) -> Result<BoxTable> {
    let layout = b.layout();
    check_index(layout, from.max(into))?;
    let specs = layout.subsystems();
    if specs[into].outputs < specs[from].inputs {
        return Err(BoxError::Layout("copied input does not fit the output".into()));
    }
    let in_r = layout.input_radices();
    let out_r = layout.output_radices();
    let n_out = layout.num_outputs();
    let mut ai = vec![0; out_r.len()];
    let entries = entries_from_fn(layout, |x, a| {
        if a[into] != x[from] {
            return Rational::zero();
        }
        let row = encode_unchecked(x, &in_r) * n_out;
        ai.copy_from_slice(a);
        (0..out_r[into])
            .map(|v| {
                ai[into] = v;
                b.entries()[row + encode_unchecked(&ai, &out_r)].clone()
            })
            .sum()
    });
    BoxTable::new(layout.clone(), entries)
}

fn asymmetric_flag(b: &BoxTable, measurement: (usize, usize), acted: (usize, usize)) -> Result<BoxTable> {
    let layout = b.layout();
    let op = Operation::AsymmetricFlag { measurement, acted };
    let out_layout = op.image_layout(layout)?;
    let specs = layout.subsystems();
    if measurement.0 >= specs[acted.0].inputs || measurement.1 >= specs[acted.1].inputs {
        return Err(BoxError::OutOfRange(format!(
            "measurement {measurement:?} out of range"
        )));
    }
    let in_r = layout.input_radices();
    let out_r = layout.output_radices();
    let n_out = layout.num_outputs();
    let mut xi = vec![0; in_r.len()];
    let entries = entries_from_fn(&out_layout, |x, a| {
        xi.copy_from_slice(x);
        xi[acted.0] = measurement.0;
        xi[acted.1] = measurement.1;
        b.entries()[encode_unchecked(&xi, &in_r) * n_out + encode_unchecked(a, &out_r)].clone()
    });
    BoxTable::new(out_layout, entries)
}

/// Explicit `LR_ns` decomposition `sum_l w_l A_l (x) B_l` of a two-site
/// box, with `A_l` and `B_l` single-site boxes that are fully
/// no-signaling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LrnsWitness {
    pub terms: Vec<(Rational, BoxTable, BoxTable)>,
}

impl LrnsWitness {
    /// Problems with the witness itself, if any.
    pub fn defects(&self) -> Vec<String> {
        let mut out = Vec::new();
        let total: Rational = self.terms.iter().map(|(w, _, _)| w).sum();
        if !total.is_one() {
            out.push(format!("weights sum to {}", rational::format(&total)));
        }
        for (i, (w, a, b)) in self.terms.iter().enumerate() {
            if w.is_negative() {
                out.push(format!("term {i} has negative weight"));
            }
            for (side, s) in [("Alice", a), ("Bob", b)] {
                if s.layout().num_sites() != 1 {
                    out.push(format!("term {i}: {side}'s box spans {} sites", s.layout().num_sites()));
                }
                if let (false, Some(v)) = is_fully_nonsignaling_exhaustive(s) {
                    out.push(format!("term {i}: {side}'s box signals: {v}"));
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Result<BoxTable> {
        let (_, a0, b0) = self
            .terms
            .first()
            .ok_or_else(|| BoxError::Argument("empty witness".into()))?;
        let layout = a0.tensor_new_sites(b0)?.layout().clone();
        let mut entries = vec![Rational::zero(); layout.num_entries()];
        for (w, a, b) in &self.terms {
            let term = a.tensor_new_sites(b)?;
            if term.layout() != &layout {
                return Err(BoxError::Incompatible("witness terms differ in layout".into()));
            }
            for (e, p) in entries.iter_mut().zip(term.entries()) {
                if !p.is_zero() {
                    *e += w * p;
                }
            }
        }
        BoxTable::new(layout, entries)
    }

    fn map_terms(
        &self,
        f: impl Fn(&BoxTable, &BoxTable) -> Result<Vec<(Rational, BoxTable, BoxTable)>>,
    ) -> Result<Self> {
        let mut terms = Vec::new();
        for (w, a, b) in &self.terms {
            for (v, a2, b2) in f(a, b)? {
                terms.push((w * v, a2, b2));
            }
        }
        Ok(Self { terms })
    }
}

fn split_index(layout: &SystemLayout, k: usize) -> (usize, usize) {
    let site = layout.site_of(k);
    (site, k - layout.site_subsystems(site)[0])
}

fn require_two_sites(layout: &SystemLayout) -> Result<()> {
    if layout.num_sites() == 2 {
        Ok(())
    } else {
        Err(BoxError::Layout(format!("witnesses need two sites, got {layout}")))
    }
}

/// Single-site box with subsystem `k` measured at input `x`: the
/// probability of each outcome and the normalized box on the rest, with
/// `k` replaced by a flag slot filled in later.
fn condition(site: &BoxTable, k: usize, x: usize) -> Vec<(usize, Rational, BoxTable)> {
    let layout = site.layout();
    let in_r = layout.input_radices();
    let out_r = layout.output_radices();
    let n_out = layout.num_outputs();
    let mut out = Vec::new();
    for v in 0..out_r[k] {
        // Outcome marginal at the all-zero input of the other subsystems.
        let mut x0 = vec![0; in_r.len()];
        x0[k] = x;
        let row = encode_unchecked(&x0, &in_r) * n_out;
        let p: Rational = (0..n_out)
            .filter(|&o| decode(o, &out_r)[k] == v)
            .map(|o| site.entries()[row + o].clone())
            .sum();
        if !p.is_positive() {
            continue;
        }
        let one = SubsystemSpec::flag(1);
        let cond_layout = replace_specs(layout, &[(k, one)]).expect("same shape");
        let mut xi = vec![0; in_r.len()];
        let mut ai = vec![0; out_r.len()];
        let entries = entries_from_fn(&cond_layout, |xs, a| {
            xi.copy_from_slice(xs);
            xi[k] = x;
            ai.copy_from_slice(a);
            ai[k] = v;
            &site.entries()[encode_unchecked(&xi, &in_r) * n_out + encode_unchecked(&ai, &out_r)] / &p
        });
        out.push((v, p, BoxTable::new_unchecked(cond_layout, entries)));
    }
    out
}

/// Puts flag value `j` of `n` into the unary slot `k`.
fn set_flag(b: &BoxTable, k: usize, (j, n): (usize, usize)) -> Result<BoxTable> {
    let layout = replace_specs(b.layout(), &[(k, SubsystemSpec::flag(n))])?;
    let src_out = b.layout().output_radices();
    let n_src = b.layout().num_outputs();
    let in_r = b.layout().input_radices();
    let mut ai = vec![0; src_out.len()];
    let entries = entries_from_fn(&layout, |x, a| {
        if a[k] != j {
            return Rational::zero();
        }
        ai.copy_from_slice(a);
        ai[k] = 0;
        b.entries()[encode_unchecked(x, &in_r) * n_src + encode_unchecked(&ai, &src_out)].clone()
    });
    BoxTable::new(layout, entries)
}

fn measure_witness(
    layout: &SystemLayout,
    w: &LrnsWitness,
    measurement: (usize, usize),
    acted: (usize, usize),
    flag: impl Fn(usize, usize) -> ((usize, usize), (usize, usize)),
) -> Result<LrnsWitness> {
    require_two_sites(layout)?;
    let (sa, ka) = split_index(layout, acted.0);
    let (sb, kb) = split_index(layout, acted.1);
    if (sa, sb) != (0, 1) {
        return Err(BoxError::Layout(
            "measured subsystems must be Alice's then Bob's".into(),
        ));
    }
    w.map_terms(|a, b| {
        let mut out = Vec::new();
        for (va, pa, ca) in condition(a, ka, measurement.0) {
            for (vb, pb, cb) in condition(b, kb, measurement.1) {
                let (fa, fb) = flag(va, vb);
                out.push((&pa * &pb, set_flag(&ca, ka, fa)?, set_flag(&cb, kb, fb)?));
            }
        }
        Ok(out)
    })
}

fn site_relabeling(full: &Relabeling, layout: &SystemLayout, site: usize) -> Relabeling {
    Relabeling {
        maps: layout
            .site_subsystems(site)
            .into_iter()
            .map(|k| full.maps[k].clone())
            .collect(),
    }
}

fn twirl_witness(layout: &SystemLayout, w: &LrnsWitness, acted: (usize, usize)) -> Result<LrnsWitness> {
    require_two_sites(layout)?;
    let eighth = rational::ratio(1, 8);
    w.map_terms(|a, b| {
        let mut out = Vec::with_capacity(8);
        for bits in 0..8u8 {
            let full = twirl_relabeling(layout, acted, bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
            out.push((
                eighth.clone(),
                site_relabeling(&full, layout, 0).apply(a)?,
                site_relabeling(&full, layout, 1).apply(b)?,
            ));
        }
        Ok(out)
    })
}

fn control_witness(
    layout: &SystemLayout,
    w: &LrnsWitness,
    rotation: &ControlRotation,
    flags: (usize, usize),
    targets: (usize, usize),
) -> Result<LrnsWitness> {
    require_two_sites(layout)?;
    let (fa, ta) = (split_index(layout, flags.0), split_index(layout, targets.0));
    let (fb, tb) = (split_index(layout, flags.1), split_index(layout, targets.1));
    if fa.0 != 0 || ta.0 != 0 || fb.0 != 1 || tb.0 != 1 {
        return Err(BoxError::Layout("control-O must read and act within each site".into()));
    }
    w.map_terms(|a, b| {
        // Each site runs its half of the wiring; the other half is the
        // identity on a dummy partner, so reuse the two-site rewiring.
        let alice = a.rewire(a.layout().clone(), |x, o, xi, ai| {
            xi.copy_from_slice(x);
            ai.copy_from_slice(o);
            xi[ta.1] = x[ta.1] ^ rotation.labels[o[fa.1]].s as usize;
        })?;
        let bob = b.rewire(b.layout().clone(), |y, o, yi, bi| {
            let l = rotation.labels[o[fb.1]];
            yi.copy_from_slice(y);
            bi.copy_from_slice(o);
            yi[tb.1] = y[tb.1] ^ l.r as usize;
            bi[tb.1] = o[tb.1] ^ (l.t ^ (l.r & l.s)) as usize;
        })?;
        Ok(vec![(Rational::one(), alice, bob)])
    })
}

fn trace_witness(layout: &SystemLayout, w: &LrnsWitness, traced: &[usize]) -> Result<LrnsWitness> {
    require_two_sites(layout)?;
    let mut local = [Vec::new(), Vec::new()];
    for &k in traced {
        check_index(layout, k)?;
        let (s, i) = split_index(layout, k);
        local[s].push(i);
    }
    for (s, l) in local.iter().enumerate() {
        if l.len() == layout.sites()[s].len() {
            return Err(BoxError::Argument(format!(
                "tracing out all of site {s} leaves no witness"
            )));
        }
    }
    w.map_terms(|a, b| {
        let ta = if local[0].is_empty() {
            a.clone()
        } else {
            a.trace_out(&local[0])?
        };
        let tb = if local[1].is_empty() {
            b.clone()
        } else {
            b.trace_out(&local[1])?
        };
        Ok(vec![(Rational::one(), ta, tb)])
    })
}

/// An operation together with the layout it acts on and an optional idle
/// context. With a context the operation acts as `Lambda (x) I` on the
/// site-wise product `domain (x) context`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperationUnderTest {
    pub op: Operation,
    pub domain: SystemLayout,
    pub tensor_context: Option<SystemLayout>,
}

impl OperationUnderTest {
    pub fn new(op: Operation, domain: SystemLayout, tensor_context: Option<SystemLayout>) -> Result<Self> {
        let out = Self {
            op,
            domain,
            tensor_context,
        };
        out.op.image_layout(&out.domain)?;
        if let Some(c) = &out.tensor_context {
            if c.num_sites() != out.domain.num_sites() {
                return Err(BoxError::Layout("context must have the domain's sites".into()));
            }
        }
        out.effective()?;
        Ok(out)
    }

    /// Layout of the boxes the operation is tested on.
    pub fn layout(&self) -> SystemLayout {
        match &self.tensor_context {
            None => self.domain.clone(),
            Some(c) => {
                let sites = self
                    .domain
                    .sites()
                    .iter()
                    .zip(c.sites())
                    .map(|(d, e)| d.iter().chain(e).copied().collect())
                    .collect();
                SystemLayout::new(sites).expect("both parts are valid")
            }
        }
    }

    /// The operation re-indexed onto [`Self::layout`].
    pub fn effective(&self) -> Result<Operation> {
        let Some(context) = &self.tensor_context else {
            return Ok(self.op.clone());
        };
        let context = context.clone();
        self.op
            .reindexed(&self.domain, &move |domain: &SystemLayout, k: usize| {
                let site = domain.site_of(k);
                let offset = k - domain.site_subsystems(site)[0];
                let before: usize = (0..site)
                    .map(|s| domain.sites()[s].len() + context.sites()[s].len())
                    .sum();
                before + offset
            })
    }

    pub fn apply(&self, b: &BoxTable) -> Result<BoxTable> {
        self.effective()?.apply(b)
    }

    pub fn describe(&self) -> Value {
        json!({
            "op": self.op.name(),
            "domain": self.domain.to_string(),
            "tensor_context": self.tensor_context.as_ref().map(|c| c.to_string()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    Validity,
    Linearity,
    NonSignaling,
    Locality,
    DiscriminatingForm,
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::Validity => "validity",
            CheckKind::Linearity => "linearity",
            CheckKind::NonSignaling => "non-signaling",
            CheckKind::Locality => "locality",
            CheckKind::DiscriminatingForm => "discriminating-form",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckFailure {
    pub case: usize,
    pub detail: String,
    pub witness: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub check: CheckKind,
    pub cases: usize,
    /// False when the check does not apply to the operation.
    pub applicable: bool,
    pub failures: Vec<CheckFailure>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn from_results(check: CheckKind, results: Vec<Option<CheckFailure>>) -> Self {
        Self {
            check,
            cases: results.len(),
            applicable: true,
            failures: results.into_iter().flatten().collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "check": self.check.to_string(),
            "applicable": self.applicable,
            "cases": self.cases,
            "passed": self.passed(),
            "failures": self.failures.iter().map(|f| json!({
                "case": f.case,
                "detail": f.detail,
                "witness": f.witness,
            })).collect::<Vec<_>>(),
        })
    }
}

fn failure(case: usize, detail: impl Into<String>, witness: Value) -> Option<CheckFailure> {
    Some(CheckFailure {
        case,
        detail: detail.into(),
        witness,
    })
}

pub fn check_validity(op: &OperationUnderTest, corpus: &[BoxTable]) -> CheckReport {
    let results = corpus
        .par_iter()
        .enumerate()
        .map(|(i, b)| match op.apply(b) {
            Err(e) => failure(i, e.to_string(), box_to_json(b)),
            Ok(img) => match validate_entries(img.layout(), img.entries()) {
                Ok(r) if r.is_ok() => None,
                Ok(r) => failure(i, r.to_string(), box_to_json(b)),
                Err(e) => failure(i, e.to_string(), box_to_json(b)),
            },
        })
        .collect();
    CheckReport::from_results(CheckKind::Validity, results)
}

pub fn check_linearity(op: &OperationUnderTest, pairs: &[(BoxTable, BoxTable, Rational)]) -> CheckReport {
    let results = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (p, q, w))| {
            let witness = || json!({"p": box_to_json(p), "q": box_to_json(q), "w": rational::format(w)});
            let run = || -> Result<bool> {
                let lhs = op.apply(&mix2(w, p, q)?)?;
                let rhs = mix2(w, &op.apply(p)?, &op.apply(q)?)?;
                Ok(lhs == rhs)
            };
            match run() {
                Ok(true) => None,
                Ok(false) => failure(i, "image of the mixture differs from the mixture of images", witness()),
                Err(e) => failure(i, e.to_string(), witness()),
            }
        })
        .collect();
    CheckReport::from_results(CheckKind::Linearity, results)
}

pub fn check_ns_preservation(op: &OperationUnderTest, corpus: &[BoxTable]) -> CheckReport {
    let results = corpus
        .par_iter()
        .enumerate()
        .map(|(i, b)| match op.apply(b) {
            Err(e) => failure(i, e.to_string(), box_to_json(b)),
            Ok(img) => match is_fully_nonsignaling_exhaustive(&img) {
                (true, _) => None,
                (false, v) => failure(
                    i,
                    v.map_or("image signals".into(), |v| format!("image signals: {v}")),
                    box_to_json(b),
                ),
            },
        })
        .collect();
    CheckReport::from_results(CheckKind::NonSignaling, results)
}

fn witness_json(w: &LrnsWitness) -> Value {
    Value::Array(
        w.terms
            .iter()
            .map(|(p, a, b)| json!({"weight": rational::format(p), "alice": box_to_json(a), "bob": box_to_json(b)}))
            .collect(),
    )
}

/// Witness route on every case; the cost LP route on the first
/// `lp_cases` cases, and on every case for operations with no witness
/// construction.
pub fn check_locality_preservation(op: &OperationUnderTest, witnesses: &[LrnsWitness], lp_cases: usize) -> CheckReport {
    let layout = op.layout();
    let effective = match op.effective() {
        Ok(e) => e,
        Err(e) => {
            return CheckReport::from_results(CheckKind::Locality, vec![failure(0, e.to_string(), Value::Null)]);
        }
    };
    let results = witnesses
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let fail = |d: String| failure(i, d, witness_json(w));
            let defects = w.defects();
            if !defects.is_empty() {
                return fail(format!("input witness rejected: {}", defects.join("; ")));
            }
            let image = match w.reconstruct().and_then(|b| effective.apply(&b)) {
                Ok(img) => img,
                Err(e) => return fail(e.to_string()),
            };
            let constructed = effective.transform_witness(&layout, w);
            if let Some(out) = &constructed {
                let out = match out {
                    Ok(o) => o,
                    Err(e) => return fail(format!("witness construction failed: {e}")),
                };
                let defects = out.defects();
                if !defects.is_empty() {
                    return fail(format!("image witness rejected: {}", defects.join("; ")));
                }
                match out.reconstruct() {
                    Ok(r) if r == image => {}
                    Ok(_) => return fail("image witness does not reconstruct the image".into()),
                    Err(e) => return fail(e.to_string()),
                }
            }
            if constructed.is_none() || i < lp_cases {
                match CostProblem::with_model(image, LocalModel::LrnsProducts).and_then(|p| nonlocal_cost(&p)) {
                    Ok(c) if c.p.is_zero() => {}
                    Ok(c) => return fail(format!("image has non-locality cost {}", rational::format(&c.p))),
                    // No vertex enumeration for this site shape: witness route only.
                    Err(BoxError::Argument(_)) if constructed.is_some() => {}
                    Err(e) => return fail(e.to_string()),
                }
            }
            None
        })
        .collect();
    CheckReport::from_results(CheckKind::Locality, results)
}

/// Images must be two flag subsystems, one per site, with zero weight on
/// every pair of different flags.
pub fn check_discriminating_form(op: &OperationUnderTest, ensemble: &[BoxTable]) -> CheckReport {
    if !op.op.is_discriminator() {
        return CheckReport {
            check: CheckKind::DiscriminatingForm,
            cases: 0,
            applicable: false,
            failures: Vec::new(),
        };
    }
    let results = ensemble
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let img = match op.apply(b) {
                Ok(img) => img,
                Err(e) => return failure(i, e.to_string(), box_to_json(b)),
            };
            let l = img.layout();
            let specs = l.subsystems();
            if l.num_sites() != 2 || specs.len() != 2 || specs[0].inputs != 1 || specs[1].inputs != 1 {
                return failure(i, format!("image layout {l} is not a flag pair"), box_to_json(b));
            }
            let nb = specs[1].outputs;
            let off: Rational = img
                .entries()
                .iter()
                .enumerate()
                .filter(|(o, _)| o / nb != o % nb)
                .map(|(_, p)| p)
                .sum();
            if off.is_zero() {
                None
            } else {
                failure(
                    i,
                    format!("weight {} on unequal flags", rational::format(&off)),
                    box_to_json(b),
                )
            }
        })
        .collect();
    CheckReport::from_results(CheckKind::DiscriminatingForm, results)
}

/// Weights with a common denominator of at most 64.
pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<Rational> {
    let cap = (64 / n.max(1)).max(1) as i64;
    let mut counts: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=cap)).collect();
    if counts.iter().all(|&c| c == 0) {
        counts[rng.gen_range(0..n)] = 1;
    }
    let total: i64 = counts.iter().sum();
    counts.into_iter().map(|c| rational::ratio(c, total)).collect()
}

/// Random vertex-like fully no-signaling box: subsystems are shuffled,
/// some pairs of binary subsystems get one of the 24 two-party vertices,
/// and the rest get deterministic functions.
pub fn random_ns_vertex_box(rng: &mut impl Rng, layout: &SystemLayout) -> BoxTable {
    let specs = layout.subsystems().to_vec();
    let mut order: Vec<usize> = (0..specs.len()).collect();
    order.shuffle(rng);
    let pair_boxes = ns_extremal_single_site();
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    let mut single: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let k = order[i];
        if i + 1 < order.len()
            && specs[k] == SubsystemSpec::BINARY
            && specs[order[i + 1]] == SubsystemSpec::BINARY
            && rng.gen_bool(0.5)
        {
            pairs.push((k, order[i + 1], rng.gen_range(0..pair_boxes.len())));
            i += 2;
        } else {
            let f = (0..specs[k].inputs)
                .map(|_| rng.gen_range(0..specs[k].outputs))
                .collect();
            single.push((k, f));
            i += 1;
        }
    }
    let entries = entries_from_fn(layout, |x, a| {
        for (k, f) in &single {
            if a[*k] != f[x[*k]] {
                return Rational::zero();
            }
        }
        let mut p = Rational::one();
        for &(k, l, v) in &pairs {
            let q = &pair_boxes[v].entries()[(x[k] * 2 + x[l]) * 4 + a[k] * 2 + a[l]];
            if q.is_zero() {
                return Rational::zero();
            }
            p *= q;
        }
        p
    });
    BoxTable::new_unchecked(layout.clone(), entries)
}

/// Mixture of one to four random vertex-like boxes.
pub fn random_ns_box(rng: &mut impl Rng, layout: &SystemLayout) -> BoxTable {
    let n = rng.gen_range(1..=4);
    let weights = random_weights(rng, n);
    let mut entries = vec![Rational::zero(); layout.num_entries()];
    for w in &weights {
        let v = random_ns_vertex_box(rng, layout);
        if w.is_zero() {
            continue;
        }
        for (e, p) in entries.iter_mut().zip(v.entries()) {
            if !p.is_zero() {
                *e += w * p;
            }
        }
    }
    BoxTable::new_unchecked(layout.clone(), entries)
}

/// Random witness on a two-site layout: one to four terms of random
/// single-site no-signaling boxes.
pub fn random_witness(rng: &mut impl Rng, layout: &SystemLayout) -> Result<LrnsWitness> {
    require_two_sites(layout)?;
    let alice = SystemLayout::single_site(layout.sites()[0].clone())?;
    let bob = SystemLayout::single_site(layout.sites()[1].clone())?;
    let n = rng.gen_range(1..=4);
    let terms = random_weights(rng, n)
        .into_iter()
        .map(|w| (w, random_ns_box(rng, &alice), random_ns_box(rng, &bob)))
        .collect();
    Ok(LrnsWitness { terms })
}

/// Named boxes that fit `layout`: the eight `B_rst` on a 2x2 layout and a
/// few maximal-flag `B_in` on the ABCD layout.
pub fn named_boxes(layout: &SystemLayout) -> Vec<BoxTable> {
    if layout == &SystemLayout::bipartite_2x2() {
        return MaxNonlocalLabel::all().map(b_rst).collect();
    }
    if layout == &SystemLayout::abcd() {
        let all: Vec<MaxNonlocalLabel> = MaxNonlocalLabel::all().collect();
        return [&all[..2], &all[..4], &all[..]]
            .iter()
            .map(|l| b_in_maximal_flags(l, &Rational::one()).expect("labels are distinct"))
            .collect();
    }
    Vec::new()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub operation: Value,
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<CheckReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckReport::passed)
    }

    pub fn check(&self, kind: CheckKind) -> &CheckReport {
        self.checks
            .iter()
            .find(|c| c.check == kind)
            .expect("every suite runs all checks")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "operation": self.operation,
            "seed": self.seed,
            "trials": self.trials,
            "passed": self.passed(),
            "checks": self.checks.iter().map(CheckReport::to_json).collect::<Vec<_>>(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteOptions {
    pub trials: usize,
    pub seed: u64,
    /// Cases that also run the cost LP in the locality check.
    pub lp_cases: usize,
    /// Extra boxes for the discriminating-form check.
    pub ensemble: Vec<BoxTable>,
}

impl SuiteOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            lp_cases: 25,
            ensemble: Vec::new(),
        }
    }
}

/// All five checks on seeded random corpora plus the named boxes of the
/// layout.
pub fn run_suite(op: &OperationUnderTest, options: &SuiteOptions) -> Result<SuiteReport> {
    let layout = op.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut corpus = named_boxes(&layout);
    corpus.extend((0..options.trials).map(|_| random_ns_box(&mut rng, &layout)));
    let pairs: Vec<_> = (0..options.trials)
        .map(|_| {
            let w = random_weights(&mut rng, 2).swap_remove(0);
            (random_ns_box(&mut rng, &layout), random_ns_box(&mut rng, &layout), w)
        })
        .collect();
    let witnesses = (0..options.trials)
        .map(|_| random_witness(&mut rng, &layout))
        .collect::<Result<Vec<_>>>()?;
    let mut ensemble = options.ensemble.clone();
    if op.tensor_context.is_none() {
        ensemble.extend(corpus.iter().cloned());
    }
    let checks = vec![
        check_validity(op, &corpus),
        check_linearity(op, &pairs),
        check_ns_preservation(op, &corpus),
        check_locality_preservation(op, &witnesses, options.lp_cases),
        check_discriminating_form(
            &OperationUnderTest {
                tensor_context: None,
                ..op.clone()
            },
            &ensemble_for(op, &ensemble, &mut rng),
        ),
    ];
    Ok(SuiteReport {
        operation: op.describe(),
        seed: options.seed,
        trials: options.trials,
        checks,
    })
}

/// Discriminating form is judged on the bare domain, so contextual corpora
/// are replaced by fresh boxes on it.
fn ensemble_for(op: &OperationUnderTest, given: &[BoxTable], rng: &mut impl Rng) -> Vec<BoxTable> {
    let mut out: Vec<BoxTable> = given.iter().filter(|b| b.layout() == &op.domain).cloned().collect();
    if op.tensor_context.is_some() {
        out.extend(named_boxes(&op.domain));
        out.extend((0..32).map(|_| random_ns_box(rng, &op.domain)));
    }
    out
}

/// The shipped families, each acting on its domain with a binary idle
/// pair as tensor context.
pub fn standard_family(name: &str) -> Result<OperationUnderTest> {
    let bin = SubsystemSpec::BINARY;
    let idle = Some(SystemLayout::bipartite_2x2());
    match name {
        "comparing" => OperationUnderTest::new(
            Operation::Comparing {
                op: ComparingOperation::pr_vs_anti_pr(),
                acted: (0, 1),
            },
            SystemLayout::bipartite_2x2(),
            idle,
        ),
        "control-o" => {
            let labels: Vec<MaxNonlocalLabel> = ["000", "011", "101"]
                .iter()
                .map(|s| s.parse().expect("label"))
                .collect();
            let rotation = ControlRotation::new(labels)?;
            let domain = rotation.layout();
            OperationUnderTest::new(
                Operation::ControlO {
                    rotation,
                    flags: (0, 2),
                    targets: (1, 3),
                },
                domain,
                idle,
            )
        }
        "twirl" => OperationUnderTest::new(Operation::Twirl { acted: (0, 1) }, SystemLayout::bipartite_2x2(), idle),
        "trace" => OperationUnderTest::new(
            Operation::TraceOut { traced: vec![1, 3] },
            SystemLayout::new(vec![vec![bin, bin], vec![bin, bin]])?,
            idle,
        ),
        "swap" => OperationUnderTest::new(Operation::Swap { pair: (0, 1) }, SystemLayout::bipartite_2x2(), idle),
        "signaling-copy" => OperationUnderTest::new(
            Operation::SignalingCopy { from: 0, into: 1 },
            SystemLayout::bipartite_2x2(),
            None,
        ),
        "asymmetric-flag" => OperationUnderTest::new(
            Operation::AsymmetricFlag {
                measurement: (1, 1),
                acted: (0, 1),
            },
            SystemLayout::bipartite_2x2(),
            None,
        ),
        other => Err(BoxError::Argument(format!("unknown operation family {other:?}"))),
    }
}

pub const STANDARD_FAMILIES: [&str; 4] = ["comparing", "control-o", "twirl", "trace"];
pub const NEGATIVE_CONTROLS: [&str; 3] = ["swap", "signaling-copy", "asymmetric-flag"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::flag_pair;

    fn small(name: &str) -> SuiteReport {
        run_suite(&standard_family(name).unwrap(), &SuiteOptions::new(40, 11)).unwrap()
    }

    #[test]
    fn standard_families_pass() {
        for name in STANDARD_FAMILIES {
            let r = small(name);
            assert!(r.passed(), "{name}: {}", r.to_json());
        }
    }

    #[test]
    fn swap_fails_locality_in_context_only() {
        let r = small("swap");
        assert!(r.check(CheckKind::Validity).passed());
        assert!(r.check(CheckKind::NonSignaling).passed());
        assert!(!r.check(CheckKind::Locality).passed());
        let bare =
            OperationUnderTest::new(Operation::Swap { pair: (0, 1) }, SystemLayout::bipartite_2x2(), None).unwrap();
        let r = run_suite(&bare, &SuiteOptions::new(40, 11)).unwrap();
        assert!(r.check(CheckKind::Locality).passed());
    }

    #[test]
    fn signaling_copy_is_caught() {
        let r = small("signaling-copy");
        assert!(r.check(CheckKind::Linearity).passed());
        assert!(!r.check(CheckKind::NonSignaling).passed());
    }

    #[test]
    fn asymmetric_flag_fails_form_only() {
        let r = small("asymmetric-flag");
        assert!(r.check(CheckKind::Locality).passed());
        assert!(r.check(CheckKind::NonSignaling).passed());
        assert!(!r.check(CheckKind::DiscriminatingForm).passed());
    }

    #[test]
    fn example_one_has_deterministic_flags() {
        let op = OperationUnderTest::new(
            Operation::Comparing {
                op: ComparingOperation::pr_vs_anti_pr(),
                acted: (0, 1),
            },
            SystemLayout::bipartite_2x2(),
            None,
        )
        .unwrap();
        assert_eq!(
            op.apply(&b_rst(MaxNonlocalLabel::PR)).unwrap(),
            flag_pair(0, 2).unwrap()
        );
        assert_eq!(
            op.apply(&b_rst(MaxNonlocalLabel::ANTI_PR)).unwrap(),
            flag_pair(1, 2).unwrap()
        );
    }

    #[test]
    fn context_reindexing() {
        let op = standard_family("trace").unwrap();
        assert_eq!(
            op.layout().to_string(),
            SystemLayout::new(vec![vec![SubsystemSpec::BINARY; 3]; 2])
                .unwrap()
                .to_string()
        );
        assert_eq!(op.effective().unwrap(), Operation::TraceOut { traced: vec![1, 4] });
    }

    #[test]
    fn comparing_witness_weights() {
        // Deterministic sides: one term with the flag of the outcome pair.
        let layout = SystemLayout::bipartite_2x2();
        let det = |v: usize| {
            BoxTable::new(
                SystemLayout::single_site(vec![SubsystemSpec::BINARY]).unwrap(),
                (0..4)
                    .map(|i| if i % 2 == v { rational::one() } else { rational::zero() })
                    .collect(),
            )
            .unwrap()
        };
        let w = LrnsWitness {
            terms: vec![(rational::one(), det(0), det(1))],
        };
        let op = Operation::Comparing {
            op: ComparingOperation::pr_vs_anti_pr(),
            acted: (0, 1),
        };
        let out = op.transform_witness(&layout, &w).unwrap().unwrap();
        assert_eq!(out.terms.len(), 1);
        assert_eq!(out.reconstruct().unwrap(), flag_pair(0, 2).unwrap());
    }

    #[test]
    fn weights_have_small_denominators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            let w = random_weights(&mut rng, n);
            assert!(w.iter().sum::<Rational>().is_one());
            assert!(w.iter().all(|v| *v.denom() <= 64.into()));
        }
    }
}
