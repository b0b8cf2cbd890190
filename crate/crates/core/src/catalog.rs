//! Named boxes and vertex sets.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{BoxError, Result};
use crate::layout::{decode, SubsystemSpec, SystemLayout};
use crate::nonsignaling;
use crate::rational::{self, Rational};
use crate::table::{entries_from_fn, BoxTable};

/// Index `rst` of the maximally nonlocal box `a ^ b = xy ^ rx ^ sy ^ t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MaxNonlocalLabel {
    pub r: bool,
    pub s: bool,
    pub t: bool,
}

impl MaxNonlocalLabel {
    pub const fn new(r: bool, s: bool, t: bool) -> Self {
        Self { r, s, t }
    }

    pub const PR: Self = Self::new(false, false, false);
    pub const ANTI_PR: Self = Self::new(false, false, true);

    /// `index = 4r + 2s + t`, matching the binary string `rst`.
    pub fn from_index(index: usize) -> Self {
        assert!(index < 8, "label index {index} out of range");
        Self::new(index & 4 != 0, index & 2 != 0, index & 1 != 0)
    }

    pub fn index(self) -> usize {
        (self.r as usize) << 2 | (self.s as usize) << 1 | self.t as usize
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..8).map(Self::from_index)
    }

    /// Partner label with `t` negated.
    pub fn flip_t(self) -> Self {
        Self::new(self.r, self.s, !self.t)
    }

    /// Label of `O_self` applied to `B_other`:
    /// `(r ^ r', s ^ s', r's ^ s'r ^ t ^ t')`.
    pub fn rotate(self, other: Self) -> Self {
        Self::new(
            self.r ^ other.r,
            self.s ^ other.s,
            (other.r & self.s) ^ (other.s & self.r) ^ self.t ^ other.t,
        )
    }

    /// Parity `xy ^ rx ^ sy ^ t` that `a ^ b` must equal.
    pub fn parity(self, x: usize, y: usize) -> usize {
        (x & y) ^ (self.r as usize & x) ^ (self.s as usize & y) ^ self.t as usize
    }
}

impl fmt::Display for MaxNonlocalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.r as u8, self.s as u8, self.t as u8)
    }
}

impl FromStr for MaxNonlocalLabel {
    type Err = BoxError;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<bool> = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(BoxError::Parse(format!("bad label {s:?}"))),
            })
            .collect::<Result<_>>()?;
        match bits[..] {
            [r, s, t] => Ok(Self::new(r, s, t)),
            _ => Err(BoxError::Parse(format!("label {s:?} must have 3 bits"))),
        }
    }
}

/// The 2x2 box with uniform weight on `a ^ b = xy ^ rx ^ sy ^ t`.
pub fn b_rst(label: MaxNonlocalLabel) -> BoxTable {
    let entries = entries_from_fn(&SystemLayout::bipartite_2x2(), |x, a| {
        if a[0] ^ a[1] == label.parity(x[0], x[1]) {
            rational::half()
        } else {
            Rational::zero()
        }
    });
    BoxTable::new_unchecked(SystemLayout::bipartite_2x2(), entries)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IsotropicSpec {
    pub label: MaxNonlocalLabel,
    pub alpha: Rational,
}

impl IsotropicSpec {
    /// Any `alpha` in `[0, 1]` is accepted; the discrimination bounds assume
    /// `[1/2, 1]`, see [`IsotropicSpec::in_bound_range`].
    pub fn new(label: MaxNonlocalLabel, alpha: Rational) -> Result<Self> {
        if alpha < Rational::zero() || alpha > Rational::one() {
            return Err(BoxError::Argument(format!(
                "isotropic weight {} outside [0, 1]",
                rational::format(&alpha)
            )));
        }
        Ok(Self { label, alpha })
    }

    pub fn maximal(label: MaxNonlocalLabel) -> Self {
        Self {
            label,
            alpha: Rational::one(),
        }
    }

    pub fn in_bound_range(&self) -> bool {
        self.alpha >= rational::half() && self.alpha <= Rational::one()
    }
}

/// `alpha * B_rst + (1 - alpha) * B_rs(not t)`.
pub fn isotropic(spec: &IsotropicSpec) -> BoxTable {
    let main = b_rst(spec.label);
    let partner = b_rst(spec.label.flip_t());
    let rest = Rational::one() - &spec.alpha;
    let entries = main
        .entries()
        .iter()
        .zip(partner.entries())
        .map(|(p, q)| &spec.alpha * p + &rest * q)
        .collect();
    BoxTable::new_unchecked(SystemLayout::bipartite_2x2(), entries)
}

/// Single-subsystem box with unary input that always outputs `j` out of `n`.
pub fn flag_box(j: usize, n: usize) -> Result<BoxTable> {
    if j >= n {
        return Err(BoxError::OutOfRange(format!("flag {j} not below alphabet size {n}")));
    }
    let layout = SystemLayout::new(vec![vec![SubsystemSpec::flag(n)]])?;
    let mut entries = vec![Rational::zero(); n];
    entries[j] = Rational::one();
    Ok(BoxTable::new_unchecked(layout, entries))
}

/// `F(j)` on Alice's site tensored with `F(j)` on Bob's.
pub fn flag_pair(j: usize, n: usize) -> Result<BoxTable> {
    let f = flag_box(j, n)?;
    f.tensor_new_sites(&f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexKind {
    LocalDeterministic,
    NsExtremal,
    LrnsProduct,
}

impl fmt::Display for VertexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VertexKind::LocalDeterministic => "local-deterministic",
            VertexKind::NsExtremal => "ns-extremal",
            VertexKind::LrnsProduct => "lrns-product",
        })
    }
}

#[derive(Clone, Debug)]
pub struct VertexSet {
    pub layout: SystemLayout,
    pub vertices: Vec<BoxTable>,
    pub kind: VertexKind,
}

impl VertexSet {
    /// Drops duplicates (by exact entries), keeping first occurrences.
    pub fn new(layout: SystemLayout, vertices: Vec<BoxTable>, kind: VertexKind) -> Result<Self> {
        if let Some(v) = vertices.iter().find(|v| !v.layout().compatible(&layout)) {
            return Err(BoxError::Incompatible(format!(
                "vertex on {} in a set over {}",
                v.layout(),
                layout
            )));
        }
        let mut seen = HashSet::new();
        let vertices = vertices
            .into_iter()
            .filter(|v| seen.insert(v.entries().to_vec()))
            .collect();
        Ok(Self { layout, vertices, kind })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Deterministic strategies where every subsystem's output is a function of
/// its own input only. Works for any layout; there are
/// `prod_k outputs_k ^ inputs_k` of them.
pub fn local_deterministic_vertices(layout: &SystemLayout) -> VertexSet {
    let specs = layout.subsystems();
    // Per subsystem, the number of functions inputs -> outputs.
    let counts: Vec<usize> = specs.iter().map(|s| s.outputs.pow(s.inputs as u32)).collect();
    let total: usize = counts.iter().product();
    let mut vertices = Vec::with_capacity(total);
    for idx in 0..total {
        let choice = decode(idx, &counts);
        let functions: Vec<Vec<usize>> = specs
            .iter()
            .zip(&choice)
            .map(|(s, &c)| decode(c, &vec![s.outputs; s.inputs]))
            .collect();
        let entries = entries_from_fn(layout, |x, a| {
            let hit = (0..specs.len()).all(|k| a[k] == functions[k][x[k]]);
            if hit {
                Rational::one()
            } else {
                Rational::zero()
            }
        });
        vertices.push(BoxTable::new_unchecked(layout.clone(), entries));
    }
    VertexSet {
        layout: layout.clone(),
        vertices,
        kind: VertexKind::LocalDeterministic,
    }
}

/// The 24 vertices of the 2x2 no-signaling polytope: 16 deterministic boxes
/// followed by the 8 boxes `B_rst` in label order.
pub fn ns_extremal_vertices_2x2() -> VertexSet {
    let layout = SystemLayout::bipartite_2x2();
    let mut vertices = local_deterministic_vertices(&layout).vertices;
    vertices.extend(MaxNonlocalLabel::all().map(b_rst));
    VertexSet {
        layout,
        vertices,
        kind: VertexKind::NsExtremal,
    }
}

/// The 24 vertices regrouped onto a single site of two binary subsystems,
/// i.e. the fully no-signaling boxes one party can hold locally.
pub fn ns_extremal_single_site() -> Vec<BoxTable> {
    let site = SystemLayout::single_site(vec![SubsystemSpec::BINARY; 2]).expect("layout");
    ns_extremal_vertices_2x2()
        .vertices
        .into_iter()
        .map(|v| v.regroup(site.clone()).expect("same subsystems"))
        .collect()
}

/// All 576 products `V_AC (x) V_BD` of single-site no-signaling vertices on
/// the ABCD layout (Alice `[A, C]`, Bob `[B, D]`).
pub fn lrns_product_vertices() -> VertexSet {
    let side = ns_extremal_single_site();
    let mut vertices = Vec::with_capacity(side.len() * side.len());
    for a in &side {
        for b in &side {
            vertices.push(a.tensor_new_sites(b).expect("two single-site boxes"));
        }
    }
    VertexSet {
        layout: SystemLayout::abcd(),
        vertices,
        kind: VertexKind::LrnsProduct,
    }
}

/// `sum_i p_i B_i^{alpha_i} (x) B_i^{beta_i}` on the ABCD layout, the first
/// factor on `A|B` and the second on `C|D`.
pub fn build_b_in(pairs: &[(IsotropicSpec, IsotropicSpec)], weights: &[Rational]) -> Result<BoxTable> {
    if pairs.len() != weights.len() || pairs.is_empty() {
        return Err(BoxError::Argument(format!(
            "{} box pairs but {} weights",
            pairs.len(),
            weights.len()
        )));
    }
    let total: Rational = weights.iter().sum();
    if !total.is_one() || weights.iter().any(|w| *w < Rational::zero()) {
        return Err(BoxError::Argument("weights must form a distribution".into()));
    }
    let layout = SystemLayout::abcd();
    let mut entries = vec![Rational::zero(); layout.num_entries()];
    for ((first, second), w) in pairs.iter().zip(weights) {
        let term = isotropic(first).tensor_sitewise(&isotropic(second))?;
        for (e, p) in entries.iter_mut().zip(term.entries()) {
            if !p.is_zero() {
                *e += w * p;
            }
        }
    }
    let b = BoxTable::new_unchecked(layout, entries);
    debug_assert!(nonsignaling::fully_ns(&b));
    Ok(b)
}

/// Equal-weight `B_in` with `B^alpha_i (x) B^1_i` for each label.
pub fn b_in_maximal_flags(labels: &[MaxNonlocalLabel], alpha: &Rational) -> Result<BoxTable> {
    let pairs: Vec<_> = labels
        .iter()
        .map(|&l| Ok((IsotropicSpec::new(l, alpha.clone())?, IsotropicSpec::maximal(l))))
        .collect::<Result<_>>()?;
    let w = rational::ratio(1, labels.len() as i64);
    build_b_in(&pairs, &vec![w; labels.len()])
}
