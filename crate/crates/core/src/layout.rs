//! Site/subsystem structure of a box and the mixed-radix joint indexing.
//!
//! Subsystems are flattened in `(site, subsystem)` order. A joint input
//! (or output) tuple holds one value per flattened subsystem and is encoded
//! row-major: the first subsystem is the most significant digit.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{BoxError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsystemSpec {
    pub inputs: usize,
    pub outputs: usize,
}

impl SubsystemSpec {
    pub const fn new(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs }
    }

    pub const BINARY: SubsystemSpec = SubsystemSpec::new(2, 2);

    /// Unary-input subsystem with `n` outcomes, the shape of a flag box.
    pub const fn flag(n: usize) -> Self {
        Self::new(1, n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemLayout {
    sites: Vec<Vec<SubsystemSpec>>,
    flat: Vec<SubsystemSpec>,
    site_of: Vec<usize>,
}

impl SystemLayout {
    pub fn new(sites: Vec<Vec<SubsystemSpec>>) -> Result<Self> {
        if sites.is_empty() {
            return Err(BoxError::Layout("layout needs at least one site".into()));
        }
        let mut flat = Vec::new();
        let mut site_of = Vec::new();
        for (s, site) in sites.iter().enumerate() {
            if site.is_empty() {
                return Err(BoxError::Layout(format!("site {s} has no subsystems")));
            }
            for spec in site {
                if spec.inputs == 0 || spec.outputs == 0 {
                    return Err(BoxError::Layout(format!(
                        "site {s}: cardinalities must be positive, got {}x{}",
                        spec.inputs, spec.outputs
                    )));
                }
                flat.push(*spec);
                site_of.push(s);
            }
        }
        Ok(Self { sites, flat, site_of })
    }

    /// One binary subsystem per party: the 2x2 Bell scenario.
    pub fn bipartite_2x2() -> Self {
        Self::bipartite(SubsystemSpec::BINARY, SubsystemSpec::BINARY)
    }

    pub fn bipartite(alice: SubsystemSpec, bob: SubsystemSpec) -> Self {
        Self::new(vec![vec![alice], vec![bob]]).expect("valid bipartite layout")
    }

    /// Two binary subsystems per party, Alice holding `[A, C]` and Bob `[B, D]`.
    pub fn abcd() -> Self {
        Self::new(vec![
            vec![SubsystemSpec::BINARY, SubsystemSpec::BINARY],
            vec![SubsystemSpec::BINARY, SubsystemSpec::BINARY],
        ])
        .expect("valid layout")
    }

    pub fn single_site(subsystems: Vec<SubsystemSpec>) -> Result<Self> {
        Self::new(vec![subsystems])
    }

    pub fn sites(&self) -> &[Vec<SubsystemSpec>] {
        &self.sites
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn subsystems(&self) -> &[SubsystemSpec] {
        &self.flat
    }

    pub fn num_subsystems(&self) -> usize {
        self.flat.len()
    }

    pub fn site_of(&self, subsystem: usize) -> usize {
        self.site_of[subsystem]
    }

    /// Flattened indices of the subsystems living on `site`.
    pub fn site_subsystems(&self, site: usize) -> Vec<usize> {
        (0..self.flat.len()).filter(|&k| self.site_of[k] == site).collect()
    }

    pub fn is_2x2(&self) -> bool {
        self.sites.len() == 2 && self.sites.iter().all(|s| s.len() == 1 && s[0] == SubsystemSpec::BINARY)
    }

    pub fn num_inputs(&self) -> usize {
        self.flat.iter().map(|s| s.inputs).product()
    }

    pub fn num_outputs(&self) -> usize {
        self.flat.iter().map(|s| s.outputs).product()
    }

    pub fn num_entries(&self) -> usize {
        self.num_inputs() * self.num_outputs()
    }

    pub fn input_radices(&self) -> Vec<usize> {
        self.flat.iter().map(|s| s.inputs).collect()
    }

    pub fn output_radices(&self) -> Vec<usize> {
        self.flat.iter().map(|s| s.outputs).collect()
    }

    pub fn encode_input(&self, tuple: &[usize]) -> Result<usize> {
        encode(tuple, self.flat.iter().map(|s| s.inputs), "input")
    }

    pub fn encode_output(&self, tuple: &[usize]) -> Result<usize> {
        encode(tuple, self.flat.iter().map(|s| s.outputs), "output")
    }

    pub fn decode_input(&self, index: usize) -> Vec<usize> {
        decode(index, &self.input_radices())
    }

    pub fn decode_output(&self, index: usize) -> Vec<usize> {
        decode(index, &self.output_radices())
    }

    /// Same structure and cardinalities.
    pub fn compatible(&self, other: &SystemLayout) -> bool {
        self.sites == other.sites
    }

    /// Restriction to a subset of subsystems; sites left empty are dropped.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let keep: BTreeSet<usize> = keep.iter().copied().collect();
        let mut sites = Vec::new();
        for s in 0..self.sites.len() {
            let site: Vec<SubsystemSpec> = self
                .site_subsystems(s)
                .into_iter()
                .filter(|k| keep.contains(k))
                .map(|k| self.flat[k])
                .collect();
            if !site.is_empty() {
                sites.push(site);
            }
        }
        Self::new(sites)
    }
}

impl fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sites: Vec<String> = self
            .sites
            .iter()
            .map(|site| {
                site.iter()
                    .map(|s| format!("{}x{}", s.inputs, s.outputs))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        write!(f, "[{}]", sites.join(" | "))
    }
}

pub(crate) fn encode(tuple: &[usize], radices: impl ExactSizeIterator<Item = usize>, what: &str) -> Result<usize> {
    if tuple.len() != radices.len() {
        return Err(BoxError::OutOfRange(format!(
            "{what} tuple has {} components, layout has {}",
            tuple.len(),
            radices.len()
        )));
    }
    let mut index = 0;
    for (k, (&v, r)) in tuple.iter().zip(radices).enumerate() {
        if v >= r {
            return Err(BoxError::OutOfRange(format!(
                "{what} {v} at subsystem {k} exceeds cardinality {r}"
            )));
        }
        index = index * r + v;
    }
    Ok(index)
}

pub(crate) fn decode(mut index: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for k in (0..radices.len()).rev() {
        out[k] = index % radices[k];
        index /= radices[k];
    }
    out
}

/// Row-major encoding without bounds checks, for hot loops.
pub(crate) fn encode_unchecked(tuple: &[usize], radices: &[usize]) -> usize {
    tuple.iter().zip(radices).fold(0, |acc, (&v, &r)| acc * r + v)
}

/// Two-sided split of the flattened subsystems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    left: BTreeSet<usize>,
    right: BTreeSet<usize>,
}

impl Bipartition {
    pub fn new(layout: &SystemLayout, left: impl IntoIterator<Item = usize>) -> Result<Self> {
        let n = layout.num_subsystems();
        let left: BTreeSet<usize> = left.into_iter().collect();
        if let Some(&k) = left.iter().find(|&&k| k >= n) {
            return Err(BoxError::OutOfRange(format!("subsystem {k} not in layout")));
        }
        let right: BTreeSet<usize> = (0..n).filter(|k| !left.contains(k)).collect();
        if left.is_empty() || right.is_empty() {
            return Err(BoxError::Argument("both sides of a cut must be nonempty".into()));
        }
        Ok(Self { left, right })
    }

    /// The cut between the parties' sites: site 0 against everything else.
    pub fn by_site(layout: &SystemLayout) -> Result<Self> {
        Self::new(layout, layout.site_subsystems(0))
    }

    pub fn left(&self) -> &BTreeSet<usize> {
        &self.left
    }

    pub fn right(&self) -> &BTreeSet<usize> {
        &self.right
    }
}
