//! Exact calculus of non-signaling boxes.
//!
//! Boxes are conditional probability tables with exact rational entries.
//! The crate builds the standard families (PR-type boxes, isotropic
//! mixtures, flags), transforms them (twirling, relabelings, comparing
//! operations), computes the non-locality cost with an exact simplex and a
//! checkable certificate, and evaluates discrimination bounds.

pub mod catalog;
pub mod clp;
pub mod cost;
pub mod discrimination;
pub mod error;
pub mod json;
pub mod layout;
pub mod nonsignaling;
pub mod rational;
pub mod simplex;
pub mod table;
pub mod transforms;

pub use catalog::{b_rst, flag_box, isotropic, IsotropicSpec, MaxNonlocalLabel, VertexKind, VertexSet};
pub use cost::{CostCertificate, CostProblem, LocalModel};
pub use error::{BoxError, Result};
pub use layout::{Bipartition, SubsystemSpec, SystemLayout};
pub use rational::Rational;
pub use table::{mix, BoxTable, Ensemble};
