//! Numerical verification of Li-Yau gradient bounds under integral Ricci
//! curvature conditions on discretized model surfaces.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod curvature;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod harness;
pub mod heat;
pub mod lemmas;
pub mod liyau;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::{Ball, DiscreteManifold, ManifoldKind, ManifoldSpec, Vertex};
