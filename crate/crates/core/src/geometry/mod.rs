//! Discretized model surfaces and metric-aware primitives.

mod distance;
mod manifold;
mod spec;

pub use distance::{stencil_offsets, stencil_overshoot, wrap_angle, Ball};
pub use manifold::{DiscreteManifold, Vertex};
pub use spec::{ManifoldKind, ManifoldSpec};
