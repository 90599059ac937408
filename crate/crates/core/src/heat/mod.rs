//! Implicit heat flow, Dirichlet kernels and the potential-perturbed
//! `w`-equation.

mod field;
mod solve;
mod stepper;
mod w;

pub use field::{Domain, FieldKind, ScalarTimeField, TimeGrid};
pub use solve::{dirichlet_heat_kernel, global_heat_kernel, solve_heat, HeatKernel};
pub use stepper::Boundary;
pub use w::{
    coupling, j_from_w, solve_w_direct, solve_w_duhamel, w_from_j, DuhamelReport, Quadrature,
    WOptions,
};
