//! Galerkin elasticity on hexahedral meshes.

mod assemble;
mod solve;
mod sparse;

pub use assemble::{
    assemble_body_load, assemble_prestrain_load, assemble_stiffness, impose_dirichlet,
    quadratic_energy, strain_at_quadrature, work, DisplacementField, Frame, StrainSamples,
    TensorFn, VectorFn,
};
pub use solve::{dot, pcg_operator, solve_spd, solve_spd_projected, Projector, SolveStats, SolverOptions};
pub use sparse::{CsrMatrix, SparseSystem};
