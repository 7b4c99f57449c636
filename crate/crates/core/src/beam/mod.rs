//! The limit beam: section cell problems and the one-dimensional solver.

pub mod basis;
pub mod cell;
mod limit;

pub use basis::Layout;
pub use cell::{macro_modes, micro_cell_solve, CellData, CellSolve, CellSolver};
pub use limit::{
    assemble_limit_system, beam_loads, solve_dense, solve_limit, BeamLoads, BeamSolution, LimitModel,
    LimitOptions,
};
