//! Galerkin truncation of viscous Burgers on the real Fourier basis.

mod field;
mod solver;
mod transform;

pub use field::SpectralField;
pub use solver::{
    dealiasing_grid, default_truncation, nonlinear_term, refine_check, DtPolicy, EnergyBudget,
    Nonlinearity, SolverConfig, SpectralSolver, TrajectoryState, BLOW_UP_LIMIT,
};
pub use transform::{cell_averages, from_physical, to_physical, RealDft, Transform};
