//! Stochastic Burgers turbulence: spectral and entropy solvers, ensemble
//! statistics and checks of the exact scaling laws.

// `!(x > 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod forcing;
pub mod harness;
pub mod laws;
pub mod rng;
pub mod snapshot;
pub mod spectral;
pub mod statistics;

pub use entropy::{GodunovConfig, GodunovSolver, GridField, GridState};
pub use error::{Error, Result};
pub use forcing::{ForcedMode, ForcingSpec, NoiseIncrement};
pub use rng::NoiseStream;
pub use snapshot::{FieldRef, OwnedField, Snapshot, SnapshotSink};
pub use spectral::{DtPolicy, SolverConfig, SpectralField, SpectralSolver, TrajectoryState};
pub use harness::{run_experiment, verify, ExperimentConfig, RunManifest, RunOptions, VerdictReport};
pub use laws::LawVerdict;
