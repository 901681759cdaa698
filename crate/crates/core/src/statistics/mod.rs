//! Per-snapshot observables and mergeable ensemble statistics.

mod accumulator;
mod bracket;
mod diagnostics;
mod ensemble;
mod increments;

pub use accumulator::{compensated_sum, merge_all, CompensatedSum, MomentAccumulator};
pub use bracket::{bracket_average, time_average, BracketSpec, WindowAverager};
pub use diagnostics::{
    correlation_fl, dissipation_rate, field_values, oleinik_diagnostics, sobolev_norm, spectral_form, Correlation,
    OleinikDiagnostics,
};
pub use ensemble::{BudgetPoint, BudgetSeries, EnsembleStats, ObservableSpec, SCALAR_NAMES};
pub use increments::{increment_moments, s3_identity, IncrementMoments, LGrid, StructureTable, DEFAULT_P_LIST};
