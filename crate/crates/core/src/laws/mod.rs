//! Verdicts on the exact relations: KHM balance, the 4/5-law, structure
//! function scaling, Sobolev scaling, energy balance and Landau rescaling.

mod balance;
mod fit;
mod khm;
mod landau;
mod verdict;

pub use balance::{dissipation_anchor_check, energy_balance_check, BalanceEstimator};
pub use fit::{fit_power_law, fit_structure_exponent, indices_in, ScalingFit};
pub use khm::{khm_dynamic_residual, khm_stationary_residual, nonuniform_derivative, KHMReport, KhmSlice};
pub use landau::{
    c_star, c_star_check, exponent_selection, landau_identities, rescale_snapshots, rescaled_forcing, LandauReport,
};
pub use verdict::{
    correction_trend, detect_inertial_range, discarded_term_ratio, sobolev_scaling_check, stationarity_test,
    strong_inertial_range, verify_45, weak_law_check, weighted_ratio, LawVerdict, RangeSpec, DEFAULT_CAP,
    DISSIPATION_C1,
};
