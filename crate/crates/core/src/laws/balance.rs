use serde::{Deserialize, Serialize};

use super::verdict::LawVerdict;
use crate::statistics::{BudgetSeries, MomentAccumulator};

/// How the ensemble estimates `E[½‖u(t)‖² − ½‖u(0)‖² + ∫ν‖u‖₁² − ½B₀t]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceEstimator {
    /// Plain ensemble means of each term.
    Raw,
    /// Same expectation with the zero-mean martingale `M_t` subtracted per
    /// trajectory, which removes most of the sampling noise.
    ControlVariate,
}

/// Largest normalised residual `|r(t)|/(½B₀t)` over sample times `t ≥ t_min`.
pub fn energy_balance_check(
    series: &BudgetSeries,
    b0: f64,
    t_min: f64,
    tolerance: f64,
    estimator: BalanceEstimator,
) -> LawVerdict {
    let mut worst = (0.0f64, 0.0f64, f64::NAN);
    for (i, &t) in series.times.iter().enumerate() {
        if t < t_min {
            continue;
        }
        let norm = 0.5 * b0 * t;
        let (r, se) = match estimator {
            BalanceEstimator::Raw => {
                let r = series.energy[i].mean() - series.initial_energy.mean() + series.dissipated[i].mean() - norm;
                // ignores the correlation between the two terms
                let se = (series.energy[i].stderr().powi(2) + series.dissipated[i].stderr().powi(2)).sqrt();
                (r, se)
            }
            BalanceEstimator::ControlVariate => (series.pathwise[i].mean(), series.pathwise[i].stderr()),
        };
        if (r / norm).abs() >= worst.0.abs() {
            worst = (r / norm, se / norm, t);
        }
    }
    let name = match estimator {
        BalanceEstimator::Raw => "energy_balance_raw",
        BalanceEstimator::ControlVariate => "energy_balance",
    };
    if worst.2.is_nan() {
        // NaN never passes
        return LawVerdict::absolute(name, f64::NAN, 0.0, tolerance, f64::NAN, series.count()).note(format!("no budget samples at t >= {t_min}"));
    }
    LawVerdict::absolute(name, worst.0.abs(), 0.0, tolerance, worst.1, series.count())
        .note(format!("worst time t = {}", worst.2))
}

/// Stationary `ε^B = ν E‖u‖₁²` against `B₀/2`.
pub fn dissipation_anchor_check(eps: &MomentAccumulator, b0: f64, tolerance: f64) -> LawVerdict {
    LawVerdict::relative("dissipation_anchor", eps.mean(), 0.5 * b0, tolerance, eps.stderr(), eps.count())
}
