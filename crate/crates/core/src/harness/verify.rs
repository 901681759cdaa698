use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SolverKind};
use super::run::{load_run, RunOptions, RunStatistics};
use crate::error::{Error, Result};
use crate::laws::{
    c_star, c_star_check, correction_trend, dissipation_anchor_check, energy_balance_check, exponent_selection,
    fit_structure_exponent, khm_stationary_residual, sobolev_scaling_check, stationarity_test, verify_45,
    weak_law_check, BalanceEstimator, LawVerdict, RangeSpec, DEFAULT_CAP,
};
use crate::statistics::{EnsembleStats, MomentAccumulator};

/// Laws `verify` understands.
pub const LAWS: [&str; 12] = [
    "khm_stationary",
    "four_fifths",
    "four_fifths_trend",
    "weak_law",
    "inertial_exponents",
    "dissipation_exponent",
    "energy_balance",
    "energy_balance_raw",
    "dissipation_anchor",
    "c_star",
    "exponent_selection",
    "stationarity",
];

/// Tolerances and range settings used by the verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub cap: f64,
    pub four_fifths: f64,
    pub exponent: f64,
    pub dissipation_exponent: f64,
    pub khm: f64,
    pub balance: f64,
    pub balance_t_min: f64,
    pub anchor: f64,
    pub weak_law: f64,
    pub c_star: f64,
    /// Lower end of the fit range for inviscid runs, in cells.
    pub inviscid_floor_cells: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            four_fifths: 0.2,
            exponent: 0.2,
            dissipation_exponent: 0.3,
            khm: 0.1,
            balance: 0.05,
            balance_t_min: 1.0,
            anchor: 0.1,
            weak_law: 0.3,
            c_star: 0.2,
            inviscid_floor_cells: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub config_hash: String,
    pub seed: u64,
    pub range: Option<RangeSpec>,
    pub verdicts: Vec<LawVerdict>,
}

impl VerdictReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

fn window(stats: &RunStatistics) -> Result<&EnsembleStats> {
    stats
        .observables
        .as_ref()
        .filter(|s| s.count() > 0)
        .ok_or_else(|| Error::MissingObservables(vec!["window statistics (sampling.window > 0)".into()]))
}

fn budget_required(cfg: &ExperimentConfig, stats: &RunStatistics) -> Result<()> {
    if cfg.solver.kind != SolverKind::Spectral || stats.budget.count() == 0 {
        return Err(Error::MissingObservables(vec!["energy budget series (spectral solver)".into()]));
    }
    Ok(())
}

fn scalar<'a>(stats: &'a EnsembleStats, name: &str) -> &'a MomentAccumulator {
    stats.scalar(name).expect("scalar names are fixed")
}

/// Laws evaluated over a separation range.
const RANGED: [&str; 8] = [
    "khm_stationary",
    "four_fifths",
    "four_fifths_trend",
    "weak_law",
    "inertial_exponents",
    "dissipation_exponent",
    "c_star",
    "exponent_selection",
];

/// Ranges for a run: strong and detected windows for ν > 0; for ν = 0 the
/// strong range starts `inviscid_floor_cells` cells above the grid spacing.
pub fn run_ranges(cfg: &ExperimentConfig, stats: &EnsembleStats, opts: &VerifyOptions) -> Result<RangeSpec> {
    let table = stats.table();
    if cfg.solver.nu > 0.0 {
        RangeSpec::calibrated(cfg.solver.nu, opts.cap, &table)
    } else {
        let floor = opts.inviscid_floor_cells / stats.spec.l_grid.n() as f64;
        Ok(RangeSpec {
            dissipation_cut: 0.0,
            floor,
            cap: opts.cap,
            detected: crate::laws::detect_inertial_range(&table, 0.2),
        })
    }
}

/// Verdicts for `laws` computed from stored statistics only.
pub fn verify_statistics(
    cfg: &ExperimentConfig,
    stats: &RunStatistics,
    laws: &[String],
    opts: &VerifyOptions,
) -> Result<VerdictReport> {
    let mut missing = Vec::new();
    for law in laws {
        if !LAWS.contains(&law.as_str()) {
            return Err(Error::UnknownLaw(law.clone()));
        }
    }
    let needs_window = laws.iter().any(|l| !l.starts_with("energy_balance"));
    if needs_window {
        if let Err(Error::MissingObservables(m)) = window(stats) {
            missing.extend(m);
        }
    }
    if laws.iter().any(|l| l.starts_with("energy_balance")) {
        if let Err(Error::MissingObservables(m)) = budget_required(cfg, stats) {
            missing.extend(m);
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingObservables(missing));
    }
    let forcing = cfg.forcing.build()?;
    let b0 = forcing.b0();
    let nu = cfg.solver.nu;
    let needs_range = laws.iter().any(|l| RANGED.contains(&l.as_str()));
    let (range, range_error) = match needs_range.then(|| run_ranges(cfg, window(stats)?, opts)) {
        None => (None, None),
        Some(Ok(r)) => (Some(r), None),
        Some(Err(e)) => (None, Some(e.to_string())),
    };
    let mut verdicts = Vec::new();
    for law in laws {
        if let (Some(e), true) = (&range_error, RANGED.contains(&law.as_str())) {
            verdicts.push(LawVerdict {
                law: law.clone(),
                passed: false,
                measured: f64::NAN,
                predicted: f64::NAN,
                tolerance: f64::NAN,
                stderr: f64::NAN,
                samples: window(stats)?.count(),
                notes: vec![format!("no fit range: {e}")],
            });
            continue;
        }
        match law.as_str() {
            "khm_stationary" => {
                let w = window(stats)?;
                let r = range.as_ref().expect("ranged law");
                let (lo, hi) = r.inertial();
                let report = khm_stationary_residual(w, &forcing);
                verdicts.push(
                    LawVerdict::absolute("khm_stationary", report.max_relative(lo, hi), 0.0, opts.khm, f64::NAN, w.count())
                        .note(format!("max |residual|/stderr over all l: {:.2}", report.max_z()))
                        .note(format!("range [{lo:.4}, {hi:.4}]")),
                );
            }
            "four_fifths" => {
                let w = window(stats)?;
                let r = range.as_ref().expect("ranged law");
                let eps = (nu > 0.0).then(|| scalar(w, "dissipation"));
                verdicts.push(verify_45(&w.table(), b0, r.floor, r.cap, eps, opts.four_fifths)?);
            }
            "four_fifths_trend" => {
                let w = window(stats)?;
                let r = range.as_ref().expect("ranged law");
                let (small, large) = correction_trend(&w.table(), b0, r.floor, r.cap)?;
                verdicts.push(LawVerdict {
                    law: "four_fifths_trend".into(),
                    passed: small < large,
                    measured: small,
                    predicted: large,
                    tolerance: 0.0,
                    stderr: f64::NAN,
                    samples: w.count(),
                    notes: vec!["mean |E s3/l + 6 B0| over the lower half of the range (measured) against the upper half (predicted bound)".into()],
                });
            }
            "weak_law" => {
                let w = window(stats)?;
                let r = range.as_ref().expect("ranged law");
                let lo = if nu > 0.0 { r.dissipation_cut } else { r.floor };
                verdicts.push(weak_law_check(&w.table(), lo, r.cap, opts.weak_law)?);
            }
            "inertial_exponents" => {
                let w = window(stats)?;
                let (lo, hi) = range.as_ref().expect("ranged law").inertial();
                let table = w.table();
                for p in [2.0, 3.0, 4.0] {
                    let fit = fit_structure_exponent(&table, p, lo, hi)?;
                    verdicts.push(
                        LawVerdict::absolute(&format!("inertial_exponent_p{p}"), fit.exponent, 1.0, opts.exponent, fit.stderr, w.count())
                            .note(format!("{} points in [{:.4}, {:.4}]", fit.points, fit.l_lo, fit.l_hi)),
                    );
                }
            }
            "dissipation_exponent" => {
                let w = window(stats)?;
                let r = range.as_ref().expect("ranged law");
                let fit = fit_structure_exponent(&w.table(), 2.0, 0.0, r.dissipation_cut)?;
                verdicts.push(
                    LawVerdict::absolute("dissipation_exponent_p2", fit.exponent, 2.0, opts.dissipation_exponent, fit.stderr, w.count())
                        .note(format!("{} points below the cut {:.4}", fit.points, r.dissipation_cut)),
                );
            }
            "energy_balance" | "energy_balance_raw" => {
                let est = if law == "energy_balance" {
                    BalanceEstimator::ControlVariate
                } else {
                    BalanceEstimator::Raw
                };
                verdicts.push(energy_balance_check(&stats.budget, b0, opts.balance_t_min, opts.balance, est));
            }
            "dissipation_anchor" => {
                let w = window(stats)?;
                verdicts.push(dissipation_anchor_check(scalar(w, "dissipation"), b0, opts.anchor));
            }
            "c_star" => {
                let w = window(stats)?;
                let r = range.as_ref().expect("ranged law");
                let table = w.table();
                let eps = scalar(w, "dissipation");
                let (lo, hi) = r.inertial();
                let (strong, strong_se) = c_star(&table, eps, r.floor, r.cap)?;
                verdicts.push(
                    c_star_check(&table, eps, lo, hi, opts.c_star)?
                        .note(format!("inertial window [{lo:.4}, {hi:.4}]"))
                        .note(format!("over the strong range [{:.4}, {:.4}]: {strong:.3} ± {strong_se:.3}", r.floor, r.cap)),
                );
            }
            "exponent_selection" => {
                let w = window(stats)?;
                let r = range.as_ref().expect("ranged law");
                let table = w.table();
                let ps: Vec<f64> = table.p_list.iter().copied().filter(|&p| p >= 1.0).collect();
                let (best, rows) = exponent_selection(&table, &ps, r.floor, r.cap)?;
                let mut v = LawVerdict::absolute("exponent_selection", best, 3.0, 0.0, f64::NAN, w.count());
                for (p, zeta, q) in rows {
                    v = v.note(format!("p = {p}: zeta = {zeta:.4}, invariance needs {q:.4}"));
                }
                verdicts.push(v);
            }
            "stationarity" => {
                let [a, b] = &stats.energy_halves;
                let (z, ok) = stationarity_test(a, b);
                verdicts.push(LawVerdict {
                    law: "stationarity".into(),
                    passed: ok,
                    measured: z,
                    predicted: 0.0,
                    tolerance: 1.96,
                    stderr: 1.0,
                    samples: a.count(),
                    notes: vec![format!(
                        "window halves: energy {:.5} ± {:.5} and {:.5} ± {:.5}",
                        a.mean(),
                        a.stderr(),
                        b.mean(),
                        b.stderr()
                    )],
                });
            }
            _ => unreachable!("checked above"),
        }
    }
    Ok(VerdictReport {
        config_hash: stats.config_hash.clone(),
        seed: cfg.seed,
        range,
        verdicts,
    })
}

/// Loads the run in `dir` and computes the verdicts; the report is also
/// written to `dir/verdicts.json`.
pub fn verify(dir: &Path, laws: &[String], opts: &VerifyOptions) -> Result<VerdictReport> {
    let run = load_run(dir)?;
    let report = verify_statistics(&run.config, &run.statistics, laws, opts)?;
    let path = dir.join("verdicts.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&report)?).map_err(|e| Error::file(&path, e))?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub nus: Vec<f64>,
    pub run_dirs: Vec<std::path::PathBuf>,
    /// `⟨⟨‖u‖²⟩⟩` per viscosity.
    pub l2_squared: Vec<MomentAccumulator>,
    /// `⟨⟨‖u‖₁²⟩⟩` per viscosity.
    pub h1_squared: Vec<MomentAccumulator>,
    pub verdicts: Vec<LawVerdict>,
}

/// Runs `base` at each viscosity (default truncation per ν unless `base`
/// fixes `k`) and checks the Sobolev scaling for `m = 0` and `m = 1`.
pub fn sweep(base: &ExperimentConfig, nus: &[f64], run: &RunOptions, tolerance: f64) -> Result<SweepReport> {
    let mut report = SweepReport {
        nus: nus.to_vec(),
        run_dirs: Vec::new(),
        l2_squared: Vec::new(),
        h1_squared: Vec::new(),
        verdicts: Vec::new(),
    };
    for &nu in nus {
        let mut cfg = base.clone();
        cfg.solver.nu = nu;
        cfg.solver.n_grid = None;
        cfg.statistics.grid = None;
        super::run::run_experiment(&cfg, run)?;
        let loaded = load_run(&cfg.run_dir())?;
        let w = window(&loaded.statistics)?;
        report.l2_squared.push(*scalar(w, "l2_squared"));
        report.h1_squared.push(*scalar(w, "h1"));
        report.run_dirs.push(cfg.run_dir());
    }
    report.verdicts.push(sobolev_scaling_check(nus, &report.h1_squared, 1, tolerance)?);
    report.verdicts.push(sobolev_scaling_check(nus, &report.l2_squared, 0, tolerance)?);
    Ok(report)
}
