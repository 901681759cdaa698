//! `burgers-lab`: run ensembles, verify laws, sweep viscosities, rescale and
//! export from the command line.
//!
//! Exit status is 0 on success, 1 when a verdict fails and 2 on any error.
//! The worker count comes from `--workers`, then `BURGERS_WORKERS`, then the
//! number of available cores.

use std::path::PathBuf;
use std::process::ExitCode;

use burgers_core::harness::{
    export, rescale, run_experiment, sweep, verify, ExperimentConfig, ExportFormat, ForcingConfig, RunOptions,
    SolverKind, VerifyOptions, LAWS,
};
use burgers_core::spectral::DtPolicy;
use burgers_core::{Error, LawVerdict};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "burgers-lab", version, about = "Stochastic Burgers turbulence laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an ensemble and print the run directory.
    Simulate {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Print the resolved configuration as TOML and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Evaluate laws on a finished run and write verdicts.json.
    Verify {
        run_dir: PathBuf,
        /// Comma-separated law names; all laws when omitted.
        #[arg(long, value_delimiter = ',')]
        laws: Vec<String>,
        #[command(flatten)]
        tolerances: ToleranceArgs,
    },
    /// Run the same experiment at several viscosities and check Sobolev scaling.
    Sweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        nus: Vec<f64>,
        /// Absolute tolerance on the fitted viscosity exponents.
        #[arg(long, default_value_t = 0.3)]
        tolerance: f64,
    },
    /// Apply the Landau transform u -> mu u to retained snapshots.
    Rescale {
        run_dir: PathBuf,
        #[arg(long)]
        mu: f64,
    },
    /// Write structure tables and scalars in a documented format.
    Export {
        run_dir: PathBuf,
        /// csv, jsonl or structured-text
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["spectral", "godunov"])]
    solver: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    /// Spectral truncation K.
    #[arg(long)]
    k: Option<usize>,
    /// Spectral dealiasing grid.
    #[arg(long)]
    n_grid: Option<usize>,
    /// Finite-volume cells.
    #[arg(long)]
    n: Option<usize>,
    /// Fixed time step; adaptive when omitted.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    /// Drop the nonlinear term (linear stochastic heat equation).
    #[arg(long)]
    linear: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    sample_every: Option<f64>,
    /// Power-law forcing b_s ~ |s|^-decay for 1 <= |s| <= s_max, normalised to B0 = b0.
    #[arg(long)]
    forcing_decay: Option<f64>,
    #[arg(long)]
    forcing_s_max: Option<usize>,
    #[arg(long)]
    forcing_b0: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    retain_snapshots: bool,
    #[arg(long)]
    survival_threshold: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ToleranceArgs {
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    four_fifths_tol: Option<f64>,
    #[arg(long)]
    exponent_tol: Option<f64>,
    #[arg(long)]
    dissipation_exponent_tol: Option<f64>,
    #[arg(long)]
    khm_tol: Option<f64>,
    #[arg(long)]
    balance_tol: Option<f64>,
    #[arg(long)]
    anchor_tol: Option<f64>,
    #[arg(long)]
    weak_law_tol: Option<f64>,
    #[arg(long)]
    c_star_tol: Option<f64>,
}

impl ExperimentArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::spectral(self.nu.unwrap_or(5e-3), 10.0, 10.0, 16, 0),
        };
        match self.solver.as_deref() {
            Some("godunov") => {
                c.solver.kind = SolverKind::Godunov;
                c.solver.nu = 0.0;
            }
            Some(_) => c.solver.kind = SolverKind::Spectral,
            None => {}
        }
        set(&mut c.solver.nu, self.nu);
        if self.k.is_some() {
            c.solver.k = self.k;
        }
        if self.n_grid.is_some() {
            c.solver.n_grid = self.n_grid;
        }
        if self.n.is_some() {
            c.solver.n = self.n;
        }
        if let Some(dt) = self.dt {
            c.solver.dt = DtPolicy::Fixed { dt };
        }
        set(&mut c.solver.cfl, self.cfl);
        if self.linear {
            c.solver.nonlinear = false;
        }
        set(&mut c.seed, self.seed);
        set(&mut c.ensemble_size, self.ensemble);
        set(&mut c.sampling.burn_in, self.burn_in);
        set(&mut c.sampling.window, self.window);
        set(&mut c.sampling.sample_every, self.sample_every);
        if self.forcing_decay.is_some() || self.forcing_s_max.is_some() || self.forcing_b0.is_some() {
            let (mut decay, mut s_max, mut b0) = match c.forcing {
                ForcingConfig::PowerLaw { decay, s_max, b0 } => (decay, s_max, b0),
                ForcingConfig::Modes { .. } => (2.0, 8, 1.0),
            };
            set(&mut decay, self.forcing_decay);
            set(&mut s_max, self.forcing_s_max);
            set(&mut b0, self.forcing_b0);
            c.forcing = ForcingConfig::PowerLaw { decay, s_max, b0 };
        }
        if self.grid.is_some() {
            c.statistics.grid = self.grid;
        }
        if let Some(dir) = &self.output_dir {
            c.output_dir = dir.clone();
        }
        if self.retain_snapshots {
            c.retain_snapshots = true;
        }
        set(&mut c.survival_threshold, self.survival_threshold);
        c.validate()?;
        Ok(c)
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            workers: self.workers,
            limit: None,
        }
    }
}

fn set<T: Copy>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

impl ToleranceArgs {
    fn options(&self) -> VerifyOptions {
        let mut o = VerifyOptions::default();
        set(&mut o.cap, self.cap);
        set(&mut o.four_fifths, self.four_fifths_tol);
        set(&mut o.exponent, self.exponent_tol);
        set(&mut o.dissipation_exponent, self.dissipation_exponent_tol);
        set(&mut o.khm, self.khm_tol);
        set(&mut o.balance, self.balance_tol);
        set(&mut o.anchor, self.anchor_tol);
        set(&mut o.weak_law, self.weak_law_tol);
        set(&mut o.c_star, self.c_star_tol);
        o
    }
}

fn print_verdicts(verdicts: &[LawVerdict]) -> bool {
    for v in verdicts {
        println!("{}", v.summary());
        for n in &v.notes {
            println!("    {n}");
        }
    }
    verdicts.iter().all(|v| v.passed)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Simulate {
            experiment,
            print_config,
        } => {
            let cfg = experiment.build()?;
            if print_config {
                print!("{}", cfg.to_toml()?);
                return Ok(true);
            }
            let manifest = run_experiment(&cfg, &experiment.run_options())?;
            let done = manifest.trajectories.iter().filter(|t| t.completed).count();
            eprintln!(
                "{done} of {} trajectories completed in {:.1} s",
                manifest.trajectories.len(),
                manifest.wall_seconds
            );
            println!("{}", cfg.run_dir().display());
            Ok(true)
        }
        Command::Verify {
            run_dir,
            laws,
            tolerances,
        } => {
            let laws = if laws.is_empty() {
                LAWS.iter().map(|s| s.to_string()).collect()
            } else {
                laws
            };
            let report = verify(&run_dir, &laws, &tolerances.options())?;
            Ok(print_verdicts(&report.verdicts))
        }
        Command::Sweep {
            experiment,
            nus,
            tolerance,
        } => {
            let cfg = experiment.build()?;
            let report = sweep(&cfg, &nus, &experiment.run_options(), tolerance)?;
            for (nu, dir) in report.nus.iter().zip(&report.run_dirs) {
                eprintln!("nu = {nu}: {}", dir.display());
            }
            Ok(print_verdicts(&report.verdicts))
        }
        Command::Rescale { run_dir, mu } => {
            let report = rescale(&run_dir, mu)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Export { run_dir, format } => {
            let format: ExportFormat = format.parse()?;
            for path in export(&run_dir, format)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
