//! First-order Godunov finite volumes for the inviscid equation with
//! Lie-split white-noise forcing. Converges to the entropy solution, which is
//! the vanishing-viscosity limit of the spectral solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{basis, ForcingSpec, NoiseIncrement};
use crate::rng::NoiseStream;
use crate::snapshot::{FieldRef, SnapshotSink};
use crate::spectral::{
    cell_averages, default_truncation, DtPolicy, SolverConfig, SpectralField, SpectralSolver,
    TrajectoryState,
};

/// Cell averages on `n` uniform cells; cell `j` covers `[j/n, (j+1)/n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    cells: Vec<f64>,
}

impl GridField {
    pub fn new(cells: Vec<f64>) -> Self {
        assert!(!cells.is_empty(), "grid needs at least one cell");
        Self { cells }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        Self::new((0..n).map(|j| f((j as f64 + 0.5) / n as f64)).collect())
    }

    pub fn n(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    pub fn mean(&self) -> f64 {
        self.cells.iter().sum::<f64>() / self.n() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.cells.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Subtracts the mean; returns the correction applied.
    pub fn project_zero_mean(&mut self) -> f64 {
        let mean = self.mean();
        for v in &mut self.cells {
            *v -= mean;
        }
        mean
    }

    /// `(1/n Σ |u_j − v_j|^p)^{1/p}`.
    pub fn lp_distance(&self, other: &GridField, p: f64) -> f64 {
        assert_eq!(self.n(), other.n());
        let s: f64 = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b).abs().powf(p))
            .sum();
        (s / self.n() as f64).powf(1.0 / p)
    }
}

/// Exact Riemann-solver flux for `f(u) = u²/2`.
pub fn riemann_flux(ul: f64, ur: f64) -> f64 {
    if ul >= ur {
        0.5 * (ul * ul).max(ur * ur)
    } else if ul > 0.0 {
        0.5 * ul * ul
    } else if ur < 0.0 {
        0.5 * ur * ur
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GodunovConfig {
    pub n: usize,
    pub cfl: f64,
    /// Upper bound on the adaptive step.
    pub dt_max: f64,
}

impl Default for GodunovConfig {
    fn default() -> Self {
        Self {
            n: 4096,
            cfl: 0.45,
            dt_max: 1e-3,
        }
    }
}

impl GodunovConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n < 4 {
            problems.push(format!("n = {} cells is too few", self.n));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            problems.push(format!("cfl = {} must lie in (0, 1)", self.cfl));
        }
        if !(self.dt_max > 0.0) {
            problems.push("dt_max must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    /// `cfl · dx / (|u|_∞ + guard)`, capped at `dt_max`.
    pub fn stable_dt(&self, u_max: f64) -> f64 {
        (self.cfl / self.n as f64 / (u_max + 1e-8)).min(self.dt_max)
    }
}

/// Largest admissible step for the field, `cfl/(n |u|_∞)`.
fn cfl_limit(field: &GridField, cfl: f64) -> f64 {
    let u_max = field.max_abs();
    if u_max == 0.0 {
        f64::INFINITY
    } else {
        cfl / (field.n() as f64 * u_max)
    }
}

/// Conservative Godunov update `u_i ← u_i − dt·n (F_{i+1/2} − F_{i−1/2})`.
pub fn hyperbolic_step(field: &GridField, dt: f64, cfl: f64) -> Result<GridField> {
    let mut out = field.clone();
    let mut flux = Vec::new();
    hyperbolic_step_in_place(&mut out, dt, cfl, &mut flux)?;
    Ok(out)
}

fn hyperbolic_step_in_place(field: &mut GridField, dt: f64, cfl: f64, flux: &mut Vec<f64>) -> Result<()> {
    let max_dt = cfl_limit(field, cfl);
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, max_dt });
    }
    let n = field.n();
    let u = &mut field.cells;
    // flux[i] = F_{i+1/2}
    flux.clear();
    flux.extend((0..n).map(|i| riemann_flux(u[i], u[(i + 1) % n])));
    let c = dt * n as f64;
    let mut left = flux[n - 1];
    for (v, &right) in u.iter_mut().zip(flux.iter()) {
        *v -= c * (right - left);
        left = right;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct GridState {
    pub field: GridField,
    pub t: f64,
    pub step_count: u64,
    pub stream: NoiseStream,
}

impl GridState {
    pub fn new(field: GridField, seed: u64, trajectory: u64) -> Self {
        Self {
            field,
            t: 0.0,
            step_count: 0,
            stream: NoiseStream::new(seed, trajectory),
        }
    }
}

/// Godunov stepper with forcing tabulated on cell centers.
pub struct GodunovSolver {
    cfg: GodunovConfig,
    spec: ForcingSpec,
    // e_s(x_j) per forced mode
    basis_table: Vec<Vec<f64>>,
    flux: Vec<f64>,
    last_projection: f64,
}

impl GodunovSolver {
    pub fn new(cfg: GodunovConfig, spec: ForcingSpec) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n;
        let basis_table = spec
            .modes()
            .iter()
            .map(|m| (0..n).map(|j| basis(m.s, (j as f64 + 0.5) / n as f64)).collect())
            .collect();
        Ok(Self {
            cfg,
            spec,
            basis_table,
            flux: Vec::with_capacity(n),
            last_projection: 0.0,
        })
    }

    pub fn config(&self) -> &GodunovConfig {
        &self.cfg
    }

    /// Mean removed by the last zero-momentum projection (diagnostic).
    pub fn last_projection(&self) -> f64 {
        self.last_projection
    }

    /// Hyperbolic step then the sampled increment `Σ b_s Δβ_s e_s(x_j)`.
    pub fn forced_step(&mut self, state: &mut GridState, dt: f64) -> Result<()> {
        let increment = self.spec.sample_increment(dt, &mut state.stream, state.step_count);
        hyperbolic_step_in_place(&mut state.field, dt, self.cfg.cfl, &mut self.flux)?;
        self.add_increment(&mut state.field, &increment);
        state.step_count += 1;
        state.t += dt;
        Ok(())
    }

    /// Adds a prescribed increment and restores zero mean.
    pub fn add_increment(&mut self, field: &mut GridField, increment: &NoiseIncrement) {
        for (m, row) in self.spec.modes().iter().zip(&self.basis_table) {
            let amp = increment.get(m.s);
            if amp == 0.0 {
                continue;
            }
            for (v, e) in field.cells.iter_mut().zip(row) {
                *v += amp * e;
            }
        }
        self.last_projection = field.project_zero_mean();
    }

    /// Outer step of length `dt` with the hyperbolic part sub-cycled to
    /// respect the CFL limit; the noise increment is taken once per outer step.
    pub fn split_step(&mut self, field: &mut GridField, dt: f64, increment: &NoiseIncrement) -> Result<()> {
        let mut remaining = dt;
        while remaining > 0.0 {
            let h = self.cfg.stable_dt(field.max_abs()).min(remaining);
            hyperbolic_step_in_place(field, h, self.cfg.cfl, &mut self.flux)?;
            remaining -= h;
            if remaining < 1e-15 * dt {
                break;
            }
        }
        self.add_increment(field, increment);
        Ok(())
    }

    pub fn advance_to(&mut self, state: &mut GridState, target: f64) -> Result<()> {
        while target - state.t > 1e-12 * target.abs().max(1.0) {
            let remaining = target - state.t;
            let dt = self.cfg.stable_dt(state.field.max_abs()).min(remaining);
            self.forced_step(state, dt)?;
            if dt >= remaining {
                state.t = target;
            }
        }
        Ok(())
    }

    pub fn integrate(
        &mut self,
        state: &mut GridState,
        horizon: f64,
        sample_every: f64,
        sink: &mut dyn SnapshotSink,
    ) -> Result<()> {
        if horizon <= 0.0 {
            return Ok(());
        }
        let start = state.t;
        let n_samples = (horizon / sample_every + 1e-9).floor() as u64;
        for j in 1..=n_samples {
            self.advance_to(state, start + j as f64 * sample_every)?;
            sink.accept(state.stream.trajectory(), state.t, FieldRef::Grid(&state.field))?;
        }
        self.advance_to(state, start + horizon)
    }
}

/// `|u^ν(T) − u⁰(T)|_p` for each viscosity, all runs driven by one Brownian
/// path: the same `(seed, step, mode)` normals at a common fixed `dt`.
///
/// Viscous runs use the default truncation for each ν (which must satisfy
/// `2K+1 ≤ n`) and are compared through their cell averages on the Godunov grid.
pub fn vanishing_viscosity_check(
    spec: &ForcingSpec,
    nu_list: &[f64],
    horizon: f64,
    p: f64,
    godunov: GodunovConfig,
    dt: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let steps = (horizon / dt).round() as u64;
    let mut reference = GridField::zeros(godunov.n);
    let mut solver = GodunovSolver::new(godunov, spec.clone())?;
    let mut stream = NoiseStream::new(seed, 0);
    for step in 0..steps {
        let inc = spec.sample_increment(dt, &mut stream, step);
        solver.split_step(&mut reference, dt, &inc)?;
    }
    nu_list
        .iter()
        .map(|&nu| {
            let k = default_truncation(nu);
            let cfg = SolverConfig {
                dt: DtPolicy::Fixed { dt },
                ..SolverConfig::for_viscosity(nu).with_truncation(k)
            };
            if 2 * k + 1 > godunov.n {
                return Err(Error::Resolution {
                    n_grid: godunov.n,
                    required: 2 * k + 1,
                });
            }
            let mut viscous = SpectralSolver::new(cfg, spec.clone())?;
            let mut state = TrajectoryState::new(SpectralField::zeros(k), seed, 0);
            for _ in 0..steps {
                viscous.step(&mut state)?;
            }
            let cells = GridField::new(cell_averages(&state.field, godunov.n)?);
            Ok(cells.lp_distance(&reference, p))
        })
        .collect()
}
