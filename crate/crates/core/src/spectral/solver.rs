//! Exponential Euler–Maruyama integration of the Galerkin-truncated
//! stochastic Burgers equation `u_t + u u_x − ν u_xx = ∂_t ξ`.
//!
//! Per mode `s` with `λ_s = ν(2πs)²` one step reads
//!
//! ```text
//! a_s ← e^{−λ_s dt} a_s + λ_s^{−1}(1 − e^{−λ_s dt}) N_s(u) + b_s √((1 − e^{−2λ_s dt})/(2λ_s)) g_s
//! ```
//!
//! where `N_s` is the dealiased Galerkin projection of `−u u_x`. The linear
//! stochastic part is the exact Ornstein–Uhlenbeck transition, so the viscous
//! stiffness puts no constraint on `dt`.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use super::transform::{check_resolution, Transform};
use super::SpectralField;
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::rng::NoiseStream;
use crate::snapshot::{FieldRef, SnapshotSink};

/// Coefficient magnitude treated as numerical blow-up.
pub const BLOW_UP_LIMIT: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtPolicy {
    Fixed { dt: f64 },
    /// `dt = min(courant / (n_grid · max(1, |u|_∞)), dt_max)`, re-evaluated every step.
    Adaptive { courant: f64, dt_max: f64 },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Adaptive {
            courant: 0.25,
            dt_max: 1e-3,
        }
    }
}

impl DtPolicy {
    pub fn dt(&self, n_grid: usize, u_max: f64) -> f64 {
        match *self {
            DtPolicy::Fixed { dt } => dt,
            DtPolicy::Adaptive { courant, dt_max } => {
                (courant / n_grid as f64 / u_max.max(1.0)).min(dt_max)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nu: f64,
    pub k: usize,
    pub n_grid: usize,
    pub dt: DtPolicy,
    /// Switch for the linear (Ornstein–Uhlenbeck) regime.
    pub nonlinear: bool,
}

impl SolverConfig {
    /// Default resolution for viscosity `nu`: `K = ceil(4/ν)` rounded up to a
    /// power of two and the smallest dealiasing grid for it.
    pub fn for_viscosity(nu: f64) -> Self {
        let k = default_truncation(nu);
        Self {
            nu,
            k,
            n_grid: dealiasing_grid(k),
            dt: DtPolicy::default(),
            nonlinear: true,
        }
    }

    pub fn with_truncation(mut self, k: usize) -> Self {
        self.k = k;
        self.n_grid = dealiasing_grid(k);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            problems.push(format!("nu = {} must lie in (0, 1]", self.nu));
        }
        if self.k == 0 {
            problems.push("truncation order K must be positive".into());
        }
        if self.n_grid < 3 * self.k + 1 {
            problems.push(format!(
                "n_grid = {} cannot dealias K = {}, need at least {}",
                self.n_grid,
                self.k,
                3 * self.k + 1
            ));
        }
        match self.dt {
            DtPolicy::Fixed { dt } if !(dt > 0.0) => problems.push(format!("dt = {dt} must be positive")),
            DtPolicy::Adaptive { courant, dt_max } if !(courant > 0.0 && dt_max > 0.0) => {
                problems.push("adaptive dt needs positive courant and dt_max".into())
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// `ceil(4/ν)` rounded up to the next power of two.
pub fn default_truncation(nu: f64) -> usize {
    ((4.0 / nu).ceil() as usize).next_power_of_two()
}

/// Smallest even 5-smooth length `≥ 3K + 1`, the alias-free grid for quadratic terms.
pub fn dealiasing_grid(k: usize) -> usize {
    let mut n = 3 * k + 1;
    loop {
        if n.is_multiple_of(2) && is_5_smooth(n) {
            return n;
        }
        n += 1;
    }
}

fn is_5_smooth(mut n: usize) -> bool {
    for p in [2, 3, 5] {
        while n.is_multiple_of(p) {
            n /= p;
        }
    }
    n == 1
}

#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub field: SpectralField,
    pub t: f64,
    pub step_count: u64,
    pub stream: NoiseStream,
    pub budget: EnergyBudget,
}

/// Running terms of the pathwise energy identity
/// `½‖u(t)‖² − ½‖u(0)‖² + ∫ν‖u‖₁² ds = ½B₀t + M_t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    /// `∫ ν‖u‖₁² ds`, trapezoid over steps.
    pub dissipated: f64,
    /// `M_t = Σ_s b_s ∫ a_s dβ_s`, left-point sums.
    pub martingale: f64,
    /// `ν‖u‖₁²` at the current state, once known.
    pub rate: Option<f64>,
}

impl TrajectoryState {
    pub fn new(field: SpectralField, seed: u64, trajectory: u64) -> Self {
        Self {
            field,
            t: 0.0,
            step_count: 0,
            stream: NoiseStream::new(seed, trajectory),
            budget: EnergyBudget::default(),
        }
    }

    pub fn trajectory(&self) -> u64 {
        self.stream.trajectory()
    }
}

/// Dealiased evaluation of `−u u_x = −∂_x(u²/2)` projected onto `|s| ≤ K`.
pub struct Nonlinearity {
    transform: Transform,
    grid: Vec<f64>,
}

impl Nonlinearity {
    pub fn new(k: usize, n_grid: usize) -> Result<Self> {
        if n_grid < 3 * k + 1 {
            return Err(Error::Resolution {
                n_grid,
                required: 3 * k + 1,
            });
        }
        Ok(Self {
            transform: Transform::new(k, n_grid)?,
            grid: vec![0.0; n_grid],
        })
    }

    /// Writes the projection into `out`; returns `max_j |u(x_j)|`.
    pub fn evaluate(&mut self, field: &SpectralField, out: &mut SpectralField) -> f64 {
        let k = self.transform.k();
        let n = self.transform.n_grid();
        self.transform.to_physical_into(field, &mut self.grid);
        let mut u_max = 0.0f64;
        for v in &mut self.grid {
            u_max = u_max.max(v.abs());
            *v = 0.5 * *v * *v;
        }
        let spectrum = self.transform.forward_raw(&self.grid);
        let scale = SQRT_2 / n as f64;
        // −i 2πk ŵ_k in the real basis: a_k = √2·2πk·Im ŵ_k, a_{−k} = √2·2πk·Re ŵ_k
        let (cos, sin) = out.parts_mut();
        for (i, (c, s)) in cos.iter_mut().zip(sin.iter_mut()).enumerate().take(k) {
            let w = spectrum[i + 1];
            let factor = scale * TAU * (i + 1) as f64;
            *c = factor * w.im;
            *s = factor * w.re;
        }
        u_max
    }
}

/// `−u u_x` projected onto the modes of `field`, computed on `n_grid ≥ 3K+1` points.
pub fn nonlinear_term(field: &SpectralField, n_grid: usize) -> Result<SpectralField> {
    let mut nl = Nonlinearity::new(field.k(), n_grid)?;
    let mut out = SpectralField::zeros(field.k());
    nl.evaluate(field, &mut out);
    Ok(out)
}

/// Stepper bound to one configuration and forcing.
pub struct SpectralSolver {
    cfg: SolverConfig,
    spec: ForcingSpec,
    nonlinearity: Option<Nonlinearity>,
    nl_out: SpectralField,
    noise: Vec<(i64, f64)>,
    last_u_max: f64,
}

impl SpectralSolver {
    pub fn new(cfg: SolverConfig, spec: ForcingSpec) -> Result<Self> {
        cfg.validate()?;
        if spec.s_max() > cfg.k && !spec.is_unforced() {
            return Err(Error::InvalidConfig(vec![format!(
                "forcing reaches |s| = {} beyond truncation K = {}",
                spec.s_max(),
                cfg.k
            )]));
        }
        let nonlinearity = if cfg.nonlinear {
            Some(Nonlinearity::new(cfg.k, cfg.n_grid)?)
        } else {
            check_resolution(cfg.k, cfg.n_grid)?;
            None
        };
        Ok(Self {
            nl_out: SpectralField::zeros(cfg.k),
            noise: Vec::with_capacity(spec.modes().len()),
            cfg,
            spec,
            nonlinearity,
            last_u_max: 0.0,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn forcing(&self) -> &ForcingSpec {
        &self.spec
    }

    /// `max_j |u(x_j)|` seen by the most recent nonlinear evaluation.
    pub fn last_u_max(&self) -> f64 {
        self.last_u_max
    }

    /// One step with noise drawn from the state's stream; `dt` follows the
    /// configured policy but never exceeds `dt_limit`. Returns the `dt` used.
    pub fn step_limited(&mut self, state: &mut TrajectoryState, dt_limit: f64) -> Result<f64> {
        let u_max = self.evaluate_nonlinearity(&state.field);
        let dt = self.cfg.dt.dt(self.cfg.n_grid, u_max).min(dt_limit);
        self.noise.clear();
        for m in self.spec.modes() {
            let lambda = self.cfg.nu * (TAU * m.s.unsigned_abs() as f64).powi(2);
            let sigma = (-(-2.0 * lambda * dt).exp_m1() / (2.0 * lambda)).sqrt();
            let g = state.stream.standard_normal(state.step_count, m.s);
            self.noise.push((m.s, m.b * sigma * g));
        }
        let noise = std::mem::take(&mut self.noise);
        self.advance(state, dt, &noise);
        self.noise = noise;
        self.finish_step(state, dt)
    }

    pub fn step(&mut self, state: &mut TrajectoryState) -> Result<f64> {
        self.step_limited(state, f64::INFINITY)
    }

    /// One step of length `dt` with prescribed stochastic convolutions
    /// `∫ e^{−λ_s(dt−r)} b_s dβ_s(r)` per mode. Used to couple runs that share
    /// a Brownian path at different step sizes.
    pub fn step_with_noise(&mut self, state: &mut TrajectoryState, dt: f64, noise: &[(i64, f64)]) -> Result<f64> {
        self.evaluate_nonlinearity(&state.field);
        self.advance(state, dt, noise);
        self.finish_step(state, dt)
    }

    fn evaluate_nonlinearity(&mut self, field: &SpectralField) -> f64 {
        match &mut self.nonlinearity {
            Some(nl) => {
                self.last_u_max = nl.evaluate(field, &mut self.nl_out);
                self.last_u_max
            }
            None => 0.0,
        }
    }

    fn advance(&mut self, state: &mut TrajectoryState, dt: f64, noise: &[(i64, f64)]) {
        let nu = self.cfg.nu;
        let rate_before = match state.budget.rate {
            Some(r) => r,
            None => dissipation(&state.field, nu),
        };
        state.budget.martingale += noise.iter().map(|&(s, v)| state.field.get(s) * v).sum::<f64>();
        let base = nu * TAU * TAU * dt;
        // e^{−λ_k dt} = r^{k²}; grow by r^{2k+1} per shell
        let r = (-base).exp();
        let r2 = r * r;
        let mut decay = r;
        let mut ratio = r * r2;
        let nonlinear = self.nonlinearity.is_some();
        let k_max = state.field.k();
        let (cos, sin) = state.field.parts_mut();
        for i in 0..k_max {
            let k = (i + 1) as f64;
            let x = base * k * k;
            let phi = if x < 1e-4 {
                dt * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
            } else {
                (1.0 - decay) / (nu * (TAU * k).powi(2))
            };
            if nonlinear {
                cos[i] = decay * cos[i] + phi * self.nl_out.cos()[i];
                sin[i] = decay * sin[i] + phi * self.nl_out.sin()[i];
            } else {
                cos[i] *= decay;
                sin[i] *= decay;
            }
            if decay > 1e-300 {
                if (i + 1) % 32 == 0 {
                    // restart the recursion so rounding does not accumulate
                    let next = (i + 2) as f64;
                    decay = (-base * next * next).exp();
                    ratio = (-base * (2.0 * next + 1.0)).exp();
                } else {
                    decay *= ratio;
                    ratio *= r2;
                }
            } else {
                decay = 0.0;
            }
        }
        for &(s, v) in noise {
            let idx = s.unsigned_abs() as usize - 1;
            if idx < k_max {
                if s > 0 {
                    cos[idx] += v;
                } else {
                    sin[idx] += v;
                }
            }
        }
        let rate_after = dissipation(&state.field, nu);
        state.budget.dissipated += 0.5 * dt * (rate_before + rate_after);
        state.budget.rate = Some(rate_after);
    }

    fn finish_step(&self, state: &mut TrajectoryState, dt: f64) -> Result<f64> {
        state.step_count += 1;
        state.t = match self.cfg.dt {
            DtPolicy::Fixed { dt: fixed } if fixed == dt => state.step_count as f64 * fixed,
            _ => state.t + dt,
        };
        if let Some((mode, value)) = state.field.find_blow_up(BLOW_UP_LIMIT) {
            return Err(Error::BlowUp {
                step: state.step_count,
                t: state.t,
                mode,
                value,
            });
        }
        Ok(dt)
    }

    /// Advances by `horizon`, emitting a snapshot every `sample_every`
    /// (excluding the starting time).
    pub fn integrate(
        &mut self,
        state: &mut TrajectoryState,
        horizon: f64,
        sample_every: f64,
        sink: &mut dyn SnapshotSink,
    ) -> Result<()> {
        if horizon <= 0.0 {
            return Ok(());
        }
        if let DtPolicy::Fixed { dt } = self.cfg.dt {
            let ratio = sample_every / dt;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                return Err(Error::Cadence { sample_every, dt });
            }
        }
        let start = state.t;
        let n_samples = (horizon / sample_every + 1e-9).floor() as u64;
        let end = start + horizon;
        for j in 1..=n_samples {
            let target = start + j as f64 * sample_every;
            self.advance_to(state, target)?;
            sink.accept(state.trajectory(), state.t, FieldRef::Spectral(&state.field))?;
        }
        self.advance_to(state, end)
    }

    /// Steps until `state.t` reaches `target`, landing on it exactly.
    pub fn advance_to(&mut self, state: &mut TrajectoryState, target: f64) -> Result<()> {
        match self.cfg.dt {
            DtPolicy::Fixed { dt } => {
                let steps = ((target - state.t) / dt).round();
                for _ in 0..steps.max(0.0) as u64 {
                    self.step(state)?;
                }
            }
            DtPolicy::Adaptive { .. } => {
                while target - state.t > 1e-12 * target.abs().max(1.0) {
                    let remaining = target - state.t;
                    let dt = self.step_limited(state, remaining)?;
                    if dt >= remaining {
                        state.t = target;
                    }
                }
            }
        }
        Ok(())
    }
}

/// `ν‖u‖₁² = ν Σ (2πk)² (a_k² + a_{−k}²)`.
fn dissipation(field: &SpectralField, nu: f64) -> f64 {
    let sum: f64 = field
        .cos()
        .iter()
        .zip(field.sin())
        .enumerate()
        .map(|(i, (c, s))| ((i + 1) as f64).powi(2) * (c * c + s * s))
        .sum();
    nu * TAU * TAU * sum
}

/// Sup over sampled times of `‖u^{(K)}(t) − u^{(2K)}(t)‖` on the first `K` modes.
///
/// Both resolutions use the fixed `dt` of `cfg` and the same `(seed, trajectory)`
/// stream, so they are driven by the same Brownian path.
pub fn refine_check(
    u0: &SpectralField,
    cfg: &SolverConfig,
    spec: &ForcingSpec,
    horizon: f64,
    sample_every: f64,
    seed: u64,
) -> Result<f64> {
    if !matches!(cfg.dt, DtPolicy::Fixed { .. }) {
        return Err(Error::InvalidConfig(vec![
            "refine_check needs a fixed dt so both resolutions share the Brownian path".into(),
        ]));
    }
    let coarse_cfg = cfg.clone();
    let fine_cfg = SolverConfig {
        k: 2 * cfg.k,
        n_grid: dealiasing_grid(2 * cfg.k).max(2 * cfg.n_grid),
        ..cfg.clone()
    };
    let run = |c: SolverConfig| -> Result<Vec<SpectralField>> {
        let mut solver = SpectralSolver::new(c.clone(), spec.clone())?;
        let mut state = TrajectoryState::new(u0.resized(c.k), seed, 0);
        let mut out: Vec<SpectralField> = Vec::new();
        solver.integrate(&mut state, horizon, sample_every, &mut |_: u64, _: f64, f: FieldRef<'_>| {
            if let FieldRef::Spectral(f) = f {
                out.push(f.clone());
            }
            Ok(())
        })?;
        Ok(out)
    };
    let coarse = run(coarse_cfg)?;
    let fine = run(fine_cfg)?;
    Ok(coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max))
}
