use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entropy::GodunovConfig;
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::spectral::{dealiasing_grid, default_truncation, DtPolicy, SolverConfig};
use crate::statistics::{BracketSpec, LGrid, ObservableSpec, DEFAULT_P_LIST};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingConfig {
    /// `b_s = A|s|^{-decay}` for `1 ≤ |s| ≤ s_max`, normalised to `B₀ = b0`.
    PowerLaw { decay: f64, s_max: usize, b0: f64 },
    /// Explicit `(s, b_s)` pairs.
    Modes { modes: Vec<(i64, f64)> },
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig::PowerLaw {
            decay: 2.0,
            s_max: 8,
            b0: 1.0,
        }
    }
}

impl ForcingConfig {
    pub fn build(&self) -> Result<ForcingSpec> {
        match self {
            ForcingConfig::PowerLaw { decay, s_max, b0 } => ForcingSpec::power_law(*decay, *s_max, *b0),
            ForcingConfig::Modes { modes } => ForcingSpec::new(modes.iter().copied()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Spectral,
    Godunov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub kind: SolverKind,
    pub nu: f64,
    /// Spectral truncation; defaults to `ceil(4/ν)` rounded to a power of two.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<usize>,
    /// Godunov cell count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "yes")]
    pub nonlinear: bool,
    #[serde(default)]
    pub dt: DtPolicy,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
}

fn yes() -> bool {
    true
}

fn default_cfl() -> f64 {
    GodunovConfig::default().cfl
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    /// `T`, the burn-in before the averaging window.
    pub burn_in: f64,
    /// `σ`, the window length; 0 disables window statistics.
    pub window: f64,
    pub sample_every: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticsSection {
    /// Grid for increments; spectral default is the smallest power of two
    /// `≥ 3K + 1`, Godunov uses its own cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default = "default_per_decade")]
    pub per_decade: usize,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
}

fn default_per_decade() -> usize {
    32
}

fn default_p_list() -> Vec<f64> {
    DEFAULT_P_LIST.to_vec()
}

impl Default for StatisticsSection {
    fn default() -> Self {
        Self {
            grid: None,
            per_decade: default_per_decade(),
            p_list: default_p_list(),
        }
    }
}

/// One ensemble experiment. Serialised as TOML:
///
/// ```toml
/// schema_version = 1
/// seed = 7
/// ensemble_size = 64
/// output_dir = "runs"
///
/// [forcing]
/// kind = "power_law"
/// decay = 2.0
/// s_max = 8
/// b0 = 1.0
///
/// [solver]
/// kind = "spectral"
/// nu = 0.002
/// dt = { kind = "adaptive", courant = 0.25, dt_max = 0.001 }
///
/// [sampling]
/// burn_in = 10.0
/// window = 10.0
/// sample_every = 0.2
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub ensemble_size: usize,
    pub output_dir: PathBuf,
    #[serde(default = "default_survival")]
    pub survival_threshold: f64,
    /// Keep the window snapshots on disk as well as the statistics.
    #[serde(default)]
    pub retain_snapshots: bool,
    #[serde(default)]
    pub forcing: ForcingConfig,
    pub solver: SolverSection,
    pub sampling: SamplingSection,
    #[serde(default)]
    pub statistics: StatisticsSection,
}

fn default_survival() -> f64 {
    0.8
}

/// Solver settings after defaults are filled in.
#[derive(Clone, Debug, PartialEq)]
pub enum ResolvedSolver {
    Spectral(SolverConfig),
    Godunov(GodunovConfig),
}

fn is_multiple(x: f64, step: f64) -> bool {
    let r = x / step;
    (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0)
}

impl ExperimentConfig {
    /// A spectral experiment with the default forcing and statistics.
    pub fn spectral(nu: f64, burn_in: f64, window: f64, ensemble_size: usize, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            ensemble_size,
            output_dir: PathBuf::from("runs"),
            survival_threshold: default_survival(),
            retain_snapshots: false,
            forcing: ForcingConfig::default(),
            solver: SolverSection {
                kind: SolverKind::Spectral,
                nu,
                k: None,
                n_grid: None,
                n: None,
                nonlinear: true,
                dt: DtPolicy::default(),
                cfl: default_cfl(),
            },
            sampling: SamplingSection {
                burn_in,
                window,
                sample_every: 0.2,
            },
            statistics: StatisticsSection::default(),
        }
    }

    /// An inviscid Godunov experiment on `n` cells.
    pub fn godunov(n: usize, burn_in: f64, window: f64, ensemble_size: usize, seed: u64) -> Self {
        let mut c = Self::spectral(0.0, burn_in, window, ensemble_size, seed);
        c.solver.kind = SolverKind::Godunov;
        c.solver.n = Some(n);
        c.solver.dt = DtPolicy::Adaptive {
            courant: default_cfl(),
            dt_max: 1e-3,
        };
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Lists every schema violation at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            p.push(format!(
                "schema_version = {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.ensemble_size == 0 {
            p.push("ensemble_size must be at least 1".into());
        }
        if !(self.survival_threshold > 0.0 && self.survival_threshold <= 1.0) {
            p.push(format!("survival_threshold = {} must lie in (0, 1]", self.survival_threshold));
        }
        if let Err(e) = self.forcing.build() {
            p.push(e.to_string());
        }
        let s = &self.solver;
        match s.kind {
            SolverKind::Spectral => {
                if !(s.nu > 0.0 && s.nu <= 1.0) {
                    p.push(format!("nu = {} must lie in (0, 1] for the spectral solver; nu = 0 needs kind = \"godunov\"", s.nu));
                }
                if s.n.is_some() {
                    p.push("`n` applies to the godunov solver; use `k` and `n_grid`".into());
                }
            }
            SolverKind::Godunov => {
                if s.nu != 0.0 {
                    p.push(format!("the godunov solver computes entropy solutions, nu must be 0 (got {})", s.nu));
                }
                if s.n.is_none() {
                    p.push("godunov solver needs the cell count `n`".into());
                }
                if s.k.is_some() || s.n_grid.is_some() {
                    p.push("`k` and `n_grid` apply to the spectral solver".into());
                }
                if !matches!(s.dt, DtPolicy::Adaptive { .. }) {
                    p.push("godunov dt policy must be adaptive (courant is ignored, cfl applies)".into());
                }
            }
        }
        if p.is_empty() {
            match self.resolve_solver() {
                Ok(ResolvedSolver::Spectral(c)) => {
                    if let Err(Error::InvalidConfig(v)) = c.validate() {
                        p.extend(v);
                    }
                    if let DtPolicy::Fixed { dt } = c.dt {
                        if !is_multiple(self.sampling.sample_every, dt) {
                            p.push(format!("sample_every = {} is not a multiple of dt = {dt}", self.sampling.sample_every));
                        }
                    }
                }
                Ok(ResolvedSolver::Godunov(c)) => {
                    if let Err(Error::InvalidConfig(v)) = c.validate() {
                        p.extend(v);
                    }
                }
                Err(e) => p.push(e.to_string()),
            }
        }
        let sm = &self.sampling;
        if !(sm.sample_every > 0.0) {
            p.push("sample_every must be positive".into());
        } else {
            if !(sm.burn_in >= 0.0) || !is_multiple(sm.burn_in, sm.sample_every) {
                p.push(format!("burn_in = {} must be a non-negative multiple of sample_every", sm.burn_in));
            }
            if !(sm.window >= 0.0) || !is_multiple(sm.window, sm.sample_every) {
                p.push(format!("window = {} must be a non-negative multiple of sample_every", sm.window));
            }
        }
        let st = &self.statistics;
        if !st.p_list.contains(&3.0) {
            p.push("p_list must contain 3".into());
        }
        if st.p_list.iter().any(|&x| !(x > 0.0)) {
            p.push("p_list entries must be positive".into());
        }
        if st.per_decade == 0 {
            p.push("per_decade must be positive".into());
        }
        if p.is_empty() {
            if let Err(e) = self.observable_spec() {
                p.push(e.to_string());
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    pub fn resolve_solver(&self) -> Result<ResolvedSolver> {
        let s = &self.solver;
        match s.kind {
            SolverKind::Spectral => {
                let k = s.k.unwrap_or_else(|| default_truncation(s.nu));
                Ok(ResolvedSolver::Spectral(SolverConfig {
                    nu: s.nu,
                    k,
                    n_grid: s.n_grid.unwrap_or_else(|| dealiasing_grid(k)),
                    dt: s.dt,
                    nonlinear: s.nonlinear,
                }))
            }
            SolverKind::Godunov => {
                let dt_max = match s.dt {
                    DtPolicy::Adaptive { dt_max, .. } => dt_max,
                    DtPolicy::Fixed { dt } => dt,
                };
                Ok(ResolvedSolver::Godunov(GodunovConfig {
                    n: s.n.unwrap_or(0),
                    cfl: s.cfl,
                    dt_max,
                }))
            }
        }
    }

    pub fn statistics_grid(&self) -> Result<usize> {
        if let Some(n) = self.statistics.grid {
            return Ok(n);
        }
        Ok(match self.resolve_solver()? {
            ResolvedSolver::Spectral(c) => (3 * c.k + 1).next_power_of_two(),
            ResolvedSolver::Godunov(c) => c.n,
        })
    }

    pub fn observable_spec(&self) -> Result<ObservableSpec> {
        let grid = LGrid::logarithmic(self.statistics_grid()?, self.statistics.per_decade)?;
        ObservableSpec::new(grid, self.statistics.p_list.clone(), self.solver.nu)
    }

    pub fn bracket(&self) -> Option<BracketSpec> {
        (self.sampling.window > 0.0).then_some(BracketSpec {
            start: self.sampling.burn_in,
            length: self.sampling.window,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.sampling.burn_in + self.sampling.window
    }

    /// SHA-256 over the canonical JSON form, excluding `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(format!("run-{}", &self.hash()[..16]))
    }
}
