use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid forcing: {0}")]
    InvalidForcing(String),

    #[error("grid of {n_grid} points cannot resolve the field, need at least {required}")]
    Resolution { n_grid: usize, required: usize },

    #[error("separation l = {l} is below resolution, minimum resolvable l is {min_l}")]
    LBelowResolution { l: f64, min_l: f64 },

    #[error("trajectory blew up at step {step} (t = {t}): mode {mode} has value {value}")]
    BlowUp {
        step: u64,
        t: f64,
        mode: i64,
        value: f64,
    },

    #[error("time step {dt} violates the CFL limit {max_dt}, shrink dt")]
    Cfl { dt: f64, max_dt: f64 },

    #[error("sampling cadence {sample_every} is not a multiple of dt = {dt}")]
    Cadence { sample_every: f64, dt: f64 },

    #[error("averaging window not covered: {0}")]
    WindowNotCovered(String),

    #[error("accumulator layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("insufficient range coverage: need {needed} points in [{lo}, {hi}], found {found}")]
    InsufficientRange {
        needed: usize,
        found: usize,
        lo: f64,
        hi: f64,
    },

    #[error("empty strong inertial range: floor {floor} is not below cap {cap}")]
    EmptyRange { floor: f64, cap: f64 },

    #[error("non-positive structure function value {value} for p = {p} at l = {l}")]
    NonPositiveData { p: f64, l: f64, value: f64 },

    #[error("snapshot at t = {t} does not match the rescaled cadence")]
    CadenceMismatch { t: f64 },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),

    #[error("missing observables, re-run with: {}", .0.join(", "))]
    MissingObservables(Vec<String>),

    #[error("unknown export format `{0}`")]
    UnknownFormat(String),

    #[error("unknown law `{0}`")]
    UnknownLaw(String),

    #[error("only {survived} of {total} trajectories survived, below the {threshold} threshold")]
    TooManyAborts {
        survived: usize,
        total: usize,
        threshold: f64,
    },

    #[error("run stopped after {done} of {total} trajectories, re-run the same config to resume")]
    Incomplete { done: usize, total: usize },

    #[error("run directory {0} has no complete manifest")]
    MissingManifest(PathBuf),

    #[error("malformed snapshot stream: {0}")]
    SnapshotFormat(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
