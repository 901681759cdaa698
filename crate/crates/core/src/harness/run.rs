use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ResolvedSolver};
use crate::entropy::{GodunovSolver, GridField, GridState};
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::snapshot::{FieldRef, SnapshotWriter};
use crate::spectral::{SpectralField, SpectralSolver, TrajectoryState};
use crate::statistics::{
    BracketSpec, BudgetPoint, BudgetSeries, EnsembleStats, MomentAccumulator, ObservableSpec, WindowAverager,
};

/// Environment variable read for the worker count.
pub const WORKERS_ENV: &str = "BURGERS_WORKERS";

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATISTICS_FILE: &str = "statistics.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides `BURGERS_WORKERS`; defaults to the available parallelism.
    pub workers: Option<usize>,
    /// Compute at most this many missing trajectories, then stop with
    /// [`Error::Incomplete`]. Used to exercise resume.
    pub limit: Option<usize>,
}

impl RunOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers: Some(workers),
            limit: None,
        }
    }

    pub fn resolved_workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
            .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
            .unwrap_or(1)
            .max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrajectoryOutcome {
    Completed {
        steps: u64,
        /// Window average of the observable vector, absent when `σ = 0`.
        window: Option<Vec<f64>>,
        /// `½‖u‖²` averaged over the two halves of the window.
        energy_halves: Option<[f64; 2]>,
        initial_energy: f64,
        /// Budget terms at every sample time (spectral runs only).
        budget: Vec<BudgetPoint>,
    },
    Aborted {
        t: f64,
        error: String,
    },
}

/// Per-trajectory checkpoint, written once the trajectory finishes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub config_hash: String,
    pub trajectory: u64,
    pub seed: u64,
    pub outcome: TrajectoryOutcome,
}

impl TrajectoryRecord {
    pub fn completed(&self) -> bool {
        matches!(self.outcome, TrajectoryOutcome::Completed { .. })
    }
}

/// Ensemble reduction of all trajectory records, in trajectory order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub config_hash: String,
    /// Window-averaged observables; `None` when the window is empty.
    pub observables: Option<EnsembleStats>,
    pub budget: BudgetSeries,
    pub energy_halves: [MomentAccumulator; 2],
    pub survived: usize,
    pub aborted: Vec<(u64, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub trajectory: u64,
    /// Noise streams are addressed by `(seed, trajectory)`.
    pub seed: u64,
    pub completed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub trajectories: Vec<TrajectoryEntry>,
    pub workers: usize,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    /// Relative path → SHA-256 of every file the run wrote.
    pub files: BTreeMap<String, String>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn checkpoint_path(dir: &Path, trajectory: u64) -> PathBuf {
    dir.join("trajectories").join(format!("traj-{trajectory:05}.json"))
}

fn snapshot_path(dir: &Path, trajectory: u64) -> PathBuf {
    dir.join("snapshots").join(format!("traj-{trajectory:05}.bsnp"))
}

/// Everything a worker needs, shared read-only.
struct Plan {
    cfg: ExperimentConfig,
    hash: String,
    solver: ResolvedSolver,
    forcing: ForcingSpec,
    observables: ObservableSpec,
    dir: PathBuf,
}

/// Streams one trajectory's samples into window and budget accumulators.
struct Recorder<'a> {
    plan: &'a Plan,
    window: Option<(WindowAverager, WindowAverager, WindowAverager)>,
    budget: Vec<BudgetPoint>,
    snapshots: Option<SnapshotWriter<BufWriter<fs::File>>>,
}

impl<'a> Recorder<'a> {
    fn new(plan: &'a Plan, trajectory: u64) -> Result<Self> {
        let window = plan.cfg.bracket().map(|b| {
            let half = b.length / 2.0;
            (
                WindowAverager::new(b, plan.observables.dim()),
                WindowAverager::new(BracketSpec { start: b.start, length: half }, 1),
                WindowAverager::new(BracketSpec { start: b.start + half, length: half }, 1),
            )
        });
        let snapshots = if plan.cfg.retain_snapshots && window.is_some() {
            let path = snapshot_path(&plan.dir, trajectory);
            let file = fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
            Some(SnapshotWriter::new(BufWriter::new(file))?)
        } else {
            None
        };
        Ok(Self {
            plan,
            window,
            budget: Vec::new(),
            snapshots,
        })
    }

    fn in_window(&self, t: f64) -> bool {
        let b = &self.plan.cfg.sampling;
        t >= b.burn_in - 1e-9 * b.burn_in.max(1.0) && t <= self.plan.cfg.horizon() + 1e-9 * t.max(1.0)
    }

    fn sample(&mut self, trajectory: u64, t: f64, field: FieldRef<'_>, energy: f64) -> Result<()> {
        if !self.in_window(t) {
            return Ok(());
        }
        if let Some((obs, first, second)) = &mut self.window {
            let values = self.plan.observables.observe(field)?;
            obs.push(t, &values);
            first.push(t, &[energy]);
            second.push(t, &[energy]);
        }
        if let Some(w) = &mut self.snapshots {
            w.write(trajectory, t, field)?;
        }
        Ok(())
    }

    fn finish(self, steps: u64, initial_energy: f64) -> Result<TrajectoryOutcome> {
        if let Some(w) = self.snapshots {
            w.into_inner()?.flush()?;
        }
        let (window, energy_halves) = match &self.window {
            Some((obs, a, b)) => (Some(obs.finish()?), Some([a.finish()?[0], b.finish()?[0]])),
            None => (None, None),
        };
        Ok(TrajectoryOutcome::Completed {
            steps,
            window,
            energy_halves,
            initial_energy,
            budget: self.budget,
        })
    }
}

fn is_abort(e: &Error) -> bool {
    matches!(e, Error::BlowUp { .. } | Error::Cfl { .. })
}

fn run_trajectory(plan: &Plan, trajectory: u64) -> Result<TrajectoryRecord> {
    let seed = plan.cfg.seed;
    let every = plan.cfg.sampling.sample_every;
    let samples = (plan.cfg.horizon() / every).round() as u64;
    let mut rec = Recorder::new(plan, trajectory)?;
    let outcome = match &plan.solver {
        ResolvedSolver::Spectral(sc) => {
            let mut solver = SpectralSolver::new(sc.clone(), plan.forcing.clone())?;
            let mut state = TrajectoryState::new(SpectralField::zeros(sc.k), seed, trajectory);
            let e0 = 0.5 * state.field.norm_squared();
            let mut result = rec.sample(trajectory, 0.0, FieldRef::Spectral(&state.field), e0);
            for j in 1..=samples {
                if result.is_err() {
                    break;
                }
                let t = j as f64 * every;
                result = solver.advance_to(&mut state, t).and_then(|_| {
                    let energy = 0.5 * state.field.norm_squared();
                    rec.budget.push(BudgetPoint {
                        t,
                        energy,
                        dissipated: state.budget.dissipated,
                        martingale: state.budget.martingale,
                    });
                    rec.sample(trajectory, t, FieldRef::Spectral(&state.field), energy)
                });
            }
            match result {
                Ok(()) => rec.finish(state.step_count, e0)?,
                Err(e) if is_abort(&e) => TrajectoryOutcome::Aborted {
                    t: state.t,
                    error: e.to_string(),
                },
                Err(e) => return Err(e),
            }
        }
        ResolvedSolver::Godunov(gc) => {
            let mut solver = GodunovSolver::new(*gc, plan.forcing.clone())?;
            let mut state = GridState::new(GridField::zeros(gc.n), seed, trajectory);
            let energy = |g: &GridField| 0.5 * g.cells().iter().map(|v| v * v).sum::<f64>() / g.n() as f64;
            let e0 = energy(&state.field);
            let mut result = rec.sample(trajectory, 0.0, FieldRef::Grid(&state.field), e0);
            for j in 1..=samples {
                if result.is_err() {
                    break;
                }
                let t = j as f64 * every;
                result = solver
                    .advance_to(&mut state, t)
                    .and_then(|_| rec.sample(trajectory, t, FieldRef::Grid(&state.field), energy(&state.field)));
            }
            match result {
                Ok(()) => rec.finish(state.step_count, e0)?,
                Err(e) if is_abort(&e) => TrajectoryOutcome::Aborted {
                    t: state.t,
                    error: e.to_string(),
                },
                Err(e) => return Err(e),
            }
        }
    };
    Ok(TrajectoryRecord {
        config_hash: plan.hash.clone(),
        trajectory,
        seed,
        outcome,
    })
}

fn load_checkpoint(dir: &Path, hash: &str, trajectory: u64) -> Option<TrajectoryRecord> {
    let rec: TrajectoryRecord = read_json(&checkpoint_path(dir, trajectory)).ok()?;
    (rec.config_hash == hash && rec.trajectory == trajectory).then_some(rec)
}

/// Reduces records (sorted by trajectory) into ensemble statistics.
pub fn reduce(cfg: &ExperimentConfig, records: &[TrajectoryRecord]) -> Result<RunStatistics> {
    let b0 = cfg.forcing.build()?.b0();
    let mut observables = cfg.bracket().map(|_| cfg.observable_spec()).transpose()?.map(EnsembleStats::new);
    let mut budget = BudgetSeries::default();
    let mut halves = [MomentAccumulator::new(); 2];
    let mut aborted = Vec::new();
    for r in records {
        match &r.outcome {
            TrajectoryOutcome::Completed {
                window,
                energy_halves,
                initial_energy,
                budget: points,
                ..
            } => {
                if let (Some(stats), Some(w)) = (observables.as_mut(), window) {
                    stats.push(w)?;
                }
                if let Some([a, b]) = energy_halves {
                    halves[0].push(*a);
                    halves[1].push(*b);
                }
                if !points.is_empty() {
                    budget.push(points, *initial_energy, b0)?;
                }
            }
            TrajectoryOutcome::Aborted { error, .. } => aborted.push((r.trajectory, error.clone())),
        }
    }
    Ok(RunStatistics {
        config_hash: cfg.hash(),
        observables: observables.take(),
        budget,
        energy_halves: halves,
        survived: records.len() - aborted.len(),
        aborted,
    })
}

fn inventory(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| Error::file(&d, e))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(dir).expect("inside run dir").to_string_lossy().replace('\\', "/");
            if rel == MANIFEST_FILE || rel.starts_with("export/") || rel == "verdicts.json" {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| Error::file(&path, e))?;
            files.insert(rel, hex::encode(Sha256::digest(&bytes)));
        }
    }
    Ok(files)
}

/// Runs (or resumes) the ensemble and writes statistics and manifest into
/// [`ExperimentConfig::run_dir`].
///
/// Trajectories already checkpointed under the same config hash are reused.
/// Statistics are reduced in trajectory order, so the worker count does not
/// affect any output bit.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    cfg.validate()?;
    let started = unix_now();
    let clock = Instant::now();
    let dir = cfg.run_dir();
    for sub in ["trajectories", "snapshots"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::file(&d, e))?;
    }
    let plan = Plan {
        hash: cfg.hash(),
        solver: cfg.resolve_solver()?,
        forcing: cfg.forcing.build()?,
        observables: cfg.observable_spec()?,
        dir: dir.clone(),
        cfg: cfg.clone(),
    };
    write_atomic(&dir.join(CONFIG_FILE), cfg.to_toml()?.as_bytes())?;

    let total = cfg.ensemble_size;
    let mut pending: Vec<u64> = (0..total as u64)
        .filter(|&id| load_checkpoint(&dir, &plan.hash, id).is_none())
        .collect();
    let stop = opts.limit.is_some_and(|n| n < pending.len());
    if let Some(n) = opts.limit {
        pending.truncate(n);
    }
    let workers = opts.resolved_workers();
    log::info!("{} of {total} trajectories to run on {workers} workers", pending.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(vec![format!("cannot start {workers} workers: {e}")]))?;
    pool.install(|| {
        pending.par_iter().try_for_each(|&id| -> Result<()> {
            let rec = run_trajectory(&plan, id)?;
            write_atomic(&checkpoint_path(&dir, id), &serde_json::to_vec(&rec)?)
        })
    })?;
    if stop {
        let done = (0..total as u64).filter(|&id| load_checkpoint(&dir, &plan.hash, id).is_some()).count();
        return Err(Error::Incomplete { done, total });
    }

    let records = (0..total as u64)
        .map(|id| {
            load_checkpoint(&dir, &plan.hash, id).ok_or(Error::Incomplete {
                done: id as usize,
                total,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = reduce(cfg, &records)?;
    write_atomic(&dir.join(STATISTICS_FILE), &serde_json::to_vec(&stats)?)?;
    let manifest = RunManifest {
        schema_version: super::config::SCHEMA_VERSION,
        config_hash: plan.hash.clone(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        trajectories: records
            .iter()
            .map(|r| TrajectoryEntry {
                trajectory: r.trajectory,
                seed: r.seed,
                completed: r.completed(),
            })
            .collect(),
        workers,
        started_unix: started,
        finished_unix: unix_now(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        files: inventory(&dir)?,
    };
    write_atomic(&dir.join(MANIFEST_FILE), &serde_json::to_vec_pretty(&manifest)?)?;
    let survival = stats.survived as f64 / total as f64;
    if survival < cfg.survival_threshold {
        return Err(Error::TooManyAborts {
            survived: stats.survived,
            total,
            threshold: cfg.survival_threshold,
        });
    }
    Ok(manifest)
}

/// A finished run read back from disk.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub manifest: RunManifest,
    pub statistics: RunStatistics,
}

/// Loads a run directory, checking the statistics file against the manifest.
pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(Error::MissingManifest(dir.to_path_buf()));
    }
    let manifest: RunManifest = read_json(&manifest_path)?;
    let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
    let stats_path = dir.join(STATISTICS_FILE);
    let bytes = fs::read(&stats_path).map_err(|e| Error::file(&stats_path, e))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    if manifest.files.get(STATISTICS_FILE) != Some(&digest) || config.hash() != manifest.config_hash {
        return Err(Error::MissingManifest(dir.to_path_buf()));
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        config,
        manifest,
        statistics: serde_json::from_slice(&bytes)?,
    })
}
