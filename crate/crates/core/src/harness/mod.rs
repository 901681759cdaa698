//! Experiment orchestration: configuration, ensemble runs with per-trajectory
//! checkpoints, manifests, verdicts and exports.
//!
//! A run directory `output_dir/run-<hash>` holds
//!
//! ```text
//! config.toml              normalised configuration
//! trajectories/traj-N.json one checkpoint per finished trajectory
//! snapshots/traj-N.bsnp    window snapshots (retain_snapshots = true)
//! statistics.json          ensemble reduction in trajectory order
//! manifest.json            hashes of every file above
//! verdicts.json            last `verify` report
//! export/                  `export` output
//! ```

mod config;
mod export;
mod run;
mod verify;

use std::fs;
use std::io::BufReader;
use std::path::Path;

pub use config::{
    ExperimentConfig, ForcingConfig, ResolvedSolver, SamplingSection, SolverKind, SolverSection, StatisticsSection,
    SCHEMA_VERSION,
};
pub use export::{
    export, read_jsonl, read_table_csv, run_records, table_from_records, table_records, write_jsonl, write_table_csv,
    ExportFormat, Record, CSV_HEADER,
};
pub use run::{
    load_run, reduce, run_experiment, LoadedRun, RunManifest, RunOptions, RunStatistics, TrajectoryEntry,
    TrajectoryOutcome, TrajectoryRecord, MANIFEST_FILE, STATISTICS_FILE, WORKERS_ENV,
};
pub use verify::{run_ranges, sweep, verify, verify_statistics, SweepReport, VerdictReport, VerifyOptions, LAWS};

use crate::error::{Error, Result};
use crate::laws::{landau_identities, LandauReport};
use crate::snapshot::{Snapshot, SnapshotReader};

/// Retained snapshots of a run, in trajectory then time order.
pub fn load_snapshots(dir: &Path) -> Result<Vec<Snapshot>> {
    let run = load_run(dir)?;
    if !run.config.retain_snapshots {
        return Err(Error::MissingObservables(vec!["window snapshots (retain_snapshots = true)".into()]));
    }
    let mut out = Vec::new();
    for entry in run.manifest.trajectories.iter().filter(|e| e.completed) {
        let path = dir.join("snapshots").join(format!("traj-{:05}.bsnp", entry.trajectory));
        let file = fs::File::open(&path).map_err(|e| Error::file(&path, e))?;
        for s in SnapshotReader::new(BufReader::new(file))? {
            out.push(s?);
        }
    }
    Ok(out)
}

/// Landau transform of a run's retained snapshots.
pub fn rescale(dir: &Path, mu: f64) -> Result<LandauReport> {
    let run = load_run(dir)?;
    let snaps = load_snapshots(dir)?;
    landau_identities(&snaps, mu, &run.config.observable_spec()?)
}
