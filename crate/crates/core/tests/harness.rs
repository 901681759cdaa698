use std::fs;
use std::path::Path;

use burgers_core::harness::{
    export, load_run, rescale, run_experiment, sweep, verify, ExperimentConfig, ExportFormat, RunOptions,
    VerifyOptions, CSV_HEADER, MANIFEST_FILE, STATISTICS_FILE,
};
use burgers_core::Error;
use sha2::{Digest, Sha256};

fn tiny(dir: &Path, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::spectral(0.05, 0.4, 0.4, 4, seed);
    c.solver.k = Some(32);
    c.output_dir = dir.to_path_buf();
    c
}

fn laws(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

#[test]
fn zero_window_run_has_manifest_and_no_observables() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = tiny(tmp.path(), 1);
    c.ensemble_size = 1;
    c.sampling.window = 0.0;
    let manifest = run_experiment(&c, &RunOptions::with_workers(1)).unwrap();
    assert_eq!(manifest.trajectories.len(), 1);
    assert!(manifest.trajectories[0].completed);
    let run = load_run(&c.run_dir()).unwrap();
    assert!(run.statistics.observables.is_none());
    assert_eq!(run.statistics.survived, 1);
    for (rel, digest) in &manifest.files {
        let bytes = fs::read(c.run_dir().join(rel)).unwrap();
        assert_eq!(&hex::encode(Sha256::digest(&bytes)), digest, "{rel}");
    }
    assert!(manifest.files.contains_key(STATISTICS_FILE));
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |c: &ExperimentConfig| fs::read(c.run_dir().join(STATISTICS_FILE)).unwrap();
    let a = tiny(&tmp.path().join("a"), 7);
    let b = tiny(&tmp.path().join("b"), 7);
    let c = tiny(&tmp.path().join("c"), 8);
    run_experiment(&a, &RunOptions::with_workers(1)).unwrap();
    run_experiment(&b, &RunOptions::with_workers(3)).unwrap();
    run_experiment(&c, &RunOptions::with_workers(1)).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn interrupted_run_resumes_to_the_same_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let whole = tiny(&tmp.path().join("whole"), 3);
    run_experiment(&whole, &RunOptions::default()).unwrap();

    let part = tiny(&tmp.path().join("part"), 3);
    let opts = RunOptions {
        workers: Some(1),
        limit: Some(3),
    };
    match run_experiment(&part, &opts) {
        Err(Error::Incomplete { done: 3, total: 4 }) => {}
        other => panic!("expected an incomplete run, got {other:?}"),
    }
    assert!(!part.run_dir().join(MANIFEST_FILE).exists());
    assert!(matches!(load_run(&part.run_dir()), Err(Error::MissingManifest(_))));
    let checkpoints = fs::read_dir(part.run_dir().join("trajectories")).unwrap().count();
    assert_eq!(checkpoints, 3);

    run_experiment(&part, &RunOptions::default()).unwrap();
    let a = fs::read(whole.run_dir().join(STATISTICS_FILE)).unwrap();
    let b = fs::read(part.run_dir().join(STATISTICS_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn finished_run_is_not_recomputed() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tiny(tmp.path(), 4);
    let first = run_experiment(&c, &RunOptions::default()).unwrap();
    let second = run_experiment(&c, &RunOptions::default()).unwrap();
    assert_eq!(first.files, second.files);
}

#[test]
fn tampered_statistics_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tiny(tmp.path(), 5);
    run_experiment(&c, &RunOptions::default()).unwrap();
    let path = c.run_dir().join(STATISTICS_FILE);
    let mut text = fs::read_to_string(&path).unwrap();
    text.push(' ');
    fs::write(&path, text).unwrap();
    assert!(load_run(&c.run_dir()).is_err());
}

#[test]
fn empty_law_list_gives_empty_report() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tiny(tmp.path(), 6);
    run_experiment(&c, &RunOptions::default()).unwrap();
    let report = verify(&c.run_dir(), &[], &VerifyOptions::default()).unwrap();
    assert!(report.verdicts.is_empty());
    assert!(report.all_passed());
}

#[test]
fn verify_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tiny(tmp.path(), 9);
    run_experiment(&c, &RunOptions::default()).unwrap();
    let names = laws(&["energy_balance", "energy_balance_raw", "dissipation_anchor", "stationarity", "four_fifths"]);
    let first = verify(&c.run_dir(), &names, &VerifyOptions::default()).unwrap();
    let bytes = fs::read(c.run_dir().join("verdicts.json")).unwrap();
    let second = verify(&c.run_dir(), &names, &VerifyOptions::default()).unwrap();
    assert_eq!(serde_json::to_string(&first).unwrap(), serde_json::to_string(&second).unwrap());
    assert_eq!(bytes, fs::read(c.run_dir().join("verdicts.json")).unwrap());
    assert_eq!(first.verdicts.len(), names.len());
    // the horizon is shorter than balance_t_min
    assert!(!first.verdicts[0].passed);
    // ν = 0.05 has no inertial range; the ranged law fails instead of erroring
    assert!(!first.verdicts[4].passed);
}

#[test]
fn missing_and_unknown_laws_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = tiny(tmp.path(), 10);
    c.sampling.window = 0.0;
    run_experiment(&c, &RunOptions::default()).unwrap();
    match verify(&c.run_dir(), &laws(&["four_fifths"]), &VerifyOptions::default()) {
        Err(Error::MissingObservables(m)) => assert!(!m.is_empty()),
        other => panic!("expected missing observables, got {other:?}"),
    }
    assert!(matches!(
        verify(&c.run_dir(), &laws(&["five_sixths"]), &VerifyOptions::default()),
        Err(Error::UnknownLaw(_))
    ));
    assert!(matches!(rescale(&c.run_dir(), 2.0), Err(Error::MissingObservables(_))));
}

#[test]
fn exports_have_documented_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tiny(tmp.path(), 11);
    run_experiment(&c, &RunOptions::default()).unwrap();
    let csv = export(&c.run_dir(), ExportFormat::Csv).unwrap();
    let text = fs::read_to_string(&csv[0]).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let jsonl = export(&c.run_dir(), "structured-text".parse().unwrap()).unwrap();
    for line in fs::read_to_string(&jsonl[0]).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("record").is_some());
    }
    // exports do not invalidate the run
    load_run(&c.run_dir()).unwrap();
}

#[test]
fn sweep_runs_every_viscosity() {
    let tmp = tempfile::tempdir().unwrap();
    let base = tiny(tmp.path(), 12);
    let report = sweep(&base, &[0.08, 0.05, 0.03], &RunOptions::default(), 0.3).unwrap();
    assert_eq!(report.run_dirs.len(), 3);
    assert_eq!(report.verdicts.len(), 2);
    for dir in &report.run_dirs {
        load_run(dir).unwrap();
    }
}

#[test]
fn config_survives_toml_round_trip() {
    let c = tiny(Path::new("out"), 13);
    let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
    assert_eq!(c.hash(), back.hash());
}
