use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_burgers-lab")).args(args).output().unwrap()
}

#[test]
fn exit_codes_follow_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let sim = lab(&[
        "simulate", "--nu", "0.05", "--k", "32", "--ensemble", "2", "--burn-in", "0.4", "--window", "0.4",
        "--output-dir", out, "--workers", "1",
    ]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let dir = String::from_utf8(sim.stdout).unwrap().trim().to_string();

    // ν = 0.05 leaves no inertial range
    let verify = lab(&["verify", &dir, "--laws", "four_fifths"]);
    assert_eq!(verify.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&verify.stdout).starts_with("FAIL four_fifths"));

    let stationary = lab(&["verify", &dir, "--laws", "stationarity"]);
    assert!(stationary.status.code() == Some(0) || stationary.status.code() == Some(1));

    assert!(lab(&["export", &dir, "--format", "csv"]).status.success());
    assert_eq!(lab(&["export", &dir, "--format", "xml"]).status.code(), Some(2));
    assert_eq!(lab(&["verify", &dir, "--laws", "five_sixths"]).status.code(), Some(2));
}

#[test]
fn print_config_round_trips() {
    let out = lab(&["simulate", "--solver", "godunov", "--n", "512", "--seed", "9", "--print-config"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kind = \"godunov\""));
    assert!(text.contains("seed = 9"));
    let invalid = lab(&["simulate", "--solver", "godunov", "--print-config"]);
    assert_eq!(invalid.status.code(), Some(2));
}
