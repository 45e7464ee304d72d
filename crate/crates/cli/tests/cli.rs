use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mirrorbench"))
}

#[test]
fn run_replay_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let status = bin()
        .args(["run", "--condition", "E1,E5", "--backend", "blind_guesser", "--seeds", "1", "--runs", "2"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("traces_E1.jsonl").is_file() && out.join("aggregate_E5.json").is_file());

    let replay = bin().arg("replay").arg("--in").arg(out.join("traces_E1.jsonl")).output().unwrap();
    assert!(replay.status.success());
    let agg: serde_json::Value = serde_json::from_slice(&replay.stdout).unwrap();
    assert_eq!(agg["n_episodes"], 2);

    let tables = dir.path().join("tables");
    let report = bin()
        .args(["report", "--format", "csv", "--in"])
        .arg(&out)
        .arg("--out")
        .arg(&tables)
        .output()
        .unwrap();
    assert!(report.status.success());
    let csv = String::from_utf8(report.stdout).unwrap();
    assert!(csv.contains("core,E1,blind_guesser,"));
    assert!(csv.contains("# E1: chance baseline (TSA): 1/3 = 0.3333"));
    assert!(tables.join("report.csv").is_file() && tables.join("report.txt").is_file());
}

#[test]
fn tampered_traces_fail_replay() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--condition", "E2", "--backend", "blind_guesser", "--seeds", "1", "--runs", "3", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let agg = dir.path().join("aggregate_E2.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&agg).unwrap()).unwrap();
    v["aggregate"]["n_episodes"] = 99.into();
    std::fs::write(&agg, v.to_string()).unwrap();
    let replay = bin().arg("replay").arg("--in").arg(dir.path().join("traces_E2.jsonl")).output().unwrap();
    assert_eq!(replay.status.code(), Some(1));
}

fn run_fails(args: &[&str], out: &std::path::Path) -> std::process::Output {
    let output = bin().arg("run").args(args).arg("--out").arg(out).output().unwrap();
    assert!(!output.status.success(), "{args:?} succeeded");
    output
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    run_fails(&["--condition", "E1", "--backend", "nope"], dir.path());
    run_fails(&["--condition", "E9", "--backend", "blind_guesser"], dir.path());
    run_fails(&["--condition", "E1", "--backend", "blind_guesser", "--max-steps", "0"], dir.path());
    let remote = run_fails(&["--condition", "E1", "--backend", "remote"], dir.path());
    assert!(String::from_utf8_lossy(&remote.stderr).contains("--base-url"));
}
