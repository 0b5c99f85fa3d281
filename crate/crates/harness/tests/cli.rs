//! CLI surface tests: explore/lin round trip, scenario simulation, and the
//! convoy CSV output.

use std::process::Command;

fn ofuc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ofuc"))
}

#[test]
fn explore_then_offline_lin_check() {
    let dir = std::env::temp_dir().join(format!("ofuc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("hist.jsonl");
    let status = ofuc()
        .args(["explore", "--object", "counter", "--procs", "2", "--ops", "1"])
        .arg("--steps")
        .arg("40")
        .arg("--out")
        .arg(&out)
        .arg("--limit")
        .arg("4")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    // At least one history file exists; check the first one offline.
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    assert!(!files.is_empty());
    let lin = ofuc().args(["lin"]).arg(&files[0]).args(["--spec", "counter"]).output().unwrap();
    assert!(lin.status.success(), "{}", String::from_utf8_lossy(&lin.stdout));
    let text = String::from_utf8_lossy(&lin.stdout);
    assert!(text.contains("linearizable"), "{text}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn lin_rejects_a_forged_history() {
    let dir = std::env::temp_dir().join(format!("ofuc-forged-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.jsonl");
    // write(1), write(2) strictly before a read that returns 1: not a legal
    // register history.
    let lines = [
        r#"{"seq":0,"kind":"invoke","proc":0,"obj":"r","op":"write","args":1,"res":null,"epoch":null,"steps":0}"#,
        r#"{"seq":1,"kind":"response","proc":0,"obj":"r","op":"write","args":1,"res":"ack","epoch":null,"steps":1}"#,
        r#"{"seq":2,"kind":"invoke","proc":0,"obj":"r","op":"write","args":2,"res":null,"epoch":null,"steps":1}"#,
        r#"{"seq":3,"kind":"response","proc":0,"obj":"r","op":"write","args":2,"res":"ack","epoch":null,"steps":2}"#,
        r#"{"seq":4,"kind":"invoke","proc":1,"obj":"r","op":"read","args":null,"res":null,"epoch":null,"steps":0}"#,
        r#"{"seq":5,"kind":"response","proc":1,"obj":"r","op":"read","args":null,"res":1,"epoch":null,"steps":1}"#,
    ];
    std::fs::write(&path, lines.join("\n")).unwrap();
    let lin = ofuc().args(["lin"]).arg(&path).args(["--spec", "register"]).output().unwrap();
    assert!(!lin.status.success());
    assert!(String::from_utf8_lossy(&lin.stdout).contains("NOT linearizable"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn sim_scenario_and_history_dump() {
    let dir = std::env::temp_dir().join(format!("ofuc-sim-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let scenario = dir.join("scenario.json");
    let out = dir.join("hist.jsonl");
    std::fs::write(
        &scenario,
        r#"{
            "n_servers": 3,
            "seed": 5,
            "crashes": [[8000000, 0]],
            "workload": [
                [0, 0, {"op": "write", "reg": "x", "value": 3}],
                [9000000, 1, {"op": "read", "reg": "x"}]
            ]
        }"#,
    )
    .unwrap();
    let status = ofuc().args(["sim"]).arg(&scenario).arg("--out").arg(&out).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let h = ofuc_core::History::from_jsonl(&text).unwrap();
    let read = h.ops().into_iter().find(|o| o.op == "read").unwrap();
    assert_eq!(read.res, Some(ofuc_core::V::Nat(3)));
    // Determinism: re-running the scenario produces a bit-identical file.
    let out2 = dir.join("hist2.jsonl");
    ofuc().args(["sim"]).arg(&scenario).arg("--out").arg(&out2).output().unwrap();
    assert_eq!(text, std::fs::read_to_string(&out2).unwrap());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_convoy_csv_shape() {
    let out = ofuc()
        .args(["bench", "convoy", "--m", "10", "--clients", "1..3"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,clients,latency,approx"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn check_unknown_suite_fails_cleanly() {
    let out = ofuc().args(["check", "nonesuch"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));
}
