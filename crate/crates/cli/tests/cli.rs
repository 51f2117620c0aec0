use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tracescope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracescope"))
        .args(args)
        .env_remove("TRACESCOPE_CAPTURE_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn jsonl(o: &Output) -> Vec<serde_json::Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn dropper_simulation_alerts_and_exits_3() {
    let o = tracescope(&["simulate", "dropper_dex", "--all-user-apps", "--output", "jsonl"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let alerts = jsonl(&o);
    assert_eq!(alerts.len(), 1);
    assert_eq!(alerts[0]["kind"], "DroppedFile");
    assert_eq!(alerts[0]["details"]["magic"], "dex");
}

#[test]
fn benign_simulation_is_clean() {
    let o = tracescope(&["simulate", "benign", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).contains("ALERT"));
    assert!(stdout(&o).lines().count() > 10);
}

#[test]
fn privesc_simulation_alerts_under_default_filter() {
    let o = tracescope(&["simulate", "privesc", "--output", "jsonl"]);
    assert_eq!(code(&o), 3);
    let alerts = jsonl(&o);
    assert_eq!(alerts.len(), 1);
    assert_eq!(alerts[0]["kind"], "PrivilegeEscalation");
    assert_eq!(alerts[0]["details"]["new_uid"], 0);
}

#[test]
fn uid_filter_hides_other_apps() {
    let o = tracescope(&["simulate", "dropper_elf", "--uid", "10999"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
}

#[test]
fn exit_codes_for_bad_input() {
    assert_eq!(code(&tracescope(&["replay", "/nonexistent/trace.bin"])), 2);
    assert_eq!(code(&tracescope(&["frobnicate"])), 1);
    assert_eq!(code(&tracescope(&["run"])), 1);
    assert_eq!(code(&tracescope(&["simulate", "dropper_dex", "--uid", "1", "--all-user-apps"])), 1);
    assert_eq!(code(&tracescope(&["simulate", "dropper_dex", "--package", "com.unknown"])), 2);
    assert_eq!(code(&tracescope(&["--help"])), 0);

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"syscalls": ["openat", "openat"]}"#).unwrap();
    assert_eq!(code(&tracescope(&["validate-config", "--config", bad.to_str().unwrap()])), 2);
    let junk = tmp.path().join("junk.bin");
    fs::write(&junk, b"BPFRPLY1\x05\x00\x00\x00abc").unwrap();
    assert_eq!(code(&tracescope(&["replay", junk.to_str().unwrap()])), 2);
}

#[test]
fn recorded_simulation_replays_to_the_same_alerts() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = tmp.path().join("elf.bin");
    let rec = rec.to_str().unwrap();
    let live = tracescope(&["simulate", "dropper_elf", "--seed", "6", "--record", rec, "--output", "jsonl"]);
    assert_eq!(code(&live), 3);
    let replayed = tracescope(&["replay", rec, "--output", "jsonl"]);
    assert_eq!(code(&replayed), 3);
    assert_eq!(live.stdout, replayed.stdout);
}

#[test]
fn alert_output_is_deterministic() {
    for scenario in ["dropper_dex", "dropper_elf", "dropper_archive", "privesc", "benign"] {
        let a = tracescope(&["simulate", scenario, "--seed", "12", "--output", "jsonl"]);
        let b = tracescope(&["simulate", scenario, "--seed", "12", "--output", "jsonl"]);
        assert_eq!(a.stdout, b.stdout, "{scenario}");
    }
}

#[test]
fn alerts_file_and_capture_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let alerts = tmp.path().join("alerts.jsonl");
    let cap = tmp.path().join("cap");
    let o = tracescope(&[
        "simulate",
        "dropper_archive",
        "--alerts-file",
        alerts.to_str().unwrap(),
        "--capture-dir",
        cap.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    let line = fs::read_to_string(&alerts).unwrap();
    let alert: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    let file = &alert["details"];
    let dir = cap.join(format!("{}_{}", file["device"], file["inode"]));
    let data = fs::read(dir.join("reconstructed.bin")).unwrap();
    assert!(data.starts_with(b"PK\x03\x04"));
    assert!(Path::new(&dir.join("manifest.json")).exists());
}

#[test]
fn list_events_and_plan_cover_the_default_set() {
    let o = tracescope(&["list-events"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let count = |kind: &str| text.lines().filter(|l| l.split_whitespace().next() == Some(kind)).count();
    assert_eq!((count("api"), count("uprobe"), count("syscall"), count("kprobe")), (50, 4, 49, 3));
    assert!(text.contains("openat") && text.contains("nr=56"));

    let o = tracescope(&["plan", "--strict"]);
    assert_eq!(code(&o), 0);
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["uprobes"].as_array().unwrap().len(), 54);
    assert_eq!(plan["syscalls"].as_array().unwrap().len(), 49);
    assert_eq!(plan["kprobes"].as_array().unwrap().len(), 3);
}
