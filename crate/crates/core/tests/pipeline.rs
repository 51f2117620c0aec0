mod common;

use common::*;
use tracescope_core::config::FilterSpec;
use tracescope_core::dispatch::PackageMap;
use tracescope_core::event::{kprobe, EventKind, EventRecord};
use tracescope_core::signatures::AlertKind;
use tracescope_core::source::{Scenario, ScenarioName};

#[test]
fn escalated_process_alerts_without_leaking_root_events() {
    let s = Scenario::new(ScenarioName::Privesc, 4);
    let (rec, summary) = run_scenario(&s, &FilterSpec::all_user_apps());
    let rec = rec.borrow();
    assert!(rec.events.iter().all(|e| e.context.uid == s.app_uid));
    assert_eq!(rec.alerts.len(), 1);
    assert_eq!(rec.alerts[0].context.uid, 0);
    assert_eq!(summary.alerts_by_kind.get("PrivilegeEscalation"), Some(&1));
}

#[test]
fn untraced_exit_retires_the_process() {
    let mut d = pipeline(&FilterSpec::all_user_apps(), &PackageMap::new());
    let sink = SharedSink::default();
    d.add_sink(Box::new(sink.clone()));
    let openat = EventKind::SyscallEnter { nr: 56 };
    d.process(EventRecord::new(ctx(1, 77, 10_080), openat, vec![]));
    d.process(EventRecord::new(ctx(2, 77, 0), openat, vec![]));
    assert!(d.processes().get(77).is_some());
    d.process(EventRecord::new(ctx(3, 77, 0), EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT }, vec![]));
    assert!(d.processes().get(77).is_none());
    // the pid is reused by an unrelated app: no second alert
    d.process(EventRecord::new(ctx(4, 77, 10_081), openat, vec![]));
    let summary = d.finish();
    assert_eq!(summary.events_traced, 2);
    let alerts = &sink.0.borrow().alerts;
    assert_eq!(alerts.len(), 1);
    assert_eq!(alerts[0].kind, AlertKind::PrivilegeEscalation { pid: 77, old_uid: 10_080, new_uid: 0 });
}

#[test]
fn processes_never_traced_stay_invisible() {
    let mut d = pipeline(&FilterSpec::all_user_apps(), &PackageMap::new());
    let sink = SharedSink::default();
    d.add_sink(Box::new(sink.clone()));
    let openat = EventKind::SyscallEnter { nr: 56 };
    d.process(EventRecord::new(ctx(1, 1521, 1000), openat, vec![]));
    d.process(EventRecord::new(ctx(2, 1521, 0), openat, vec![]));
    d.finish();
    assert!(sink.0.borrow().alerts.is_empty() && sink.0.borrow().events.is_empty());
}

#[test]
fn dropper_alert_is_linked_in_capture_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let s = Scenario::new(ScenarioName::DropperElf, 8);
    let store = tracescope_core::signatures::CaptureStore::new(tmp.path()).unwrap();
    let (rec, _) = run_scenario_with(&s, &FilterSpec::packages([s.package()]), vec![Box::new(store)]);
    let rec = rec.borrow();
    let AlertKind::DroppedFile { file, .. } = &rec.alerts[0].kind else { panic!("{:?}", rec.alerts) };
    let dir = tmp.path().join(format!("{}_{}", file.device, file.inode));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["alerts"], serde_json::json!([rec.alerts[0].seq]));
    assert_eq!(manifest["size"], s.payload.len());
    assert_eq!(manifest["last_known_path"], s.path.as_str());
}
