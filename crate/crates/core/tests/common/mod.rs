#![allow(dead_code)]

use std::cell::RefCell;
use std::io;
use std::rc::Rc;
use std::sync::OnceLock;

use tracescope_core::address::AddressMap;
use tracescope_core::artifacts::Artifacts;
use tracescope_core::config::{default_multilayer_config, FilterSpec, HooksConfig};
use tracescope_core::dispatch::{
    CompiledFilter, Dispatcher, EventNames, EventSelection, JsonlAlertSink, PackageMap, ResolvedEvent, RunSummary, Sink,
};
use tracescope_core::event::{kprobe, ArgValue, EventContext, EventKind, EventRecord};
use tracescope_core::signatures::{Alert, DropperSignature, PrivescSignature, Signature};
use tracescope_core::source::{simulate_scenario, EventSource, Scenario};

/// Everything a sink was handed, shared with the test after the sink has
/// been boxed into a dispatcher.
#[derive(Debug, Default)]
pub struct Recorded {
    pub events: Vec<EventRecord>,
    pub alerts: Vec<Alert>,
}

#[derive(Debug, Clone, Default)]
pub struct SharedSink(pub Rc<RefCell<Recorded>>);

impl Sink for SharedSink {
    fn on_event(&mut self, event: &ResolvedEvent) -> io::Result<()> {
        self.0.borrow_mut().events.push(event.record.clone());
        Ok(())
    }

    fn on_alert(&mut self, alert: &Alert) -> io::Result<()> {
        self.0.borrow_mut().alerts.push(alert.clone());
        Ok(())
    }
}

/// Default configuration with its bundled-fixture address map.
pub fn default_setup() -> &'static (HooksConfig, AddressMap) {
    static SETUP: OnceLock<(HooksConfig, AddressMap)> = OnceLock::new();
    SETUP.get_or_init(|| {
        let config = default_multilayer_config();
        let map = Artifacts::bundled().resolve(&config).expect("bundled fixtures resolve").map;
        (config, map)
    })
}

pub fn packages_for(s: &Scenario) -> PackageMap {
    let mut p = PackageMap::new();
    p.insert(s.package(), s.app_uid);
    p
}

/// The pipeline the command line builds: default hooks, both signatures.
pub fn pipeline(filter: &FilterSpec, packages: &PackageMap) -> Dispatcher {
    let (config, map) = default_setup();
    let filter = CompiledFilter::new(filter, packages).expect("filter compiles");
    let names = EventNames::new(map.clone()).with_config(config);
    let mut d = Dispatcher::new(filter, names).with_selection(EventSelection::from_config(config, map));
    d.add_signature(Box::new(DropperSignature::new()));
    d.add_signature(Box::new(PrivescSignature::new()));
    d
}

pub fn run_scenario_with(
    s: &Scenario,
    filter: &FilterSpec,
    extra: Vec<Box<dyn Signature>>,
) -> (Rc<RefCell<Recorded>>, RunSummary) {
    let mut d = pipeline(filter, &packages_for(s));
    for sig in extra {
        d.add_signature(sig);
    }
    let sink = SharedSink::default();
    d.add_sink(Box::new(sink.clone()));
    let mut src = simulate_scenario(s);
    let summary = d.run(&mut src).expect("in-memory source cannot fail");
    (sink.0, summary)
}

pub fn run_scenario(s: &Scenario, filter: &FilterSpec) -> (Rc<RefCell<Recorded>>, RunSummary) {
    run_scenario_with(s, filter, Vec::new())
}

/// Alert JSONL as the command line writes it.
pub fn alert_jsonl(src: &mut dyn EventSource, filter: &FilterSpec, packages: &PackageMap) -> Vec<u8> {
    #[derive(Clone, Default)]
    struct Buf(Rc<RefCell<Vec<u8>>>);
    impl io::Write for Buf {
        fn write(&mut self, b: &[u8]) -> io::Result<usize> {
            self.0.borrow_mut().extend_from_slice(b);
            Ok(b.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }
    let buf = Buf::default();
    let mut d = pipeline(filter, packages);
    d.add_sink(Box::new(JsonlAlertSink::new(buf.clone())));
    d.run(src).expect("source ok");
    let out = buf.0.borrow().clone();
    out
}

pub fn ctx(ts: u64, pid: u32, uid: u32) -> EventContext {
    EventContext { timestamp_ns: ts, pid, tid: pid, ppid: 1, uid, comm: Default::default() }
}

pub fn vfs_write(ts: u64, pid: u32, uid: u32, device: u64, inode: u64, offset: u64, data: &[u8]) -> EventRecord {
    EventRecord::new(
        ctx(ts, pid, uid),
        EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE },
        vec![
            ArgValue::Str(format!("/data/user/0/com.t/files/{inode}")),
            ArgValue::Bytes(data.to_vec()),
            ArgValue::Ulong(offset),
            ArgValue::Ulong(device),
            ArgValue::Ulong(inode),
        ],
    )
}

/// `(device, inode)` of every write to `path`, in stream order.
pub fn identities_written(events: &[EventRecord], path: &str) -> Vec<(u64, u64)> {
    let mut ids = Vec::new();
    for e in events {
        if let (EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE | kprobe::VFS_WRITEV }, [p, _, _, d, i]) =
            (e.kind, e.args.as_slice())
        {
            if p.as_str() == Some(path) {
                let id = (d.as_u64().unwrap(), i.as_u64().unwrap());
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
    }
    ids
}
