//! The user-space half of the pipeline: process filtering, event naming,
//! per-process bookkeeping, and fan-out to signatures and sinks.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

use crate::address::AddressMap;
use crate::config::{FilterMode, FilterSpec, HookKind, HooksConfig};
use crate::event::{decode_arg_types, kprobe, EventContext, EventKind, EventRecord};
use crate::signatures::{Alert, AlertKind, Signature, SignatureError};
use crate::source::{EventSource, SourceError};
use crate::syscalls::SyscallTable;

/// Installed packages and their uids, as in `packages.list`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PackageMap {
    uids: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PackageMapError {
    #[error("line {0}: expected \"<package> <uid>\"")]
    Malformed(usize),
    #[error("line {line}: package {package} listed twice")]
    Duplicate { line: usize, package: String },
}

impl PackageMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, package: &str, uid: u32) -> Option<u32> {
        self.uids.insert(package.to_string(), uid)
    }

    pub fn uid(&self, package: &str) -> Option<u32> {
        self.uids.get(package).copied()
    }

    /// Parses `package uid` lines; further columns (as `packages.list`
    /// carries) are ignored, blank lines and `#` comments skipped.
    pub fn parse(text: &str) -> Result<PackageMap, PackageMapError> {
        let mut map = PackageMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(package), Some(uid)) = (fields.next(), fields.next()) else {
                return Err(PackageMapError::Malformed(i + 1));
            };
            let uid = uid.parse().map_err(|_| PackageMapError::Malformed(i + 1))?;
            if map.insert(package, uid).is_some() {
                return Err(PackageMapError::Duplicate { line: i + 1, package: package.to_string() });
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("unknown package: {0}")]
    UnknownPackage(String),
}

/// A filter with package names already turned into uids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledFilter {
    mode: FilterMode,
    uids: HashSet<u32>,
    threshold: u32,
}

impl CompiledFilter {
    pub fn new(filter: &FilterSpec, packages: &PackageMap) -> Result<CompiledFilter, FilterError> {
        let uids = match filter.mode {
            FilterMode::UidList => filter.uids.iter().copied().collect(),
            FilterMode::PackageList => filter
                .packages
                .iter()
                .map(|p| packages.uid(p).ok_or_else(|| FilterError::UnknownPackage(p.clone())))
                .collect::<Result<_, _>>()?,
            FilterMode::None | FilterMode::AllUserApps => HashSet::new(),
        };
        Ok(CompiledFilter { mode: filter.mode, uids, threshold: filter.user_app_uid_threshold })
    }

    /// With no filter configured nothing is traced.
    pub fn should_trace(&self, ctx: &EventContext) -> bool {
        match self.mode {
            FilterMode::None => false,
            FilterMode::AllUserApps => ctx.uid > self.threshold,
            FilterMode::UidList | FilterMode::PackageList => self.uids.contains(&ctx.uid),
        }
    }
}

pub fn should_trace(ctx: &EventContext, filter: &FilterSpec, packages: &PackageMap) -> Result<bool, FilterError> {
    Ok(CompiledFilter::new(filter, packages)?.should_trace(ctx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    Syscall,
    Kernel,
    Native,
    Api,
}

impl Layer {
    pub fn label(self) -> &'static str {
        match self {
            Layer::Syscall => "syscall",
            Layer::Kernel => "kernel",
            Layer::Native => "native",
            Layer::Api => "api",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedEvent {
    pub record: EventRecord,
    pub display_name: String,
    pub layer: Layer,
}

/// Everything needed to name an event.
#[derive(Debug, Clone)]
pub struct EventNames {
    pub addresses: AddressMap,
    pub syscalls: &'static SyscallTable,
    kprobes: HashMap<u32, String>,
}

impl EventNames {
    pub fn new(addresses: AddressMap) -> Self {
        EventNames { addresses, syscalls: SyscallTable::arm64(), kprobes: HashMap::new() }
    }

    /// Also names the config's kernel functions that have hashed ids.
    pub fn with_config(mut self, config: &HooksConfig) -> Self {
        for h in config.hooks_of(HookKind::Kprobe) {
            let name = h.display_name();
            self.kprobes.insert(kprobe::id_for(&name), name);
        }
        self
    }

    pub fn resolve(&self, record: EventRecord) -> ResolvedEvent {
        resolve_with(record, &self.addresses, self.syscalls, &self.kprobes)
    }
}

fn resolve_with(
    record: EventRecord,
    addresses: &AddressMap,
    syscalls: &SyscallTable,
    kprobes: &HashMap<u32, String>,
) -> ResolvedEvent {
    let (display_name, layer) = match record.kind {
        EventKind::SyscallEnter { nr } | EventKind::SyscallExit { nr, .. } => {
            let name = match syscalls.name(nr) {
                Some(n) => n.to_string(),
                None => format!("syscall#{nr}"),
            };
            (name, Layer::Syscall)
        }
        EventKind::Kprobe { kprobe_id } => {
            let name = match kprobe::well_known_name(kprobe_id) {
                Some(n) => n.to_string(),
                None => match kprobes.get(&kprobe_id) {
                    Some(n) => n.clone(),
                    None => format!("kprobe#0x{kprobe_id:08x}"),
                },
            };
            (name, Layer::Kernel)
        }
        EventKind::UserProbe { address } => match addresses.get(address) {
            Some(entry) => {
                let layer = match entry.kind {
                    crate::address::ProbeKind::ApiCall => Layer::Api,
                    crate::address::ProbeKind::NativeFunction => Layer::Native,
                };
                (entry.display_name(), layer)
            }
            None => (format!("unknown@0x{address:x}"), Layer::Native),
        },
    };
    ResolvedEvent { record, display_name, layer }
}

pub fn resolve_event(record: EventRecord, addresses: &AddressMap, syscalls: &SyscallTable) -> ResolvedEvent {
    resolve_with(record, addresses, syscalls, &HashMap::new())
}

/// The configured event set; events outside it are dropped before
/// filtering, as the kernel side would.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSelection {
    syscalls: HashSet<u32>,
    kprobes: HashSet<u32>,
    addresses: HashSet<u64>,
}

impl EventSelection {
    /// Syscall names with no arm64 number select nothing.
    pub fn from_config(config: &HooksConfig, addresses: &AddressMap) -> Self {
        let table = SyscallTable::arm64();
        EventSelection {
            syscalls: config.hooks_of(HookKind::Syscall).filter_map(|h| table.number(&h.display_name())).collect(),
            kprobes: config.hooks_of(HookKind::Kprobe).map(|h| kprobe::id_for(&h.display_name())).collect(),
            addresses: addresses.iter().map(|(a, _)| a).collect(),
        }
    }

    pub fn contains(&self, kind: &EventKind) -> bool {
        match *kind {
            EventKind::SyscallEnter { nr } | EventKind::SyscallExit { nr, .. } => self.syscalls.contains(&nr),
            EventKind::Kprobe { kprobe_id } => self.kprobes.contains(&kprobe_id),
            EventKind::UserProbe { address } => self.addresses.contains(&address),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessInfo {
    pub uid: u32,
    pub comm: String,
    pub first_seen_ns: u64,
}

/// Live traced processes, keyed by pid.
#[derive(Debug, Clone)]
pub struct ProcessTable {
    procs: HashMap<u32, ProcessInfo>,
    fork_nrs: [u32; 2],
}

impl Default for ProcessTable {
    fn default() -> Self {
        Self::new()
    }
}

impl ProcessTable {
    pub fn new() -> Self {
        let t = SyscallTable::arm64();
        ProcessTable {
            procs: HashMap::new(),
            fork_nrs: [t.number("clone").expect("clone"), t.number("clone3").expect("clone3")],
        }
    }

    pub fn get(&self, pid: u32) -> Option<&ProcessInfo> {
        self.procs.get(&pid)
    }

    pub fn len(&self) -> usize {
        self.procs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.procs.is_empty()
    }

    pub fn observe(&mut self, record: &EventRecord) {
        let ctx = &record.context;
        if record.kind == (EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT }) {
            if ctx.tid == ctx.pid {
                self.procs.remove(&ctx.pid);
            }
            return;
        }
        let info = || ProcessInfo { uid: ctx.uid, comm: ctx.comm.to_string_lossy(), first_seen_ns: ctx.timestamp_ns };
        self.procs.entry(ctx.pid).or_insert_with(info);
        if let EventKind::SyscallExit { nr, ret } = record.kind {
            if ret > 0 && ret <= i64::from(u32::MAX) && self.fork_nrs.contains(&nr) {
                self.procs.insert(ret as u32, info());
            }
        }
    }
}

/// Output for resolved events and alerts; called only from the loop thread.
pub trait Sink {
    fn on_event(&mut self, _event: &ResolvedEvent) -> io::Result<()> {
        Ok(())
    }

    fn on_alert(&mut self, _alert: &Alert) -> io::Result<()> {
        Ok(())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// `+HH:MM:SS.uuuuuu` since the first traced event.
fn relative_time(ns: u64) -> String {
    let us = ns / 1_000;
    let s = us / 1_000_000;
    format!("+{:02}:{:02}:{:02}.{:06}", s / 3600, s / 60 % 60, s % 60, us % 1_000_000)
}

/// One line per event: time, uid, pid, tid, ppid, comm, layer, name, args.
/// Alerts are interleaved as `ALERT` lines.
pub struct TextSink<W: Write> {
    out: W,
    start_ns: Option<u64>,
    line: String,
}

impl<W: Write> TextSink<W> {
    pub fn new(out: W) -> Self {
        TextSink { out, start_ns: None, line: String::new() }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn format_event(e: &ResolvedEvent, start_ns: u64, line: &mut String) {
    let c = &e.record.context;
    line.clear();
    let _ = write!(
        line,
        "{} uid={} pid={} tid={} ppid={} comm={} {} {}",
        relative_time(c.timestamp_ns.saturating_sub(start_ns)),
        c.uid,
        c.pid,
        c.tid,
        c.ppid,
        c.comm,
        e.layer.label(),
        e.display_name,
    );
    if let EventKind::SyscallExit { ret, .. } = e.record.kind {
        let _ = write!(line, " = {ret}");
    } else {
        line.push('(');
        for (i, a) in e.record.args.iter().enumerate() {
            if i > 0 {
                line.push_str(", ");
            }
            let _ = write!(line, "{a}");
        }
        line.push(')');
    }
}

impl<W: Write> Sink for TextSink<W> {
    fn on_event(&mut self, event: &ResolvedEvent) -> io::Result<()> {
        let start = *self.start_ns.get_or_insert(event.record.context.timestamp_ns);
        format_event(event, start, &mut self.line);
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())
    }

    fn on_alert(&mut self, alert: &Alert) -> io::Result<()> {
        writeln!(self.out, "{alert}")
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Alerts as JSON lines.
pub struct JsonlAlertSink<W: Write> {
    out: W,
}

impl<W: Write> JsonlAlertSink<W> {
    pub fn new(out: W) -> Self {
        JsonlAlertSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Sink for JsonlAlertSink<W> {
    fn on_alert(&mut self, alert: &Alert) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, &alert.to_json())?;
        self.out.write_all(b"\n")
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Keeps every alert in memory.
#[derive(Debug, Default, Clone)]
pub struct AlertCollector {
    pub alerts: Vec<Alert>,
}

impl Sink for AlertCollector {
    fn on_alert(&mut self, alert: &Alert) -> io::Result<()> {
        self.alerts.push(alert.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub events_seen: u64,
    pub events_traced: u64,
    pub alerts_by_kind: BTreeMap<String, u64>,
    /// Per signature name.
    pub signature_errors: BTreeMap<String, u64>,
    /// User-probe events whose argument count differs from the probe's
    /// declared types.
    pub arity_mismatches: u64,
    pub sink_errors: u64,
}

impl RunSummary {
    pub fn total_alerts(&self) -> u64 {
        self.alerts_by_kind.values().sum()
    }
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "events seen: {}, traced: {}, alerts: {}",
            self.events_seen,
            self.events_traced,
            self.total_alerts()
        )?;
        for (kind, n) in &self.alerts_by_kind {
            write!(f, ", {kind}: {n}")?;
        }
        for (sig, n) in &self.signature_errors {
            write!(f, ", {sig} errors: {n}")?;
        }
        if self.arity_mismatches > 0 {
            write!(f, ", arity mismatches: {}", self.arity_mismatches)?;
        }
        if self.sink_errors > 0 {
            write!(f, ", output errors: {}", self.sink_errors)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
#[error("{source}")]
pub struct RunError {
    #[source]
    pub source: SourceError,
    /// What was processed before the source failed.
    pub summary: RunSummary,
}

pub struct Dispatcher {
    filter: CompiledFilter,
    names: EventNames,
    selection: Option<EventSelection>,
    signatures: Vec<Box<dyn Signature>>,
    sinks: Vec<Box<dyn Sink>>,
    processes: ProcessTable,
    summary: RunSummary,
    next_seq: u64,
    arity: HashMap<u64, usize>,
    scratch: Vec<AlertKind>,
    raised: Vec<Alert>,
    last_signature_error: Option<String>,
}

impl Dispatcher {
    pub fn new(filter: CompiledFilter, names: EventNames) -> Self {
        let arity = names
            .addresses
            .iter()
            .filter_map(|(a, e)| decode_arg_types(e.arg_encoding).ok().map(|t| (a, t.len())))
            .collect();
        Dispatcher {
            filter,
            names,
            selection: None,
            signatures: Vec::new(),
            sinks: Vec::new(),
            processes: ProcessTable::new(),
            summary: RunSummary::default(),
            next_seq: 1,
            arity,
            scratch: Vec::new(),
            raised: Vec::new(),
            last_signature_error: None,
        }
    }

    pub fn with_selection(mut self, selection: EventSelection) -> Self {
        self.selection = Some(selection);
        self
    }

    pub fn add_signature(&mut self, s: Box<dyn Signature>) {
        self.signatures.push(s);
    }

    pub fn add_sink(&mut self, s: Box<dyn Sink>) {
        self.sinks.push(s);
    }

    pub fn processes(&self) -> &ProcessTable {
        &self.processes
    }

    pub fn summary(&self) -> &RunSummary {
        &self.summary
    }

    /// Most recent signature failure, for diagnostics.
    pub fn last_signature_error(&self) -> Option<&str> {
        self.last_signature_error.as_deref()
    }

    pub fn process(&mut self, record: EventRecord) {
        self.summary.events_seen += 1;
        if let Some(sel) = &self.selection {
            if !sel.contains(&record.kind) {
                return;
            }
        }
        if !self.filter.should_trace(&record.context) {
            if self.processes.get(record.context.pid).is_some() {
                self.untraced(record);
            }
            return;
        }
        self.summary.events_traced += 1;
        self.processes.observe(&record);
        if let EventKind::UserProbe { address } = record.kind {
            if self.arity.get(&address).is_some_and(|&n| n != record.args.len()) {
                self.summary.arity_mismatches += 1;
            }
        }
        let event = self.names.resolve(record);

        self.raised.clear();
        for i in 0..self.signatures.len() {
            self.scratch.clear();
            let r = self.signatures[i].on_event(&event, &mut self.scratch);
            self.collect(i, r, &event.record.context);
        }
        self.announce();
        for sink in &mut self.sinks {
            let mut r = sink.on_event(&event);
            for alert in &self.raised {
                r = r.and_then(|_| sink.on_alert(alert));
            }
            if r.is_err() {
                self.summary.sink_errors += 1;
            }
        }
    }

    // An event of a traced process that the filter rejects: only the
    // kernel-side checks see it, and only their alerts are shown.
    fn untraced(&mut self, record: EventRecord) {
        let exit = record.kind == (EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT });
        self.raised.clear();
        for i in 0..self.signatures.len() {
            self.scratch.clear();
            let r = self.signatures[i].on_untraced(&record, &mut self.scratch);
            self.collect(i, r, &record.context);
        }
        if exit {
            self.processes.observe(&record);
        }
        self.announce();
        for sink in &mut self.sinks {
            let mut r = Ok(());
            for alert in &self.raised {
                r = r.and_then(|_| sink.on_alert(alert));
            }
            if r.is_err() {
                self.summary.sink_errors += 1;
            }
        }
    }

    fn collect(&mut self, i: usize, r: Result<(), SignatureError>, context: &EventContext) {
        if let Err(e) = r {
            let name = self.signatures[i].name().to_string();
            self.last_signature_error = Some(format!("{name}: {e}"));
            *self.summary.signature_errors.entry(name).or_default() += 1;
        }
        for kind in self.scratch.drain(..) {
            *self.summary.alerts_by_kind.entry(kind.label().to_string()).or_default() += 1;
            self.raised.push(Alert { seq: self.next_seq, context: *context, kind });
            self.next_seq += 1;
        }
    }

    fn announce(&mut self) {
        for alert in &self.raised {
            for sig in &mut self.signatures {
                sig.on_alert(alert);
            }
        }
    }

    /// Ends the run: lets signatures finish their work and flushes sinks.
    pub fn finish(&mut self) -> RunSummary {
        for sig in &mut self.signatures {
            if let Err(e) = sig.finish() {
                *self.summary.signature_errors.entry(sig.name().to_string()).or_default() += 1;
                self.last_signature_error = Some(format!("{}: {e}", sig.name()));
            }
        }
        for sink in &mut self.sinks {
            if sink.flush().is_err() {
                self.summary.sink_errors += 1;
            }
        }
        self.summary.clone()
    }

    /// Drains `src` through the pipeline. A source error ends the run after
    /// everything before it has been processed and flushed.
    pub fn run(&mut self, src: &mut dyn EventSource) -> Result<RunSummary, RunError> {
        loop {
            match src.next_batch() {
                Ok(Some(batch)) => {
                    for record in batch {
                        self.process(record);
                    }
                }
                Ok(None) => return Ok(self.finish()),
                Err(source) => {
                    let summary = self.finish();
                    return Err(RunError { source, summary });
                }
            }
        }
    }
}

pub fn dispatch_loop(
    src: &mut dyn EventSource,
    filter: CompiledFilter,
    addresses: AddressMap,
    signatures: Vec<Box<dyn Signature>>,
    sinks: Vec<Box<dyn Sink>>,
) -> Result<RunSummary, RunError> {
    let mut d = Dispatcher::new(filter, EventNames::new(addresses));
    for s in signatures {
        d.add_signature(s);
    }
    for s in sinks {
        d.add_sink(s);
    }
    d.run(src)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::{ProbeKind, ResolvedProbe};
    use crate::event::{ArgValue, Comm};

    fn ctx(uid: u32) -> EventContext {
        EventContext { timestamp_ns: 1, pid: 7, tid: 7, ppid: 1, uid, comm: Comm::new("x") }
    }

    #[test]
    fn filter_semantics() {
        let pkgs = PackageMap::parse("com.a 10123\ncom.b 10050 0 /data/user/0/com.b default\n").unwrap();
        assert!(should_trace(&ctx(10123), &FilterSpec::all_user_apps(), &pkgs).unwrap());
        assert!(!should_trace(&ctx(1000), &FilterSpec::all_user_apps(), &pkgs).unwrap());
        assert!(!should_trace(&ctx(10000), &FilterSpec::all_user_apps(), &pkgs).unwrap());
        assert!(should_trace(&ctx(10050), &FilterSpec::uids([10050]), &pkgs).unwrap());
        assert!(!should_trace(&ctx(10051), &FilterSpec::uids([10050]), &pkgs).unwrap());
        assert!(should_trace(&ctx(10050), &FilterSpec::packages(["com.b"]), &pkgs).unwrap());
        assert!(!should_trace(&ctx(10050), &FilterSpec::none(), &pkgs).unwrap());
        assert_eq!(
            CompiledFilter::new(&FilterSpec::packages(["com.zzz"]), &pkgs),
            Err(FilterError::UnknownPackage("com.zzz".into()))
        );
    }

    #[test]
    fn package_map_errors() {
        assert_eq!(PackageMap::parse("com.a"), Err(PackageMapError::Malformed(1)));
        assert_eq!(PackageMap::parse("com.a x"), Err(PackageMapError::Malformed(1)));
        assert!(matches!(PackageMap::parse("com.a 1\ncom.a 2"), Err(PackageMapError::Duplicate { line: 2, .. })));
    }

    #[test]
    fn naming() {
        let mut map = AddressMap::new();
        map.insert(&ResolvedProbe {
            kind: ProbeKind::ApiCall,
            address: 0x71a4_a010,
            image_path: String::new(),
            offset: 0,
            display_name: "android.telephony.TelephonyManager.getImei".into(),
            arg_encoding: 0,
        });
        let names = EventNames::new(map);
        let r = |kind| names.resolve(EventRecord::new(ctx(1), kind, vec![]));
        let e = r(EventKind::SyscallEnter { nr: 221 });
        assert_eq!((e.display_name.as_str(), e.layer), ("execve", Layer::Syscall));
        let e = r(EventKind::UserProbe { address: 0x71a4_a010 });
        assert_eq!((e.display_name.as_str(), e.layer), ("android.telephony.TelephonyManager.getImei", Layer::Api));
        let e = r(EventKind::UserProbe { address: 0xdead });
        assert_eq!((e.display_name.as_str(), e.layer), ("unknown@0xdead", Layer::Native));
        let e = r(EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE });
        assert_eq!((e.display_name.as_str(), e.layer), ("vfs_write", Layer::Kernel));
    }

    #[test]
    fn process_table_lifecycle() {
        let mut t = ProcessTable::new();
        let rec = |pid: u32, tid: u32, kind| EventRecord::new(EventContext { pid, tid, ..ctx(10050) }, kind, vec![]);
        t.observe(&rec(7, 7, EventKind::SyscallExit { nr: 220, ret: 9 }));
        assert!(t.get(7).is_some() && t.get(9).is_some());
        t.observe(&rec(7, 8, EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT }));
        assert!(t.get(7).is_some());
        t.observe(&rec(7, 7, EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT }));
        assert!(t.get(7).is_none());
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn text_line_columns() {
        let names = EventNames::new(AddressMap::new());
        let e = names.resolve(EventRecord::new(
            EventContext { timestamp_ns: 2_500_000_000, ..ctx(10050) },
            EventKind::SyscallEnter { nr: 56 },
            vec![ArgValue::Int(-100), ArgValue::Str("/data/x".into())],
        ));
        let mut line = String::new();
        format_event(&e, 1_000_000_000, &mut line);
        assert_eq!(line, "+00:00:01.500000 uid=10050 pid=7 tid=7 ppid=1 comm=x syscall openat(-100, \"/data/x\")");
    }
}
