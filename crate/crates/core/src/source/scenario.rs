//! Seeded, deterministic event streams modelling an app dropping a payload,
//! an app gaining root, and an app doing ordinary file i/o.
//!
//! Every stream also carries a little `system_server` activity (uid 1000)
//! so filters have something to reject.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::VecSource;
use crate::event::{kprobe, ArgValue, Comm, EventContext, EventKind, EventRecord, MAX_ARG_BYTES};
use crate::syscalls::SyscallTable;

pub const ELF_MAGIC: [u8; 4] = *b"\x7fELF";
pub const DEX_MAGIC: [u8; 4] = *b"dex\n";
pub const ARCHIVE_MAGIC: [u8; 4] = *b"PK\x03\x04";

const AT_FDCWD: i32 = -100;
const SYSTEM_SERVER_PID: u32 = 1521;
const SYSTEM_UID: u32 = 1000;
const ZYGOTE64_PID: u32 = 612;
// /data is dm-5 on the modelled device; kernel dev_t encoding
const DATA_DEVICE: u64 = (253 << 20) | 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioName {
    DropperDex,
    DropperElf,
    DropperArchive,
    Privesc,
    Benign,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::DropperDex,
        ScenarioName::DropperElf,
        ScenarioName::DropperArchive,
        ScenarioName::Privesc,
        ScenarioName::Benign,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ScenarioName::DropperDex => "dropper_dex",
            ScenarioName::DropperElf => "dropper_elf",
            ScenarioName::DropperArchive => "dropper_archive",
            ScenarioName::Privesc => "privesc",
            ScenarioName::Benign => "benign",
        }
    }

    pub fn from_label(s: &str) -> Option<ScenarioName> {
        ScenarioName::ALL.into_iter().find(|n| n.label() == s)
    }

    /// Leading bytes of the dropped file, for the dropper scenarios.
    pub fn magic(self) -> Option<[u8; 4]> {
        match self {
            ScenarioName::DropperDex => Some(DEX_MAGIC),
            ScenarioName::DropperElf => Some(ELF_MAGIC),
            ScenarioName::DropperArchive => Some(ARCHIVE_MAGIC),
            ScenarioName::Privesc | ScenarioName::Benign => None,
        }
    }

    pub fn default_path(self) -> &'static str {
        match self {
            ScenarioName::DropperDex => "/data/user/0/ufD.wykyx.vlhvh/files/dex",
            ScenarioName::DropperElf => "/data/user/0/org.rabbit/files/rssocks",
            ScenarioName::DropperArchive => "/data/user/0/com.uklildk.ftnqxtietapb/app_files/saxjqez.jar",
            ScenarioName::Privesc => "/data/local/tmp/exploit",
            ScenarioName::Benign => "/data/user/0/com.example.notes/shared_prefs/settings.xml",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: ScenarioName,
    pub seed: u64,
    pub app_uid: u32,
    pub app_pid: u32,
    /// File the scenario writes (droppers, benign) or runs (privesc).
    pub path: String,
    /// Full content of the written file; empty for privesc.
    pub payload: Vec<u8>,
}

impl Scenario {
    pub fn new(name: ScenarioName, seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7061_796c_6f61_6400);
        let payload = match name.magic() {
            Some(magic) => {
                let len = rng.gen_range(4100..24_000);
                let mut p = magic.to_vec();
                p.resize(len, 0);
                rng.fill_bytes(&mut p[4..]);
                p
            }
            None if name == ScenarioName::Benign => xml_document(&mut rng),
            None => Vec::new(),
        };
        Scenario { name, seed, app_uid: 10050, app_pid: 4242, path: name.default_path().to_string(), payload }
    }

    /// The app's package, taken from its data directory when there is one.
    pub fn package(&self) -> &str {
        self.path.strip_prefix("/data/user/0/").and_then(|rest| rest.split('/').next()).unwrap_or("com.android.shell")
    }
}

fn xml_document(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut doc = String::from("<?xml version='1.0' encoding='utf-8' standalone='yes' ?>\n<map>\n");
    for i in 0..rng.gen_range(10..200) {
        doc.push_str(&format!("    <int name=\"pref_{i}\" value=\"{}\" />\n", rng.gen::<u32>()));
    }
    doc.push_str("</map>\n");
    doc.into_bytes()
}

/// Absolute addresses of the user probes scenarios fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserProbeTargets {
    pub libc_open: u64,
    pub open_dex_file: u64,
}

impl UserProbeTargets {
    /// Addresses resolved from the bundled zygote64 fixtures.
    pub fn bundled() -> Self {
        UserProbeTargets { libc_open: 0x7b_2c4a_2f40, open_dex_file: 0x70c7_9b10 }
    }
}

pub fn simulate_scenario(s: &Scenario) -> VecSource {
    VecSource::new(scenario_events(s, &UserProbeTargets::bundled()))
}

/// The full event stream of a scenario, in emission order.
pub fn scenario_events(s: &Scenario, targets: &UserProbeTargets) -> Vec<EventRecord> {
    let mut g = Gen::new(s);
    g.system_server_noise(2);
    match s.name {
        ScenarioName::DropperDex | ScenarioName::DropperElf | ScenarioName::DropperArchive => {
            dropper(&mut g, s, targets)
        }
        ScenarioName::Privesc => privesc(&mut g, s),
        ScenarioName::Benign => benign(&mut g, s, targets),
    }
    g.events
}

struct Proc {
    pid: u32,
    tid: u32,
    ppid: u32,
    uid: u32,
    comm: Comm,
}

impl Proc {
    fn thread(&self, tid: u32) -> Proc {
        Proc { tid, comm: self.comm, ..*self }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    ts: u64,
    events: Vec<EventRecord>,
    table: &'static SyscallTable,
    system_server: Proc,
}

impl Gen {
    fn new(s: &Scenario) -> Gen {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let ts = 1_000_000_000 + rng.gen_range(0..1_000_000_000);
        Gen {
            rng,
            ts,
            events: Vec::new(),
            table: SyscallTable::arm64(),
            system_server: Proc {
                pid: SYSTEM_SERVER_PID,
                tid: SYSTEM_SERVER_PID,
                ppid: ZYGOTE64_PID,
                uid: SYSTEM_UID,
                comm: Comm::new("system_server"),
            },
        }
    }

    fn context(&mut self, p: &Proc) -> EventContext {
        self.ts += self.rng.gen_range(1_000..80_000);
        EventContext { timestamp_ns: self.ts, pid: p.pid, tid: p.tid, ppid: p.ppid, uid: p.uid, comm: p.comm }
    }

    fn push(&mut self, p: &Proc, kind: EventKind, args: Vec<ArgValue>) {
        let context = self.context(p);
        self.events.push(EventRecord::new(context, kind, args));
    }

    fn nr(&self, name: &str) -> u32 {
        self.table.number(name).expect("scenario syscalls exist on arm64")
    }

    fn syscall(&mut self, p: &Proc, name: &str, args: Vec<ArgValue>, ret: i64) {
        let nr = self.nr(name);
        self.push(p, EventKind::SyscallEnter { nr }, args);
        self.push(p, EventKind::SyscallExit { nr, ret }, vec![]);
    }

    fn openat(&mut self, p: &Proc, path: &str, flags: i32) -> i64 {
        let fd = self.rng.gen_range(20..90);
        self.syscall(
            p,
            "openat",
            vec![ArgValue::Int(AT_FDCWD), ArgValue::Str(path.into()), ArgValue::Int(flags), ArgValue::Uint(0o600)],
            fd,
        );
        fd
    }

    fn vfs_write(&mut self, p: &Proc, path: &str, data: &[u8], offset: u64, inode: u64) {
        self.push(
            p,
            EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE },
            vec![
                ArgValue::Str(path.into()),
                ArgValue::Bytes(data.to_vec()),
                ArgValue::Ulong(offset),
                ArgValue::Ulong(DATA_DEVICE),
                ArgValue::Ulong(inode),
            ],
        );
    }

    /// Writes `data` sequentially from offset 0 in chunks of at most one
    /// page, the first at least `first_min` bytes long.
    fn write_file(&mut self, p: &Proc, path: &str, data: &[u8], inode: u64, first_min: usize) {
        let mut offset = 0usize;
        while offset < data.len() {
            let remaining = data.len() - offset;
            let lo = if offset == 0 { first_min.min(remaining).max(1) } else { 1 };
            let len = self.rng.gen_range(lo..=remaining.min(MAX_ARG_BYTES));
            self.vfs_write(p, path, &data[offset..offset + len], offset as u64, inode);
            offset += len;
            if self.rng.gen_bool(0.2) {
                self.system_server_noise(1);
            }
        }
    }

    fn inode(&mut self) -> u64 {
        self.rng.gen_range(100_000..3_000_000)
    }

    fn system_server_noise(&mut self, n: usize) {
        let ss = self.system_server.thread(SYSTEM_SERVER_PID + self.rng.gen_range(0..40));
        for _ in 0..n {
            match self.rng.gen_range(0..3) {
                0 => {
                    self.openat(&ss, "/data/system/packages.xml", 0);
                }
                1 => {
                    let inode = self.inode();
                    let data = b"<?xml version='1.0' encoding='utf-8' ?>\n<usage-history />\n".to_vec();
                    self.vfs_write(&ss, "/data/system/usagestats/0/daily/1697000000000", &data, 0, inode);
                }
                _ => {
                    let fd = self.rng.gen_range(40..200);
                    self.syscall(
                        &ss,
                        "connect",
                        vec![ArgValue::Int(fd), ArgValue::Addr(0x7f_c123_4000), ArgValue::Uint(110)],
                        0,
                    );
                }
            }
        }
    }

    fn exit(&mut self, p: &Proc) {
        self.push(p, EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT }, vec![]);
    }
}

fn app(s: &Scenario) -> Proc {
    Proc { pid: s.app_pid, tid: s.app_pid, ppid: ZYGOTE64_PID, uid: s.app_uid, comm: Comm::new(s.package()) }
}

fn dropper(g: &mut Gen, s: &Scenario, targets: &UserProbeTargets) {
    let main = app(s);
    let worker = main.thread(s.app_pid + 3);
    let inode = g.inode();
    // O_WRONLY | O_CREAT | O_TRUNC
    let flags = 0o1101;

    g.openat(&worker, &s.path, flags);
    g.push(
        &worker,
        EventKind::UserProbe { address: targets.libc_open },
        vec![ArgValue::Str(s.path.clone()), ArgValue::Int(flags)],
    );
    g.write_file(&worker, &s.path, &s.payload, inode, 4);

    match s.name {
        ScenarioName::DropperDex => {
            let string_ptr = 0x12c0_0000 + g.rng.gen_range(0..0x10_0000u64) * 8;
            g.push(
                &worker,
                EventKind::UserProbe { address: targets.open_dex_file },
                vec![
                    ArgValue::Addr(string_ptr),
                    ArgValue::Addr(0),
                    ArgValue::Int(0),
                    ArgValue::Addr(string_ptr + 0x40),
                    ArgValue::Addr(0),
                ],
            );
        }
        ScenarioName::DropperElf => {
            g.syscall(
                &main,
                "fchmodat",
                vec![ArgValue::Int(AT_FDCWD), ArgValue::Str(s.path.clone()), ArgValue::Uint(0o755)],
                0,
            );
            g.syscall(
                &main,
                "execve",
                vec![ArgValue::Str(s.path.clone()), ArgValue::Addr(0x7f_c123_0000), ArgValue::Addr(0x7f_c123_0040)],
                0,
            );
        }
        _ => {}
    }
    g.system_server_noise(1);
    g.exit(&worker);
    g.exit(&main);
}

fn privesc(g: &mut Gen, s: &Scenario) {
    let main = app(s);
    let before = g.rng.gen_range(4..12);
    for _ in 0..before {
        benign_syscall(g, &main);
    }

    let child = Proc { pid: s.app_pid + 17, tid: s.app_pid + 17, ppid: s.app_pid, ..app(s) };
    // CLONE_CHILD_SETTID | CLONE_CHILD_CLEARTID | SIGCHLD
    g.syscall(&main, "clone", vec![ArgValue::Ulong(0x0120_0011), ArgValue::Addr(0)], i64::from(child.pid));
    for _ in 0..g.rng.gen_range(2..5) {
        benign_syscall(g, &child);
    }
    g.exit(&child);

    let root = Proc { uid: 0, ..app(s) };
    g.syscall(
        &root,
        "execve",
        vec![ArgValue::Str("/system/bin/sh".into()), ArgValue::Addr(0x7f_c123_0000), ArgValue::Addr(0x7f_c123_0040)],
        0,
    );
    g.syscall(&root, "setuid", vec![ArgValue::Uint(0)], 0);
    for _ in 0..g.rng.gen_range(1..4) {
        benign_syscall(g, &root);
    }
    g.exit(&root);
}

fn benign_syscall(g: &mut Gen, p: &Proc) {
    match g.rng.gen_range(0..4) {
        0 => {
            g.openat(p, "/data/local/tmp/exploit", 0);
        }
        1 => g.syscall(
            p,
            "faccessat",
            vec![ArgValue::Int(AT_FDCWD), ArgValue::Str("/system/xbin/su".into()), ArgValue::Int(0)],
            -2,
        ),
        2 => {
            let fd = g.rng.gen_range(20..90);
            g.syscall(p, "connect", vec![ArgValue::Int(fd), ArgValue::Addr(0x7f_c123_4000), ArgValue::Uint(16)], 0);
        }
        _ => g.syscall(p, "memfd_create", vec![ArgValue::Str("jit-cache".into()), ArgValue::Uint(1)], 33),
    }
}

fn benign(g: &mut Gen, s: &Scenario, targets: &UserProbeTargets) {
    let main = app(s);
    let prefs_inode = g.inode();
    g.openat(&main, &s.path, 0o1101);
    g.push(
        &main,
        EventKind::UserProbe { address: targets.libc_open },
        vec![ArgValue::Str(s.path.clone()), ArgValue::Int(0o1101)],
    );
    g.write_file(&main, &s.path, &s.payload, prefs_inode, 1);
    // a flush with nothing left to write
    g.vfs_write(&main, &s.path, &[], s.payload.len() as u64, prefs_inode);

    // a cache index whose body happens to contain a dex magic, but not at 0
    let cache = format!("/data/user/0/{}/cache/index.bin", s.package());
    let cache_inode = g.inode();
    g.openat(&main, &cache, 0o1101);
    g.vfs_write(&main, &cache, b"cache-v1", 0, cache_inode);
    let mut body = DEX_MAGIC.to_vec();
    body.resize(g.rng.gen_range(16..512), 0);
    g.rng.fill_bytes(&mut body[4..]);
    g.vfs_write(&main, &cache, &body, 8, cache_inode);

    g.system_server_noise(1);
    g.exit(&main);
}

/// An endless mixed workload for throughput runs: many app processes doing
/// syscalls, small file writes (a few with magic headers) and probe hits.
pub fn generate_load(seed: u64) -> LoadGenerator {
    LoadGenerator {
        rng: ChaCha8Rng::seed_from_u64(seed),
        ts: 1_000_000_000,
        targets: UserProbeTargets::bundled(),
        syscalls: ["openat", "faccessat", "connect", "kill", "memfd_create", "unlinkat", "accept4"]
            .map(|n| SyscallTable::arm64().number(n).expect("arm64 syscall")),
        pending_exit: None,
        data: [0; 256],
    }
}

pub struct LoadGenerator {
    rng: ChaCha8Rng,
    ts: u64,
    targets: UserProbeTargets,
    syscalls: [u32; 7],
    pending_exit: Option<(EventContext, u32)>,
    data: [u8; 256],
}

impl Iterator for LoadGenerator {
    type Item = EventRecord;

    fn next(&mut self) -> Option<EventRecord> {
        self.ts += self.rng.gen_range(100..2_000);
        if let Some((mut ctx, nr)) = self.pending_exit.take() {
            ctx.timestamp_ns = self.ts;
            return Some(EventRecord::new(ctx, EventKind::SyscallExit { nr, ret: 0 }, vec![]));
        }
        let slot = self.rng.gen_range(0..64u32);
        let (pid, uid, comm) = if slot == 0 {
            (SYSTEM_SERVER_PID, SYSTEM_UID, "system_server")
        } else {
            (5000 + slot, 10_000 + slot, "com.load.app")
        };
        let ctx = EventContext {
            timestamp_ns: self.ts,
            pid,
            tid: pid + self.rng.gen_range(0..3),
            ppid: ZYGOTE64_PID,
            uid,
            comm: Comm::new(comm),
        };
        let roll = self.rng.gen_range(0..100);
        let record = if roll < 60 {
            let nr = self.syscalls[self.rng.gen_range(0..self.syscalls.len())];
            self.pending_exit = Some((ctx, nr));
            EventRecord::new(
                ctx,
                EventKind::SyscallEnter { nr },
                vec![ArgValue::Int(AT_FDCWD), ArgValue::Str("/data/user/0/com.load.app/files/f".into())],
            )
        } else if roll < 85 {
            let inode = u64::from(slot) * 1000 + self.rng.gen_range(0..200);
            let offset = if self.rng.gen_bool(0.5) { 0 } else { self.rng.gen_range(0..65_536) };
            let len = self.rng.gen_range(1..=self.data.len());
            self.rng.fill_bytes(&mut self.data[..len]);
            if offset == 0 && len >= 4 && self.rng.gen_ratio(1, 50) {
                self.data[..4].copy_from_slice(&DEX_MAGIC);
            }
            EventRecord::new(
                ctx,
                EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE },
                vec![
                    ArgValue::Str("/data/user/0/com.load.app/files/blob".into()),
                    ArgValue::Bytes(self.data[..len].to_vec()),
                    ArgValue::Ulong(offset),
                    ArgValue::Ulong(DATA_DEVICE),
                    ArgValue::Ulong(inode),
                ],
            )
        } else if roll < 99 {
            let address = if self.rng.gen_bool(0.5) { self.targets.libc_open } else { 0xdead_0000 };
            EventRecord::new(
                ctx,
                EventKind::UserProbe { address },
                vec![ArgValue::Str("/system/etc/hosts".into()), ArgValue::Int(0)],
            )
        } else {
            let ctx = EventContext { tid: pid, ..ctx };
            EventRecord::new(ctx, EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT }, vec![])
        };
        Some(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{decode_event, encode_event};

    fn events(name: ScenarioName, seed: u64) -> (Scenario, Vec<EventRecord>) {
        let s = Scenario::new(name, seed);
        let e = scenario_events(&s, &UserProbeTargets::bundled());
        (s, e)
    }

    fn writes(events: &[EventRecord]) -> Vec<(u64, Vec<u8>, u32)> {
        events
            .iter()
            .filter(|e| e.kind == EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE })
            .map(|e| (e.args[2].as_u64().unwrap(), e.args[1].as_bytes().unwrap().to_vec(), e.context.uid))
            .collect()
    }

    #[test]
    fn dropper_writes_reassemble_to_payload() {
        for name in [ScenarioName::DropperDex, ScenarioName::DropperElf, ScenarioName::DropperArchive] {
            let (s, e) = events(name, 3);
            let mut w: Vec<_> = writes(&e).into_iter().filter(|w| w.2 == s.app_uid).collect();
            assert!(w.len() >= 2);
            assert_eq!(w[0].0, 0);
            assert_eq!(&w[0].1[..4], &name.magic().unwrap());
            w.sort_by_key(|w| w.0);
            let joined: Vec<u8> = w.into_iter().flat_map(|w| w.1).collect();
            assert_eq!(joined, s.payload);
        }
    }

    #[test]
    fn dex_dropper_order() {
        let (s, e) = events(ScenarioName::DropperDex, 1);
        let app: Vec<_> = e.iter().filter(|e| e.context.uid == s.app_uid).collect();
        assert_eq!(app[0].kind, EventKind::SyscallEnter { nr: 56 });
        assert_eq!(app[0].args[1].as_str(), Some(s.path.as_str()));
        assert!(matches!(app[1].kind, EventKind::SyscallExit { nr: 56, .. }));
        assert_eq!(app[2].kind, EventKind::UserProbe { address: 0x7b_2c4a_2f40 });
        let dex = app.iter().position(|e| e.kind == EventKind::UserProbe { address: 0x70c7_9b10 }).unwrap();
        let last_write =
            app.iter().rposition(|e| e.kind == EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE }).unwrap();
        assert!(dex > last_write);
    }

    #[test]
    fn privesc_has_uid_transition() {
        let (s, e) = events(ScenarioName::Privesc, 9);
        let first_app = e.iter().position(|e| e.context.pid == s.app_pid && e.context.uid == s.app_uid).unwrap();
        let first_root = e.iter().position(|e| e.context.pid == s.app_pid && e.context.uid == 0).unwrap();
        assert!(first_app < first_root);
    }

    #[test]
    fn benign_never_writes_magic_at_zero() {
        let (_, e) = events(ScenarioName::Benign, 4);
        let w = writes(&e);
        assert!(w.iter().any(|w| w.0 == 8 && w.1.starts_with(&DEX_MAGIC)));
        for (offset, data, _) in w {
            if offset == 0 {
                assert!(![DEX_MAGIC, ELF_MAGIC, ARCHIVE_MAGIC].iter().any(|m| data.starts_with(m)));
            }
        }
    }

    #[test]
    fn deterministic_and_wire_valid() {
        for name in ScenarioName::ALL {
            let (_, a) = events(name, 77);
            let (_, b) = events(name, 77);
            assert_eq!(a, b);
            assert!(a.windows(2).all(|w| w[0].context.timestamp_ns <= w[1].context.timestamp_ns));
            for e in &a {
                assert_eq!(&decode_event(&encode_event(e)).unwrap(), e);
            }
            let (_, c) = events(name, 78);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn load_is_deterministic() {
        let a: Vec<_> = generate_load(5).take(2000).collect();
        let b: Vec<_> = generate_load(5).take(2000).collect();
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].context.timestamp_ns <= w[1].context.timestamp_ns));
    }
}
