//! Privilege-escalation detection: an app's uid never changes while it
//! runs, so any change seen between two of its system calls is suspect.

use std::collections::{HashMap, HashSet};

use super::{AlertKind, Signature, SignatureError};
use crate::dispatch::ResolvedEvent;
use crate::event::{kprobe, EventKind, EventRecord};
use crate::syscalls::SyscallTable;

#[derive(Debug)]
pub struct PrivescSignature {
    uids: HashMap<u32, u32>,
    reported: HashSet<(u32, u32, u32)>,
    fork_nrs: Vec<u32>,
}

impl Default for PrivescSignature {
    fn default() -> Self {
        Self::new()
    }
}

impl PrivescSignature {
    pub fn new() -> Self {
        let table = SyscallTable::arm64();
        PrivescSignature {
            uids: HashMap::new(),
            reported: HashSet::new(),
            fork_nrs: ["clone", "clone3"].iter().filter_map(|n| table.number(n)).collect(),
        }
    }

    pub fn tracked_uid(&self, pid: u32) -> Option<u32> {
        self.uids.get(&pid).copied()
    }

    fn check(&mut self, record: &EventRecord, alerts: &mut Vec<AlertKind>) {
        let ctx = &record.context;
        match record.kind {
            EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT } => {
                if ctx.tid == ctx.pid {
                    self.uids.remove(&ctx.pid);
                    self.reported.retain(|&(pid, _, _)| pid != ctx.pid);
                }
                return;
            }
            EventKind::SyscallEnter { .. } | EventKind::SyscallExit { .. } => {}
            _ => return,
        }

        if let Some(old) = self.uids.insert(ctx.pid, ctx.uid) {
            if old != ctx.uid && self.reported.insert((ctx.pid, old, ctx.uid)) {
                alerts.push(AlertKind::PrivilegeEscalation { pid: ctx.pid, old_uid: old, new_uid: ctx.uid });
            }
        }

        // a new process starts with its parent's uid
        if let EventKind::SyscallExit { nr, ret } = record.kind {
            if ret > 0 && ret <= i64::from(u32::MAX) && self.fork_nrs.contains(&nr) {
                self.uids.insert(ret as u32, ctx.uid);
            }
        }
    }
}

impl Signature for PrivescSignature {
    fn name(&self) -> &str {
        "privesc"
    }

    fn on_event(&mut self, event: &ResolvedEvent, alerts: &mut Vec<AlertKind>) -> Result<(), SignatureError> {
        self.check(&event.record, alerts);
        Ok(())
    }

    // The uid check runs on every system call of a tracked process, not just
    // the ones the filter lets through: a process that became root no longer
    // matches a user-app filter.
    fn on_untraced(&mut self, record: &EventRecord, alerts: &mut Vec<AlertKind>) -> Result<(), SignatureError> {
        self.check(record, alerts);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::Layer;
    use crate::event::EventContext;

    fn ev(pid: u32, uid: u32, kind: EventKind) -> ResolvedEvent {
        ResolvedEvent {
            record: EventRecord::new(EventContext { pid, tid: pid, uid, ..Default::default() }, kind, vec![]),
            display_name: String::new(),
            layer: Layer::Syscall,
        }
    }

    fn run(sig: &mut PrivescSignature, events: &[ResolvedEvent]) -> Vec<AlertKind> {
        let mut out = Vec::new();
        for e in events {
            sig.on_event(e, &mut out).unwrap();
        }
        out
    }

    const OPENAT: EventKind = EventKind::SyscallEnter { nr: 56 };

    #[test]
    fn uid_drop_to_root() {
        let mut sig = PrivescSignature::new();
        let alerts = run(
            &mut sig,
            &[ev(4242, 10050, OPENAT), ev(4242, 10050, OPENAT), ev(4242, 0, OPENAT), ev(4242, 0, OPENAT)],
        );
        assert_eq!(alerts, vec![AlertKind::PrivilegeEscalation { pid: 4242, old_uid: 10050, new_uid: 0 }]);
    }

    #[test]
    fn constant_uid_is_quiet() {
        let mut sig = PrivescSignature::new();
        assert!(run(&mut sig, &vec![ev(1, 10001, OPENAT); 20]).is_empty());
    }

    #[test]
    fn child_inherits_parent_uid() {
        let mut sig = PrivescSignature::new();
        let clone_exit = EventKind::SyscallExit { nr: 220, ret: 5000 };
        let alerts = run(&mut sig, &[ev(4242, 10050, clone_exit), ev(5000, 0, OPENAT)]);
        assert_eq!(alerts, vec![AlertKind::PrivilegeEscalation { pid: 5000, old_uid: 10050, new_uid: 0 }]);
    }

    #[test]
    fn exit_forgets_pid() {
        let mut sig = PrivescSignature::new();
        let exit = EventKind::Kprobe { kprobe_id: kprobe::SCHED_PROCESS_EXIT };
        let alerts = run(&mut sig, &[ev(9, 10050, OPENAT), ev(9, 10050, exit), ev(9, 10077, OPENAT)]);
        assert!(alerts.is_empty());
        assert_eq!(sig.tracked_uid(9), Some(10077));
    }

    #[test]
    fn repeated_transition_reported_once() {
        let mut sig = PrivescSignature::new();
        let alerts = run(&mut sig, &[ev(9, 10050, OPENAT), ev(9, 0, OPENAT), ev(9, 10050, OPENAT), ev(9, 0, OPENAT)]);
        assert_eq!(alerts.len(), 2);
    }
}
