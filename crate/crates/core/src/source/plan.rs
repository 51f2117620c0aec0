//! The attach plan handed to a kernel backend.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::address::ResolvedProbe;
use crate::config::{FilterSpec, HookKind, HooksConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanUprobe {
    pub target_path: String,
    pub address: u64,
    pub offset: u64,
    pub display_name: String,
    pub arg_encoding: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbePlan {
    pub raw_syscalls_entry: bool,
    pub raw_syscalls_exit: bool,
    /// Syscall names the handlers keep; all others are dropped in-kernel.
    pub syscalls: Vec<String>,
    pub kprobes: Vec<String>,
    pub uprobes: Vec<PlanUprobe>,
    pub filter: FilterSpec,
}

/// Builds the plan for `config`. Probes sharing an address become one
/// uprobe whose name lists every candidate.
pub fn emit_probe_plan(config: &HooksConfig, probes: &[ResolvedProbe]) -> ProbePlan {
    let syscalls: Vec<String> = config.hooks_of(HookKind::Syscall).map(|h| h.display_name()).collect();
    let tracing_syscalls = !syscalls.is_empty();

    let mut by_address: BTreeMap<u64, usize> = BTreeMap::new();
    let mut uprobes: Vec<PlanUprobe> = Vec::new();
    for p in probes {
        match by_address.get(&p.address) {
            Some(&i) => {
                let u = &mut uprobes[i];
                if !u.display_name.split('|').any(|n| n == p.display_name) {
                    u.display_name.push('|');
                    u.display_name.push_str(&p.display_name);
                }
            }
            None => {
                by_address.insert(p.address, uprobes.len());
                uprobes.push(PlanUprobe {
                    target_path: p.image_path.clone(),
                    address: p.address,
                    offset: p.offset,
                    display_name: p.display_name.clone(),
                    arg_encoding: p.arg_encoding,
                });
            }
        }
    }

    ProbePlan {
        raw_syscalls_entry: tracing_syscalls,
        raw_syscalls_exit: tracing_syscalls,
        syscalls,
        kprobes: config.hooks_of(HookKind::Kprobe).map(|h| h.display_name()).collect(),
        uprobes,
        filter: config.filter.clone(),
    }
}

impl ProbePlan {
    pub fn to_json(&self) -> Value {
        let uprobes: Vec<Value> = self
            .uprobes
            .iter()
            .map(|u| {
                json!({
                    "target_path": u.target_path,
                    "address": format!("0x{:x}", u.address),
                    "offset": format!("0x{:x}", u.offset),
                    "display_name": u.display_name,
                    "arg_encoding": format!("0x{:016x}", u.arg_encoding),
                })
            })
            .collect();
        json!({
            "raw_syscall_tracepoints": {"entry": self.raw_syscalls_entry, "exit": self.raw_syscalls_exit},
            "syscalls": self.syscalls,
            "kprobes": self.kprobes,
            "uprobes": uprobes,
            "filter": self.filter.to_json(),
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("plan serializes")
    }
}
