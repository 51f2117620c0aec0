//! arm64 system call numbers.
//!
//! The table is generated from the kernel's `asm-generic/unistd.h`; arm64
//! has no legacy entries such as `open`, `fork` or `stat`, so those names
//! have no number here.

mod arm64;

use std::collections::HashMap;
use std::sync::OnceLock;

#[derive(Debug)]
pub struct SyscallTable {
    names: HashMap<u32, &'static str>,
    numbers: HashMap<&'static str, u32>,
}

impl SyscallTable {
    pub fn arm64() -> &'static SyscallTable {
        static TABLE: OnceLock<SyscallTable> = OnceLock::new();
        TABLE.get_or_init(|| SyscallTable {
            names: arm64::TABLE.iter().copied().collect(),
            numbers: arm64::TABLE.iter().map(|&(nr, name)| (name, nr)).collect(),
        })
    }

    pub fn name(&self, nr: u32) -> Option<&'static str> {
        self.names.get(&nr).copied()
    }

    pub fn number(&self, name: &str) -> Option<u32> {
        self.numbers.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}
