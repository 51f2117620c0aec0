//! Event domain types shared by every stage of the pipeline.
//!
//! An [`EventRecord`] is what a probe handler reports for one hit: the
//! calling task's context, which probe fired, and the arguments it managed
//! to read. Argument types are described by [`ArgType`] and packed eight to
//! a `u64` for the per-address metadata map.

use std::fmt;

use thiserror::Error;

/// Maximum number of arguments a probe handler records.
pub const MAX_ARGS: usize = 8;

/// Maximum captured length of a single `str` or `bytes` argument.
pub const MAX_ARG_BYTES: usize = 4096;

/// Length of the kernel task name buffer, including the terminating NUL.
pub const COMM_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum ArgType {
    None = 0,
    Int = 1,
    Uint = 2,
    Long = 3,
    Ulong = 4,
    Addr = 5,
    Str = 6,
    Bytes = 7,
}

impl ArgType {
    pub const ALL: [ArgType; 8] = [
        ArgType::None,
        ArgType::Int,
        ArgType::Uint,
        ArgType::Long,
        ArgType::Ulong,
        ArgType::Addr,
        ArgType::Str,
        ArgType::Bytes,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<ArgType> {
        ArgType::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ArgType::None => "none",
            ArgType::Int => "int",
            ArgType::Uint => "uint",
            ArgType::Long => "long",
            ArgType::Ulong => "ulong",
            ArgType::Addr => "addr",
            ArgType::Str => "str",
            ArgType::Bytes => "bytes",
        }
    }

    /// Parses a configuration type name. `none` is not a declarable type.
    pub fn from_name(name: &str) -> Option<ArgType> {
        match name {
            "int" => Some(ArgType::Int),
            "uint" => Some(ArgType::Uint),
            "long" => Some(ArgType::Long),
            "ulong" => Some(ArgType::Ulong),
            "addr" => Some(ArgType::Addr),
            "str" => Some(ArgType::Str),
            "bytes" => Some(ArgType::Bytes),
            _ => None,
        }
    }
}

impl fmt::Display for ArgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArgTypeError {
    #[error("too many arguments: {0} (at most {MAX_ARGS})")]
    TooManyArgs(usize),
    #[error("unknown argument type code {0}")]
    UnknownArgType(u8),
}

/// Packs argument types one byte per position, position 0 in the lowest byte.
///
/// `ArgType::None` acts as a terminator when decoding, so it should only
/// appear as trailing padding.
pub fn encode_arg_types(types: &[ArgType]) -> Result<u64, ArgTypeError> {
    if types.len() > MAX_ARGS {
        return Err(ArgTypeError::TooManyArgs(types.len()));
    }
    Ok(types.iter().enumerate().fold(0u64, |acc, (i, t)| acc | (u64::from(t.code()) << (8 * i))))
}

/// Inverse of [`encode_arg_types`]. Every byte is validated, including those
/// after the first zero byte, which ends the list.
pub fn decode_arg_types(encoding: u64) -> Result<Vec<ArgType>, ArgTypeError> {
    let bytes = encoding.to_le_bytes();
    let mut types = Vec::new();
    let mut ended = false;
    for b in bytes {
        let t = ArgType::from_code(b).ok_or(ArgTypeError::UnknownArgType(b))?;
        if t == ArgType::None {
            ended = true;
        } else if !ended {
            types.push(t);
        }
    }
    Ok(types)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ArgValue {
    Int(i32),
    Uint(u32),
    Long(i64),
    Ulong(u64),
    Addr(u64),
    Str(String),
    Bytes(Vec<u8>),
}

impl ArgValue {
    pub fn arg_type(&self) -> ArgType {
        match self {
            ArgValue::Int(_) => ArgType::Int,
            ArgValue::Uint(_) => ArgType::Uint,
            ArgValue::Long(_) => ArgType::Long,
            ArgValue::Ulong(_) => ArgType::Ulong,
            ArgValue::Addr(_) => ArgType::Addr,
            ArgValue::Str(_) => ArgType::Str,
            ArgValue::Bytes(_) => ArgType::Bytes,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ArgValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            ArgValue::Bytes(b) => Some(b),
            _ => None,
        }
    }

    /// Unsigned view of `ulong`, `uint` and `addr` values.
    pub fn as_u64(&self) -> Option<u64> {
        match *self {
            ArgValue::Ulong(v) | ArgValue::Addr(v) => Some(v),
            ArgValue::Uint(v) => Some(u64::from(v)),
            _ => None,
        }
    }
}

impl fmt::Display for ArgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgValue::Int(v) => write!(f, "{v}"),
            ArgValue::Uint(v) => write!(f, "{v}"),
            ArgValue::Long(v) => write!(f, "{v}"),
            ArgValue::Ulong(v) => write!(f, "{v}"),
            ArgValue::Addr(v) => write!(f, "0x{v:x}"),
            ArgValue::Str(s) => write!(f, "{s:?}"),
            ArgValue::Bytes(b) => {
                const PREVIEW: usize = 16;
                let shown = &b[..b.len().min(PREVIEW)];
                write!(f, "b\"{}\"", shown.escape_ascii())?;
                if b.len() > PREVIEW {
                    write!(f, "..(+{})", b.len() - PREVIEW)?;
                }
                Ok(())
            }
        }
    }
}

/// Kernel task name: at most 15 bytes followed by NUL padding.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Comm([u8; COMM_LEN]);

impl Comm {
    /// Builds a task name, truncating to 15 bytes and stopping at any NUL.
    pub fn new(name: &str) -> Comm {
        Comm::from_prefix(name.as_bytes())
    }

    fn from_prefix(bytes: &[u8]) -> Comm {
        let mut raw = [0u8; COMM_LEN];
        let len = bytes.iter().take(COMM_LEN - 1).position(|&b| b == 0).unwrap_or(bytes.len().min(COMM_LEN - 1));
        raw[..len].copy_from_slice(&bytes[..len]);
        Comm(raw)
    }

    /// Normalizes a raw kernel buffer: anything after the first NUL is dropped.
    pub fn from_raw(raw: [u8; COMM_LEN]) -> Comm {
        Comm::from_prefix(&raw)
    }

    pub fn raw(&self) -> &[u8; COMM_LEN] {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        let len = self.0.iter().position(|&b| b == 0).unwrap_or(COMM_LEN);
        &self.0[..len]
    }

    pub fn to_string_lossy(&self) -> String {
        String::from_utf8_lossy(self.as_bytes()).into_owned()
    }
}

impl fmt::Debug for Comm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Comm({:?})", self.to_string_lossy())
    }
}

impl fmt::Display for Comm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_string_lossy())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EventContext {
    pub timestamp_ns: u64,
    pub pid: u32,
    pub tid: u32,
    pub ppid: u32,
    pub uid: u32,
    pub comm: Comm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    SyscallEnter {
        nr: u32,
    },
    SyscallExit {
        nr: u32,
        ret: i64,
    },
    Kprobe {
        kprobe_id: u32,
    },
    /// Hit on a user-space probe; the address is the probed instruction.
    UserProbe {
        address: u64,
    },
}

impl EventKind {
    pub fn tag(&self) -> u8 {
        match self {
            EventKind::SyscallEnter { .. } => 1,
            EventKind::SyscallExit { .. } => 2,
            EventKind::Kprobe { .. } => 3,
            EventKind::UserProbe { .. } => 4,
        }
    }

    pub fn syscall_nr(&self) -> Option<u32> {
        match *self {
            EventKind::SyscallEnter { nr } | EventKind::SyscallExit { nr, .. } => Some(nr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub context: EventContext,
    pub kind: EventKind,
    pub args: Vec<ArgValue>,
}

impl EventRecord {
    pub fn new(context: EventContext, kind: EventKind, args: Vec<ArgValue>) -> EventRecord {
        EventRecord { context, kind, args }
    }

    pub fn arg_types(&self) -> Vec<ArgType> {
        self.args.iter().map(ArgValue::arg_type).collect()
    }
}

/// Stable identifiers for kernel functions reported by kprobe handlers.
///
/// The functions the detectors depend on have fixed small ids; any other
/// function gets a 31-bit FNV-1a hash of its name with the top bit set, so
/// producers and consumers agree without sharing a table.
pub mod kprobe {
    pub const SCHED_PROCESS_EXIT: u32 = 1;
    pub const VFS_WRITE: u32 = 2;
    pub const SECURITY_BPRM_CHECK: u32 = 3;
    pub const VFS_WRITEV: u32 = 4;

    pub const WELL_KNOWN: [(u32, &str); 4] = [
        (SCHED_PROCESS_EXIT, "sched_process_exit"),
        (VFS_WRITE, "vfs_write"),
        (SECURITY_BPRM_CHECK, "security_bprm_check"),
        (VFS_WRITEV, "vfs_writev"),
    ];

    pub fn id_for(function: &str) -> u32 {
        if let Some(&(id, _)) = WELL_KNOWN.iter().find(|(_, n)| *n == function) {
            return id;
        }
        let mut hash: u32 = 0x811c_9dc5;
        for b in function.bytes() {
            hash ^= u32::from(b);
            hash = hash.wrapping_mul(0x0100_0193);
        }
        hash | 0x8000_0000
    }

    pub fn well_known_name(id: u32) -> Option<&'static str> {
        WELL_KNOWN.iter().find(|(i, _)| *i == id).map(|(_, n)| *n)
    }
}
