//! Behavioral signatures over the resolved event stream, plus forensic
//! capture of file writes.

pub mod capture;
pub mod dropper;
pub mod privesc;

use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::dispatch::ResolvedEvent;
use crate::event::{kprobe, ArgValue, EventContext, EventKind, EventRecord};

pub use capture::{read_chunks, reconstruct_file, CaptureChunk, CaptureStore, ReconstructError};
pub use dropper::DropperSignature;
pub use privesc::PrivescSignature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MagicKind {
    Elf,
    Dex,
    Archive,
}

impl MagicKind {
    pub const ALL: [MagicKind; 3] = [MagicKind::Elf, MagicKind::Dex, MagicKind::Archive];

    pub fn bytes(self) -> [u8; 4] {
        match self {
            MagicKind::Elf => *b"\x7fELF",
            MagicKind::Dex => *b"dex\n",
            MagicKind::Archive => *b"PK\x03\x04",
        }
    }

    pub fn from_header(header: [u8; 4]) -> Option<MagicKind> {
        MagicKind::ALL.into_iter().find(|m| m.bytes() == header)
    }

    pub fn label(self) -> &'static str {
        match self {
            MagicKind::Elf => "elf",
            MagicKind::Dex => "dex",
            MagicKind::Archive => "archive",
        }
    }
}

impl fmt::Display for MagicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A file as the kernel sees it. Equality is by (device, inode) only.
#[derive(Debug, Clone, Eq)]
pub struct FileIdentity {
    pub device: u64,
    pub inode: u64,
    pub last_known_path: String,
}

impl FileIdentity {
    pub fn key(&self) -> (u64, u64) {
        (self.device, self.inode)
    }
}

impl PartialEq for FileIdentity {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

/// `major:minor` of a kernel `dev_t` (20-bit minor).
pub fn device_name(device: u64) -> String {
    format!("{}:{}", device >> 20, device & 0xf_ffff)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlertKind {
    DroppedFile { magic: MagicKind, file: FileIdentity },
    PrivilegeEscalation { pid: u32, old_uid: u32, new_uid: u32 },
}

impl AlertKind {
    pub fn label(&self) -> &'static str {
        match self {
            AlertKind::DroppedFile { .. } => "DroppedFile",
            AlertKind::PrivilegeEscalation { .. } => "PrivilegeEscalation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alert {
    /// 1-based, in firing order within a run.
    pub seq: u64,
    pub context: EventContext,
    pub kind: AlertKind,
}

impl Alert {
    pub fn details(&self) -> Value {
        match &self.kind {
            AlertKind::DroppedFile { magic, file } => json!({
                "magic": magic.label(),
                "path": file.last_known_path,
                "device": file.device,
                "inode": file.inode,
            }),
            AlertKind::PrivilegeEscalation { pid, old_uid, new_uid } => {
                json!({"pid": pid, "old_uid": old_uid, "new_uid": new_uid})
            }
        }
    }

    /// One JSON-lines record.
    pub fn to_json(&self) -> Value {
        json!({
            "seq": self.seq,
            "ts_ns": self.context.timestamp_ns,
            "kind": self.kind.label(),
            "pid": self.context.pid,
            "tid": self.context.tid,
            "uid": self.context.uid,
            "comm": self.context.comm.to_string_lossy(),
            "details": self.details(),
        })
    }
}

impl fmt::Display for Alert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ALERT #{} {} ", self.seq, self.kind.label())?;
        match &self.kind {
            AlertKind::DroppedFile { magic, file } => write!(
                f,
                "magic={magic} path={} device={} inode={}",
                file.last_known_path,
                device_name(file.device),
                file.inode
            )?,
            AlertKind::PrivilegeEscalation { pid, old_uid, new_uid } => {
                write!(f, "pid={pid} uid {old_uid} -> {new_uid}")?
            }
        }
        write!(
            f,
            " (pid={} tid={} uid={} comm={})",
            self.context.pid, self.context.tid, self.context.uid, self.context.comm
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignatureError {
    #[error("malformed write event: {0}")]
    MalformedWriteEvent(String),
    #[error("capture i/o error in {path}: {message}")]
    Io { path: String, message: String },
}

/// A stateful detector fed every traced event, in order, from the dispatch
/// loop thread.
pub trait Signature {
    fn name(&self) -> &str;

    /// Appends any alerts the event triggers to `alerts`.
    fn on_event(&mut self, event: &ResolvedEvent, alerts: &mut Vec<AlertKind>) -> Result<(), SignatureError>;

    /// Kernel-side checks also see the events of an already traced process
    /// that the filter now rejects, e.g. after its uid changed. Such events
    /// never reach sinks or other signatures.
    fn on_untraced(&mut self, _record: &EventRecord, _alerts: &mut Vec<AlertKind>) -> Result<(), SignatureError> {
        Ok(())
    }

    /// Sees every alert raised by any signature.
    fn on_alert(&mut self, _alert: &Alert) {}

    /// Called once when the run ends, including runs ended by a source error.
    fn finish(&mut self) -> Result<(), SignatureError> {
        Ok(())
    }
}

/// Arguments of a `vfs_write`/`vfs_writev` kprobe event:
/// `[str path, bytes data, ulong offset, ulong device, ulong inode]`, with
/// writev iovecs already flattened into `data`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteArgs<'a> {
    pub path: &'a str,
    pub data: &'a [u8],
    pub offset: u64,
    pub device: u64,
    pub inode: u64,
}

impl WriteArgs<'_> {
    pub fn identity(&self) -> FileIdentity {
        FileIdentity { device: self.device, inode: self.inode, last_known_path: self.path.to_string() }
    }
}

/// `None` for events that are not file writes.
pub fn write_args(e: &EventRecord) -> Option<Result<WriteArgs<'_>, SignatureError>> {
    match e.kind {
        EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE | kprobe::VFS_WRITEV } => {}
        _ => return None,
    }
    Some(match e.args.as_slice() {
        [ArgValue::Str(path), ArgValue::Bytes(data), ArgValue::Ulong(offset), ArgValue::Ulong(device), ArgValue::Ulong(inode)] => {
            if offset.checked_add(data.len() as u64).is_none() {
                Err(SignatureError::MalformedWriteEvent("write extends past the end of the file offset range".into()))
            } else {
                Ok(WriteArgs { path, data, offset: *offset, device: *device, inode: *inode })
            }
        }
        other => Err(SignatureError::MalformedWriteEvent(format!(
            "expected [str, bytes, ulong, ulong, ulong], got [{}]",
            other.iter().map(|a| a.arg_type().name()).collect::<Vec<_>>().join(", ")
        ))),
    })
}
