//! Forensic capture: every write made by a traced process is appended to a
//! per-file log so the file can be rebuilt after the run.
//!
//! Layout under the capture directory, one subdirectory per file identity:
//!
//! ```text
//! <device>_<inode>/chunks.log        u64 offset, u32 length, data; repeated
//! <device>_<inode>/reconstructed.bin written when the run finishes
//! <device>_<inode>/manifest.json     path, sizes and linked alert numbers
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use super::{write_args, Alert, AlertKind, FileIdentity, Signature, SignatureError};
use crate::dispatch::ResolvedEvent;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptureChunk {
    pub file: FileIdentity,
    pub offset: u64,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReconstructError {
    #[error("chunks belong to different files: {0}_{1} and {2}_{3}")]
    MixedIdentity(u64, u64, u64, u64),
    #[error("file would exceed addressable size")]
    TooLarge,
}

/// Replays writes in arrival order onto a zeroed buffer: later writes win
/// where they overlap, never-written gaps stay zero.
pub fn reconstruct_file(chunks: &[CaptureChunk]) -> Result<Vec<u8>, ReconstructError> {
    let Some(first) = chunks.first() else {
        return Ok(Vec::new());
    };
    let mut len = 0usize;
    for c in chunks {
        if c.file.key() != first.file.key() {
            return Err(ReconstructError::MixedIdentity(
                first.file.device,
                first.file.inode,
                c.file.device,
                c.file.inode,
            ));
        }
        let end = usize::try_from(c.offset)
            .ok()
            .and_then(|o| o.checked_add(c.data.len()))
            .ok_or(ReconstructError::TooLarge)?;
        len = len.max(end);
    }
    let mut out = vec![0u8; len];
    for c in chunks {
        let at = c.offset as usize;
        out[at..at + c.data.len()].copy_from_slice(&c.data);
    }
    Ok(out)
}

/// Reads back a `chunks.log` file.
pub fn read_chunks(path: &Path, file: &FileIdentity) -> io::Result<Vec<CaptureChunk>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut chunks = Vec::new();
    let mut rest = &bytes[..];
    while !rest.is_empty() {
        if rest.len() < 12 {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated chunk header"));
        }
        let offset = u64::from_le_bytes(rest[..8].try_into().expect("8 bytes"));
        let len = u32::from_le_bytes(rest[8..12].try_into().expect("4 bytes")) as usize;
        rest = &rest[12..];
        if rest.len() < len {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "truncated chunk data"));
        }
        chunks.push(CaptureChunk { file: file.clone(), offset, data: rest[..len].to_vec() });
        rest = &rest[len..];
    }
    Ok(chunks)
}

#[derive(Debug)]
struct Captured {
    file: FileIdentity,
    chunks: u64,
    bytes: u64,
    alerts: Vec<u64>,
}

// Enough for the files a few apps write concurrently without running into
// descriptor limits on busy streams.
const MAX_OPEN: usize = 64;

/// Writes chunk logs under a capture directory; rebuilds every captured
/// file when the run finishes.
#[derive(Debug)]
pub struct CaptureStore {
    dir: PathBuf,
    files: BTreeMap<(u64, u64), Captured>,
    open: HashMap<(u64, u64), BufWriter<File>>,
}

impl CaptureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, SignatureError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(CaptureStore { dir, files: BTreeMap::new(), open: HashMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file_dir(&self, device: u64, inode: u64) -> PathBuf {
        self.dir.join(format!("{device}_{inode}"))
    }

    /// Identities captured so far, in (device, inode) order.
    pub fn files(&self) -> impl Iterator<Item = &FileIdentity> {
        self.files.values().map(|c| &c.file)
    }

    /// Persists the write carried by `event`. Zero-length writes and
    /// non-write events yield `None`.
    pub fn capture_write(&mut self, event: &ResolvedEvent) -> Result<Option<CaptureChunk>, SignatureError> {
        let w = match write_args(&event.record) {
            None => return Ok(None),
            Some(w) => w?,
        };
        if w.data.is_empty() {
            return Ok(None);
        }
        let key = (w.device, w.inode);
        // logs left by an earlier run are replaced, not appended to
        let fresh = !self.files.contains_key(&key);
        let entry = self.files.entry(key).or_insert_with(|| Captured {
            file: w.identity(),
            chunks: 0,
            bytes: 0,
            alerts: Vec::new(),
        });
        entry.file.last_known_path = w.path.to_string();
        entry.chunks += 1;
        entry.bytes += w.data.len() as u64;

        if !self.open.contains_key(&key) {
            if self.open.len() >= MAX_OPEN {
                self.close_all()?;
            }
            let dir = self.file_dir(w.device, w.inode);
            fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
            let log = dir.join("chunks.log");
            let f = if fresh { File::create(&log) } else { OpenOptions::new().append(true).open(&log) }
                .map_err(|e| io_error(&log, e))?;
            self.open.insert(key, BufWriter::new(f));
        }
        let out = self.open.get_mut(&key).expect("just opened");
        let mut frame = Vec::with_capacity(12);
        frame.extend_from_slice(&w.offset.to_le_bytes());
        frame.extend_from_slice(&(w.data.len() as u32).to_le_bytes());
        out.write_all(&frame).and_then(|_| out.write_all(w.data)).map_err(|e| io_error(&self.dir, e))?;
        Ok(Some(CaptureChunk { file: w.identity(), offset: w.offset, data: w.data.to_vec() }))
    }

    fn close_all(&mut self) -> Result<(), SignatureError> {
        for (_, mut w) in self.open.drain() {
            w.flush().map_err(|e| io_error(&self.dir, e))?;
        }
        Ok(())
    }

    /// Flushes the logs and writes `reconstructed.bin` and `manifest.json`
    /// for every captured file.
    pub fn finalize(&mut self) -> Result<(), SignatureError> {
        self.close_all()?;
        for c in self.files.values() {
            let dir = self.dir.join(format!("{}_{}", c.file.device, c.file.inode));
            let log = dir.join("chunks.log");
            let chunks = read_chunks(&log, &c.file).map_err(|e| io_error(&log, e))?;
            let data = reconstruct_file(&chunks)
                .map_err(|e| SignatureError::Io { path: log.display().to_string(), message: e.to_string() })?;
            let bin = dir.join("reconstructed.bin");
            fs::write(&bin, &data).map_err(|e| io_error(&bin, e))?;
            let manifest = json!({
                "device": c.file.device,
                "inode": c.file.inode,
                "last_known_path": c.file.last_known_path,
                "chunks": c.chunks,
                "bytes_written": c.bytes,
                "size": data.len(),
                "alerts": c.alerts,
            });
            let path = dir.join("manifest.json");
            let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
            fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        }
        Ok(())
    }
}

fn io_error(path: &Path, e: io::Error) -> SignatureError {
    SignatureError::Io { path: path.display().to_string(), message: e.to_string() }
}

impl Signature for CaptureStore {
    fn name(&self) -> &str {
        "capture"
    }

    fn on_event(&mut self, event: &ResolvedEvent, _alerts: &mut Vec<AlertKind>) -> Result<(), SignatureError> {
        self.capture_write(event).map(|_| ())
    }

    fn on_alert(&mut self, alert: &Alert) {
        if let AlertKind::DroppedFile { file, .. } = &alert.kind {
            if let Some(c) = self.files.get_mut(&file.key()) {
                c.alerts.push(alert.seq);
            }
        }
    }

    fn finish(&mut self) -> Result<(), SignatureError> {
        self.finalize()
    }
}
