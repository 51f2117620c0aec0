//! Replay files: `BPFRPLY1`, then frames of `u32` length + one wire message.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{EventSource, SourceError};
use crate::event::EventRecord;
use crate::wire::{decode_event, encode_event_into};

pub const REPLAY_MAGIC: &[u8; 8] = b"BPFRPLY1";

const BATCH: usize = 1024;
// Far above any valid message (8 args of 4 KiB each plus headers).
const MAX_FRAME: u32 = 1 << 20;

pub struct ReplayReader<R> {
    inner: R,
    offset: u64,
    started: bool,
    done: bool,
    last_ts: u64,
    pending_error: Option<SourceError>,
    frame: Vec<u8>,
}

pub fn open_replay(path: impl AsRef<Path>) -> Result<ReplayReader<BufReader<File>>, SourceError> {
    let file = File::open(path)?;
    Ok(ReplayReader::new(BufReader::with_capacity(1 << 16, file)))
}

impl<R: Read> ReplayReader<R> {
    pub fn new(inner: R) -> Self {
        ReplayReader {
            inner,
            offset: 0,
            started: false,
            done: false,
            last_ts: 0,
            pending_error: None,
            frame: Vec::new(),
        }
    }

    fn format_error(&mut self, offset: u64, reason: impl Into<String>) -> SourceError {
        self.done = true;
        SourceError::FormatError { offset, reason: reason.into() }
    }

    /// Fills `buf` completely; `Ok(false)` on a clean EOF before the first byte.
    fn read_exact_or_eof(&mut self, buf: &mut [u8]) -> Result<bool, SourceError> {
        let mut filled = 0;
        while filled < buf.len() {
            match self.inner.read(&mut buf[filled..]) {
                Ok(0) if filled == 0 => return Ok(false),
                Ok(0) => {
                    let at = self.offset;
                    return Err(self.format_error(at, format!("truncated: {filled} of {} bytes", buf.len())));
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => {
                    self.done = true;
                    return Err(e.into());
                }
            }
        }
        Ok(true)
    }

    fn read_header(&mut self) -> Result<bool, SourceError> {
        let mut magic = [0u8; 8];
        if !self.read_exact_or_eof(&mut magic)? {
            return Ok(false);
        }
        if &magic != REPLAY_MAGIC {
            return Err(self.format_error(0, "missing BPFRPLY1 header"));
        }
        self.offset = 8;
        Ok(true)
    }

    fn read_frame(&mut self) -> Result<Option<EventRecord>, SourceError> {
        let start = self.offset;
        let mut len = [0u8; 4];
        if !self.read_exact_or_eof(&mut len)? {
            return Ok(None);
        }
        let len = u32::from_le_bytes(len);
        if len > MAX_FRAME {
            return Err(self.format_error(start, format!("frame length {len} too large")));
        }
        let mut frame = std::mem::take(&mut self.frame);
        frame.resize(len as usize, 0);
        let complete = self.read_exact_or_eof(&mut frame);
        let result = match complete {
            Ok(true) => decode_event(&frame).map_err(|e| self.format_error(start, e.to_string())),
            Ok(false) if len == 0 => Err(self.format_error(start, "empty frame")),
            Ok(false) => Err(self.format_error(start, "truncated frame")),
            Err(e) => Err(e),
        };
        self.frame = frame;
        let record = result?;
        if record.context.timestamp_ns < self.last_ts {
            return Err(self.format_error(start, "timestamp goes backwards"));
        }
        self.last_ts = record.context.timestamp_ns;
        self.offset += 4 + len as u64;
        Ok(Some(record))
    }
}

impl<R: Read> EventSource for ReplayReader<R> {
    fn next_batch(&mut self) -> Result<Option<Vec<EventRecord>>, SourceError> {
        if let Some(e) = self.pending_error.take() {
            return Err(e);
        }
        if self.done {
            return Ok(None);
        }
        if !self.started {
            self.started = true;
            if !self.read_header()? {
                self.done = true;
                return Ok(None);
            }
        }
        let mut batch = Vec::with_capacity(BATCH);
        while batch.len() < BATCH {
            match self.read_frame() {
                Ok(Some(r)) => batch.push(r),
                Ok(None) => {
                    self.done = true;
                    break;
                }
                // deliver what decoded cleanly first
                Err(e) if !batch.is_empty() => {
                    self.pending_error = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(if batch.is_empty() { None } else { Some(batch) })
    }
}

pub struct ReplayWriter<W: Write> {
    inner: W,
    buf: Vec<u8>,
}

impl<W: Write> ReplayWriter<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        inner.write_all(REPLAY_MAGIC)?;
        Ok(ReplayWriter { inner, buf: Vec::new() })
    }

    pub fn write_event(&mut self, e: &EventRecord) -> io::Result<()> {
        self.buf.clear();
        self.buf.extend_from_slice(&[0; 4]);
        encode_event_into(e, &mut self.buf);
        let len = (self.buf.len() - 4) as u32;
        self.buf[..4].copy_from_slice(&len.to_le_bytes());
        self.inner.write_all(&self.buf)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Writes `events` to a new replay file at `path`.
pub fn write_replay<'a>(path: impl AsRef<Path>, events: impl IntoIterator<Item = &'a EventRecord>) -> io::Result<()> {
    let mut w = ReplayWriter::new(BufWriter::new(File::create(path)?))?;
    for e in events {
        w.write_event(e)?;
    }
    w.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{ArgValue, Comm, EventContext, EventKind};
    use crate::source::collect_events;

    fn ev(ts: u64) -> EventRecord {
        EventRecord::new(
            EventContext { timestamp_ns: ts, pid: 7, tid: 7, ppid: 1, uid: 10050, comm: Comm::new("app") },
            EventKind::SyscallEnter { nr: 56 },
            vec![ArgValue::Str("/data/x".into())],
        )
    }

    fn encode_all(events: &[EventRecord]) -> Vec<u8> {
        let mut w = ReplayWriter::new(Vec::new()).unwrap();
        for e in events {
            w.write_event(e).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn three_events_then_end() {
        let events = vec![ev(1), ev(2), ev(3)];
        let bytes = encode_all(&events);
        let mut r = ReplayReader::new(&bytes[..]);
        assert_eq!(collect_events(&mut r).unwrap(), events);
        assert!(r.next_batch().unwrap().is_none());
    }

    #[test]
    fn empty_file_is_end_of_stream() {
        let mut r = ReplayReader::new(&[][..]);
        assert!(r.next_batch().unwrap().is_none());
        let mut r = ReplayReader::new(&REPLAY_MAGIC[..]);
        assert!(r.next_batch().unwrap().is_none());
    }

    #[test]
    fn valid_event_then_garbage() {
        let mut bytes = encode_all(&[ev(1)]);
        let good_len = bytes.len() as u64;
        bytes.extend_from_slice(&[9, 0, 0, 0, 0xde, 0xad]);
        let mut r = ReplayReader::new(&bytes[..]);
        assert_eq!(r.next_batch().unwrap().unwrap().len(), 1);
        match r.next_batch() {
            Err(SourceError::FormatError { offset, .. }) => assert_eq!(offset, good_len),
            other => panic!("{other:?}"),
        }
        assert!(r.next_batch().unwrap().is_none());
    }

    #[test]
    fn bad_header_and_bad_message() {
        let mut r = ReplayReader::new(&b"NOTAREPLAY"[..]);
        assert!(matches!(r.next_batch(), Err(SourceError::FormatError { offset: 0, .. })));

        let mut bytes = REPLAY_MAGIC.to_vec();
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 4]);
        let mut r = ReplayReader::new(&bytes[..]);
        assert!(matches!(r.next_batch(), Err(SourceError::FormatError { offset: 8, .. })));
    }

    #[test]
    fn timestamps_must_not_go_backwards() {
        let bytes = encode_all(&[ev(5), ev(4)]);
        let mut r = ReplayReader::new(&bytes[..]);
        assert_eq!(r.next_batch().unwrap().unwrap().len(), 1);
        assert!(matches!(r.next_batch(), Err(SourceError::FormatError { .. })));
    }
}
