//! Dropped-payload detection: a file whose first four bytes become an ELF,
//! dex or archive magic.

use std::collections::HashMap;

use super::{write_args, AlertKind, MagicKind, Signature, SignatureError};
use crate::dispatch::ResolvedEvent;

const HEADER: u64 = 4;

#[derive(Debug, Default, Clone, Copy)]
struct Header {
    bytes: [u8; 4],
    known: u8,
    alerted: bool,
}

/// Keeps a shadow of each file's first four bytes, filled in by however
/// many writes it takes, and alerts once per file when it matches.
#[derive(Debug, Default)]
pub struct DropperSignature {
    headers: HashMap<(u64, u64), Header>,
}

impl DropperSignature {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Signature for DropperSignature {
    fn name(&self) -> &str {
        "dropper"
    }

    fn on_event(&mut self, event: &ResolvedEvent, alerts: &mut Vec<AlertKind>) -> Result<(), SignatureError> {
        let w = match write_args(&event.record) {
            None => return Ok(()),
            Some(w) => w?,
        };
        if w.offset >= HEADER || w.data.is_empty() {
            return Ok(());
        }
        let h = self.headers.entry((w.device, w.inode)).or_default();
        let end = (w.offset + w.data.len() as u64).min(HEADER);
        for pos in w.offset..end {
            h.bytes[pos as usize] = w.data[(pos - w.offset) as usize];
            h.known |= 1 << pos;
        }
        if h.known == 0b1111 && !h.alerted {
            if let Some(magic) = MagicKind::from_header(h.bytes) {
                h.alerted = true;
                alerts.push(AlertKind::DroppedFile { magic, file: w.identity() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::Layer;
    use crate::event::{kprobe, ArgValue, EventContext, EventKind, EventRecord};

    fn write(data: &[u8], offset: u64, inode: u64) -> ResolvedEvent {
        ResolvedEvent {
            record: EventRecord::new(
                EventContext::default(),
                EventKind::Kprobe { kprobe_id: kprobe::VFS_WRITE },
                vec![
                    ArgValue::Str("/data/x".into()),
                    ArgValue::Bytes(data.to_vec()),
                    ArgValue::Ulong(offset),
                    ArgValue::Ulong(7),
                    ArgValue::Ulong(inode),
                ],
            ),
            display_name: "vfs_write".into(),
            layer: Layer::Kernel,
        }
    }

    fn feed(sig: &mut DropperSignature, e: &ResolvedEvent) -> Vec<AlertKind> {
        let mut out = Vec::new();
        sig.on_event(e, &mut out).unwrap();
        out
    }

    #[test]
    fn dex_at_offset_zero() {
        let mut sig = DropperSignature::new();
        let alerts = feed(&mut sig, &write(b"dex\n035\0", 0, 1));
        assert!(
            matches!(&alerts[..], [AlertKind::DroppedFile { magic: MagicKind::Dex, file }] if file.inode == 1 && file.last_known_path == "/data/x")
        );
        // at most once per file
        assert!(feed(&mut sig, &write(b"dex\n", 0, 1)).is_empty());
    }

    #[test]
    fn magic_past_header_is_ignored() {
        let mut sig = DropperSignature::new();
        assert!(feed(&mut sig, &write(b"dex\n....", 8, 1)).is_empty());
    }

    #[test]
    fn split_header() {
        let mut sig = DropperSignature::new();
        assert!(feed(&mut sig, &write(b"PK", 0, 2)).is_empty());
        let alerts = feed(&mut sig, &write(b"\x03\x04rest", 2, 2));
        assert!(matches!(&alerts[..], [AlertKind::DroppedFile { magic: MagicKind::Archive, .. }]));
    }

    #[test]
    fn later_rewrite_completes_magic() {
        let mut sig = DropperSignature::new();
        assert!(feed(&mut sig, &write(b"XELF", 0, 3)).is_empty());
        let alerts = feed(&mut sig, &write(b"\x7f", 0, 3));
        assert!(matches!(&alerts[..], [AlertKind::DroppedFile { magic: MagicKind::Elf, .. }]));
    }

    #[test]
    fn malformed_write() {
        let mut sig = DropperSignature::new();
        let mut e = write(b"dex\n", 0, 1);
        e.record.args.pop();
        assert!(matches!(sig.on_event(&e, &mut Vec::new()), Err(SignatureError::MalformedWriteEvent(_))));
    }
}
