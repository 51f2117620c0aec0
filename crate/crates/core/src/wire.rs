//! Binary message format emitted by the probe handlers.
//!
//! All integers are little-endian:
//!
//! ```text
//! magic       u32   0x42504644 ("DFPB" on the wire)
//! timestamp   u64   monotonic ns
//! pid, tid    u32, u32
//! ppid, uid   u32, u32
//! comm        [u8; 16]  NUL padded
//! kind_tag    u8    1 enter, 2 exit, 3 kprobe, 4 user probe
//! payload           enter: u32 nr | exit: u32 nr, i64 ret
//!                   kprobe: u32 id | user probe: u64 address
//! argnum      u8
//! args              per arg: u8 type code, then
//!                   int/uint: 4 bytes, long/ulong/addr: 8 bytes,
//!                   str/bytes: u32 length + payload (length <= 4096)
//! ```

use thiserror::Error;

use crate::event::{ArgType, ArgValue, Comm, EventContext, EventKind, EventRecord, COMM_LEN, MAX_ARGS, MAX_ARG_BYTES};

pub const EVENT_MAGIC: u32 = 0x4250_4644;

/// Size of the fixed header (magic + context).
pub const HEADER_LEN: usize = 4 + 8 + 4 * 4 + COMM_LEN;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic 0x{0:08x}")]
    BadMagic(u32),
    #[error("truncated message: expected at least {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("unknown event kind tag {0}")]
    UnknownKindTag(u8),
    #[error("unknown argument type code {0}")]
    UnknownArgType(u8),
    #[error("argument count {0} exceeds {MAX_ARGS}")]
    TooManyArgs(u8),
    #[error("argument length {0} exceeds {MAX_ARG_BYTES}")]
    ArgTooLong(u32),
    #[error("user probe with zero address")]
    ZeroProbeAddress,
    #[error("{0} trailing bytes after message")]
    TrailingBytes(usize),
}

/// Encodes one record. Arguments past the eighth and `str`/`bytes` payloads
/// past 4096 bytes are cut, as a probe handler would.
pub fn encode_event(e: &EventRecord) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    encode_event_into(e, &mut out);
    out
}

pub fn encode_event_into(e: &EventRecord, out: &mut Vec<u8>) {
    let c = &e.context;
    out.extend_from_slice(&EVENT_MAGIC.to_le_bytes());
    out.extend_from_slice(&c.timestamp_ns.to_le_bytes());
    out.extend_from_slice(&c.pid.to_le_bytes());
    out.extend_from_slice(&c.tid.to_le_bytes());
    out.extend_from_slice(&c.ppid.to_le_bytes());
    out.extend_from_slice(&c.uid.to_le_bytes());
    out.extend_from_slice(c.comm.raw());
    out.push(e.kind.tag());
    match e.kind {
        EventKind::SyscallEnter { nr } => out.extend_from_slice(&nr.to_le_bytes()),
        EventKind::SyscallExit { nr, ret } => {
            out.extend_from_slice(&nr.to_le_bytes());
            out.extend_from_slice(&ret.to_le_bytes());
        }
        EventKind::Kprobe { kprobe_id } => out.extend_from_slice(&kprobe_id.to_le_bytes()),
        EventKind::UserProbe { address } => out.extend_from_slice(&address.to_le_bytes()),
    }
    let args = &e.args[..e.args.len().min(MAX_ARGS)];
    out.push(args.len() as u8);
    for arg in args {
        out.push(arg.arg_type().code());
        match arg {
            ArgValue::Int(v) => out.extend_from_slice(&v.to_le_bytes()),
            ArgValue::Uint(v) => out.extend_from_slice(&v.to_le_bytes()),
            ArgValue::Long(v) => out.extend_from_slice(&v.to_le_bytes()),
            ArgValue::Ulong(v) | ArgValue::Addr(v) => out.extend_from_slice(&v.to_le_bytes()),
            ArgValue::Str(s) => put_blob(out, truncate_str(s, MAX_ARG_BYTES).as_bytes()),
            ArgValue::Bytes(b) => put_blob(out, &b[..b.len().min(MAX_ARG_BYTES)]),
        }
    }
}

fn put_blob(out: &mut Vec<u8>, data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(data);
}

fn truncate_str(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

/// Decodes exactly one message; the buffer must contain nothing else.
pub fn decode_event(b: &[u8]) -> Result<EventRecord, DecodeError> {
    let (record, used) = decode_prefix(b)?;
    if used != b.len() {
        return Err(DecodeError::TrailingBytes(b.len() - used));
    }
    Ok(record)
}

/// Decodes one message from the front of `b`, returning it with the number
/// of bytes consumed.
pub fn decode_prefix(b: &[u8]) -> Result<(EventRecord, usize), DecodeError> {
    let mut r = Reader { buf: b, pos: 0 };
    let magic = r.u32()?;
    if magic != EVENT_MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let timestamp_ns = r.u64()?;
    let pid = r.u32()?;
    let tid = r.u32()?;
    let ppid = r.u32()?;
    let uid = r.u32()?;
    let comm = Comm::from_raw(r.array::<COMM_LEN>()?);
    let context = EventContext { timestamp_ns, pid, tid, ppid, uid, comm };

    let kind = match r.u8()? {
        1 => EventKind::SyscallEnter { nr: r.u32()? },
        2 => EventKind::SyscallExit { nr: r.u32()?, ret: r.i64()? },
        3 => EventKind::Kprobe { kprobe_id: r.u32()? },
        4 => {
            let address = r.u64()?;
            if address == 0 {
                return Err(DecodeError::ZeroProbeAddress);
            }
            EventKind::UserProbe { address }
        }
        tag => return Err(DecodeError::UnknownKindTag(tag)),
    };

    let argnum = r.u8()?;
    if argnum as usize > MAX_ARGS {
        return Err(DecodeError::TooManyArgs(argnum));
    }
    let mut args = Vec::with_capacity(argnum as usize);
    for _ in 0..argnum {
        let code = r.u8()?;
        let value = match ArgType::from_code(code) {
            Some(ArgType::Int) => ArgValue::Int(r.u32()? as i32),
            Some(ArgType::Uint) => ArgValue::Uint(r.u32()?),
            Some(ArgType::Long) => ArgValue::Long(r.i64()?),
            Some(ArgType::Ulong) => ArgValue::Ulong(r.u64()?),
            Some(ArgType::Addr) => ArgValue::Addr(r.u64()?),
            Some(ArgType::Str) => ArgValue::Str(String::from_utf8_lossy(r.blob()?).into_owned()),
            Some(ArgType::Bytes) => ArgValue::Bytes(r.blob()?.to_vec()),
            Some(ArgType::None) | None => return Err(DecodeError::UnknownArgType(code)),
        };
        args.push(value);
    }
    Ok((EventRecord { context, kind, args }, r.pos))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(DecodeError::Truncated { expected: end, got: self.buf.len() });
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn i64(&mut self) -> Result<i64, DecodeError> {
        Ok(i64::from_le_bytes(self.array()?))
    }

    fn blob(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32()?;
        if len as usize > MAX_ARG_BYTES {
            return Err(DecodeError::ArgTooLong(len));
        }
        self.take(len as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exit_event() -> EventRecord {
        EventRecord::new(EventContext::default(), EventKind::SyscallExit { nr: 221, ret: 0 }, vec![])
    }

    #[test]
    fn minimal_exit_message_layout() {
        let bytes = encode_event(&exit_event());
        assert_eq!(&bytes[..4], &[0x44, 0x46, 0x50, 0x42]);
        // header 44 + tag 1 + (nr 4 + ret 8) + argnum 1
        assert_eq!(bytes.len(), 58);
        assert_eq!(bytes[44], 2);
        assert_eq!(&bytes[45..49], &221u32.to_le_bytes());
        assert_eq!(bytes[57], 0);
    }

    #[test]
    fn golden_user_probe_with_string_arg() {
        let ctx = EventContext {
            timestamp_ns: 0x0102_0304_0506_0708,
            pid: 4242,
            tid: 4243,
            ppid: 600,
            uid: 10050,
            comm: Comm::new("ufD.wykyx.vlhvh"),
        };
        let e = EventRecord::new(
            ctx,
            EventKind::UserProbe { address: 0x7b2c_4a2f40 },
            vec![ArgValue::Str("libtest.so".into())],
        );
        let mut golden: Vec<u8> = vec![0x44, 0x46, 0x50, 0x42];
        golden.extend([0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01]);
        golden.extend([0x92, 0x10, 0x00, 0x00]); // 4242
        golden.extend([0x93, 0x10, 0x00, 0x00]); // 4243
        golden.extend([0x58, 0x02, 0x00, 0x00]); // 600
        golden.extend([0x42, 0x27, 0x00, 0x00]); // 10050
        golden.extend(b"ufD.wykyx.vlhvh\0");
        golden.push(0x04);
        golden.extend([0x40, 0x2f, 0x4a, 0x2c, 0x7b, 0x00, 0x00, 0x00]);
        golden.push(0x01); // argnum
        golden.push(0x06); // str
        golden.extend([0x0a, 0x00, 0x00, 0x00]);
        golden.extend(b"libtest.so");
        assert_eq!(encode_event(&e), golden);
        assert_eq!(decode_event(&golden).unwrap(), e);
    }

    #[test]
    fn decode_errors() {
        let bytes = encode_event(&exit_event());
        assert!(matches!(decode_event(&bytes[..3]), Err(DecodeError::Truncated { .. })));

        let mut bad = bytes.clone();
        bad[44] = 9;
        assert_eq!(decode_event(&bad), Err(DecodeError::UnknownKindTag(9)));

        let mut bad = bytes.clone();
        bad[0] = 0;
        assert!(matches!(decode_event(&bad), Err(DecodeError::BadMagic(_))));

        let mut long = bytes.clone();
        long.push(0);
        assert_eq!(decode_event(&long), Err(DecodeError::TrailingBytes(1)));
    }

    #[test]
    fn unknown_arg_type_code_rejected() {
        let e = EventRecord::new(EventContext::default(), EventKind::Kprobe { kprobe_id: 2 }, vec![ArgValue::Int(1)]);
        let mut bytes = encode_event(&e);
        let code_pos = bytes.len() - 5;
        assert_eq!(bytes[code_pos], 1);
        bytes[code_pos] = 0;
        assert_eq!(decode_event(&bytes), Err(DecodeError::UnknownArgType(0)));
        bytes[code_pos] = 8;
        assert_eq!(decode_event(&bytes), Err(DecodeError::UnknownArgType(8)));
    }

    #[test]
    fn long_comm_round_trips_as_truncated_name() {
        let ctx = EventContext { comm: Comm::new("com.android.systemui.extra"), ..Default::default() };
        let e = EventRecord::new(ctx, EventKind::SyscallEnter { nr: 56 }, vec![]);
        let back = decode_event(&encode_event(&e)).unwrap();
        assert_eq!(back.context.comm.as_bytes(), b"com.android.sys");
    }

    #[test]
    fn oversized_blob_is_capped() {
        let e = EventRecord::new(
            EventContext::default(),
            EventKind::Kprobe { kprobe_id: 2 },
            vec![ArgValue::Bytes(vec![7; MAX_ARG_BYTES + 10])],
        );
        let back = decode_event(&encode_event(&e)).unwrap();
        assert_eq!(back.args[0].as_bytes().unwrap().len(), MAX_ARG_BYTES);
    }

    #[test]
    fn zero_user_probe_address_rejected() {
        let e = EventRecord::new(EventContext::default(), EventKind::UserProbe { address: 0 }, vec![]);
        assert_eq!(decode_event(&encode_event(&e)), Err(DecodeError::ZeroProbeAddress));
    }
}
