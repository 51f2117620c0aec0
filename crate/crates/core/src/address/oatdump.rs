//! Parser for the method listing printed by `oatdump`.
//!
//! Only two line shapes matter. A method header:
//!
//! ```text
//!   3: void android.telephony.TelephonyManager.listen(android.telephony.PhoneStateListener, int) (dex_method_idx=42156)
//! ```
//!
//! and, before the next header, the `OatMethodOffsets` attribute:
//!
//! ```text
//!       code_offset: 0x0004a2c0
//! ```
//!
//! Everything else (dex bytecode, frame info, disassembly) is skipped. A
//! header with no `code_offset` line is reported rather than guessed at.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::event::ArgType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OatMethodRecord {
    pub class_name: String,
    pub method_name: String,
    /// Dex descriptor, e.g. `(Landroid/telephony/PhoneStateListener;I)V`.
    pub signature: String,
    /// Offset of the compiled code; 0 when the method was not compiled.
    pub code_offset: u64,
    pub arg_types: Vec<ArgType>,
}

impl OatMethodRecord {
    pub fn is_compiled(&self) -> bool {
        self.code_offset != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OatdumpError {
    #[error("malformed method entry at line {line_no}: {reason}")]
    MalformedMethodEntry { line_no: usize, reason: String },
    #[error("unsupported type in method signature: {0}")]
    UnsupportedDescriptor(String),
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*\d+: (\S+) (\S+)\.([^.\s(]+)\(([^)]*)\) \(dex_method_idx=\d+\)\s*$").expect("valid regex")
    })
}

fn code_offset_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*code_offset: 0x([0-9a-fA-F]+)\s*$").expect("valid regex"))
}

struct Pending {
    line_no: usize,
    class_name: String,
    method_name: String,
    signature: String,
    arg_types: Vec<ArgType>,
}

/// Extracts one record per method header, in output order.
pub fn parse_oatdump(text: &str) -> Result<Vec<OatMethodRecord>, OatdumpError> {
    let mut records = Vec::new();
    let mut pending: Option<Pending> = None;

    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.contains("(dex_method_idx=") {
            if let Some(p) = pending.take() {
                return Err(missing_offset(p.line_no));
            }
            let caps = header_re().captures(line).ok_or_else(|| OatdumpError::MalformedMethodEntry {
                line_no,
                reason: "unrecognized method header".into(),
            })?;
            let params: Vec<&str> =
                if caps[4].trim().is_empty() { Vec::new() } else { caps[4].split(',').map(str::trim).collect() };
            let mut descriptor = String::from("(");
            let mut arg_types = Vec::with_capacity(params.len());
            for p in &params {
                descriptor.push_str(&java_descriptor(p)?);
                arg_types.push(arg_type_for(p));
            }
            descriptor.push(')');
            descriptor.push_str(&java_descriptor(&caps[1])?);
            pending = Some(Pending {
                line_no,
                class_name: caps[2].to_string(),
                method_name: caps[3].to_string(),
                signature: descriptor,
                arg_types,
            });
        } else if let Some(caps) = code_offset_re().captures(line) {
            if let Some(p) = pending.take() {
                let code_offset = u64::from_str_radix(&caps[1], 16)
                    .map_err(|_| OatdumpError::MalformedMethodEntry { line_no, reason: "bad code_offset".into() })?;
                records.push(OatMethodRecord {
                    class_name: p.class_name,
                    method_name: p.method_name,
                    signature: p.signature,
                    code_offset,
                    arg_types: p.arg_types,
                });
            }
        }
    }
    if let Some(p) = pending {
        return Err(missing_offset(p.line_no));
    }
    Ok(records)
}

fn missing_offset(line_no: usize) -> OatdumpError {
    OatdumpError::MalformedMethodEntry { line_no, reason: "no code_offset before next entry".into() }
}

/// The oat file an oatdump listing describes, from its `LOCATION:` block.
pub fn oatdump_location(text: &str) -> Option<String> {
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        if line.trim() == "LOCATION:" {
            return lines.next().map(|l| l.trim().to_string()).filter(|l| !l.is_empty());
        }
    }
    None
}

const PRIMITIVES: [(&str, &str); 9] = [
    ("boolean", "Z"),
    ("byte", "B"),
    ("char", "C"),
    ("short", "S"),
    ("int", "I"),
    ("long", "J"),
    ("float", "F"),
    ("double", "D"),
    ("void", "V"),
];

fn java_descriptor(pretty: &str) -> Result<String, OatdumpError> {
    let mut base = pretty;
    let mut dims = 0;
    while let Some(inner) = base.strip_suffix("[]") {
        base = inner;
        dims += 1;
    }
    let valid_ident = !base.is_empty()
        && !base.starts_with('.')
        && !base.ends_with('.')
        && base.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.'));
    if !valid_ident || (base == "void" && dims > 0) {
        return Err(OatdumpError::UnsupportedDescriptor(pretty.to_string()));
    }
    let mut d = "[".repeat(dims);
    match PRIMITIVES.iter().find(|(name, _)| *name == base) {
        Some((_, code)) => d.push_str(code),
        None => {
            d.push('L');
            d.push_str(&base.replace('.', "/"));
            d.push(';');
        }
    }
    Ok(d)
}

/// Argument type a probe handler reads for a Java parameter. Object
/// contents are never decoded, so references and arrays are plain
/// addresses; floating point values are taken as their raw bits.
fn arg_type_for(pretty: &str) -> ArgType {
    match pretty {
        "byte" | "short" | "int" => ArgType::Int,
        "boolean" | "char" | "float" => ArgType::Uint,
        "long" => ArgType::Long,
        "double" => ArgType::Ulong,
        _ => ArgType::Addr,
    }
}
