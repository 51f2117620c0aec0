use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::elf::{basename, SymbolError, SymbolReader};
use super::oatdump::OatMethodRecord;
use crate::config::{HookSpec, HooksConfig};
use crate::event::{decode_arg_types, encode_arg_types, MAX_ARGS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProbeKind {
    ApiCall,
    NativeFunction,
}

impl ProbeKind {
    pub fn label(self) -> &'static str {
        match self {
            ProbeKind::ApiCall => "api",
            ProbeKind::NativeFunction => "native",
        }
    }

    fn from_label(s: &str) -> Option<ProbeKind> {
        match s {
            "api" => Some(ProbeKind::ApiCall),
            "native" => Some(ProbeKind::NativeFunction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedProbe {
    pub kind: ProbeKind,
    pub address: u64,
    /// Mapped image the probe lives in (oat file or shared library).
    pub image_path: String,
    /// Offset within the image's executable mapping.
    pub offset: u64,
    pub display_name: String,
    pub arg_encoding: u64,
}

/// Compiled methods of one oat image, as listed by oatdump.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OatImage {
    pub path: String,
    pub methods: Vec<OatMethodRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressEntry {
    /// More than one name when distinct functions share compiled code.
    pub names: Vec<String>,
    pub kind: ProbeKind,
    pub arg_encoding: u64,
}

impl AddressEntry {
    pub fn display_name(&self) -> String {
        self.names.join("|")
    }
}

/// Per-address probe metadata, keyed by absolute address.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AddressMap {
    entries: BTreeMap<u64, AddressEntry>,
}

impl AddressMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, address: u64) -> Option<&AddressEntry> {
        self.entries.get(&address)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &AddressEntry)> {
        self.entries.iter().map(|(a, e)| (*a, e))
    }

    /// Adds a probe's metadata. Returns the names already registered at
    /// that address if the new name collides with them.
    pub fn insert(&mut self, probe: &ResolvedProbe) -> Option<String> {
        match self.entries.get_mut(&probe.address) {
            None => {
                self.entries.insert(
                    probe.address,
                    AddressEntry {
                        names: vec![probe.display_name.clone()],
                        kind: probe.kind,
                        arg_encoding: probe.arg_encoding,
                    },
                );
                None
            }
            Some(entry) if entry.names.contains(&probe.display_name) => None,
            Some(entry) => {
                let existing = entry.display_name();
                entry.names.push(probe.display_name.clone());
                Some(existing)
            }
        }
    }

    /// `{"0x…": {"name", "kind", "arg_encoding"}}`; colliding entries also
    /// list every candidate under `"candidates"`.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        for (addr, e) in &self.entries {
            let mut v = json!({
                "name": e.display_name(),
                "kind": e.kind.label(),
                "arg_encoding": format!("0x{:016x}", e.arg_encoding),
            });
            if e.names.len() > 1 {
                v["candidates"] = json!(e.names);
            }
            obj.insert(format!("0x{addr:x}"), v);
        }
        Value::Object(obj)
    }

    pub fn from_json(value: &Value) -> Result<AddressMap, String> {
        let obj = value.as_object().ok_or("address map must be an object")?;
        let mut map = AddressMap::new();
        for (key, v) in obj {
            let address = parse_hex(key).ok_or_else(|| format!("bad address key {key}"))?;
            let kind = v["kind"].as_str().and_then(ProbeKind::from_label).ok_or_else(|| format!("{key}: bad kind"))?;
            let arg_encoding =
                v["arg_encoding"].as_str().and_then(parse_hex).ok_or_else(|| format!("{key}: bad arg_encoding"))?;
            decode_arg_types(arg_encoding).map_err(|e| format!("{key}: {e}"))?;
            let names = match v.get("candidates").and_then(Value::as_array) {
                Some(c) => c.iter().filter_map(Value::as_str).map(str::to_string).collect(),
                None => vec![v["name"].as_str().ok_or_else(|| format!("{key}: missing name"))?.to_string()],
            };
            map.entries.insert(address, AddressEntry { names, kind, arg_encoding });
        }
        Ok(map)
    }
}

pub(crate) fn parse_hex(s: &str) -> Option<u64> {
    u64::from_str_radix(s.strip_prefix("0x")?, 16).ok()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnresolvedReason {
    MethodNotFound,
    NotCompiled,
    ImageNotMapped(String),
    LibraryNotMapped,
    AmbiguousLibrary(Vec<String>),
    Symbol(SymbolError),
    NotProbeable,
}

impl fmt::Display for UnresolvedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnresolvedReason::MethodNotFound => f.write_str("method not found in oatdump output"),
            UnresolvedReason::NotCompiled => f.write_str("not-compiled"),
            UnresolvedReason::ImageNotMapped(p) => write!(f, "oat image {p} is not mapped executable"),
            UnresolvedReason::LibraryNotMapped => f.write_str("library is not mapped executable"),
            UnresolvedReason::AmbiguousLibrary(c) => write!(f, "library name matches {}", c.join(", ")),
            UnresolvedReason::Symbol(e) => write!(f, "{e}"),
            UnresolvedReason::NotProbeable => f.write_str("hook kind needs no address"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("cannot resolve {hook}: {reason}")]
    HookUnresolved { hook: String, reason: UnresolvedReason },
    #[error("address collision at 0x{address:x}: {first} and {second}")]
    AddressCollision { address: u64, first: String, second: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Resolution {
    pub probes: Vec<ResolvedProbe>,
    pub map: AddressMap,
    /// Hooks that could not be resolved and addresses shared by several
    /// functions. Colliding probes are still present in `probes` and `map`.
    pub issues: Vec<ResolveError>,
}

impl Resolution {
    /// Fails on the first reported issue.
    pub fn into_strict(self) -> Result<(Vec<ResolvedProbe>, AddressMap), ResolveError> {
        match self.issues.into_iter().next() {
            Some(e) => Err(e),
            None => Ok((self.probes, self.map)),
        }
    }
}

/// Computes absolute addresses for every API-call and uprobe hook:
/// image base from the maps plus the compiled-code or symbol offset.
pub fn resolve_probes(
    config: &HooksConfig,
    images: &BTreeMap<String, u64>,
    oat: &[OatImage],
    symbols: &dyn SymbolReader,
) -> Resolution {
    let mut out = Resolution::default();
    for hook in &config.hooks {
        let resolved = match hook {
            HookSpec::ApiCall { class_name, method_name } => {
                resolve_api(class_name, method_name, &hook.display_name(), images, oat)
            }
            HookSpec::Uprobe { library, symbol, arg_types } => {
                resolve_native(library, symbol, arg_types, &hook.display_name(), images, symbols).map(|p| vec![p])
            }
            HookSpec::Syscall { .. } | HookSpec::Kprobe { .. } => continue,
        };
        match resolved {
            Ok(probes) => {
                for probe in probes {
                    if let Some(first) = out.map.insert(&probe) {
                        out.issues.push(ResolveError::AddressCollision {
                            address: probe.address,
                            first,
                            second: probe.display_name.clone(),
                        });
                    }
                    out.probes.push(probe);
                }
            }
            Err(reason) => out.issues.push(ResolveError::HookUnresolved { hook: hook.display_name(), reason }),
        }
    }
    out
}

fn resolve_api(
    class_name: &str,
    method_name: &str,
    display_name: &str,
    images: &BTreeMap<String, u64>,
    oat: &[OatImage],
) -> Result<Vec<ResolvedProbe>, UnresolvedReason> {
    let mut found_any = false;
    let mut missing_image = None;
    let mut probes = Vec::new();
    for image in oat {
        for m in image.methods.iter().filter(|m| m.class_name == class_name && m.method_name == method_name) {
            found_any = true;
            if !m.is_compiled() {
                continue;
            }
            let Some(&base) = images.get(&image.path) else {
                missing_image = Some(image.path.clone());
                continue;
            };
            // handlers read at most eight arguments
            let types = &m.arg_types[..m.arg_types.len().min(MAX_ARGS)];
            probes.push(ResolvedProbe {
                kind: ProbeKind::ApiCall,
                address: base + m.code_offset,
                image_path: image.path.clone(),
                offset: m.code_offset,
                display_name: display_name.to_string(),
                arg_encoding: encode_arg_types(types).expect("at most eight types"),
            });
        }
    }
    if !probes.is_empty() {
        return Ok(probes);
    }
    Err(match (found_any, missing_image) {
        (false, _) => UnresolvedReason::MethodNotFound,
        (true, Some(path)) => UnresolvedReason::ImageNotMapped(path),
        (true, None) => UnresolvedReason::NotCompiled,
    })
}

fn resolve_native(
    library: &str,
    symbol: &str,
    arg_types: &[crate::event::ArgType],
    display_name: &str,
    images: &BTreeMap<String, u64>,
    symbols: &dyn SymbolReader,
) -> Result<ResolvedProbe, UnresolvedReason> {
    let (path, base) = match images.get_key_value(library) {
        Some((p, b)) => (p.clone(), *b),
        None => {
            let wanted = basename(library);
            let candidates: Vec<(&String, &u64)> = images.iter().filter(|(p, _)| basename(p) == wanted).collect();
            match candidates.as_slice() {
                [] => return Err(UnresolvedReason::LibraryNotMapped),
                [(p, b)] => ((*p).clone(), **b),
                many => {
                    return Err(UnresolvedReason::AmbiguousLibrary(many.iter().map(|(p, _)| (*p).clone()).collect()))
                }
            }
        }
    };
    let record = symbols.symbol_offset(&path, symbol).map_err(UnresolvedReason::Symbol)?;
    let arg_encoding = encode_arg_types(arg_types).map_err(|_| UnresolvedReason::NotProbeable)?;
    Ok(ResolvedProbe {
        kind: ProbeKind::NativeFunction,
        address: base + record.offset,
        image_path: path,
        offset: record.offset,
        display_name: display_name.to_string(),
        arg_encoding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::elf::MemorySymbolReader;
    use crate::config::FilterSpec;
    use crate::event::ArgType;

    const OAT: &str = "/system/framework/arm64/boot-framework.oat";

    fn record(class: &str, method: &str, offset: u64) -> OatMethodRecord {
        OatMethodRecord {
            class_name: class.into(),
            method_name: method.into(),
            signature: "()V".into(),
            code_offset: offset,
            arg_types: vec![],
        }
    }

    fn config(hooks: Vec<HookSpec>) -> HooksConfig {
        HooksConfig { hooks, filter: FilterSpec::none() }
    }

    fn images() -> BTreeMap<String, u64> {
        BTreeMap::from([(OAT.to_string(), 0x70_0000_0000)])
    }

    #[test]
    fn base_plus_code_offset() {
        let mut listen = record("android.telephony.TelephonyManager", "listen", 0x4a2c0);
        listen.arg_types = vec![ArgType::Addr, ArgType::Int];
        let oat = [OatImage { path: OAT.into(), methods: vec![listen] }];
        let cfg = config(vec![HookSpec::api("android.telephony.TelephonyManager", "listen")]);
        let (probes, map) = resolve_probes(&cfg, &images(), &oat, &MemorySymbolReader::new()).into_strict().unwrap();
        assert_eq!(probes[0].address, 0x70_0004_a2c0);
        assert_eq!(probes[0].arg_encoding, 0x0105);
        let entry = map.get(0x70_0004_a2c0).unwrap();
        assert_eq!(entry.display_name(), "android.telephony.TelephonyManager.listen");
        assert_eq!(entry.kind, ProbeKind::ApiCall);
    }

    #[test]
    fn uncompiled_method_is_unresolved() {
        let oat = [OatImage { path: OAT.into(), methods: vec![record("a.B", "c", 0)] }];
        let r = resolve_probes(&config(vec![HookSpec::api("a.B", "c")]), &images(), &oat, &MemorySymbolReader::new());
        assert!(r.probes.is_empty());
        assert_eq!(
            r.issues,
            vec![ResolveError::HookUnresolved { hook: "a.B.c".into(), reason: UnresolvedReason::NotCompiled }]
        );
        assert_eq!(r.issues[0].to_string(), "cannot resolve a.B.c: not-compiled");
    }

    #[test]
    fn shared_code_is_a_collision_with_both_names() {
        let oat = [OatImage {
            path: OAT.into(),
            methods: vec![
                record("android.app.Service", "onCreate", 0x185d00),
                record("android.app.Service", "onDestroy", 0x185d00),
            ],
        }];
        let cfg = config(vec![
            HookSpec::api("android.app.Service", "onCreate"),
            HookSpec::api("android.app.Service", "onDestroy"),
        ]);
        let r = resolve_probes(&cfg, &images(), &oat, &MemorySymbolReader::new());
        assert_eq!(r.probes.len(), 2);
        assert_eq!(r.map.len(), 1);
        assert_eq!(
            r.issues,
            vec![ResolveError::AddressCollision {
                address: 0x70_0018_5d00,
                first: "android.app.Service.onCreate".into(),
                second: "android.app.Service.onDestroy".into(),
            }]
        );
        assert_eq!(
            r.map.get(0x70_0018_5d00).unwrap().display_name(),
            "android.app.Service.onCreate|android.app.Service.onDestroy"
        );
        assert!(r.into_strict().is_err());
    }

    #[test]
    fn missing_method_image_and_library() {
        let oat = [OatImage { path: "/other.oat".into(), methods: vec![record("a.B", "c", 0x10)] }];
        let cfg = config(vec![
            HookSpec::api("a.B", "c"),
            HookSpec::api("a.B", "zzz"),
            HookSpec::uprobe("libnope.so", "f", &[]),
        ]);
        let r = resolve_probes(&cfg, &images(), &oat, &MemorySymbolReader::new());
        let reasons: Vec<_> = r
            .issues
            .iter()
            .map(|i| match i {
                ResolveError::HookUnresolved { reason, .. } => reason.clone(),
                other => panic!("{other}"),
            })
            .collect();
        assert_eq!(
            reasons,
            vec![
                UnresolvedReason::ImageNotMapped("/other.oat".into()),
                UnresolvedReason::MethodNotFound,
                UnresolvedReason::LibraryNotMapped,
            ]
        );
    }

    #[test]
    fn ambiguous_library_basename() {
        let images = BTreeMap::from([
            ("/system/lib64/libfoo.so".to_string(), 0x1000),
            ("/vendor/lib64/libfoo.so".to_string(), 0x2000),
        ]);
        let r = resolve_probes(
            &config(vec![HookSpec::uprobe("libfoo.so", "f", &[])]),
            &images,
            &[],
            &MemorySymbolReader::new(),
        );
        assert!(matches!(
            &r.issues[0],
            ResolveError::HookUnresolved { reason: UnresolvedReason::AmbiguousLibrary(c), .. } if c.len() == 2
        ));
    }

    #[test]
    fn address_map_json_round_trip() {
        let mut map = AddressMap::new();
        for (name, addr) in [("a.B.c", 0x7000u64), ("a.B.d", 0x7000), ("libc.so!open", 0x9000)] {
            map.insert(&ResolvedProbe {
                kind: if name.contains('!') { ProbeKind::NativeFunction } else { ProbeKind::ApiCall },
                address: addr,
                image_path: String::new(),
                offset: 0,
                display_name: name.into(),
                arg_encoding: 0x0106,
            });
        }
        let json = map.to_json();
        assert_eq!(json["0x9000"]["name"], "libc.so!open");
        assert_eq!(json["0x9000"]["arg_encoding"], "0x0000000000000106");
        assert_eq!(json["0x7000"]["candidates"][1], "a.B.d");
        assert_eq!(AddressMap::from_json(&json).unwrap(), map);
    }
}
