//! Hooks configuration: which events to trace and which processes to watch.
//!
//! The document is a JSON object with four hook arrays and an optional
//! filter:
//!
//! ```json
//! {
//!   "api":      [{"class": "android.telephony.TelephonyManager", "method": "getImei"}],
//!   "syscalls": ["openat"],
//!   "kprobes":  ["vfs_write"],
//!   "uprobes":  [{"lib": "libc.so", "symbol": "open", "args": ["str", "int"]}],
//!   "filter":   {"mode": "uids", "uids": [10050]}
//! }
//! ```
//!
//! Hooks keep document order: arrays are read in the order their keys
//! appear, entries in array order.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::event::{ArgType, MAX_ARGS};

/// Apps are assigned uids above this value.
pub const USER_APP_UID_THRESHOLD: u32 = 10000;

const DEFAULT_HOOKS: &str = include_str!("../data/multilayer_hooks.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HookKind {
    ApiCall,
    Syscall,
    Kprobe,
    Uprobe,
}

impl HookKind {
    pub fn label(self) -> &'static str {
        match self {
            HookKind::ApiCall => "api",
            HookKind::Syscall => "syscall",
            HookKind::Kprobe => "kprobe",
            HookKind::Uprobe => "uprobe",
        }
    }

    fn section(self) -> &'static str {
        match self {
            HookKind::ApiCall => "api",
            HookKind::Syscall => "syscalls",
            HookKind::Kprobe => "kprobes",
            HookKind::Uprobe => "uprobes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HookSpec {
    ApiCall { class_name: String, method_name: String },
    Syscall { name: String },
    Kprobe { function: String },
    Uprobe { library: String, symbol: String, arg_types: Vec<ArgType> },
}

impl HookSpec {
    pub fn api(class_name: &str, method_name: &str) -> HookSpec {
        HookSpec::ApiCall { class_name: class_name.into(), method_name: method_name.into() }
    }

    pub fn syscall(name: &str) -> HookSpec {
        HookSpec::Syscall { name: name.into() }
    }

    pub fn kprobe(function: &str) -> HookSpec {
        HookSpec::Kprobe { function: function.into() }
    }

    pub fn uprobe(library: &str, symbol: &str, arg_types: &[ArgType]) -> HookSpec {
        HookSpec::Uprobe { library: library.into(), symbol: symbol.into(), arg_types: arg_types.to_vec() }
    }

    pub fn kind(&self) -> HookKind {
        match self {
            HookSpec::ApiCall { .. } => HookKind::ApiCall,
            HookSpec::Syscall { .. } => HookKind::Syscall,
            HookSpec::Kprobe { .. } => HookKind::Kprobe,
            HookSpec::Uprobe { .. } => HookKind::Uprobe,
        }
    }

    /// `class.method`, `lib!symbol`, or the bare syscall / kernel function name.
    pub fn display_name(&self) -> String {
        match self {
            HookSpec::ApiCall { class_name, method_name } => format!("{class_name}.{method_name}"),
            HookSpec::Syscall { name } => name.clone(),
            HookSpec::Kprobe { function } => function.clone(),
            HookSpec::Uprobe { library, symbol, .. } => format!("{library}!{symbol}"),
        }
    }

    /// Identity used for duplicate detection. Uprobe argument types are not
    /// part of it: one symbol can only be probed once.
    fn identity(&self) -> (HookKind, String) {
        (self.kind(), self.display_name())
    }

    fn names(&self) -> Vec<&str> {
        match self {
            HookSpec::ApiCall { class_name, method_name } => vec![class_name, method_name],
            HookSpec::Syscall { name } => vec![name],
            HookSpec::Kprobe { function } => vec![function],
            HookSpec::Uprobe { library, symbol, .. } => vec![library, symbol],
        }
    }
}

impl fmt::Display for HookSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind().label(), self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterMode {
    /// Trace nothing.
    None,
    AllUserApps,
    UidList,
    PackageList,
}

impl FilterMode {
    pub fn label(self) -> &'static str {
        match self {
            FilterMode::None => "none",
            FilterMode::AllUserApps => "all_user_apps",
            FilterMode::UidList => "uids",
            FilterMode::PackageList => "packages",
        }
    }

    fn from_label(s: &str) -> Option<FilterMode> {
        match s {
            "none" => Some(FilterMode::None),
            "all_user_apps" => Some(FilterMode::AllUserApps),
            "uids" => Some(FilterMode::UidList),
            "packages" => Some(FilterMode::PackageList),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterSpec {
    pub mode: FilterMode,
    pub uids: BTreeSet<u32>,
    pub packages: BTreeSet<String>,
    pub user_app_uid_threshold: u32,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::none()
    }
}

impl FilterSpec {
    pub fn none() -> FilterSpec {
        FilterSpec {
            mode: FilterMode::None,
            uids: BTreeSet::new(),
            packages: BTreeSet::new(),
            user_app_uid_threshold: USER_APP_UID_THRESHOLD,
        }
    }

    pub fn all_user_apps() -> FilterSpec {
        FilterSpec { mode: FilterMode::AllUserApps, ..FilterSpec::none() }
    }

    pub fn uids(uids: impl IntoIterator<Item = u32>) -> FilterSpec {
        FilterSpec { mode: FilterMode::UidList, uids: uids.into_iter().collect(), ..FilterSpec::none() }
    }

    pub fn packages<S: Into<String>>(packages: impl IntoIterator<Item = S>) -> FilterSpec {
        FilterSpec {
            mode: FilterMode::PackageList,
            packages: packages.into_iter().map(Into::into).collect(),
            ..FilterSpec::none()
        }
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("mode".into(), json!(self.mode.label()));
        match self.mode {
            FilterMode::UidList => {
                obj.insert("uids".into(), json!(self.uids));
            }
            FilterMode::PackageList => {
                obj.insert("packages".into(), json!(self.packages));
            }
            FilterMode::None | FilterMode::AllUserApps => {}
        }
        Value::Object(obj)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HooksConfig {
    pub hooks: Vec<HookSpec>,
    pub filter: FilterSpec,
}

impl HooksConfig {
    pub fn hooks_of(&self, kind: HookKind) -> impl Iterator<Item = &HookSpec> {
        self.hooks.iter().filter(move |h| h.kind() == kind)
    }

    pub fn count(&self, kind: HookKind) -> usize {
        self.hooks_of(kind).count()
    }

    /// Serializes back to the configuration document format. Hooks are
    /// grouped by kind, kinds ordered by first appearance.
    pub fn to_json(&self) -> Value {
        let mut doc = Map::new();
        for hook in &self.hooks {
            let entry = match hook {
                HookSpec::ApiCall { class_name, method_name } => {
                    json!({"class": class_name, "method": method_name})
                }
                HookSpec::Syscall { name } => json!(name),
                HookSpec::Kprobe { function } => json!(function),
                HookSpec::Uprobe { library, symbol, arg_types } => json!({
                    "lib": library,
                    "symbol": symbol,
                    "args": arg_types.iter().map(|t| t.name()).collect::<Vec<_>>(),
                }),
            };
            doc.entry(hook.kind().section())
                .or_insert_with(|| Value::Array(Vec::new()))
                .as_array_mut()
                .expect("section is an array")
                .push(entry);
        }
        if self.filter.mode != FilterMode::None {
            doc.insert("filter".into(), self.filter.to_json());
        }
        Value::Object(doc)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown event kind \"{0}\"")]
    UnknownKind(String),
    #[error("duplicate hook #{index}: {hook}")]
    DuplicateHook { index: usize, hook: String },
    #[error("hook #{index}: invalid argument types: {reason}")]
    InvalidArgTypes { index: usize, reason: String },
    #[error("hook #{index}: {reason}")]
    InvalidHook { index: usize, reason: String },
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
}

/// Parses a hooks configuration document.
pub fn parse_hooks_config(text: &str) -> Result<HooksConfig, ConfigError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let Value::Object(top) = doc else {
        return Err(ConfigError::Syntax("top level must be an object".into()));
    };

    let mut config = HooksConfig::default();
    for (key, value) in &top {
        match key.as_str() {
            "filter" => config.filter = parse_filter(value)?,
            "api" => {
                for entry in array(key, value)? {
                    let index = config.hooks.len();
                    let obj = object(entry, index, &["class", "method"])?;
                    config.hooks.push(HookSpec::ApiCall {
                        class_name: string_field(obj, "class", index)?,
                        method_name: string_field(obj, "method", index)?,
                    });
                }
            }
            "syscalls" | "kprobes" => {
                for entry in array(key, value)? {
                    let index = config.hooks.len();
                    let name = entry.as_str().ok_or_else(|| ConfigError::InvalidHook {
                        index,
                        reason: format!("{key} entries must be strings"),
                    })?;
                    config.hooks.push(if key == "syscalls" { HookSpec::syscall(name) } else { HookSpec::kprobe(name) });
                }
            }
            "uprobes" => {
                for entry in array(key, value)? {
                    let index = config.hooks.len();
                    let obj = object(entry, index, &["lib", "symbol", "args"])?;
                    config.hooks.push(HookSpec::Uprobe {
                        library: string_field(obj, "lib", index)?,
                        symbol: string_field(obj, "symbol", index)?,
                        arg_types: parse_arg_types(obj.get("args"), index)?,
                    });
                }
            }
            other => return Err(ConfigError::UnknownKind(other.to_string())),
        }
    }

    if let Some(d) = validate(&config).into_iter().next() {
        return Err(d.into_error(&config));
    }
    Ok(config)
}

/// The multi-layer event set: 50 framework API methods, 4 native library
/// functions, 49 system calls and 3 kernel functions, tracing all user apps.
pub fn default_multilayer_config() -> HooksConfig {
    parse_hooks_config(DEFAULT_HOOKS).expect("bundled default configuration is valid")
}

/// The bundled default configuration document, as shipped.
pub fn default_multilayer_document() -> &'static str {
    DEFAULT_HOOKS
}

fn array<'a>(key: &str, value: &'a Value) -> Result<&'a Vec<Value>, ConfigError> {
    value.as_array().ok_or_else(|| ConfigError::Syntax(format!("\"{key}\" must be an array")))
}

fn object<'a>(entry: &'a Value, index: usize, allowed: &[&str]) -> Result<&'a Map<String, Value>, ConfigError> {
    let obj = entry
        .as_object()
        .ok_or_else(|| ConfigError::InvalidHook { index, reason: "entry must be an object".into() })?;
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ConfigError::InvalidHook { index, reason: format!("unexpected field \"{k}\"") });
    }
    Ok(obj)
}

fn string_field(obj: &Map<String, Value>, field: &str, index: usize) -> Result<String, ConfigError> {
    obj.get(field)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ConfigError::InvalidHook { index, reason: format!("missing string \"{field}\"") })
}

fn parse_arg_types(value: Option<&Value>, index: usize) -> Result<Vec<ArgType>, ConfigError> {
    let Some(value) = value else {
        return Ok(Vec::new());
    };
    let items = value
        .as_array()
        .ok_or_else(|| ConfigError::InvalidArgTypes { index, reason: "\"args\" must be an array".into() })?;
    if items.len() > MAX_ARGS {
        return Err(ConfigError::InvalidArgTypes {
            index,
            reason: format!("{} arguments declared, at most {MAX_ARGS}", items.len()),
        });
    }
    items
        .iter()
        .map(|item| {
            item.as_str()
                .and_then(ArgType::from_name)
                .ok_or_else(|| ConfigError::InvalidArgTypes { index, reason: format!("unknown type {item}") })
        })
        .collect()
}

fn parse_filter(value: &Value) -> Result<FilterSpec, ConfigError> {
    let obj = value.as_object().ok_or_else(|| ConfigError::InvalidFilter("filter must be an object".into()))?;
    if let Some(k) = obj.keys().find(|k| !["mode", "uids", "packages"].contains(&k.as_str())) {
        return Err(ConfigError::InvalidFilter(format!("unexpected field \"{k}\"")));
    }
    let mode_label =
        obj.get("mode").and_then(Value::as_str).ok_or_else(|| ConfigError::InvalidFilter("missing \"mode\"".into()))?;
    let mode = FilterMode::from_label(mode_label)
        .ok_or_else(|| ConfigError::InvalidFilter(format!("unknown mode \"{mode_label}\"")))?;

    let mut filter = FilterSpec { mode, ..FilterSpec::none() };
    if let Some(uids) = obj.get("uids") {
        let items = uids.as_array().ok_or_else(|| ConfigError::InvalidFilter("\"uids\" must be an array".into()))?;
        for item in items {
            let uid = item
                .as_u64()
                .and_then(|u| u32::try_from(u).ok())
                .ok_or_else(|| ConfigError::InvalidFilter(format!("invalid uid {item}")))?;
            filter.uids.insert(uid);
        }
    }
    if let Some(pkgs) = obj.get("packages") {
        let items =
            pkgs.as_array().ok_or_else(|| ConfigError::InvalidFilter("\"packages\" must be an array".into()))?;
        for item in items {
            let name = item
                .as_str()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| ConfigError::InvalidFilter(format!("invalid package {item}")))?;
            filter.packages.insert(name.to_string());
        }
    }
    Ok(filter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    DuplicateHook,
    InvalidArgTypes,
    EmptyName,
    WhitespaceInName,
    EmptyUidList,
    EmptyPackageList,
}

/// One violated configuration rule. `hook_index` is `None` for filter rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub hook_index: Option<usize>,
    pub rule: Rule,
}

impl Diagnostic {
    fn into_error(self, config: &HooksConfig) -> ConfigError {
        let index = self.hook_index.unwrap_or(0);
        let hook = || config.hooks[index].to_string();
        match self.rule {
            Rule::DuplicateHook => ConfigError::DuplicateHook { index, hook: hook() },
            Rule::InvalidArgTypes => {
                ConfigError::InvalidArgTypes { index, reason: "more than 8 arguments or a `none` type".into() }
            }
            Rule::EmptyName => ConfigError::InvalidHook { index, reason: "empty name".into() },
            Rule::WhitespaceInName => ConfigError::InvalidHook { index, reason: "name contains whitespace".into() },
            Rule::EmptyUidList => ConfigError::InvalidFilter("mode \"uids\" needs uids".into()),
            Rule::EmptyPackageList => ConfigError::InvalidFilter("mode \"packages\" needs packages".into()),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hook_index {
            Some(i) => write!(f, "{:?}@{i}", self.rule),
            None => write!(f, "{:?}@filter", self.rule),
        }
    }
}

/// Checks every configuration invariant; an empty result means valid.
pub fn validate(config: &HooksConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, hook) in config.hooks.iter().enumerate() {
        let at = |rule| Diagnostic { hook_index: Some(i), rule };
        let names = hook.names();
        if names.iter().any(|n| n.is_empty()) {
            out.push(at(Rule::EmptyName));
        } else if names.iter().any(|n| n.chars().any(char::is_whitespace)) {
            out.push(at(Rule::WhitespaceInName));
        }
        if let HookSpec::Uprobe { arg_types, .. } = hook {
            if arg_types.len() > MAX_ARGS || arg_types.contains(&ArgType::None) {
                out.push(at(Rule::InvalidArgTypes));
            }
        }
        if !seen.insert(hook.identity()) {
            out.push(at(Rule::DuplicateHook));
        }
    }
    match config.filter.mode {
        FilterMode::UidList if config.filter.uids.is_empty() => {
            out.push(Diagnostic { hook_index: None, rule: Rule::EmptyUidList })
        }
        FilterMode::PackageList if config.filter.packages.is_empty() => {
            out.push(Diagnostic { hook_index: None, rule: Rule::EmptyPackageList })
        }
        _ => {}
    }
    out
}
