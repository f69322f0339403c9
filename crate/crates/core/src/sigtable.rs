//! Method signature tables: the map from `(interface token, transaction
//! code)` to a method name and parameter list that drives parcel decoding.
//!
//! Tables are harvested offline from a device's framework (AIDL interfaces
//! plus transaction code assignments) and shipped as JSONL: an optional
//! leading provenance line `{"meta": {...}}`, then one entry object per line
//! `{"iface", "code", "name", "params": [{"name", "type"}, ...]}`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parcel::ArgType;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("cannot read table: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("DuplicateEntry: ({iface}, {code}) appears more than once")]
    DuplicateEntry { iface: String, code: u32 },
}

/// Provenance of a harvested table: which device and build it came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

/// One declared parameter: its name, the declared type text, and the
/// resolved decoding kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub type_name: String,
    pub kind: ArgType,
}

/// One method signature keyed by interface token and transaction code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSignature {
    pub interface_token: String,
    pub code: u32,
    pub method_name: String,
    pub params: Vec<ParamSpec>,
}

/// Resolve a declared parameter type to its decoding kind.
///
/// The decoder models the scalar kinds, strings, raw binders, and
/// parcelables passed as a strong-binder reference. Container and blob types
/// (Bundle et al, arrays, generics) have their own marshaling the decoder
/// does not follow, so they resolve to [`ArgType::Unsupported`] and stop
/// decoding at their position.
pub fn resolve_type_name(name: &str) -> ArgType {
    const UNSUPPORTED: &[&str] = &[
        "Bundle",
        "PersistableBundle",
        "FileDescriptor",
        "ParcelFileDescriptor",
        "CharSequence",
        "Map",
        "List",
        "byte",
        "char",
        "short",
        "float",
        "void",
    ];
    let name = name.trim();
    let simple = name.rsplit('.').next().unwrap_or(name);
    match name {
        "int" => return ArgType::Int,
        "boolean" => return ArgType::Boolean,
        "long" => return ArgType::Long,
        "double" => return ArgType::Double,
        "String" | "java.lang.String" => return ArgType::String16,
        "IBinder" | "android.os.IBinder" => return ArgType::StrongBinder,
        _ => {}
    }
    if name.contains("[]")
        || name.contains('<')
        || name.contains('>')
        || UNSUPPORTED.contains(&simple)
    {
        return ArgType::Unsupported(name.to_string());
    }
    let is_ident = |s: &str| {
        !s.is_empty()
            && s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
            && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$')
    };
    if !name.is_empty() && name.split('.').all(is_ident) {
        ArgType::TypedObject(name.to_string())
    } else {
        ArgType::Unsupported(name.to_string())
    }
}

// Serialized form of one table line.
#[derive(Serialize, Deserialize)]
struct ParamLine {
    name: String,
    #[serde(rename = "type")]
    type_name: String,
}

#[derive(Serialize, Deserialize)]
struct EntryLine {
    iface: String,
    code: u32,
    name: String,
    params: Vec<ParamLine>,
}

/// A validation finding; the table stays usable regardless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub interface: String,
    pub code: u32,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}): {}", self.interface, self.code, self.message)
    }
}

/// The signature table: entries keyed by `(interface token, code)`, kept
/// sorted so iteration and save order are stable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignatureTable {
    entries: BTreeMap<(String, u32), MethodSignature>,
    pub provenance: Option<TableMeta>,
}

impl SignatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The table that ships with the crate (the SMS send entry used by the
    /// golden fixtures).
    pub fn sample_jsonl() -> &'static str {
        include_str!("../data/sample_table.jsonl")
    }

    pub fn load(path: &Path) -> Result<Self, TableError> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TableError> {
        let mut table = SignatureTable::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            // A provenance line is the object {"meta": {...}}.
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|source| TableError::Parse {
                    line: lineno,
                    source,
                })?;
            if let Some(meta) = value.get("meta") {
                let meta: TableMeta =
                    serde_json::from_value(meta.clone()).map_err(|source| TableError::Parse {
                        line: lineno,
                        source,
                    })?;
                table.provenance = Some(meta);
                continue;
            }
            let entry: EntryLine =
                serde_json::from_value(value).map_err(|source| TableError::Parse {
                    line: lineno,
                    source,
                })?;
            table.insert(MethodSignature {
                interface_token: entry.iface,
                code: entry.code,
                method_name: entry.name,
                params: entry
                    .params
                    .into_iter()
                    .map(|p| ParamSpec {
                        kind: resolve_type_name(&p.type_name),
                        name: p.name,
                        type_name: p.type_name,
                    })
                    .collect(),
            })?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, sig: MethodSignature) -> Result<(), TableError> {
        let key = (sig.interface_token.clone(), sig.code);
        if self.entries.contains_key(&key) {
            return Err(TableError::DuplicateEntry {
                iface: key.0,
                code: key.1,
            });
        }
        self.entries.insert(key, sig);
        Ok(())
    }

    pub fn lookup(&self, token: &str, code: u32) -> Option<&MethodSignature> {
        self.entries.get(&(token.to_string(), code))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MethodSignature> {
        self.entries.values()
    }

    /// Write the table back out as JSONL (provenance line first, entries in
    /// key order). `save` after `load` reproduces the entry set.
    pub fn save<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if let Some(meta) = &self.provenance {
            let line = serde_json::json!({ "meta": meta });
            writeln!(w, "{line}")?;
        }
        for sig in self.entries.values() {
            let entry = EntryLine {
                iface: sig.interface_token.clone(),
                code: sig.code,
                name: sig.method_name.clone(),
                params: sig
                    .params
                    .iter()
                    .map(|p| ParamLine {
                        name: p.name.clone(),
                        type_name: p.type_name.clone(),
                    })
                    .collect(),
            };
            writeln!(w, "{}", serde_json::to_string(&entry).unwrap())?;
        }
        Ok(())
    }

    /// Scan for entries a decode run would trip over: unsupported parameter
    /// types, empty method names, and interfaces with gappy code ranges
    /// (often a sign the harvest missed methods).
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut per_iface: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
        for sig in self.entries.values() {
            per_iface
                .entry(sig.interface_token.as_str())
                .or_default()
                .push(sig.code);
            if sig.method_name.is_empty() {
                out.push(Diagnostic {
                    interface: sig.interface_token.clone(),
                    code: sig.code,
                    message: "empty method name".into(),
                });
            }
            for p in &sig.params {
                if let ArgType::Unsupported(ty) = &p.kind {
                    out.push(Diagnostic {
                        interface: sig.interface_token.clone(),
                        code: sig.code,
                        message: format!("param {} has unsupported type {}", p.name, ty),
                    });
                }
            }
        }
        for (iface, codes) in per_iface {
            let min = *codes.iter().min().unwrap();
            let max = *codes.iter().max().unwrap();
            let span = (max - min + 1) as usize;
            if span != codes.len() {
                out.push(Diagnostic {
                    interface: iface.to_string(),
                    code: min,
                    message: format!(
                        "codes {min}..={max} cover {} methods, {} missing",
                        codes.len(),
                        span - codes.len()
                    ),
                });
            }
        }
        out
    }
}
