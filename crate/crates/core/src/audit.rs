//! Turn a materialized transaction into an audit record: look the method up
//! in the signature table, decode its arguments from the parcel, and render
//! the result as text or a flat JSON record.
//!
//! Decoding is total: whatever goes wrong (unknown method, unsupported
//! parameter type, truncated buffer) lands in [`DecodeStatus`] on a record
//! that still carries everything recovered up to that point plus the raw
//! buffer, so a capture replay never dies on one bad transaction.

use std::fmt::Write as _;

use crate::parcel::{
    read_flat_binder_object, read_interface_header, read_primitive, read_string16,
    read_typed_object, ArgType, DecodeOptions, ParcelCursor, ParcelError, Value,
};
use crate::sigtable::SignatureTable;
use crate::wire::TransactionRecord;

/// Capture-time identity of the process that issued the transaction.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProcessIdentity {
    pub ts_ns: u64,
    pub pid: u32,
    pub uid: u32,
}

/// One decoded argument.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedParam {
    pub name: String,
    pub type_name: String,
    pub value: Value,
}

/// How far decoding got.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodeStatus {
    Ok,
    /// The interface header was readable but `(token, code)` is not in the
    /// table; arguments are left undecoded. Stale tables soft-fail this way.
    UnknownMethod,
    /// Decoding stopped at a parameter whose type the decoder does not
    /// model; earlier params are present, the offender is recorded as an
    /// unsupported-marker value.
    UnsupportedType { param: String, type_name: String },
    /// Parcel decoding failed; earlier params are present.
    Failed(ParcelError),
}

impl DecodeStatus {
    /// Short stable name for summaries and the JSON record, e.g.
    /// `TruncatedString` for a string that ran off the buffer.
    pub fn label(&self) -> String {
        match self {
            DecodeStatus::Ok => "ok".into(),
            DecodeStatus::UnknownMethod => "UnknownMethod".into(),
            DecodeStatus::UnsupportedType { type_name, .. } => {
                format!("UnsupportedType({type_name})")
            }
            DecodeStatus::Failed(e) => match e {
                ParcelError::TruncatedHeader { .. } => "TruncatedHeader".into(),
                ParcelError::TruncatedString { .. } => "TruncatedString".into(),
                ParcelError::TruncatedValue { .. } => "TruncatedValue".into(),
                ParcelError::TruncatedObject { .. } => "TruncatedObject".into(),
                ParcelError::NegativeLength { .. } => "NegativeLength".into(),
                ParcelError::InvalidUtf16 { .. } => "InvalidUtf16".into(),
                ParcelError::MalformedObject { .. } => "MalformedObject".into(),
            },
        }
    }
}

/// The product of decoding one transaction.
#[derive(Debug, Clone)]
pub struct AuditRecord {
    pub ts_ns: u64,
    pub pid: u32,
    pub uid: u32,
    /// Transaction code from the wire payload.
    pub code: u32,
    /// Transaction flags from the wire payload (e.g. 0x12 for an accept-fds
    /// call: rendered in decimal as the kernel logs them).
    pub target_flags: u32,
    pub data_size: u64,
    pub interface: Option<String>,
    pub method_name: Option<String>,
    pub params: Vec<DecodedParam>,
    pub status: DecodeStatus,
    /// Final cursor position in the buffer; equals `data_size` for a fully
    /// decoded fixed-arity method.
    pub consumed: usize,
    pub raw_buffer: Vec<u8>,
}

/// Decode one transaction against a signature table. Always returns a
/// record; inspect [`AuditRecord::status`] for how far it got.
pub fn decode_transaction(
    txn: &TransactionRecord,
    table: &SignatureTable,
    identity: ProcessIdentity,
    opts: &DecodeOptions,
) -> AuditRecord {
    let mut rec = AuditRecord {
        ts_ns: identity.ts_ns,
        pid: identity.pid,
        uid: identity.uid,
        code: txn.code,
        target_flags: txn.flags,
        data_size: txn.data_size,
        interface: None,
        method_name: None,
        params: Vec::new(),
        status: DecodeStatus::Ok,
        consumed: 0,
        raw_buffer: txn.buffer.clone(),
    };
    let mut cur = ParcelCursor::new(&txn.buffer);
    let header = match read_interface_header(&mut cur) {
        Ok(h) => h,
        Err(e) => {
            rec.status = DecodeStatus::Failed(e);
            rec.consumed = cur.position();
            return rec;
        }
    };
    rec.interface = Some(header.token.clone());
    rec.consumed = cur.position();
    let sig = match table.lookup(&header.token, txn.code) {
        Some(sig) => sig,
        None => {
            rec.status = DecodeStatus::UnknownMethod;
            return rec;
        }
    };
    rec.method_name = Some(sig.method_name.clone());
    for spec in &sig.params {
        let value = match &spec.kind {
            k if k.is_primitive() => read_primitive(&mut cur, k),
            ArgType::String16 => read_string16(&mut cur).map(Value::Str),
            ArgType::StrongBinder => {
                read_flat_binder_object(&mut cur, opts.stability_footer).map(Value::Object)
            }
            ArgType::TypedObject(_) => read_typed_object(&mut cur, opts.stability_footer)
                .map(|o| o.map_or(Value::Null, Value::Object)),
            ArgType::Unsupported(ty) => {
                rec.params.push(DecodedParam {
                    name: spec.name.clone(),
                    type_name: spec.type_name.clone(),
                    value: Value::Unsupported(ty.clone()),
                });
                rec.status = DecodeStatus::UnsupportedType {
                    param: spec.name.clone(),
                    type_name: ty.clone(),
                };
                rec.consumed = cur.position();
                return rec;
            }
            _ => unreachable!("primitive kinds handled above"),
        };
        match value {
            Ok(v) => {
                rec.params.push(DecodedParam {
                    name: spec.name.clone(),
                    type_name: spec.type_name.clone(),
                    value: v,
                });
                rec.consumed = cur.position();
            }
            Err(e) => {
                rec.status = DecodeStatus::Failed(e);
                return rec;
            }
        }
    }
    rec
}

fn render_value(v: &Value, out: &mut String) {
    match v {
        Value::Int(i) => write!(out, "{i}").unwrap(),
        Value::Long(l) => write!(out, "0x{:x}", *l as u64).unwrap(),
        Value::Bool(b) => write!(out, "{b}").unwrap(),
        Value::Double(d) => write!(out, "{d:?}").unwrap(),
        Value::Str(Some(s)) => write!(out, "{s:?}").unwrap(),
        Value::Str(None) | Value::Null => out.push_str("null"),
        Value::Object(fbo) => {
            write!(
                out,
                "<{}, flags=0x{:x}, handle=0x{:x}",
                fbo.kind_label(),
                fbo.flags,
                fbo.handle_or_ptr
            )
            .unwrap();
            if let Some(st) = fbo.stability {
                write!(out, ", stability={st}").unwrap();
            }
            out.push('>');
        }
        Value::Unsupported(ty) => write!(out, "<unsupported:{ty}>").unwrap(),
    }
}

impl AuditRecord {
    /// Three-line human rendering: identity line, interface line, method
    /// call. Non-ok records get a status line instead of (or after) the
    /// partial call.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "pid={}  uid={}  flags={}  data_size={}",
            self.pid, self.uid, self.target_flags, self.data_size
        )
        .unwrap();
        writeln!(
            out,
            "iface={}  code={}",
            self.interface.as_deref().unwrap_or("?"),
            self.code
        )
        .unwrap();
        if let Some(method) = &self.method_name {
            let mut call = String::new();
            for (i, p) in self.params.iter().enumerate() {
                if i > 0 {
                    call.push_str(", ");
                }
                write!(call, "{} {}=", p.type_name, p.name).unwrap();
                render_value(&p.value, &mut call);
            }
            writeln!(out, "{method}({call})").unwrap();
        }
        if self.status != DecodeStatus::Ok {
            writeln!(out, "status={}", self.status.label()).unwrap();
        }
        out
    }

    /// Flat JSON record with the logged attributes, for JSONL output.
    pub fn to_json(&self) -> serde_json::Value {
        let params: Vec<serde_json::Value> = self
            .params
            .iter()
            .map(|p| {
                serde_json::json!({
                    "name": p.name,
                    "type": p.type_name,
                    "value": value_to_json(&p.value),
                })
            })
            .collect();
        serde_json::json!({
            "ts": self.ts_ns,
            "pid": self.pid,
            "uid": self.uid,
            "code": self.code,
            "target_flags": self.target_flags,
            "data_size": self.data_size,
            "interface": self.interface,
            "method_code": self.code,
            "method_name": self.method_name,
            "params": params,
            "raw_buffer_hex": hex::encode(&self.raw_buffer),
            "status": self.status.label(),
        })
    }
}

fn value_to_json(v: &Value) -> serde_json::Value {
    match v {
        Value::Int(i) => serde_json::json!(i),
        Value::Long(l) => serde_json::json!(l),
        Value::Bool(b) => serde_json::json!(b),
        Value::Double(d) => serde_json::json!(d),
        Value::Str(s) => serde_json::json!(s),
        Value::Null => serde_json::Value::Null,
        Value::Object(fbo) => serde_json::json!({
            "kind": fbo.kind_label(),
            "flags": fbo.flags,
            "handle": fbo.handle_or_ptr,
            "cookie": fbo.cookie,
            "stability": fbo.stability,
        }),
        Value::Unsupported(ty) => serde_json::json!({ "unsupported": ty }),
    }
}
