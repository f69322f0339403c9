//! Captured-record replay.
//!
//! A capture session stores one JSON object per intercepted event. Two kinds
//! exist: `ioctl` records carry a full BINDER_WRITE_READ argument block plus
//! every buffer it referenced, flattened into one hex blob (pointer fields
//! rewritten to byte offsets into that blob); `txn` records carry just the
//! parcel bytes of a single transaction with its metadata alongside. Replay
//! turns both back into decoded audit records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{decode_transaction, AuditRecord, ProcessIdentity};
use crate::parcel::DecodeOptions;
use crate::sigtable::SignatureTable;
use crate::wire::{
    classify_command, extract_transaction, iterate_commands, parse_write_read, CommandKind,
    InlineResolver, RawTransactionData, TransactionRecord, BINDER_WRITE_READ_SIZE,
};

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    /// A whole BINDER_WRITE_READ ioctl: 48-byte argument block plus
    /// referenced buffers, pointers rewritten to blob offsets.
    Ioctl,
    /// One transaction's parcel bytes with metadata in the envelope.
    Txn,
}

/// One captured event, as stored in capture JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub ts_ns: u64,
    pub pid: u32,
    pub uid: u32,
    pub kind: RecordKind,
    /// The payload: for `ioctl` the flattened blob, for `txn` the parcel.
    pub hex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_size: Option<u64>,
}

/// Command tallies across a replay.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReplayStats {
    pub transactions: u64,
    pub replies: u64,
    pub other_commands: u64,
    pub errors: u64,
}

/// A record (or command within one) that could not be replayed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayIssue {
    /// Index of the offending record in the input.
    pub record: usize,
    pub msg: String,
}

#[derive(Debug, Default)]
pub struct ReplayOutput {
    pub records: Vec<AuditRecord>,
    pub stats: ReplayStats,
    pub issues: Vec<ReplayIssue>,
}

/// Parse capture JSONL; blank lines and `#` comments are skipped.
pub fn parse_capture(text: &str) -> Result<Vec<CaptureRecord>, CaptureError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec: CaptureRecord = serde_json::from_str(line).map_err(|e| CaptureError::Line {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Replay captured records into audit records.
///
/// Malformed records are reported as issues and counted in `stats.errors`;
/// replay continues with the rest.
pub fn replay_capture(
    records: &[CaptureRecord],
    table: &SignatureTable,
    opts: &DecodeOptions,
) -> ReplayOutput {
    let mut out = ReplayOutput::default();
    for (idx, rec) in records.iter().enumerate() {
        let fail = |out: &mut ReplayOutput, msg: String| {
            out.stats.errors += 1;
            out.issues.push(ReplayIssue { record: idx, msg });
        };
        let bytes = match hex::decode(rec.hex.trim()) {
            Ok(b) => b,
            Err(e) => {
                fail(&mut out, format!("bad hex payload: {e}"));
                continue;
            }
        };
        let identity = ProcessIdentity {
            ts_ns: rec.ts_ns,
            pid: rec.pid,
            uid: rec.uid,
        };
        match rec.kind {
            RecordKind::Txn => {
                let declared = rec.data_size.unwrap_or(bytes.len() as u64);
                if declared != bytes.len() as u64 {
                    fail(
                        &mut out,
                        format!(
                            "data_size {declared} does not match payload length {}",
                            bytes.len()
                        ),
                    );
                    continue;
                }
                let txn = TransactionRecord {
                    target_handle: 0,
                    cookie: 0,
                    code: rec.code.unwrap_or(0),
                    flags: rec.flags.unwrap_or(0),
                    sender_pid: rec.pid,
                    sender_euid: rec.uid,
                    data_size: bytes.len() as u64,
                    offsets_size: 0,
                    buffer: bytes,
                    offsets: Vec::new(),
                };
                out.records.push(decode_transaction(&txn, table, identity, opts));
                out.stats.transactions += 1;
            }
            RecordKind::Ioctl => {
                let bwr = match parse_write_read(&bytes) {
                    Ok(b) => b,
                    Err(e) => {
                        fail(&mut out, format!("bad ioctl argument block: {e}"));
                        continue;
                    }
                };
                let resolver = InlineResolver { blob: &bytes };
                let start = crate::pipeline::mask_user_address(bwr.write_buffer) as usize;
                let end = start.saturating_add(bwr.write_size as usize);
                let Some(stream) = bytes.get(start..end) else {
                    fail(
                        &mut out,
                        format!(
                            "write buffer [{start}, {end}) outside blob of {} bytes",
                            bytes.len()
                        ),
                    );
                    continue;
                };
                for cmd in iterate_commands(stream) {
                    let cmd = match cmd {
                        Ok(c) => c,
                        Err(e) => {
                            fail(&mut out, format!("command stream: {e}"));
                            break;
                        }
                    };
                    match cmd.kind() {
                        CommandKind::Transaction | CommandKind::TransactionSg => {
                            match extract_transaction(&cmd, &resolver) {
                                Ok(txn) => {
                                    out.records.push(decode_transaction(
                                        &txn, table, identity, opts,
                                    ));
                                    out.stats.transactions += 1;
                                }
                                Err(e) => fail(&mut out, format!("transaction: {e}")),
                            }
                        }
                        // Replies have no interface token, so there is
                        // nothing to decode against the table; they are
                        // tallied.
                        CommandKind::Reply | CommandKind::ReplySg => out.stats.replies += 1,
                        _ => out.stats.other_commands += 1,
                    }
                }
            }
        }
    }
    out
}

/// Builds the flattened blob an `ioctl` capture record stores.
///
/// Layout: 48-byte BINDER_WRITE_READ block, then referenced data, then the
/// command stream. `add_data` returns a blob offset that is already valid to
/// use in pointer fields (optionally with tag bits ORed in: replay masks
/// them off).
#[derive(Debug, Default)]
pub struct IoctlBlobBuilder {
    data: Vec<u8>,
    stream: Vec<u8>,
}

impl IoctlBlobBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append referenced data; returns its final blob offset.
    pub fn add_data(&mut self, bytes: &[u8]) -> u64 {
        let off = BINDER_WRITE_READ_SIZE + self.data.len();
        self.data.extend_from_slice(bytes);
        off as u64
    }

    /// Append a raw command with an arbitrary payload.
    pub fn add_command(&mut self, code: u32, payload: &[u8]) {
        self.stream.extend_from_slice(&code.to_le_bytes());
        self.stream.extend_from_slice(payload);
    }

    /// Append a transaction command; `raw.buffer_ptr`/`raw.offsets_ptr`
    /// should hold offsets from [`IoctlBlobBuilder::add_data`].
    pub fn add_transaction(&mut self, code: u32, raw: &RawTransactionData) {
        debug_assert!(matches!(
            classify_command(code),
            CommandKind::Transaction | CommandKind::Reply
        ));
        self.add_command(code, &raw.to_bytes());
    }

    pub fn finish(&self) -> Vec<u8> {
        let bwr = crate::wire::BinderWriteRead {
            write_size: self.stream.len() as u64,
            write_consumed: 0,
            write_buffer: (BINDER_WRITE_READ_SIZE + self.data.len()) as u64,
            read_size: 0,
            read_consumed: 0,
            read_buffer: 0,
        };
        let mut blob = bwr.to_bytes().to_vec();
        blob.extend_from_slice(&self.data);
        blob.extend_from_slice(&self.stream);
        blob
    }
}
