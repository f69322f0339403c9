//! Compact on-the-wire encoding for syscall events, built for a tracer that
//! must move high event rates out of the kernel with minimal bytes.
//!
//! Three ideas keep records small:
//!
//! * one type byte identifies `(syscall, phase)` for the architecture's
//!   traced set, so the record needs neither a syscall number nor a phase
//!   flag;
//! * timestamps are unsigned LEB128 varint deltas against the previous
//!   record, quantized to a configurable clock granularity;
//! * enter records pack arguments per the catalog's width schema (4 bytes
//!   for fds/flags/ids, 8 for pointers and sizes) instead of six u64s, and
//!   exit records carry only the return value.
//!
//! A record whose timestamp would step backwards (clock adjustment, per-CPU
//! reordering) is preceded by a resync marker byte `0xFF` carrying the
//! absolute timestamp.
//!
//! Record layout, after the optional resync `[0xFF][abs_ts i64 LE]`:
//! `[type u8][ts_delta varint][pid u32 LE][tgid u32 LE][args per schema |
//! ret i64 LE]`.

use std::collections::HashMap;
use std::sync::LazyLock;

use thiserror::Error;

use crate::syscalls::{catalog, traced_set, Arch, ArgWidth, Phase, SyscallEvent};

/// Marker byte introducing a resync record.
pub const RESYNC_MARKER: u8 = 0xff;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("syscall nr {nr} is not traced on {arch}")]
    UntracedSyscall { nr: u32, arch: &'static str },
    #[error("{name} takes {expected} args, event has {got}")]
    ArgMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("cannot encode phase {0:?}; split joined events first")]
    UnencodablePhase(&'static str),
    #[error("exit event for {0} has no return value")]
    MissingRet(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unknown type code 0x{0:02x}")]
    UnknownTypeCode(u8),
    #[error("record truncated at byte {0}")]
    Truncated(usize),
    #[error("varint longer than 10 bytes at byte {0}")]
    VarintOverflow(usize),
}

struct TypeTable {
    // name -> type code of the enter record (exit = +1)
    enter_code: HashMap<&'static str, u8>,
    // type code -> (name, phase)
    by_code: HashMap<u8, (&'static str, Phase)>,
}

fn type_table(arch: Arch) -> &'static TypeTable {
    static TABLES: LazyLock<[TypeTable; 2]> = LazyLock::new(|| {
        let build = |arch: Arch| {
            let mut enter_code = HashMap::new();
            let mut by_code = HashMap::new();
            // BTreeSet iteration is sorted, which pins the code assignment.
            for (idx, name) in traced_set(arch).into_iter().enumerate() {
                let code = (idx * 2) as u8;
                enter_code.insert(name, code);
                by_code.insert(code, (name, Phase::Enter));
                by_code.insert(code + 1, (name, Phase::Exit));
            }
            TypeTable {
                enter_code,
                by_code,
            }
        };
        [build(Arch::Arm64), build(Arch::X86_64)]
    });
    match arch {
        Arch::Arm64 => &TABLES[0],
        Arch::X86_64 => &TABLES[1],
    }
}

fn push_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            break;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, DecodeError> {
    let mut v: u64 = 0;
    let mut shift = 0;
    loop {
        let byte = *bytes.get(*pos).ok_or(DecodeError::Truncated(*pos))?;
        *pos += 1;
        if shift >= 64 {
            return Err(DecodeError::VarintOverflow(*pos));
        }
        v |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

/// Streaming encoder; carries the timestamp state between records.
pub struct EventEncoder {
    arch: Arch,
    granularity_ns: u64,
    /// Quantized timestamp of the previous record, in granularity units.
    prev_units: Option<i64>,
}

impl EventEncoder {
    /// `granularity_ns` is the clock quantum for delta timestamps; decoded
    /// timestamps are exact multiples of it.
    pub fn new(arch: Arch, granularity_ns: u64) -> Self {
        assert!(granularity_ns > 0, "granularity must be positive");
        EventEncoder {
            arch,
            granularity_ns,
            prev_units: None,
        }
    }

    /// Encode one enter or exit event, prefixing a resync record when the
    /// clock steps backwards or this is the first record.
    pub fn encode(&mut self, ev: &SyscallEvent) -> Result<Vec<u8>, EncodeError> {
        if ev.phase == Phase::Joined {
            return Err(EncodeError::UnencodablePhase("Joined"));
        }
        let spec = catalog()
            .by_nr(self.arch, ev.nr)
            .filter(|s| s.traced_on(self.arch))
            .ok_or(EncodeError::UntracedSyscall {
                nr: ev.nr,
                arch: self.arch.label(),
            })?;
        if ev.phase == Phase::Enter && ev.args.len() != spec.arg_schema.len() {
            return Err(EncodeError::ArgMismatch {
                name: spec.name.clone(),
                expected: spec.arg_schema.len(),
                got: ev.args.len(),
            });
        }
        let base = type_table(self.arch).enter_code[spec.name.as_str()];
        let type_code = match ev.phase {
            Phase::Enter => base,
            Phase::Exit => base + 1,
            Phase::Joined => unreachable!(),
        };

        let mut out = Vec::with_capacity(24);
        let units = ev.ts_ns.div_euclid(self.granularity_ns as i64);
        let delta = match self.prev_units {
            Some(prev) if units >= prev => (units - prev) as u64,
            _ => {
                // First record or clock regression: resync to the absolute
                // timestamp, then the delta is zero.
                out.push(RESYNC_MARKER);
                out.extend_from_slice(&ev.ts_ns.to_le_bytes());
                0
            }
        };
        self.prev_units = Some(units);

        out.push(type_code);
        push_varint(&mut out, delta);
        out.extend_from_slice(&ev.pid.to_le_bytes());
        out.extend_from_slice(&ev.tgid.to_le_bytes());
        match ev.phase {
            Phase::Enter => {
                for (arg, width) in ev.args.iter().zip(&spec.arg_schema) {
                    match width {
                        ArgWidth::W4 => out.extend_from_slice(&(*arg as u32).to_le_bytes()),
                        ArgWidth::W8 => out.extend_from_slice(&arg.to_le_bytes()),
                    }
                }
            }
            Phase::Exit => {
                let ret = ev
                    .ret
                    .ok_or_else(|| EncodeError::MissingRet(spec.name.clone()))?;
                out.extend_from_slice(&ret.to_le_bytes());
            }
            Phase::Joined => unreachable!(),
        }
        Ok(out)
    }
}

/// Streaming decoder, the inverse of [`EventEncoder`].
pub struct EventDecoder {
    arch: Arch,
    granularity_ns: u64,
    prev_units: Option<i64>,
}

impl EventDecoder {
    pub fn new(arch: Arch, granularity_ns: u64) -> Self {
        assert!(granularity_ns > 0, "granularity must be positive");
        EventDecoder {
            arch,
            granularity_ns,
            prev_units: None,
        }
    }

    /// Decode one event from the front of `bytes`; returns the event and the
    /// bytes consumed (including any leading resync record).
    pub fn decode(&mut self, bytes: &[u8]) -> Result<(SyscallEvent, usize), DecodeError> {
        let mut pos = 0;
        loop {
            let type_code = *bytes.get(pos).ok_or(DecodeError::Truncated(pos))?;
            if type_code == RESYNC_MARKER {
                let end = pos + 9;
                let ts_bytes = bytes.get(pos + 1..end).ok_or(DecodeError::Truncated(pos))?;
                let abs_ts = i64::from_le_bytes(ts_bytes.try_into().unwrap());
                self.prev_units = Some(abs_ts.div_euclid(self.granularity_ns as i64));
                pos = end;
                continue;
            }
            pos += 1;
            let (name, phase) = *type_table(self.arch)
                .by_code
                .get(&type_code)
                .ok_or(DecodeError::UnknownTypeCode(type_code))?;
            let spec = catalog().by_name(name).unwrap();
            let delta = read_varint(bytes, &mut pos)?;
            let units = self.prev_units.unwrap_or(0) + delta as i64;
            self.prev_units = Some(units);
            let mut take = |n: usize| -> Result<&[u8], DecodeError> {
                let s = bytes.get(pos..pos + n).ok_or(DecodeError::Truncated(pos))?;
                pos += n;
                Ok(s)
            };
            let pid = u32::from_le_bytes(take(4)?.try_into().unwrap());
            let tgid = u32::from_le_bytes(take(4)?.try_into().unwrap());
            let (args, ret) = match phase {
                Phase::Enter => {
                    let mut args = Vec::with_capacity(spec.arg_schema.len());
                    for width in &spec.arg_schema {
                        let v = match width {
                            ArgWidth::W4 => {
                                u64::from(u32::from_le_bytes(take(4)?.try_into().unwrap()))
                            }
                            ArgWidth::W8 => u64::from_le_bytes(take(8)?.try_into().unwrap()),
                        };
                        args.push(v);
                    }
                    (args, None)
                }
                Phase::Exit => {
                    let ret = i64::from_le_bytes(take(8)?.try_into().unwrap());
                    (Vec::new(), Some(ret))
                }
                Phase::Joined => unreachable!(),
            };
            return Ok((
                SyscallEvent {
                    ts_ns: units * self.granularity_ns as i64,
                    pid,
                    tgid,
                    nr: spec.nr(self.arch).unwrap(),
                    args,
                    ret,
                    phase,
                },
                pos,
            ));
        }
    }

    /// Decode a whole buffer of records.
    pub fn decode_stream(&mut self, bytes: &[u8]) -> Result<Vec<SyscallEvent>, DecodeError> {
        let mut out = Vec::new();
        let mut off = 0;
        while off < bytes.len() {
            let (ev, used) = self.decode(&bytes[off..])?;
            out.push(ev);
            off += used;
        }
        Ok(out)
    }
}
