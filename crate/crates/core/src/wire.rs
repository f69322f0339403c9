//! Binder driver wire structures: the `binder_write_read` ioctl argument,
//! the command stream inside its write buffer, and the transaction payload.
//!
//! Everything here is little-endian and mirrors the 64-bit kernel ABI. A
//! tracer snapshots these bytes at the ioctl boundary; this module walks them
//! without touching the parcel payload, which [`crate::parcel`] handles.

use thiserror::Error;

/// Size of `struct binder_write_read` on a 64-bit kernel.
pub const BINDER_WRITE_READ_SIZE: usize = 48;

/// Size of `struct binder_transaction_data` on a 64-bit kernel.
pub const TRANSACTION_DATA_SIZE: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("input truncated: need {need} bytes, have {have}")]
    TruncatedInput { need: usize, have: usize },
    #[error("command 0x{code:08x} at offset {offset} declares {declared}-byte payload, only {available} left")]
    TruncatedCommand {
        code: u32,
        offset: usize,
        declared: usize,
        available: usize,
    },
    #[error("transaction payload must be {TRANSACTION_DATA_SIZE} bytes, got {0}")]
    BadPayloadSize(usize),
    #[error("cannot resolve {len} bytes of transaction data at address 0x{addr:x}")]
    UnresolvableData { addr: u64, len: u64 },
    #[error("offsets_size {0} is not a multiple of 8")]
    InvalidOffsetsSize(u64),
}

/// ioctl command-code encoding (dir/size/type/nr bit fields), as used for
/// both the driver ioctls and the command words in the write buffer.
pub mod ioctl {
    pub const NR_SHIFT: u32 = 0;
    pub const TYPE_SHIFT: u32 = 8;
    pub const SIZE_SHIFT: u32 = 16;
    pub const DIR_SHIFT: u32 = 30;

    pub const DIR_NONE: u32 = 0;
    pub const DIR_WRITE: u32 = 1;
    pub const DIR_READ: u32 = 2;

    pub const fn code(dir: u32, ty: u8, nr: u8, size: u16) -> u32 {
        (dir << DIR_SHIFT)
            | ((size as u32) << SIZE_SHIFT)
            | ((ty as u32) << TYPE_SHIFT)
            | ((nr as u32) << NR_SHIFT)
    }

    pub const fn io(ty: u8, nr: u8) -> u32 {
        code(DIR_NONE, ty, nr, 0)
    }

    pub const fn iow(ty: u8, nr: u8, size: u16) -> u32 {
        code(DIR_WRITE, ty, nr, size)
    }

    pub const fn ior(ty: u8, nr: u8, size: u16) -> u32 {
        code(DIR_READ, ty, nr, size)
    }

    pub const fn iowr(ty: u8, nr: u8, size: u16) -> u32 {
        code(DIR_READ | DIR_WRITE, ty, nr, size)
    }

    /// Payload size embedded in a command code (bits 16..30).
    pub const fn payload_size(code: u32) -> usize {
        ((code >> SIZE_SHIFT) & 0x3fff) as usize
    }

    /// Type character embedded in a command code (bits 8..16).
    pub const fn type_char(code: u32) -> u8 {
        ((code >> TYPE_SHIFT) & 0xff) as u8
    }

    /// Command number embedded in a command code (bits 0..8).
    pub const fn nr(code: u32) -> u8 {
        (code & 0xff) as u8
    }
}

/// The ioctl that carries Binder traffic; its argument is [`BinderWriteRead`].
pub const BINDER_WRITE_READ: u32 = ioctl::iowr(b'b', 1, BINDER_WRITE_READ_SIZE as u16);

// Userspace-to-driver commands ('c' type space). Only the ones the decoder
// cares about get named constants; everything else is classified by family.
pub const BC_TRANSACTION: u32 = ioctl::iow(b'c', 0, TRANSACTION_DATA_SIZE as u16);
pub const BC_REPLY: u32 = ioctl::iow(b'c', 1, TRANSACTION_DATA_SIZE as u16);
pub const BC_FREE_BUFFER: u32 = ioctl::iow(b'c', 3, 8);
pub const BC_INCREFS: u32 = ioctl::iow(b'c', 4, 4);
pub const BC_ACQUIRE: u32 = ioctl::iow(b'c', 5, 4);
pub const BC_RELEASE: u32 = ioctl::iow(b'c', 6, 4);
pub const BC_DECREFS: u32 = ioctl::iow(b'c', 7, 4);
pub const BC_ENTER_LOOPER: u32 = ioctl::io(b'c', 12);
pub const BC_EXIT_LOOPER: u32 = ioctl::io(b'c', 13);
// The scatter-gather variants append a u64 buffer total to the payload.
pub const BC_TRANSACTION_SG: u32 = ioctl::iow(b'c', 17, (TRANSACTION_DATA_SIZE + 8) as u16);
pub const BC_REPLY_SG: u32 = ioctl::iow(b'c', 18, (TRANSACTION_DATA_SIZE + 8) as u16);

/// What a command word in the stream means to the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    /// An outbound call: the one payload we fully decode.
    Transaction,
    /// An outbound reply; recognized and counted, not decoded.
    Reply,
    /// Scatter-gather transaction (payload = transaction data + buffer total).
    TransactionSg,
    /// Scatter-gather reply.
    ReplySg,
    /// Any other userspace command ('c' space), e.g. ref counting or looper
    /// control.
    OtherCommand,
    /// A driver-to-userspace return ('r' space); these normally live in the
    /// read buffer but are classified if they show up.
    DriverReturn,
    /// Not a Binder command word we know.
    Unknown,
}

/// Classify a raw command word.
pub fn classify_command(code: u32) -> CommandKind {
    match code {
        BC_TRANSACTION => CommandKind::Transaction,
        BC_REPLY => CommandKind::Reply,
        BC_TRANSACTION_SG => CommandKind::TransactionSg,
        BC_REPLY_SG => CommandKind::ReplySg,
        _ => match ioctl::type_char(code) {
            b'c' => CommandKind::OtherCommand,
            b'r' => CommandKind::DriverReturn,
            _ => CommandKind::Unknown,
        },
    }
}

/// Parsed `struct binder_write_read`: six u64 fields describing the write
/// and read buffers handed to the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BinderWriteRead {
    pub write_size: u64,
    pub write_consumed: u64,
    pub write_buffer: u64,
    pub read_size: u64,
    pub read_consumed: u64,
    pub read_buffer: u64,
}

fn u64_at(bytes: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
}

fn u32_at(bytes: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

/// Parse the 48-byte `binder_write_read` struct from the start of `bytes`.
pub fn parse_write_read(bytes: &[u8]) -> Result<BinderWriteRead, WireError> {
    if bytes.len() < BINDER_WRITE_READ_SIZE {
        return Err(WireError::TruncatedInput {
            need: BINDER_WRITE_READ_SIZE,
            have: bytes.len(),
        });
    }
    Ok(BinderWriteRead {
        write_size: u64_at(bytes, 0),
        write_consumed: u64_at(bytes, 8),
        write_buffer: u64_at(bytes, 16),
        read_size: u64_at(bytes, 24),
        read_consumed: u64_at(bytes, 32),
        read_buffer: u64_at(bytes, 40),
    })
}

impl BinderWriteRead {
    pub fn to_bytes(&self) -> [u8; BINDER_WRITE_READ_SIZE] {
        let mut out = [0u8; BINDER_WRITE_READ_SIZE];
        for (i, v) in [
            self.write_size,
            self.write_consumed,
            self.write_buffer,
            self.read_size,
            self.read_consumed,
            self.read_buffer,
        ]
        .into_iter()
        .enumerate()
        {
            out[i * 8..i * 8 + 8].copy_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// One command from the write buffer: the raw code word plus its payload
/// bytes (length taken from the size field embedded in the code).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinderCommand<'a> {
    pub code: u32,
    pub offset: usize,
    pub payload: &'a [u8],
}

impl BinderCommand<'_> {
    pub fn kind(&self) -> CommandKind {
        classify_command(self.code)
    }
}

/// Iterator over the command stream in a write buffer.
///
/// Iteration starts at offset 0 of the given slice; replaying a live capture
/// of a partially consumed buffer means slicing at `write_consumed` first.
/// The cursor advances 4 bytes for the code word plus the payload length the
/// code declares. A command whose declared payload overruns the buffer yields
/// one `TruncatedCommand` error and ends iteration.
pub struct CommandIter<'a> {
    buf: &'a [u8],
    pos: usize,
    failed: bool,
}

/// Walk the command words in `write_buf`.
pub fn iterate_commands(write_buf: &[u8]) -> CommandIter<'_> {
    CommandIter {
        buf: write_buf,
        pos: 0,
        failed: false,
    }
}

impl<'a> Iterator for CommandIter<'a> {
    type Item = Result<BinderCommand<'a>, WireError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.pos >= self.buf.len() {
            return None;
        }
        let offset = self.pos;
        if self.buf.len() - offset < 4 {
            self.failed = true;
            return Some(Err(WireError::TruncatedCommand {
                code: 0,
                offset,
                declared: 4,
                available: self.buf.len() - offset,
            }));
        }
        let code = u32_at(self.buf, offset);
        let declared = ioctl::payload_size(code);
        let body_start = offset + 4;
        let available = self.buf.len() - body_start;
        if declared > available {
            self.failed = true;
            return Some(Err(WireError::TruncatedCommand {
                code,
                offset,
                declared,
                available,
            }));
        }
        self.pos = body_start + declared;
        Some(Ok(BinderCommand {
            code,
            offset,
            payload: &self.buf[body_start..body_start + declared],
        }))
    }
}

/// `struct binder_transaction_data` as laid out on the wire, before any
/// pointer resolution. Field-for-field mirror of the 64-byte payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RawTransactionData {
    /// Union of target handle (low 32 bits meaningful for outbound calls)
    /// and target pointer; kept whole.
    pub target: u64,
    pub cookie: u64,
    pub code: u32,
    pub flags: u32,
    pub sender_pid: u32,
    pub sender_euid: u32,
    pub data_size: u64,
    pub offsets_size: u64,
    pub buffer_ptr: u64,
    pub offsets_ptr: u64,
}

/// Parse a 64-byte transaction payload into its raw fields.
pub fn parse_transaction_data(payload: &[u8]) -> Result<RawTransactionData, WireError> {
    if payload.len() != TRANSACTION_DATA_SIZE {
        return Err(WireError::BadPayloadSize(payload.len()));
    }
    Ok(RawTransactionData {
        target: u64_at(payload, 0),
        cookie: u64_at(payload, 8),
        code: u32_at(payload, 16),
        flags: u32_at(payload, 20),
        sender_pid: u32_at(payload, 24),
        sender_euid: u32_at(payload, 28),
        data_size: u64_at(payload, 32),
        offsets_size: u64_at(payload, 40),
        buffer_ptr: u64_at(payload, 48),
        offsets_ptr: u64_at(payload, 56),
    })
}

impl RawTransactionData {
    pub fn to_bytes(&self) -> [u8; TRANSACTION_DATA_SIZE] {
        let mut out = [0u8; TRANSACTION_DATA_SIZE];
        out[0..8].copy_from_slice(&self.target.to_le_bytes());
        out[8..16].copy_from_slice(&self.cookie.to_le_bytes());
        out[16..20].copy_from_slice(&self.code.to_le_bytes());
        out[20..24].copy_from_slice(&self.flags.to_le_bytes());
        out[24..28].copy_from_slice(&self.sender_pid.to_le_bytes());
        out[28..32].copy_from_slice(&self.sender_euid.to_le_bytes());
        out[32..40].copy_from_slice(&self.data_size.to_le_bytes());
        out[40..48].copy_from_slice(&self.offsets_size.to_le_bytes());
        out[48..56].copy_from_slice(&self.buffer_ptr.to_le_bytes());
        out[56..64].copy_from_slice(&self.offsets_ptr.to_le_bytes());
        out
    }
}

/// Fetches transaction data bytes that the payload only points at.
///
/// At capture time `buffer_ptr`/`offsets_ptr` were addresses in the traced
/// process; a replay has to supply the bytes from wherever the capture stored
/// them. Addresses are passed through [`crate::pipeline::mask_user_address`]
/// by callers before resolution, so implementations see untagged values.
pub trait DataResolver {
    fn resolve(&self, addr: u64, len: u64) -> Option<Vec<u8>>;
}

impl<F> DataResolver for F
where
    F: Fn(u64, u64) -> Option<Vec<u8>>,
{
    fn resolve(&self, addr: u64, len: u64) -> Option<Vec<u8>> {
        self(addr, len)
    }
}

/// Resolver for self-contained capture blobs: addresses are byte offsets
/// into one slice.
pub struct InlineResolver<'a> {
    pub blob: &'a [u8],
}

impl DataResolver for InlineResolver<'_> {
    fn resolve(&self, addr: u64, len: u64) -> Option<Vec<u8>> {
        let start = usize::try_from(addr).ok()?;
        let len = usize::try_from(len).ok()?;
        let end = start.checked_add(len)?;
        self.blob.get(start..end).map(|s| s.to_vec())
    }
}

/// A transaction with its pointed-at data materialized: what the parcel
/// decoder consumes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionRecord {
    pub target_handle: u32,
    pub cookie: u64,
    pub code: u32,
    pub flags: u32,
    pub sender_pid: u32,
    pub sender_euid: u32,
    pub data_size: u64,
    pub offsets_size: u64,
    /// The transaction data buffer (the parcel bytes), `data_size` long.
    pub buffer: Vec<u8>,
    /// The offsets array bytes (u64 entries), `offsets_size` long.
    pub offsets: Vec<u8>,
}

/// Parse a transaction command's payload and materialize its data buffer and
/// offsets array through `resolver`.
///
/// Pointer values are untagged with the low-40-bit user-address mask before
/// resolution. Zero-length regions resolve to empty without consulting the
/// resolver, matching a kernel that ignores the pointers in that case.
pub fn extract_transaction<R: DataResolver>(
    cmd: &BinderCommand<'_>,
    resolver: &R,
) -> Result<TransactionRecord, WireError> {
    // SG payloads carry the same 64 bytes plus a buffers-size total we can
    // safely ignore for decoding.
    let base = match cmd.kind() {
        CommandKind::TransactionSg | CommandKind::ReplySg => {
            &cmd.payload[..cmd.payload.len().min(TRANSACTION_DATA_SIZE)]
        }
        _ => cmd.payload,
    };
    let raw = parse_transaction_data(base)?;
    if raw.offsets_size % 8 != 0 {
        return Err(WireError::InvalidOffsetsSize(raw.offsets_size));
    }
    let fetch = |ptr: u64, len: u64| -> Result<Vec<u8>, WireError> {
        if len == 0 {
            return Ok(Vec::new());
        }
        let addr = crate::pipeline::mask_user_address(ptr);
        resolver
            .resolve(addr, len)
            .ok_or(WireError::UnresolvableData { addr, len })
    };
    let buffer = fetch(raw.buffer_ptr, raw.data_size)?;
    let offsets = fetch(raw.offsets_ptr, raw.offsets_size)?;
    Ok(TransactionRecord {
        target_handle: raw.target as u32,
        cookie: raw.cookie,
        code: raw.code,
        flags: raw.flags,
        sender_pid: raw.sender_pid,
        sender_euid: raw.sender_euid,
        data_size: raw.data_size,
        offsets_size: raw.offsets_size,
        buffer,
        offsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_constants_match_expected_encodings() {
        // Frozen expected values, written out independently of the formula.
        let expected: &[(u32, u32)] = &[
            (BINDER_WRITE_READ, 0xc030_6201),
            (BC_TRANSACTION, 0x4040_6300),
            (BC_REPLY, 0x4040_6301),
            (BC_FREE_BUFFER, 0x4008_6303),
            (BC_INCREFS, 0x4004_6304),
            (BC_ACQUIRE, 0x4004_6305),
            (BC_RELEASE, 0x4004_6306),
            (BC_DECREFS, 0x4004_6307),
            (BC_ENTER_LOOPER, 0x0000_630c),
            (BC_EXIT_LOOPER, 0x0000_630d),
            (BC_TRANSACTION_SG, 0x4048_6311),
            (BC_REPLY_SG, 0x4048_6312),
        ];
        for &(got, want) in expected {
            assert_eq!(got, want, "0x{got:08x} != 0x{want:08x}");
        }
    }

    #[test]
    fn command_code_fields_round_trip() {
        assert_eq!(ioctl::payload_size(BC_TRANSACTION), 64);
        assert_eq!(ioctl::type_char(BC_TRANSACTION), b'c');
        assert_eq!(ioctl::nr(BC_TRANSACTION), 0);
        assert_eq!(ioctl::payload_size(BC_ENTER_LOOPER), 0);
        assert_eq!(ioctl::payload_size(BINDER_WRITE_READ), 48);
    }

    #[test]
    fn classify_covers_families() {
        assert_eq!(classify_command(BC_TRANSACTION), CommandKind::Transaction);
        assert_eq!(classify_command(BC_REPLY), CommandKind::Reply);
        assert_eq!(classify_command(BC_FREE_BUFFER), CommandKind::OtherCommand);
        assert_eq!(classify_command(BC_ENTER_LOOPER), CommandKind::OtherCommand);
        // BR_NOOP = _IO('r', 12)
        assert_eq!(classify_command(ioctl::io(b'r', 12)), CommandKind::DriverReturn);
        assert_eq!(classify_command(0xdead_beef), CommandKind::Unknown);
    }

    #[test]
    fn parse_write_read_reads_all_six_fields() {
        let bwr = BinderWriteRead {
            write_size: 76,
            write_consumed: 0,
            write_buffer: 0x7fff_1234_5678,
            read_size: 256,
            read_consumed: 32,
            read_buffer: 0x7fff_8765_4321,
        };
        assert_eq!(parse_write_read(&bwr.to_bytes()).unwrap(), bwr);
    }

    #[test]
    fn parse_write_read_zeros() {
        let parsed = parse_write_read(&[0u8; 48]).unwrap();
        assert_eq!(parsed, BinderWriteRead::default());
    }

    #[test]
    fn parse_write_read_rejects_short_input() {
        assert_eq!(
            parse_write_read(&[0u8; 47]),
            Err(WireError::TruncatedInput { need: 48, have: 47 })
        );
    }

    #[test]
    fn iterate_empty_buffer_yields_nothing() {
        assert_eq!(iterate_commands(&[]).count(), 0);
    }

    #[test]
    fn iterate_single_transaction() {
        let mut buf = BC_TRANSACTION.to_le_bytes().to_vec();
        buf.extend_from_slice(&[0u8; 64]);
        let cmds: Vec<_> = iterate_commands(&buf).collect::<Result<_, _>>().unwrap();
        assert_eq!(cmds.len(), 1);
        assert_eq!(cmds[0].kind(), CommandKind::Transaction);
        assert_eq!(cmds[0].payload.len(), 64);
        assert_eq!(cmds[0].offset, 0);
    }

    #[test]
    fn iterate_mixed_stream_advances_by_declared_size() {
        let mut buf = Vec::new();
        buf.extend_from_slice(&BC_ENTER_LOOPER.to_le_bytes());
        buf.extend_from_slice(&BC_FREE_BUFFER.to_le_bytes());
        buf.extend_from_slice(&0x1122_3344_5566_7788u64.to_le_bytes());
        buf.extend_from_slice(&BC_TRANSACTION.to_le_bytes());
        buf.extend_from_slice(&[7u8; 64]);
        let cmds: Vec<_> = iterate_commands(&buf).collect::<Result<_, _>>().unwrap();
        assert_eq!(cmds.len(), 3);
        assert_eq!(cmds[0].payload.len(), 0);
        assert_eq!(cmds[1].payload.len(), 8);
        assert_eq!(cmds[2].offset, 4 + 4 + 8);
        assert_eq!(cmds[2].payload, &[7u8; 64][..]);
    }

    #[test]
    fn iterate_truncated_payload_errors_and_stops() {
        let mut buf = BC_TRANSACTION.to_le_bytes().to_vec();
        buf.extend_from_slice(&[0u8; 20]);
        let mut it = iterate_commands(&buf);
        match it.next() {
            Some(Err(WireError::TruncatedCommand {
                code,
                offset,
                declared,
                available,
            })) => {
                assert_eq!(code, BC_TRANSACTION);
                assert_eq!(offset, 0);
                assert_eq!(declared, 64);
                assert_eq!(available, 20);
            }
            other => panic!("expected TruncatedCommand, got {other:?}"),
        }
        assert!(it.next().is_none());
    }

    #[test]
    fn unknown_commands_are_flagged_not_fatal() {
        // An unknown word with zero payload size still iterates.
        let mut buf = 0x0000_5a00u32.to_le_bytes().to_vec();
        buf.extend_from_slice(&BC_ENTER_LOOPER.to_le_bytes());
        let cmds: Vec<_> = iterate_commands(&buf).collect::<Result<_, _>>().unwrap();
        assert_eq!(cmds.len(), 2);
        assert_eq!(cmds[0].kind(), CommandKind::Unknown);
        assert_eq!(cmds[1].kind(), CommandKind::OtherCommand);
    }

    #[test]
    fn transaction_data_round_trips() {
        let raw = RawTransactionData {
            target: 0x77,
            cookie: 0xdead,
            code: 5,
            flags: 0x12,
            sender_pid: 10119,
            sender_euid: 10188,
            data_size: 200,
            offsets_size: 8,
            buffer_ptr: 0xb400_0071_2345_6780,
            offsets_ptr: 0xb400_0071_2345_6850,
        };
        assert_eq!(parse_transaction_data(&raw.to_bytes()).unwrap(), raw);
    }

    #[test]
    fn parse_transaction_data_wants_exact_size() {
        assert_eq!(
            parse_transaction_data(&[0u8; 63]),
            Err(WireError::BadPayloadSize(63))
        );
        assert_eq!(
            parse_transaction_data(&[0u8; 65]),
            Err(WireError::BadPayloadSize(65))
        );
    }

    fn txn_command_bytes(raw: &RawTransactionData) -> Vec<u8> {
        let mut buf = BC_TRANSACTION.to_le_bytes().to_vec();
        buf.extend_from_slice(&raw.to_bytes());
        buf
    }

    #[test]
    fn extract_transaction_resolves_buffer_and_offsets() {
        let data = vec![0xabu8; 16];
        let offsets = 8u64.to_le_bytes().to_vec();
        let raw = RawTransactionData {
            target: 3,
            code: 9,
            flags: 1,
            data_size: 16,
            offsets_size: 8,
            buffer_ptr: 1000,
            offsets_ptr: 2000,
            ..Default::default()
        };
        let buf = txn_command_bytes(&raw);
        let cmd = iterate_commands(&buf).next().unwrap().unwrap();
        let data_clone = data.clone();
        let offsets_clone = offsets.clone();
        let resolver = move |addr: u64, len: u64| match (addr, len) {
            (1000, 16) => Some(data_clone.clone()),
            (2000, 8) => Some(offsets_clone.clone()),
            _ => None,
        };
        let rec = extract_transaction(&cmd, &resolver).unwrap();
        assert_eq!(rec.code, 9);
        assert_eq!(rec.target_handle, 3);
        assert_eq!(rec.buffer, data);
        assert_eq!(rec.offsets, offsets);
    }

    #[test]
    fn extract_transaction_masks_tagged_pointers() {
        // Same offsets as above but with MTE-style tag bits set above bit 40.
        let raw = RawTransactionData {
            data_size: 4,
            buffer_ptr: 0x0b00_0000_0000_03e8, // tag byte 0x0b, addr 1000
            ..Default::default()
        };
        let buf = txn_command_bytes(&raw);
        let cmd = iterate_commands(&buf).next().unwrap().unwrap();
        let resolver =
            |addr: u64, len: u64| (addr == 1000 && len == 4).then(|| vec![1, 2, 3, 4]);
        let rec = extract_transaction(&cmd, &resolver).unwrap();
        assert_eq!(rec.buffer, vec![1, 2, 3, 4]);
    }

    #[test]
    fn extract_transaction_empty_sizes_skip_resolution() {
        let raw = RawTransactionData {
            code: 1,
            buffer_ptr: 0xffff_ffff_ffff_ffff,
            offsets_ptr: 0xffff_ffff_ffff_ffff,
            ..Default::default()
        };
        let buf = txn_command_bytes(&raw);
        let cmd = iterate_commands(&buf).next().unwrap().unwrap();
        let resolver = |_: u64, _: u64| -> Option<Vec<u8>> { panic!("must not resolve") };
        let rec = extract_transaction(&cmd, &resolver).unwrap();
        assert!(rec.buffer.is_empty());
        assert!(rec.offsets.is_empty());
    }

    #[test]
    fn extract_transaction_unresolvable_data() {
        let raw = RawTransactionData {
            data_size: 64,
            buffer_ptr: 0x5000,
            ..Default::default()
        };
        let buf = txn_command_bytes(&raw);
        let cmd = iterate_commands(&buf).next().unwrap().unwrap();
        let resolver = |_: u64, _: u64| -> Option<Vec<u8>> { None };
        assert_eq!(
            extract_transaction(&cmd, &resolver),
            Err(WireError::UnresolvableData {
                addr: 0x5000,
                len: 64
            })
        );
    }

    #[test]
    fn extract_transaction_rejects_misaligned_offsets_size() {
        let raw = RawTransactionData {
            offsets_size: 12,
            ..Default::default()
        };
        let buf = txn_command_bytes(&raw);
        let cmd = iterate_commands(&buf).next().unwrap().unwrap();
        let resolver = |_: u64, _: u64| -> Option<Vec<u8>> { Some(Vec::new()) };
        assert_eq!(
            extract_transaction(&cmd, &resolver),
            Err(WireError::InvalidOffsetsSize(12))
        );
    }
}
