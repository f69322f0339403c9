//! Reader for the Parcel wire format inside a transaction data buffer.
//!
//! A remote call's buffer opens with a 12-byte interface header (strict-mode
//! policy word, work-source uid, a header magic) followed by the interface
//! token as a UTF-16 string, then the marshaled arguments back to back. All
//! scalars are little-endian; every read leaves the cursor 4-byte aligned,
//! which is what lets a signature drive decoding without a length prefix per
//! argument.

use serde::Serialize;
use thiserror::Error;

/// Value of `work_source_uid` when no work source was set on the calling
/// thread.
pub const WORK_SOURCE_UNSET: u32 = 0xffff_ffff;

// Object type tags: four ASCII bytes packed little-endian, so the byte
// sequence on the wire reads tag-first. E.g. HANDLE = 'sh*\x85'.
pub const BINDER_TYPE_BINDER: u32 = pack_chars(b's', b'b', b'*', 0x85);
pub const BINDER_TYPE_WEAK_BINDER: u32 = pack_chars(b'w', b'b', b'*', 0x85);
pub const BINDER_TYPE_HANDLE: u32 = pack_chars(b's', b'h', b'*', 0x85);
pub const BINDER_TYPE_WEAK_HANDLE: u32 = pack_chars(b'w', b'h', b'*', 0x85);
pub const BINDER_TYPE_FD: u32 = pack_chars(b'f', b'd', b'*', 0x85);
pub const BINDER_TYPE_FDA: u32 = pack_chars(b'f', b'd', b'a', 0x85);
pub const BINDER_TYPE_PTR: u32 = pack_chars(b'p', b't', b'*', 0x85);

const fn pack_chars(c1: u8, c2: u8, c3: u8, c4: u8) -> u32 {
    ((c1 as u32) << 24) | ((c2 as u32) << 16) | ((c3 as u32) << 8) | (c4 as u32)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParcelError {
    #[error("buffer ends inside the interface header (need {need} bytes at {at}, have {have})")]
    TruncatedHeader { at: usize, need: usize, have: usize },
    #[error("buffer ends inside a string at offset {at}")]
    TruncatedString { at: usize },
    #[error("buffer ends inside a {what} at offset {at}")]
    TruncatedValue { at: usize, what: &'static str },
    #[error("buffer ends inside a binder object at offset {at}")]
    TruncatedObject { at: usize },
    #[error("string length {len} at offset {at} is negative")]
    NegativeLength { at: usize, len: i32 },
    #[error("invalid UTF-16 data in string at offset {at}")]
    InvalidUtf16 { at: usize },
    #[error("bad binder object at offset {at}: {reason}")]
    MalformedObject { at: usize, reason: String },
}

/// Byte cursor over a transaction data buffer.
#[derive(Debug, Clone)]
pub struct ParcelCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ParcelCursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ParcelCursor { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ParcelError> {
        if self.remaining() < n {
            return Err(ParcelError::TruncatedValue { at: self.pos, what });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn read_u32(&mut self) -> Result<u32, ParcelError> {
        Ok(u32::from_le_bytes(self.take(4, "u32")?.try_into().unwrap()))
    }

    pub fn read_i32(&mut self) -> Result<i32, ParcelError> {
        Ok(i32::from_le_bytes(self.take(4, "i32")?.try_into().unwrap()))
    }

    pub fn read_u64(&mut self) -> Result<u64, ParcelError> {
        Ok(u64::from_le_bytes(self.take(8, "u64")?.try_into().unwrap()))
    }

    pub fn read_i64(&mut self) -> Result<i64, ParcelError> {
        Ok(i64::from_le_bytes(self.take(8, "i64")?.try_into().unwrap()))
    }

    pub fn read_f64(&mut self) -> Result<f64, ParcelError> {
        Ok(f64::from_le_bytes(self.take(8, "f64")?.try_into().unwrap()))
    }
}

/// The fixed words every remote call's parcel starts with, plus the
/// interface token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceHeader {
    pub strict_mode_policy: u32,
    /// uid attributed for the work, [`WORK_SOURCE_UNSET`] when absent.
    pub work_source_uid: u32,
    pub header_magic: u32,
    pub token: String,
}

/// Read the 12-byte header and the interface token string. Leaves the cursor
/// at the first argument.
pub fn read_interface_header(cur: &mut ParcelCursor<'_>) -> Result<InterfaceHeader, ParcelError> {
    let at = cur.position();
    if cur.remaining() < 12 {
        return Err(ParcelError::TruncatedHeader {
            at,
            need: 12,
            have: cur.remaining(),
        });
    }
    let strict_mode_policy = cur.read_u32()?;
    let work_source_uid = cur.read_u32()?;
    let header_magic = cur.read_u32()?;
    let token = match read_string16(cur)? {
        Some(t) => t,
        // A null token never occurs in a real call; surface it as malformed
        // rather than inventing an empty interface.
        None => {
            return Err(ParcelError::MalformedObject {
                at,
                reason: "null interface token".into(),
            })
        }
    };
    Ok(InterfaceHeader {
        strict_mode_policy,
        work_source_uid,
        header_magic,
        token,
    })
}

/// Read a length-prefixed UTF-16 string.
///
/// The 4-byte prefix is the signed character count: -1 means null (and the
/// read consumes exactly those 4 bytes), anything below -1 is an error.
/// Otherwise 2·len bytes of UTF-16LE follow plus a 2-byte terminator, and the
/// cursor skips ahead to the next 4-byte boundary.
pub fn read_string16(cur: &mut ParcelCursor<'_>) -> Result<Option<String>, ParcelError> {
    let at = cur.position();
    let len = cur.read_i32().map_err(|_| ParcelError::TruncatedString { at })?;
    if len == -1 {
        return Ok(None);
    }
    if len < -1 {
        return Err(ParcelError::NegativeLength { at, len });
    }
    let chars = len as usize;
    // Payload is the characters plus terminator, padded to 4 bytes.
    let padded = (2 * chars + 2 + 3) & !3;
    if cur.remaining() < padded {
        return Err(ParcelError::TruncatedString { at });
    }
    let units: Vec<u16> = (0..chars)
        .map(|i| {
            let off = cur.pos + 2 * i;
            u16::from_le_bytes([cur.buf[off], cur.buf[off + 1]])
        })
        .collect();
    cur.pos += padded;
    match String::from_utf16(&units) {
        Ok(s) => Ok(Some(s)),
        Err(_) => Err(ParcelError::InvalidUtf16 { at }),
    }
}

/// A flattened binder object as marshaled in a parcel: type tag, flags, the
/// handle or pointer word, a cookie, and (on builds with stability bytes) a
/// trailing stability word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlatBinderObject {
    pub type_tag: u32,
    pub flags: u32,
    pub handle_or_ptr: u64,
    pub cookie: u64,
    pub stability: Option<u32>,
}

impl FlatBinderObject {
    /// Human label for the type tag, e.g. `HANDLE` for a strong remote
    /// reference.
    pub fn kind_label(&self) -> &'static str {
        match self.type_tag {
            BINDER_TYPE_BINDER => "BINDER",
            BINDER_TYPE_WEAK_BINDER => "WEAK_BINDER",
            BINDER_TYPE_HANDLE => "HANDLE",
            BINDER_TYPE_WEAK_HANDLE => "WEAK_HANDLE",
            BINDER_TYPE_FD => "FD",
            BINDER_TYPE_FDA => "FDA",
            BINDER_TYPE_PTR => "PTR",
            _ => "UNKNOWN",
        }
    }
}

fn known_tag(tag: u32) -> bool {
    matches!(
        tag,
        BINDER_TYPE_BINDER
            | BINDER_TYPE_WEAK_BINDER
            | BINDER_TYPE_HANDLE
            | BINDER_TYPE_WEAK_HANDLE
            | BINDER_TYPE_FD
            | BINDER_TYPE_FDA
            | BINDER_TYPE_PTR
    )
}

/// Read a flattened binder object. `with_stability` controls whether the
/// 4-byte stability word that AIDL appends on Android 11+ parcels is
/// expected; it defaults on in [`DecodeOptions`].
pub fn read_flat_binder_object(
    cur: &mut ParcelCursor<'_>,
    with_stability: bool,
) -> Result<FlatBinderObject, ParcelError> {
    let at = cur.position();
    let need = if with_stability { 28 } else { 24 };
    if cur.remaining() < need {
        return Err(ParcelError::TruncatedObject { at });
    }
    let type_tag = cur.read_u32()?;
    if !known_tag(type_tag) {
        return Err(ParcelError::MalformedObject {
            at,
            reason: format!("unrecognized type tag 0x{type_tag:08x}"),
        });
    }
    let flags = cur.read_u32()?;
    let handle_or_ptr = cur.read_u64()?;
    let cookie = cur.read_u64()?;
    let stability = if with_stability {
        Some(cur.read_u32()?)
    } else {
        None
    };
    Ok(FlatBinderObject {
        type_tag,
        flags,
        handle_or_ptr,
        cookie,
        stability,
    })
}

/// Read a nullable object argument (e.g. a `PendingIntent`): a 4-byte
/// presence marker, then a flattened binder object when present.
pub fn read_typed_object(
    cur: &mut ParcelCursor<'_>,
    with_stability: bool,
) -> Result<Option<FlatBinderObject>, ParcelError> {
    let at = cur.position();
    let marker = cur
        .read_u32()
        .map_err(|_| ParcelError::TruncatedObject { at })?;
    match marker {
        0 => Ok(None),
        1 => Ok(Some(read_flat_binder_object(cur, with_stability)?)),
        other => Err(ParcelError::MalformedObject {
            at,
            reason: format!("bad presence marker {other}"),
        }),
    }
}

/// Argument kinds the decoder knows how to pull out of a parcel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ArgType {
    Int,
    Boolean,
    Long,
    Double,
    String16,
    /// A raw `IBinder` argument: flat object without a presence marker.
    StrongBinder,
    /// A parcelable passed by strong-binder reference (presence marker +
    /// flat object), like `PendingIntent`. Carries the declared type name.
    TypedObject(String),
    /// A declared type whose marshaling the decoder does not model; decoding
    /// stops when one is reached.
    Unsupported(String),
}

impl ArgType {
    pub fn is_primitive(&self) -> bool {
        matches!(
            self,
            ArgType::Int | ArgType::Boolean | ArgType::Long | ArgType::Double
        )
    }
}

/// A decoded argument value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i32),
    Long(i64),
    Bool(bool),
    Double(f64),
    /// A string argument; `None` is a marshaled null.
    Str(Option<String>),
    Object(FlatBinderObject),
    /// A null object argument.
    Null,
    /// Placeholder recorded where an unsupported type stopped decoding; the
    /// string is the declared type name.
    Unsupported(String),
}

/// Read one primitive argument. Int and Boolean take one 4-byte word (any
/// nonzero word is true); Long and Double take two.
pub fn read_primitive(cur: &mut ParcelCursor<'_>, ty: &ArgType) -> Result<Value, ParcelError> {
    match ty {
        ArgType::Int => Ok(Value::Int(cur.read_i32()?)),
        ArgType::Boolean => Ok(Value::Bool(cur.read_i32()? != 0)),
        ArgType::Long => Ok(Value::Long(cur.read_i64()?)),
        ArgType::Double => Ok(Value::Double(cur.read_f64()?)),
        other => Err(ParcelError::MalformedObject {
            at: cur.position(),
            reason: format!("{other:?} is not a primitive"),
        }),
    }
}

/// Knobs for parcel decoding.
#[derive(Debug, Clone)]
pub struct DecodeOptions {
    /// Expect the 4-byte stability word after flattened binder objects
    /// (Android 11+ parcels carry it; `--no-stability-footer` turns it off
    /// for older captures).
    pub stability_footer: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            stability_footer: true,
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The 200-byte golden transaction buffer (ISms.sendTextForSubscriber).
    pub(crate) fn golden_buffer() -> Vec<u8> {
        let text: &str = include_str!("../tests/fixtures/sms_parcel.hex");
        let cleaned: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .collect::<Vec<_>>()
            .join("")
            .split_whitespace()
            .collect();
        hex::decode(cleaned).unwrap()
    }

    #[test]
    fn golden_buffer_is_200_bytes() {
        assert_eq!(golden_buffer().len(), 200);
    }

    #[test]
    fn header_of_golden_buffer() {
        let buf = golden_buffer();
        let mut cur = ParcelCursor::new(&buf);
        let hdr = read_interface_header(&mut cur).unwrap();
        assert_eq!(hdr.strict_mode_policy, 0x8000_0000);
        assert_eq!(hdr.work_source_uid, WORK_SOURCE_UNSET);
        assert_eq!(hdr.header_magic, 0x5359_5354);
        assert_eq!(hdr.token, "com.android.internal.telephony.ISms");
        assert_eq!(hdr.token.chars().count(), 35);
        assert_eq!(cur.position(), 88);
    }

    fn header_bytes(token: &str) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&0u32.to_le_bytes());
        buf.extend_from_slice(&WORK_SOURCE_UNSET.to_le_bytes());
        buf.extend_from_slice(&0x5359_5354u32.to_le_bytes());
        buf.extend_from_slice(&(token.chars().count() as i32).to_le_bytes());
        for u in token.encode_utf16() {
            buf.extend_from_slice(&u.to_le_bytes());
        }
        buf.extend_from_slice(&[0, 0]);
        while buf.len() % 4 != 0 {
            buf.push(0);
        }
        buf
    }

    #[test]
    fn header_with_empty_token() {
        let buf = header_bytes("");
        let mut cur = ParcelCursor::new(&buf);
        let hdr = read_interface_header(&mut cur).unwrap();
        assert_eq!(hdr.token, "");
        assert_eq!(cur.position(), 20);
    }

    #[test]
    fn header_truncated_at_10_bytes() {
        let buf = vec![0u8; 10];
        let mut cur = ParcelCursor::new(&buf);
        assert_eq!(
            read_interface_header(&mut cur),
            Err(ParcelError::TruncatedHeader {
                at: 0,
                need: 12,
                have: 10
            })
        );
    }

    fn string16_bytes(s: Option<&str>) -> Vec<u8> {
        let mut buf = Vec::new();
        match s {
            None => buf.extend_from_slice(&(-1i32).to_le_bytes()),
            Some(s) => {
                buf.extend_from_slice(&(s.chars().count() as i32).to_le_bytes());
                for u in s.encode_utf16() {
                    buf.extend_from_slice(&u.to_le_bytes());
                }
                buf.extend_from_slice(&[0, 0]);
                while buf.len() % 4 != 0 {
                    buf.push(0);
                }
            }
        }
        buf
    }

    #[test]
    fn string16_abc_consumes_12() {
        let buf = string16_bytes(Some("ABC"));
        assert_eq!(buf.len(), 12);
        let mut cur = ParcelCursor::new(&buf);
        assert_eq!(read_string16(&mut cur).unwrap(), Some("ABC".into()));
        assert_eq!(cur.position(), 12);
    }

    #[test]
    fn string16_empty_consumes_8() {
        let buf = string16_bytes(Some(""));
        assert_eq!(buf.len(), 8);
        let mut cur = ParcelCursor::new(&buf);
        assert_eq!(read_string16(&mut cur).unwrap(), Some("".into()));
        assert_eq!(cur.position(), 8);
    }

    #[test]
    fn string16_null_consumes_4_regardless_of_suffix() {
        let mut buf = string16_bytes(None);
        buf.extend_from_slice(&[0xaa; 16]);
        let mut cur = ParcelCursor::new(&buf);
        assert_eq!(read_string16(&mut cur).unwrap(), None);
        assert_eq!(cur.position(), 4);
    }

    #[test]
    fn string16_rejects_length_below_minus_one() {
        let buf = (-2i32).to_le_bytes().to_vec();
        let mut cur = ParcelCursor::new(&buf);
        assert_eq!(
            read_string16(&mut cur),
            Err(ParcelError::NegativeLength { at: 0, len: -2 })
        );
    }

    #[test]
    fn string16_truncated_mid_chars() {
        let mut buf = string16_bytes(Some("hello"));
        buf.truncate(9);
        let mut cur = ParcelCursor::new(&buf);
        assert_eq!(
            read_string16(&mut cur),
            Err(ParcelError::TruncatedString { at: 0 })
        );
    }

    #[test]
    fn primitives_consume_fixed_widths() {
        let mut buf = Vec::new();
        buf.extend_from_slice(&2i32.to_le_bytes());
        buf.extend_from_slice(&1i32.to_le_bytes());
        buf.extend_from_slice(&(-5i64).to_le_bytes());
        buf.extend_from_slice(&1.5f64.to_le_bytes());
        let mut cur = ParcelCursor::new(&buf);
        assert_eq!(read_primitive(&mut cur, &ArgType::Int).unwrap(), Value::Int(2));
        assert_eq!(cur.position(), 4);
        assert_eq!(
            read_primitive(&mut cur, &ArgType::Boolean).unwrap(),
            Value::Bool(true)
        );
        assert_eq!(cur.position(), 8);
        assert_eq!(
            read_primitive(&mut cur, &ArgType::Long).unwrap(),
            Value::Long(-5)
        );
        assert_eq!(cur.position(), 16);
        assert_eq!(
            read_primitive(&mut cur, &ArgType::Double).unwrap(),
            Value::Double(1.5)
        );
        assert_eq!(cur.position(), 24);
    }

    #[test]
    fn flat_binder_object_from_golden_arg7() {
        let buf = golden_buffer();
        // Arg 7's object body starts at offset 156 (after its presence
        // marker at 152).
        let mut cur = ParcelCursor::new(&buf[156..]);
        let fbo = read_flat_binder_object(&mut cur, true).unwrap();
        assert_eq!(fbo.type_tag, BINDER_TYPE_HANDLE);
        assert_eq!(fbo.kind_label(), "HANDLE");
        assert_eq!(fbo.flags, 0x13);
        assert_eq!(fbo.handle_or_ptr, 0x77);
        assert_eq!(fbo.cookie, 0);
        assert_eq!(fbo.stability, Some(12));
        assert_eq!(cur.position(), 28);
    }

    #[test]
    fn flat_binder_object_without_stability_consumes_24() {
        let mut buf = Vec::new();
        buf.extend_from_slice(&BINDER_TYPE_HANDLE.to_le_bytes());
        buf.extend_from_slice(&[0u8; 24]);
        let mut cur = ParcelCursor::new(&buf);
        let fbo = read_flat_binder_object(&mut cur, false).unwrap();
        assert_eq!(fbo.stability, None);
        assert_eq!(cur.position(), 24);
    }

    #[test]
    fn flat_binder_object_rejects_unknown_tag() {
        let mut buf = vec![0u8; 28];
        buf[..4].copy_from_slice(&0x1234_5678u32.to_le_bytes());
        let mut cur = ParcelCursor::new(&buf);
        assert!(matches!(
            read_flat_binder_object(&mut cur, true),
            Err(ParcelError::MalformedObject { at: 0, .. })
        ));
    }

    #[test]
    fn flat_binder_object_truncated_at_20_bytes() {
        let buf = vec![0u8; 20];
        let mut cur = ParcelCursor::new(&buf);
        assert_eq!(
            read_flat_binder_object(&mut cur, true),
            Err(ParcelError::TruncatedObject { at: 0 })
        );
    }

    #[test]
    fn typed_object_null_and_present_and_bad_marker() {
        let null = 0u32.to_le_bytes();
        let mut cur = ParcelCursor::new(&null);
        assert_eq!(read_typed_object(&mut cur, true).unwrap(), None);
        assert_eq!(cur.position(), 4);

        let buf = golden_buffer();
        let mut cur = ParcelCursor::new(&buf[152..]);
        let fbo = read_typed_object(&mut cur, true).unwrap().unwrap();
        assert_eq!(fbo.handle_or_ptr, 0x77);

        let bad = 7u32.to_le_bytes();
        let mut cur = ParcelCursor::new(&bad);
        assert!(matches!(
            read_typed_object(&mut cur, true),
            Err(ParcelError::MalformedObject { at: 0, .. })
        ));
    }

    #[test]
    fn type_tags_match_packed_chars() {
        assert_eq!(BINDER_TYPE_HANDLE, 0x7368_2a85);
        assert_eq!(BINDER_TYPE_WEAK_HANDLE, 0x7768_2a85);
        assert_eq!(BINDER_TYPE_BINDER, 0x7362_2a85);
        assert_eq!(BINDER_TYPE_WEAK_BINDER, 0x7762_2a85);
        assert_eq!(BINDER_TYPE_FD, 0x6664_2a85);
        assert_eq!(BINDER_TYPE_FDA, 0x6664_6185);
        assert_eq!(BINDER_TYPE_PTR, 0x7074_2a85);
    }
}
