//! Shared test support: an independent parcel writer.
//!
//! The writer encodes parcels forward from the marshaling rules (header
//! words, signed UTF-16 length prefixes, 4-byte alignment, flat objects with
//! optional stability word) without touching the decoder, so round-trip
//! tests pit two separate implementations of the format against each other.

use parceltrace::sigtable::{MethodSignature, ParamSpec};
use parceltrace::Value;
use parceltrace::parcel::{
    FlatBinderObject, BINDER_TYPE_BINDER, BINDER_TYPE_HANDLE, BINDER_TYPE_WEAK_HANDLE,
    WORK_SOURCE_UNSET,
};
use rand::prelude::*;

pub const HEADER_MAGIC: u32 = 0x5359_5354; // 'SYST'

#[derive(Default)]
pub struct ParcelWriter {
    buf: Vec<u8>,
}

impl ParcelWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
    }

    pub fn boolean(&mut self, v: bool) {
        self.u32(v as u32);
    }

    /// 12-byte header followed by the interface token.
    pub fn header(&mut self, strict_mode: u32, token: &str) {
        self.u32(strict_mode);
        self.u32(WORK_SOURCE_UNSET);
        self.u32(HEADER_MAGIC);
        self.string16(Some(token));
    }

    /// Signed char16-count prefix, UTF-16LE units, 2-byte terminator, zero
    /// padding to the next 4-byte boundary. Null is the bare prefix -1.
    pub fn string16(&mut self, s: Option<&str>) {
        let Some(s) = s else {
            self.i32(-1);
            return;
        };
        let units: Vec<u16> = s.encode_utf16().collect();
        self.i32(units.len() as i32);
        for u in &units {
            self.buf.extend_from_slice(&u.to_le_bytes());
        }
        self.buf.extend_from_slice(&0u16.to_le_bytes());
        while !self.buf.len().is_multiple_of(4) {
            self.buf.push(0);
        }
    }

    pub fn flat_object(&mut self, obj: &FlatBinderObject) {
        self.u32(obj.type_tag);
        self.u32(obj.flags);
        self.u64(obj.handle_or_ptr);
        self.u64(obj.cookie);
        if let Some(st) = obj.stability {
            self.u32(st);
        }
    }

    /// Nullable object: 4-byte presence marker, then the object when
    /// present.
    pub fn typed_object(&mut self, obj: Option<&FlatBinderObject>) {
        match obj {
            None => self.u32(0),
            Some(o) => {
                self.u32(1);
                self.flat_object(o);
            }
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

fn random_string(rng: &mut impl Rng) -> String {
    // Mixed pool: ASCII, multi-byte BMP, and a supplementary-plane char that
    // marshals as a UTF-16 surrogate pair.
    const POOL: &[char] = &[
        'a', 'b', 'Z', '0', '7', ' ', '+', '.', '예', '日', 'ß', 'é', '\u{1F680}', '\0',
    ];
    let len = rng.gen_range(0..24);
    (0..len).map(|_| POOL[rng.gen_range(0..POOL.len())]).collect()
}

fn random_object(rng: &mut impl Rng, with_stability: bool) -> FlatBinderObject {
    let tags = [BINDER_TYPE_HANDLE, BINDER_TYPE_BINDER, BINDER_TYPE_WEAK_HANDLE];
    FlatBinderObject {
        type_tag: tags[rng.gen_range(0..tags.len())],
        flags: rng.gen(),
        handle_or_ptr: rng.gen(),
        cookie: rng.gen(),
        stability: with_stability.then(|| rng.gen_range(0..16)),
    }
}

/// Generate one random supported argument: (declared type, expected decoded
/// value), writing its encoding into `w`.
pub fn random_arg(
    rng: &mut impl Rng,
    w: &mut ParcelWriter,
    with_stability: bool,
) -> (&'static str, Value) {
    match rng.gen_range(0..7) {
        0 => {
            let v: i32 = match rng.gen_range(0..3) {
                0 => rng.gen(),
                1 => i32::MIN,
                _ => i32::MAX,
            };
            w.i32(v);
            ("int", Value::Int(v))
        }
        1 => {
            let v: bool = rng.gen();
            w.boolean(v);
            ("boolean", Value::Bool(v))
        }
        2 => {
            let v: i64 = match rng.gen_range(0..3) {
                0 => rng.gen(),
                1 => i64::MIN,
                _ => i64::MAX,
            };
            w.i64(v);
            ("long", Value::Long(v))
        }
        3 => {
            let v: f64 = match rng.gen_range(0..5) {
                0 => rng.gen::<f64>() * 1e9 - 5e8,
                1 => 0.0,
                2 => -0.0,
                3 => f64::INFINITY,
                _ => f64::MIN_POSITIVE,
            };
            w.f64(v);
            ("double", Value::Double(v))
        }
        4 => {
            let v = if rng.gen_bool(0.2) {
                None
            } else {
                Some(random_string(rng))
            };
            w.string16(v.as_deref());
            ("String", Value::Str(v))
        }
        5 => {
            let obj = random_object(rng, with_stability);
            w.flat_object(&obj);
            ("IBinder", Value::Object(obj))
        }
        _ => {
            if rng.gen_bool(0.3) {
                w.typed_object(None);
                ("android.app.PendingIntent", Value::Null)
            } else {
                let obj = random_object(rng, with_stability);
                w.typed_object(Some(&obj));
                ("android.app.PendingIntent", Value::Object(obj))
            }
        }
    }
}

/// A randomized method signature plus a parcel encoding a call to it and the
/// values the decoder must produce.
pub struct GeneratedCall {
    pub signature: MethodSignature,
    pub parcel: Vec<u8>,
    pub expected: Vec<Value>,
}

pub fn random_call(rng: &mut impl Rng, with_stability: bool) -> GeneratedCall {
    let token = format!(
        "com.example.service{}.IService{}",
        rng.gen_range(0..100),
        rng.gen_range(0..100)
    );
    let code = rng.gen_range(1..64);
    let mut w = ParcelWriter::new();
    w.header(rng.gen_range(0..2) * 0x10, &token);
    let n_args = rng.gen_range(0..10);
    let mut params = Vec::new();
    let mut expected = Vec::new();
    for i in 0..n_args {
        let (type_name, value) = random_arg(rng, &mut w, with_stability);
        params.push(ParamSpec {
            name: format!("arg{i}"),
            type_name: type_name.to_string(),
            kind: parceltrace::sigtable::resolve_type_name(type_name),
        });
        expected.push(value);
    }
    GeneratedCall {
        signature: MethodSignature {
            interface_token: token,
            code,
            method_name: format!("method{code}"),
            params,
        },
        parcel: w.finish(),
        expected,
    }
}

/// Value equality with bit-exact doubles (so -0.0 vs 0.0 regressions fail).
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Double(x), Value::Double(y)) => x.to_bits() == y.to_bits(),
        _ => a == b,
    }
}
