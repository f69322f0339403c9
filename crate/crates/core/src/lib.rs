//! Userspace tooling for whole-system tracing on Android: decode raw Binder
//! ioctl captures into typed audit records, and evaluate syscall-trace
//! completeness between two tracers.
//!
//! The crate splits into two halves.
//!
//! The Binder half turns the byte soup a tracer snapshots at the
//! `BINDER_WRITE_READ` ioctl boundary back into method calls: [`wire`] walks
//! the driver command stream, [`parcel`] reads the transaction data buffer
//! (Parcel wire format), [`sigtable`] maps `(interface, code)` to method
//! signatures, and [`audit`] ties the three together into [`audit::AuditRecord`]s
//! with text and JSON renderings. [`capture`] replays capture files recorded
//! as JSONL.
//!
//! The syscall half supports the trace-completeness workflow: [`syscalls`]
//! is the per-architecture catalog of traced syscalls, [`compact`] the
//! space-efficient event encoding, [`pipeline`] chunk reassembly and the
//! tagged-pointer mask, [`sim`] a buffer-loss simulator for the two buffering
//! disciplines, [`compare`] the two-tracer diff with the unique event ratio
//! (UER) metric, and [`synth`] a seeded generator of two-tracer workloads
//! with known ground truth.

pub mod audit;
pub mod capture;
pub mod compact;
pub mod compare;
pub mod parcel;
pub mod pipeline;
pub mod sigtable;
pub mod sim;
pub mod synth;
pub mod syscalls;
pub mod wire;

pub use audit::{decode_transaction, AuditRecord, DecodeStatus, DecodedParam};
pub use parcel::{DecodeOptions, ParcelCursor, Value};
pub use sigtable::SignatureTable;
pub use syscalls::{Arch, Phase, SyscallEvent};
pub use wire::{BinderWriteRead, TransactionRecord};
