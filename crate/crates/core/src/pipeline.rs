//! Userspace delivery plumbing: reassembly of chunked event payloads and the
//! tagged-pointer mask.
//!
//! A kernel probe that must stay within its per-event output budget splits
//! large payloads (a transaction data buffer, say) into fixed-size chunks
//! tagged `(event_id, seq, total)`. Per-CPU buffers mean chunks arrive
//! interleaved and out of order; [`Reassembler`] puts them back together.

use std::collections::HashMap;

use thiserror::Error;

/// Low 40 bits of a userspace pointer: the actual address on a 39/40-bit VA
/// Android configuration. The byte above carries the memory tag on MTE
/// builds and must be stripped before an address is used as data.
pub const USER_ADDR_MASK: u64 = 0xff_ffff_ffff;

/// Strip tag bits from a captured userspace address.
pub fn mask_user_address(addr: u64) -> u64 {
    addr & USER_ADDR_MASK
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChunkError {
    #[error("event {event_id}: chunk total {got} conflicts with earlier total {expected}")]
    ConflictingTotal {
        event_id: u64,
        expected: u32,
        got: u32,
    },
    #[error("event {event_id}: duplicate chunk {seq} with different bytes")]
    DuplicateChunk { event_id: u64, seq: u32 },
    #[error("event {event_id}: chunk seq {seq} out of range for total {total}")]
    InvalidSeq { event_id: u64, seq: u32, total: u32 },
}

/// One chunk of a split payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkRecord {
    pub event_id: u64,
    pub seq: u32,
    pub total: u32,
    pub bytes: Vec<u8>,
}

/// An event still missing chunks when the stream ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncompleteEvent {
    pub event_id: u64,
    pub total: u32,
    pub missing: Vec<u32>,
}

#[derive(Default)]
struct Pending {
    total: u32,
    chunks: HashMap<u32, Vec<u8>>,
}

/// Reassembles chunked payloads in arrival order; completion does not depend
/// on chunk order.
#[derive(Default)]
pub struct Reassembler {
    pending: HashMap<u64, Pending>,
}

impl Reassembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed one chunk. Returns the full payload when this chunk completes
    /// its event. An identical duplicate of a chunk already held is a no-op;
    /// a conflicting duplicate or total is an error and leaves the held
    /// state unchanged.
    pub fn push(&mut self, chunk: ChunkRecord) -> Result<Option<(u64, Vec<u8>)>, ChunkError> {
        if chunk.total == 0 || chunk.seq >= chunk.total {
            return Err(ChunkError::InvalidSeq {
                event_id: chunk.event_id,
                seq: chunk.seq,
                total: chunk.total,
            });
        }
        let entry = self.pending.entry(chunk.event_id).or_insert_with(|| Pending {
            total: chunk.total,
            chunks: HashMap::new(),
        });
        if entry.total != chunk.total {
            return Err(ChunkError::ConflictingTotal {
                event_id: chunk.event_id,
                expected: entry.total,
                got: chunk.total,
            });
        }
        if let Some(existing) = entry.chunks.get(&chunk.seq) {
            if *existing == chunk.bytes {
                return Ok(None);
            }
            return Err(ChunkError::DuplicateChunk {
                event_id: chunk.event_id,
                seq: chunk.seq,
            });
        }
        entry.chunks.insert(chunk.seq, chunk.bytes);
        if entry.chunks.len() == entry.total as usize {
            let mut done = self.pending.remove(&chunk.event_id).unwrap();
            let mut payload = Vec::new();
            for seq in 0..done.total {
                payload.append(&mut done.chunks.remove(&seq).unwrap());
            }
            return Ok(Some((chunk.event_id, payload)));
        }
        Ok(None)
    }

    /// End of stream: report every event still missing chunks, sorted by
    /// event id with sorted missing seq lists. Consumes the reassembler.
    pub fn finish(self) -> Vec<IncompleteEvent> {
        let mut out: Vec<IncompleteEvent> = self
            .pending
            .into_iter()
            .map(|(event_id, p)| {
                let mut missing: Vec<u32> =
                    (0..p.total).filter(|s| !p.chunks.contains_key(s)).collect();
                missing.sort_unstable();
                IncompleteEvent {
                    event_id,
                    total: p.total,
                    missing,
                }
            })
            .collect();
        out.sort_by_key(|e| e.event_id);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(event_id: u64, seq: u32, total: u32, bytes: &[u8]) -> ChunkRecord {
        ChunkRecord {
            event_id,
            seq,
            total,
            bytes: bytes.to_vec(),
        }
    }

    #[test]
    fn single_chunk_completes_immediately() {
        let mut r = Reassembler::new();
        let got = r.push(chunk(9, 0, 1, b"hello")).unwrap();
        assert_eq!(got, Some((9, b"hello".to_vec())));
        assert!(r.finish().is_empty());
    }

    #[test]
    fn out_of_order_chunks_reassemble() {
        let mut r = Reassembler::new();
        assert_eq!(r.push(chunk(1, 2, 3, b"cc")).unwrap(), None);
        assert_eq!(r.push(chunk(1, 0, 3, b"aa")).unwrap(), None);
        let got = r.push(chunk(1, 1, 3, b"bb")).unwrap();
        assert_eq!(got, Some((1, b"aabbcc".to_vec())));
    }

    #[test]
    fn interleaved_events_complete_independently() {
        let mut r = Reassembler::new();
        assert_eq!(r.push(chunk(1, 0, 2, b"1a")).unwrap(), None);
        assert_eq!(r.push(chunk(2, 1, 2, b"2b")).unwrap(), None);
        assert_eq!(r.push(chunk(1, 1, 2, b"1b")).unwrap(), Some((1, b"1a1b".to_vec())));
        assert_eq!(r.push(chunk(2, 0, 2, b"2a")).unwrap(), Some((2, b"2a2b".to_vec())));
    }

    #[test]
    fn conflicting_total_is_rejected() {
        let mut r = Reassembler::new();
        r.push(chunk(5, 0, 3, b"x")).unwrap();
        assert_eq!(
            r.push(chunk(5, 1, 4, b"y")),
            Err(ChunkError::ConflictingTotal {
                event_id: 5,
                expected: 3,
                got: 4
            })
        );
        // The original accumulation is still live.
        r.push(chunk(5, 1, 3, b"y")).unwrap();
        assert_eq!(
            r.push(chunk(5, 2, 3, b"z")).unwrap(),
            Some((5, b"xyz".to_vec()))
        );
    }

    #[test]
    fn duplicate_chunk_identical_is_noop_different_errors() {
        let mut r = Reassembler::new();
        r.push(chunk(7, 0, 2, b"aa")).unwrap();
        assert_eq!(r.push(chunk(7, 0, 2, b"aa")).unwrap(), None);
        assert_eq!(
            r.push(chunk(7, 0, 2, b"zz")),
            Err(ChunkError::DuplicateChunk { event_id: 7, seq: 0 })
        );
        assert_eq!(
            r.push(chunk(7, 1, 2, b"bb")).unwrap(),
            Some((7, b"aabb".to_vec()))
        );
    }

    #[test]
    fn invalid_seq_is_rejected() {
        let mut r = Reassembler::new();
        assert_eq!(
            r.push(chunk(1, 3, 3, b"x")),
            Err(ChunkError::InvalidSeq {
                event_id: 1,
                seq: 3,
                total: 3
            })
        );
        assert_eq!(
            r.push(chunk(1, 0, 0, b"x")),
            Err(ChunkError::InvalidSeq {
                event_id: 1,
                seq: 0,
                total: 0
            })
        );
    }

    #[test]
    fn finish_reports_missing_seqs() {
        let mut r = Reassembler::new();
        r.push(chunk(3, 1, 3, b"b")).unwrap();
        r.push(chunk(8, 0, 2, b"a")).unwrap();
        let incomplete = r.finish();
        assert_eq!(incomplete.len(), 2);
        assert_eq!(incomplete[0].event_id, 3);
        assert_eq!(incomplete[0].missing, vec![0, 2]);
        assert_eq!(incomplete[1].event_id, 8);
        assert_eq!(incomplete[1].missing, vec![1]);
    }

    #[test]
    fn mask_strips_tag_byte() {
        assert_eq!(mask_user_address(0x0b40_0071_2345_6789), 0x71_2345_6789);
        assert_eq!(mask_user_address(0xffff_ffff_ffff_ffff), 0xff_ffff_ffff);
        // Addresses below 2^40 pass through.
        assert_eq!(mask_user_address(0x7f_dead_beef), 0x7f_dead_beef);
        assert_eq!(mask_user_address(0), 0);
    }

    #[test]
    fn mask_is_idempotent() {
        for addr in [0u64, 1, 0xb400_0071_2345_6789, u64::MAX] {
            let once = mask_user_address(addr);
            assert_eq!(mask_user_address(once), once);
        }
    }
}
