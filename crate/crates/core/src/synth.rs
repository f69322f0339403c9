//! Synthetic two-tracer workloads with exact ground truth.
//!
//! Generates a pair of logs — one audit JSONL, one ftrace text — describing
//! the same virtual workload, with a known clock offset between them and a
//! chosen number of events deliberately dropped from each side. Running the
//! comparison pipeline over the pair must recover the planted unique-event
//! ratios, which makes the generator the reference workload for end-to-end
//! validation of clock alignment, matching, and the UER computation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compare::{render_audit_jsonl, render_ftrace_text};
use crate::syscalls::{catalog, Arch, Phase, SyscallEvent};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    BadSpec(String),
    #[error("targets need {needed} unique events but only {available} slots are free")]
    InfeasibleTargets { needed: usize, available: usize },
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Total distinct events across both logs.
    pub union: usize,
    /// Fraction of the union that only log A should contain.
    pub uer_a_target: f64,
    /// Fraction of the union that only log B should contain.
    pub uer_b_target: f64,
    /// Planted clock offset `ts_a - ts_b`, in nanoseconds. Must be a whole
    /// number of microseconds: the ftrace text format carries microsecond
    /// timestamps.
    pub clock_offset_ns: i64,
    /// Absolute timestamp of the first event in log A. Microsecond-aligned.
    pub base_ts_ns: i64,
    /// Workload pids to cycle through.
    pub pids: Vec<u32>,
    /// Pids emitting tracer self-noise; callers are expected to exclude
    /// these during normalization.
    pub noise_pids: Vec<u32>,
    pub arch: Arch,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            union: 1000,
            uer_a_target: 0.2,
            uer_b_target: 0.05,
            clock_offset_ns: 12_345_000,
            base_ts_ns: 1_700_000_000_000_000,
            pids: vec![4242, 4243],
            noise_pids: vec![7777],
            arch: Arch::Arm64,
            seed: 1,
        }
    }
}

/// What the generator planted, for checking pipeline output against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruth {
    pub union: usize,
    pub matched: usize,
    pub unique_a: usize,
    pub unique_b: usize,
    pub offset_ns: i64,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Log A: audit JSONL, absolute clock.
    pub audit_jsonl: String,
    /// Log B: ftrace text, clock trailing A's by `truth.offset_ns`.
    pub ftrace_text: String,
    pub truth: GroundTruth,
}

/// How many A-only / B-only events a spec calls for.
pub fn planned_counts(spec: &SynthSpec) -> (usize, usize, usize) {
    let unique_a = (spec.union as f64 * spec.uer_a_target).round() as usize;
    let unique_b = (spec.union as f64 * spec.uer_b_target).round() as usize;
    let matched = spec.union.saturating_sub(unique_a + unique_b);
    (matched, unique_a, unique_b)
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Both,
    AOnly,
    BOnly,
}

const EVENT_SPACING_NS: i64 = 10_000;

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput, SynthError> {
    if spec.union < 4 {
        return Err(SynthError::BadSpec("union must be at least 4".into()));
    }
    if spec.pids.is_empty() {
        return Err(SynthError::BadSpec("at least one workload pid".into()));
    }
    for t in [spec.uer_a_target, spec.uer_b_target] {
        if !(0.0..1.0).contains(&t) {
            return Err(SynthError::BadSpec(format!("target {t} outside [0, 1)")));
        }
    }
    if spec.base_ts_ns % 1000 != 0 || spec.clock_offset_ns % 1000 != 0 {
        return Err(SynthError::BadSpec(
            "base timestamp and offset must be microsecond-aligned".into(),
        ));
    }
    if spec.base_ts_ns - spec.clock_offset_ns < 0 {
        return Err(SynthError::BadSpec(
            "offset would push log B before its clock epoch".into(),
        ));
    }
    let (matched, unique_a, unique_b) = planned_counts(spec);
    // Three slots are pinned to both logs: the execve/mmap clock anchor and
    // the final event that closes the overlap window.
    if matched < 3 {
        return Err(SynthError::InfeasibleTargets {
            needed: unique_a + unique_b,
            available: spec.union - 3,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Assign roles to the free slots (everything but 0, 1, and the last).
    let mut roles = vec![Role::Both; spec.union];
    let mut free: Vec<usize> = (2..spec.union - 1).collect();
    free.shuffle(&mut rng);
    for &slot in free.iter().take(unique_a) {
        roles[slot] = Role::AOnly;
    }
    for &slot in free.iter().skip(unique_a).take(unique_b) {
        roles[slot] = Role::BOnly;
    }

    let cat = catalog();
    let nr = |name: &str| cat.nr(spec.arch, name).expect("catalog syscall");
    let body_pool = ["read", "write", "openat", "sendto", "recvfrom", "close"];

    let mut events_a: Vec<SyscallEvent> = Vec::new();
    let mut events_b: Vec<SyscallEvent> = Vec::new();
    for slot in 0..spec.union {
        let ts = spec.base_ts_ns + slot as i64 * EVENT_SPACING_NS;
        let pid = spec.pids[slot % spec.pids.len()];
        let serial = 0xA000 + slot as u64;
        // Every argument that matching compares carries the slot serial, so
        // no two slots can collide in a match key.
        let ev = if slot == 0 {
            SyscallEvent {
                ts_ns: ts,
                pid,
                tgid: pid,
                nr: nr("execve"),
                args: vec![serial, serial, serial],
                ret: Some(0),
                phase: Phase::Joined,
            }
        } else if slot == 1 {
            SyscallEvent {
                ts_ns: ts,
                pid,
                tgid: pid,
                nr: nr("mmap"),
                args: vec![0, serial, 5, 2, 3, 0],
                ret: Some(0x7f00_0000),
                phase: Phase::Joined,
            }
        } else {
            let name = body_pool[slot % body_pool.len()];
            let arity = cat.by_name(name).unwrap().arg_schema.len();
            SyscallEvent {
                ts_ns: ts,
                pid,
                tgid: pid,
                nr: nr(name),
                args: vec![serial; arity.max(1)],
                ret: Some(rng.gen_range(0..4096)),
                phase: Phase::Joined,
            }
        };
        match roles[slot] {
            Role::Both => {
                events_a.push(ev.clone());
                events_b.push(ev);
            }
            Role::AOnly => events_a.push(ev),
            Role::BOnly => events_b.push(ev),
        }
    }

    // Fork noise: identical clone events in both logs, inside the window.
    // Matching excludes them, so ground truth is unaffected.
    let clone_nr = nr("clone");
    for k in 0..2u64 {
        let ts = spec.base_ts_ns + (3 + k as i64 * 7) * EVENT_SPACING_NS + 5_000;
        let ev = SyscallEvent {
            ts_ns: ts,
            pid: spec.pids[0],
            tgid: spec.pids[0],
            nr: clone_nr,
            args: vec![0x1200011, 0, 0, 0, k],
            ret: Some(9000 + k as i64),
            phase: Phase::Joined,
        };
        events_a.push(ev.clone());
        events_b.push(ev);
    }

    // Tracer self-noise under the designated pids, deliberately asymmetric
    // so skipping the pid exclusion visibly corrupts the counts.
    for (t, &npid) in spec.noise_pids.iter().enumerate() {
        for k in 0..(2 + t as i64 % 2) {
            let ts = spec.base_ts_ns + (5 + k * 11) * EVENT_SPACING_NS + 5_000;
            let ev = SyscallEvent {
                ts_ns: ts,
                pid: npid,
                tgid: npid,
                nr: nr("write"),
                args: vec![2, 0xBEEF + k as u64, 64],
                ret: Some(64),
                phase: Phase::Joined,
            };
            events_a.push(ev.clone());
            let mut evb = ev;
            evb.args[1] ^= 0xFF00; // different content in B
            events_b.push(evb);
        }
        // One extra B-only noise event.
        events_b.push(SyscallEvent {
            ts_ns: spec.base_ts_ns + 17 * EVENT_SPACING_NS + 5_000,
            pid: npid,
            tgid: npid,
            nr: nr("read"),
            args: vec![2, 0xCAFE, 64],
            ret: Some(64),
            phase: Phase::Joined,
        });
    }

    events_a.sort_by_key(|e| e.ts_ns);
    events_b.sort_by_key(|e| e.ts_ns);
    for ev in &mut events_b {
        ev.ts_ns -= spec.clock_offset_ns;
    }

    Ok(SynthOutput {
        audit_jsonl: render_audit_jsonl(&events_a),
        ftrace_text: render_ftrace_text(&events_b, "app"),
        truth: GroundTruth {
            union: spec.union,
            matched,
            unique_a,
            unique_b,
            offset_ns: spec.clock_offset_ns,
        },
    })
}
