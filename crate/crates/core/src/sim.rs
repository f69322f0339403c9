//! Discrete-time simulator for tracer buffer loss.
//!
//! Models the two buffering disciplines whose contrast drives trace
//! completeness: an overwrite ring (the ftrace model: when full, the oldest
//! resident event is evicted for each new one) and an atomic-drop ring (the
//! per-CPU-cache model: producers accumulate events in small caches and
//! flush batches into the ring; a batch that does not fit is dropped whole).
//! A single consumer drains the ring at a fixed rate.
//!
//! The clock is virtual integer milliseconds. Per tick, in order: burst
//! arrivals, steady-rate arrivals per CPU, cache flushes at the threshold,
//! then the consumer drains. At end of run all caches flush and the
//! consumer drains the ring dry, so every produced event is either
//! delivered or counted lost; nothing is left in flight.
//!
//! The simulator makes no claim about absolute loss percentages of any real
//! system; it exists to compare policies and capacities on identical
//! workloads.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// How the ring handles pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Full ring evicts its oldest event per incoming event.
    Overwrite,
    /// A flush batch that does not fit is rejected whole.
    Drop,
}

/// Buffering geometry and policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BufferConfig {
    pub cpu_count: usize,
    /// Capacity of each per-CPU cache.
    pub cache_capacity: usize,
    /// Cache flushes into the ring once it holds this many events.
    pub flush_threshold: usize,
    /// Capacity of the shared ring.
    pub ring_capacity: usize,
    pub policy: Policy,
    /// Events the consumer removes per millisecond.
    pub consumer_drain_rate: usize,
    /// Under the drop policy, evict lower-priority residents to make room
    /// for a higher-priority batch instead of dropping it.
    #[serde(default)]
    pub priority_eviction: bool,
}

/// One burst: `count` events arriving on `cpu` at `at_ms`. Serialized as
/// the triple `[at_ms, cpu, count]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(from = "(u64, usize, usize)", into = "(u64, usize, usize)")]
pub struct Burst {
    pub at_ms: u64,
    pub cpu: usize,
    pub count: usize,
}

impl From<(u64, usize, usize)> for Burst {
    fn from((at_ms, cpu, count): (u64, usize, usize)) -> Self {
        Burst { at_ms, cpu, count }
    }
}

impl From<Burst> for (u64, usize, usize) {
    fn from(b: Burst) -> Self {
        (b.at_ms, b.cpu, b.count)
    }
}

/// The event arrival pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Workload {
    pub duration_ms: u64,
    /// Steady arrivals per millisecond, one entry per CPU.
    pub rates_per_cpu: Vec<usize>,
    #[serde(default)]
    pub bursts: Vec<Burst>,
    /// Weights for assigning priority classes 0/1/2 to events; all weight on
    /// class 0 when omitted.
    #[serde(default)]
    pub class_weights: Option<[u32; 3]>,
}

/// A full simulation scenario as read from a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub buffer: BufferConfig,
    pub workload: Workload,
}

/// What happened to the produced events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossReport {
    pub produced: u64,
    pub delivered: u64,
    /// Events evicted by the overwrite policy (or priority eviction).
    pub lost_overwritten: u64,
    /// Events rejected by the drop policy.
    pub lost_dropped: u64,
    /// Losses split by priority class 0/1/2.
    pub lost_by_priority: [u64; 3],
    /// High-water mark of ring occupancy.
    pub max_ring_occupancy: usize,
}

impl LossReport {
    pub fn lost_total(&self) -> u64 {
        self.lost_overwritten + self.lost_dropped
    }
}

/// A simulated event; `id` is the global arrival sequence number.
#[derive(Debug, Clone, Copy)]
struct SimEvent {
    id: u64,
    class: u8,
}

/// Full outcome: the report plus the ids the consumer actually saw, in
/// delivery order.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: LossReport,
    pub delivered_ids: Vec<u64>,
}

fn validate(config: &SimConfig) -> Result<(), SimError> {
    let b = &config.buffer;
    let w = &config.workload;
    let fail = |msg: String| Err(SimError::InvalidConfig(msg));
    if b.cpu_count == 0 {
        return fail("cpu_count must be positive".into());
    }
    // consumer_drain_rate may be 0: a stalled consumer that only reads the
    // ring after the workload ends, the worst case for both policies.
    if b.cache_capacity == 0 || b.ring_capacity == 0 {
        return fail("capacities must be positive".into());
    }
    if b.flush_threshold == 0 || b.flush_threshold > b.cache_capacity {
        return fail(format!(
            "flush_threshold {} must be in 1..=cache_capacity {}",
            b.flush_threshold, b.cache_capacity
        ));
    }
    if w.rates_per_cpu.len() != b.cpu_count {
        return fail(format!(
            "rates_per_cpu has {} entries for {} cpus",
            w.rates_per_cpu.len(),
            b.cpu_count
        ));
    }
    for burst in &w.bursts {
        if burst.cpu >= b.cpu_count {
            return fail(format!("burst at {}ms names cpu {}", burst.at_ms, burst.cpu));
        }
    }
    Ok(())
}

struct Ring {
    buf: VecDeque<SimEvent>,
    capacity: usize,
}

struct Sim<'a> {
    config: &'a SimConfig,
    rng: ChaCha8Rng,
    caches: Vec<Vec<SimEvent>>,
    ring: Ring,
    report: LossReport,
    delivered_ids: Vec<u64>,
    next_id: u64,
}

impl Sim<'_> {
    fn assign_class(&mut self) -> u8 {
        match self.config.workload.class_weights {
            None => 0,
            Some(weights) => {
                let total: u32 = weights.iter().sum();
                if total == 0 {
                    return 0;
                }
                let mut pick = self.rng.gen_range(0..total);
                for (class, &w) in weights.iter().enumerate() {
                    if pick < w {
                        return class as u8;
                    }
                    pick -= w;
                }
                2
            }
        }
    }

    fn arrive(&mut self, cpu: usize) {
        let ev = SimEvent {
            id: self.next_id,
            class: self.assign_class(),
        };
        self.next_id += 1;
        self.report.produced += 1;
        self.caches[cpu].push(ev);
        if self.caches[cpu].len() >= self.config.buffer.flush_threshold {
            self.flush(cpu);
        }
    }

    fn flush(&mut self, cpu: usize) {
        if self.caches[cpu].is_empty() {
            return;
        }
        let batch = std::mem::take(&mut self.caches[cpu]);
        match self.config.buffer.policy {
            Policy::Overwrite => {
                for ev in batch {
                    if self.ring.buf.len() == self.ring.capacity {
                        let evicted = self.ring.buf.pop_front().unwrap();
                        self.report.lost_overwritten += 1;
                        self.report.lost_by_priority[evicted.class as usize] += 1;
                    }
                    self.ring.buf.push_back(ev);
                }
            }
            Policy::Drop => {
                let mut free = self.ring.capacity - self.ring.buf.len();
                if free < batch.len() && self.config.buffer.priority_eviction {
                    // Make room for a more important batch by evicting
                    // strictly lower-priority residents: worst class first,
                    // oldest first within a class.
                    let best = batch.iter().map(|e| e.class).min().unwrap();
                    while free < batch.len() {
                        let victim = self
                            .ring
                            .buf
                            .iter()
                            .enumerate()
                            .filter(|(_, e)| e.class > best)
                            .max_by_key(|(i, e)| (e.class, std::cmp::Reverse(*i)))
                            .map(|(i, _)| i);
                        match victim {
                            Some(i) => {
                                let evicted = self.ring.buf.remove(i).unwrap();
                                self.report.lost_overwritten += 1;
                                self.report.lost_by_priority[evicted.class as usize] += 1;
                                free += 1;
                            }
                            None => break,
                        }
                    }
                }
                if free >= batch.len() {
                    self.ring.buf.extend(batch);
                } else {
                    self.report.lost_dropped += batch.len() as u64;
                    for ev in batch {
                        self.report.lost_by_priority[ev.class as usize] += 1;
                    }
                }
            }
        }
        self.report.max_ring_occupancy = self.report.max_ring_occupancy.max(self.ring.buf.len());
    }

    fn drain(&mut self, budget: usize) {
        for _ in 0..budget {
            match self.ring.buf.pop_front() {
                Some(ev) => {
                    self.report.delivered += 1;
                    self.delivered_ids.push(ev.id);
                }
                None => break,
            }
        }
    }
}

/// Run a scenario to completion.
pub fn run_simulation(config: &SimConfig, seed: u64) -> Result<SimOutcome, SimError> {
    validate(config)?;
    let b = &config.buffer;
    let w = &config.workload;
    let mut sim = Sim {
        config,
        rng: ChaCha8Rng::seed_from_u64(seed),
        caches: vec![Vec::new(); b.cpu_count],
        ring: Ring {
            buf: VecDeque::with_capacity(b.ring_capacity),
            capacity: b.ring_capacity,
        },
        report: LossReport {
            produced: 0,
            delivered: 0,
            lost_overwritten: 0,
            lost_dropped: 0,
            lost_by_priority: [0; 3],
            max_ring_occupancy: 0,
        },
        delivered_ids: Vec::new(),
        next_id: 0,
    };

    let last_burst = w.bursts.iter().map(|b| b.at_ms).max().unwrap_or(0);
    let end = w.duration_ms.max(last_burst + 1);
    for t in 0..end {
        for burst in &w.bursts {
            if burst.at_ms == t {
                for _ in 0..burst.count {
                    sim.arrive(burst.cpu);
                }
            }
        }
        if t < w.duration_ms {
            for cpu in 0..b.cpu_count {
                for _ in 0..w.rates_per_cpu[cpu] {
                    sim.arrive(cpu);
                }
            }
        }
        sim.drain(b.consumer_drain_rate);
    }
    // Workload over: flush stragglers and let the consumer finish.
    for cpu in 0..b.cpu_count {
        sim.flush(cpu);
    }
    let backlog = sim.ring.buf.len();
    sim.drain(backlog);

    debug_assert_eq!(
        sim.report.produced,
        sim.report.delivered + sim.report.lost_total()
    );
    Ok(SimOutcome {
        report: sim.report,
        delivered_ids: sim.delivered_ids,
    })
}

/// Run a scenario and return just the loss accounting.
pub fn simulate_buffers(config: &SimConfig, seed: u64) -> Result<LossReport, SimError> {
    run_simulation(config, seed).map(|o| o.report)
}
