//! Two-tracer completeness comparison.
//!
//! Given the same workload observed by two tracers, quantify what each one
//! missed: normalize both logs to [`SyscallEvent`] streams, align their
//! clocks via an anchor event, greedily match events within the overlap
//! window, and report the unique event ratio (UER) for each side: the share
//! of the union of observed events that only that side's counterpart missed.
//! A lossy tracer shows up as a high UER on the other log.
//!
//! Two input formats are supported: audit JSONL (one serialized
//! [`SyscallEvent`] per line, absolute clock, enter/exit already joined) and
//! ftrace text from the `raw_syscalls` tracepoints (boot-relative clock,
//! separate `sys_enter`/`sys_exit` lines that are joined during
//! normalization).

use std::collections::{HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::syscalls::{catalog, join_enter_exit, Arch, Phase, SyscallEvent};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("no anchor: no content-matching mmap after an execve in both logs")]
    NoAnchor,
    #[error("empty union: no events in the overlap window")]
    EmptyUnion,
    #[error("log {0} has no events")]
    EmptyLog(&'static str),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct NormalizeError {
    pub line: usize,
    pub msg: String,
}

/// Where a log came from, which fixes its format and clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// JSONL events on an absolute clock (the audit tracer's output).
    Audit,
    /// ftrace `raw_syscalls` text on the boot-relative trace clock.
    Ftrace,
    /// JSONL events, clock unspecified.
    Generic,
}

impl Source {
    /// Guess the format from content: JSONL starts with `{`.
    pub fn detect(text: &str) -> Source {
        for line in text.lines() {
            let line = line.trim_start();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return if line.starts_with('{') {
                Source::Audit
            } else {
                Source::Ftrace
            };
        }
        Source::Generic
    }
}

impl std::str::FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "audit" => Ok(Source::Audit),
            "ftrace" => Ok(Source::Ftrace),
            "generic" => Ok(Source::Generic),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockBase {
    Absolute,
    BootRelative,
}

/// A normalized log: time-sorted events plus source metadata.
#[derive(Debug, Clone)]
pub struct TraceLog {
    pub source: Source,
    pub clock_base: ClockBase,
    pub events: Vec<SyscallEvent>,
}

#[derive(Debug, Clone, Default)]
pub struct NormalizeOptions {
    /// Drop events from these pids (the tracers' own processes).
    pub exclude_pids: Vec<u32>,
}

/// Parse, filter, join, and sort one log.
pub fn normalize_log(
    text: &str,
    source: Source,
    opts: &NormalizeOptions,
) -> Result<TraceLog, NormalizeError> {
    let mut events = match source {
        Source::Audit | Source::Generic => parse_audit_jsonl(text)?,
        Source::Ftrace => parse_ftrace_text(text)?,
    };
    if !opts.exclude_pids.is_empty() {
        events.retain(|e| !opts.exclude_pids.contains(&e.pid));
    }
    // ftrace logs arrive split into enter/exit lines; joining makes the two
    // sides comparable. Already-joined events pass through untouched.
    if events.iter().any(|e| e.phase != Phase::Joined) {
        events = join_enter_exit(events);
    }
    events.sort_by_key(|e| e.ts_ns);
    Ok(TraceLog {
        source,
        clock_base: match source {
            Source::Ftrace => ClockBase::BootRelative,
            _ => ClockBase::Absolute,
        },
        events,
    })
}

/// Parse audit JSONL: one [`SyscallEvent`] object per line.
pub fn parse_audit_jsonl(text: &str) -> Result<Vec<SyscallEvent>, NormalizeError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ev: SyscallEvent = serde_json::from_str(line).map_err(|e| NormalizeError {
            line: idx + 1,
            msg: e.to_string(),
        })?;
        out.push(ev);
    }
    Ok(out)
}

/// Serialize events as audit JSONL.
pub fn render_audit_jsonl(events: &[SyscallEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&serde_json::to_string(ev).unwrap());
        out.push('\n');
    }
    out
}

/// Parse ftrace `raw_syscalls` text lines:
///
/// ```text
///  comm-pid  [cpu] flags  secs.usecs: sys_enter: NR nr (a, b, ...)
///  comm-pid  [cpu] flags  secs.usecs: sys_exit: NR nr = ret
/// ```
///
/// Arguments are bare hex, the return value decimal. ftrace does not report
/// thread-group ids, so `tgid` is 0 (unknown).
pub fn parse_ftrace_text(text: &str) -> Result<Vec<SyscallEvent>, NormalizeError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let err = |msg: &str| NormalizeError {
            line: lineno,
            msg: msg.to_string(),
        };
        let (phase, sep) = if line.contains(": sys_enter: NR ") {
            (Phase::Enter, ": sys_enter: NR ")
        } else if line.contains(": sys_exit: NR ") {
            (Phase::Exit, ": sys_exit: NR ")
        } else {
            return Err(err("no sys_enter/sys_exit payload"));
        };
        let split_at = line.find(sep).unwrap();
        let head = &line[..split_at];
        let payload = &line[split_at + sep.len()..];

        // Head, right to left: timestamp, irq flags, [cpu], comm-pid.
        let mut rtokens = head.split_whitespace().rev();
        let ts_tok = rtokens.next().ok_or_else(|| err("missing timestamp"))?;
        let _flags = rtokens.next().ok_or_else(|| err("missing flags"))?;
        let _cpu = rtokens.next().ok_or_else(|| err("missing cpu"))?;
        let comm_pid: Vec<&str> = rtokens.collect();
        let comm_pid = comm_pid
            .into_iter()
            .rev()
            .collect::<Vec<_>>()
            .join(" ");
        let (_, pid_str) = comm_pid
            .rsplit_once('-')
            .ok_or_else(|| err("missing comm-pid"))?;
        let pid: u32 = pid_str.parse().map_err(|_| err("bad pid"))?;

        let (secs, frac) = ts_tok
            .split_once('.')
            .ok_or_else(|| err("bad timestamp"))?;
        let secs: i64 = secs.parse().map_err(|_| err("bad timestamp seconds"))?;
        if frac.len() != 6 || frac.chars().any(|c| !c.is_ascii_digit()) {
            return Err(err("timestamp fraction must be 6 digits"));
        }
        let micros: i64 = frac.parse().unwrap();
        let ts_ns = secs * 1_000_000_000 + micros * 1_000;

        let (nr_str, rest) = payload
            .split_once(' ')
            .ok_or_else(|| err("missing NR payload"))?;
        let nr: u32 = nr_str.parse().map_err(|_| err("bad syscall nr"))?;

        let (args, ret) = match phase {
            Phase::Enter => {
                let inner = rest
                    .trim()
                    .strip_prefix('(')
                    .and_then(|s| s.strip_suffix(')'))
                    .ok_or_else(|| err("bad argument list"))?;
                let mut args = Vec::new();
                if !inner.trim().is_empty() {
                    for tok in inner.split(',') {
                        let tok = tok.trim();
                        let tok = tok.strip_prefix("0x").unwrap_or(tok);
                        let v = u64::from_str_radix(tok, 16)
                            .map_err(|_| err("bad hex argument"))?;
                        args.push(v);
                    }
                }
                (args, None)
            }
            Phase::Exit => {
                let rest = rest.trim();
                let val = rest
                    .strip_prefix("= ")
                    .ok_or_else(|| err("bad return value"))?;
                let ret = if let Some(h) = val.strip_prefix("0x") {
                    i64::from_str_radix(h, 16).map_err(|_| err("bad return value"))?
                } else {
                    val.parse().map_err(|_| err("bad return value"))?
                };
                (Vec::new(), Some(ret))
            }
            Phase::Joined => unreachable!(),
        };
        out.push(SyscallEvent {
            ts_ns,
            pid,
            tgid: 0,
            nr,
            args,
            ret,
            phase,
        });
    }
    Ok(out)
}

/// Render joined events as ftrace text (enter line plus exit line 1 us
/// later). Pending enters render only their enter line.
pub fn render_ftrace_text(events: &[SyscallEvent], comm: &str) -> String {
    let mut out = String::new();
    let mut line = |ts_ns: i64, pid: u32, body: String| {
        let secs = ts_ns.div_euclid(1_000_000_000);
        let micros = ts_ns.rem_euclid(1_000_000_000) / 1_000;
        out.push_str(&format!(
            " {comm}-{pid}  [000] ...1  {secs}.{micros:06}: {body}\n"
        ));
    };
    for ev in events {
        let args = ev
            .args
            .iter()
            .map(|a| format!("{a:x}"))
            .collect::<Vec<_>>()
            .join(", ");
        match ev.phase {
            Phase::Enter => line(ev.ts_ns, ev.pid, format!("sys_enter: NR {} ({args})", ev.nr)),
            Phase::Exit => line(
                ev.ts_ns,
                ev.pid,
                format!("sys_exit: NR {} = {}", ev.nr, ev.ret.unwrap_or(0)),
            ),
            Phase::Joined => {
                line(ev.ts_ns, ev.pid, format!("sys_enter: NR {} ({args})", ev.nr));
                line(
                    ev.ts_ns + 1_000,
                    ev.pid,
                    format!("sys_exit: NR {} = {}", ev.nr, ev.ret.unwrap_or(0)),
                );
            }
        }
    }
    out
}

/// Matching knobs.
#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub arch: Arch,
    /// Per-syscall (by name) indices of the arguments that must agree.
    /// Syscalls not listed compare their full argument vector, harmonized to
    /// the catalog arity.
    pub comparison_args: HashMap<String, Vec<usize>>,
    /// Syscalls excluded from matching and counting entirely.
    pub excluded_syscalls: Vec<String>,
    /// Optional cap on |ts_a - (ts_b + offset)| for a pair; off by default
    /// because buffering delays routinely exceed any reasonable cap.
    pub max_skew_ns: Option<i64>,
}

impl CompareConfig {
    pub fn new(arch: Arch) -> Self {
        let mut comparison_args = HashMap::new();
        // mmap: compare length/prot/flags/fd; the address hint and offset
        // are tracer-timing dependent.
        comparison_args.insert("mmap".to_string(), vec![1, 2, 3, 4]);
        CompareConfig {
            arch,
            comparison_args,
            excluded_syscalls: vec!["clone".to_string()],
            max_skew_ns: None,
        }
    }
}

/// Compute the clock offset `ts_a - ts_b` from an anchor event pair.
///
/// The anchor is the first mmap following each log's first execve whose
/// non-timestamp fields (pid, nr, all args, ret) agree across the logs:
/// execve resets the caller's address space, so the mmaps right after it
/// form a distinctive pattern present in both logs even when either tracer
/// is lossy elsewhere.
pub fn compute_offset(a: &TraceLog, b: &TraceLog, arch: Arch) -> Result<i64, CompareError> {
    let execve_nr = catalog().nr(arch, "execve");
    let mmap_nr = catalog().nr(arch, "mmap");
    let (Some(execve_nr), Some(mmap_nr)) = (execve_nr, mmap_nr) else {
        return Err(CompareError::NoAnchor);
    };
    let candidates = |log: &TraceLog| -> Vec<SyscallEvent> {
        let first_execve = log.events.iter().position(|e| e.nr == execve_nr);
        match first_execve {
            None => Vec::new(),
            Some(pos) => log.events[pos..]
                .iter()
                .filter(|e| e.nr == mmap_nr)
                .cloned()
                .collect(),
        }
    };
    let cand_a = candidates(a);
    let cand_b = candidates(b);
    for ea in &cand_a {
        for eb in &cand_b {
            if ea.pid == eb.pid && ea.args == eb.args && ea.ret == eb.ret {
                return Ok(ea.ts_ns - eb.ts_ns);
            }
        }
    }
    Err(CompareError::NoAnchor)
}

/// Why a pair was considered the same event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKeyKind {
    Pid,
    Tgid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchPair {
    /// Index into `a.events`.
    pub index_a: usize,
    /// Index into `b.events`.
    pub index_b: usize,
    pub matched_on: MatchKeyKind,
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub matched: usize,
    pub unique_a: usize,
    pub unique_b: usize,
    pub pairs: Vec<MatchPair>,
    /// The overlap window (in log A's clock) that events had to fall in.
    pub window: (i64, i64),
}

#[derive(Hash, PartialEq, Eq)]
struct MatchKey {
    id: u32,
    nr: u32,
    args: Vec<u64>,
}

fn comparison_args(ev: &SyscallEvent, config: &CompareConfig, name: Option<&str>) -> Vec<u64> {
    if let Some(name) = name {
        if let Some(indices) = config.comparison_args.get(name) {
            return indices
                .iter()
                .filter_map(|&i| ev.args.get(i).copied())
                .collect();
        }
        // Harmonize to catalog arity: an ftrace source reports all six
        // argument registers even for a three-argument syscall.
        if let Some(spec) = catalog().by_name(name) {
            let n = spec.arg_schema.len().min(ev.args.len());
            return ev.args[..n].to_vec();
        }
    }
    ev.args.clone()
}

/// Greedily match events between two normalized logs.
///
/// `offset_ns` (from [`compute_offset`] or supplied) shifts log B onto log
/// A's clock. Matching is restricted to the overlap window where both
/// tracers were active. Two events match when pid (or tgid as fallback when
/// a side lacks thread ids), syscall, and the comparison arguments agree;
/// each event matches at most once, earliest candidate first.
pub fn match_events(
    a: &TraceLog,
    b: &TraceLog,
    offset_ns: i64,
    config: &CompareConfig,
) -> Result<MatchResult, CompareError> {
    if a.events.is_empty() {
        return Err(CompareError::EmptyLog("a"));
    }
    if b.events.is_empty() {
        return Err(CompareError::EmptyLog("b"));
    }
    let excluded_nrs: Vec<u32> = config
        .excluded_syscalls
        .iter()
        .filter_map(|name| catalog().nr(config.arch, name))
        .collect();

    let start = a.events.first().unwrap().ts_ns.max(b.events.first().unwrap().ts_ns + offset_ns);
    let end = a.events.last().unwrap().ts_ns.min(b.events.last().unwrap().ts_ns + offset_ns);

    let in_scope = |ts: i64, nr: u32| ts >= start && ts <= end && !excluded_nrs.contains(&nr);

    let name_of = |nr: u32| catalog().by_nr(config.arch, nr).map(|s| s.name.as_str());

    // Pools of log-A events by key, FIFO within a key.
    let mut pool_pid: HashMap<MatchKey, VecDeque<usize>> = HashMap::new();
    let mut pool_tgid: HashMap<MatchKey, VecDeque<usize>> = HashMap::new();
    let mut count_a = 0usize;
    for (i, ev) in a.events.iter().enumerate() {
        if !in_scope(ev.ts_ns, ev.nr) {
            continue;
        }
        count_a += 1;
        let args = comparison_args(ev, config, name_of(ev.nr));
        if ev.pid != 0 {
            pool_pid
                .entry(MatchKey {
                    id: ev.pid,
                    nr: ev.nr,
                    args: args.clone(),
                })
                .or_default()
                .push_back(i);
        }
        if ev.tgid != 0 {
            pool_tgid
                .entry(MatchKey {
                    id: ev.tgid,
                    nr: ev.nr,
                    args,
                })
                .or_default()
                .push_back(i);
        }
    }

    let mut claimed = vec![false; a.events.len()];
    let mut pairs = Vec::new();
    let mut count_b = 0usize;
    for (j, ev) in b.events.iter().enumerate() {
        let ts = ev.ts_ns + offset_ns;
        if !in_scope(ts, ev.nr) {
            continue;
        }
        count_b += 1;
        let args = comparison_args(ev, config, name_of(ev.nr));
        let skew_ok = |i: usize| {
            config
                .max_skew_ns
                .is_none_or(|cap| (a.events[i].ts_ns - ts).abs() <= cap)
        };
        let claim = |pool: &mut HashMap<MatchKey, VecDeque<usize>>,
                         key: MatchKey|
         -> Option<usize> {
            let queue = pool.get_mut(&key)?;
            while let Some(&i) = queue.front() {
                if claimed[i] {
                    queue.pop_front();
                    continue;
                }
                if !skew_ok(i) {
                    return None;
                }
                queue.pop_front();
                return Some(i);
            }
            None
        };
        let mut matched = None;
        if ev.pid != 0 {
            if let Some(i) = claim(
                &mut pool_pid,
                MatchKey {
                    id: ev.pid,
                    nr: ev.nr,
                    args: args.clone(),
                },
            ) {
                matched = Some((i, MatchKeyKind::Pid));
            }
        }
        if matched.is_none() && ev.tgid != 0 {
            if let Some(i) = claim(
                &mut pool_tgid,
                MatchKey {
                    id: ev.tgid,
                    nr: ev.nr,
                    args,
                },
            ) {
                matched = Some((i, MatchKeyKind::Tgid));
            }
        }
        if let Some((i, kind)) = matched {
            claimed[i] = true;
            pairs.push(MatchPair {
                index_a: i,
                index_b: j,
                matched_on: kind,
            });
        }
    }

    let matched = pairs.len();
    Ok(MatchResult {
        matched,
        unique_a: count_a - matched,
        unique_b: count_b - matched,
        pairs,
        window: (start, end),
    })
}

/// Unique event ratios `(uer_a, uer_b)`: each log's unique share of the
/// union of events seen in the window.
pub fn uer(result: &MatchResult) -> Result<(f64, f64), CompareError> {
    let union = result.matched + result.unique_a + result.unique_b;
    if union == 0 {
        return Err(CompareError::EmptyUnion);
    }
    Ok((
        result.unique_a as f64 / union as f64,
        result.unique_b as f64 / union as f64,
    ))
}
