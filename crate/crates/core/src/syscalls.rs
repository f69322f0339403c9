//! The per-architecture catalog of traced syscalls, the normalized event
//! type, and enter/exit joining.
//!
//! The catalog is a checked-in data file (`data/syscalls.tsv`) listing every
//! syscall either tracer configuration cares about: its numbers on arm64 and
//! x86_64, which configuration traces it, a priority class for the buffer
//! simulator, and the argument width schema the compact encoding packs
//! against. The two configurations differ because the legacy path-based
//! syscalls (open, mkdir, fork, ...) do not exist on arm64, which instead
//! gains the newer preadv2/pwritev2.

use std::collections::{BTreeSet, HashMap};
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Arm64,
    X86_64,
}

impl Arch {
    pub fn label(self) -> &'static str {
        match self {
            Arch::Arm64 => "arm64",
            Arch::X86_64 => "x86_64",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arm64" | "aarch64" => Ok(Arch::Arm64),
            "x86_64" | "amd64" => Ok(Arch::X86_64),
            other => Err(format!("unknown arch {other:?}")),
        }
    }
}

/// Argument slot width in the compact encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgWidth {
    /// 4-byte slot: fds, flags, modes, ids.
    W4,
    /// 8-byte slot: pointers, sizes, offsets.
    W8,
}

impl ArgWidth {
    pub fn bytes(self) -> usize {
        match self {
            ArgWidth::W4 => 4,
            ArgWidth::W8 => 8,
        }
    }
}

/// One catalog row.
#[derive(Debug, Clone)]
pub struct SyscallSpec {
    pub name: String,
    pub arm64_nr: Option<u32>,
    pub x86_64_nr: Option<u32>,
    pub traced_arm64: bool,
    pub traced_x86_64: bool,
    /// 0 = process/privilege control, 1 = file/socket metadata, 2 = bulk
    /// data. Consumed by the simulator's priority-aware drop policy.
    pub priority_class: u8,
    pub arg_schema: Vec<ArgWidth>,
    /// Set when this row is a legacy alias of another row's kernel syscall
    /// (pread -> pread64); alias rows never win nr lookups.
    pub alias_of: Option<String>,
}

impl SyscallSpec {
    pub fn nr(&self, arch: Arch) -> Option<u32> {
        match arch {
            Arch::Arm64 => self.arm64_nr,
            Arch::X86_64 => self.x86_64_nr,
        }
    }

    pub fn traced_on(&self, arch: Arch) -> bool {
        match arch {
            Arch::Arm64 => self.traced_arm64,
            Arch::X86_64 => self.traced_x86_64,
        }
    }
}

/// The parsed catalog with lookup indexes.
pub struct Catalog {
    specs: Vec<SyscallSpec>,
    by_name: HashMap<String, usize>,
    arm64_by_nr: HashMap<u32, usize>,
    x86_64_by_nr: HashMap<u32, usize>,
}

impl Catalog {
    fn parse(text: &str) -> Catalog {
        let mut specs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            assert!(
                cols.len() >= 6,
                "catalog line {} has {} columns",
                lineno + 1,
                cols.len()
            );
            let nr = |s: &str| -> Option<u32> {
                if s == "-" {
                    None
                } else {
                    Some(s.parse().expect("syscall nr"))
                }
            };
            let schema = if cols[5] == "-" {
                Vec::new()
            } else {
                cols[5]
                    .chars()
                    .map(|c| match c {
                        'i' => ArgWidth::W4,
                        'p' => ArgWidth::W8,
                        other => panic!("bad width char {other:?} on line {}", lineno + 1),
                    })
                    .collect()
            };
            specs.push(SyscallSpec {
                name: cols[0].to_string(),
                arm64_nr: nr(cols[1]),
                x86_64_nr: nr(cols[2]),
                traced_arm64: cols[3].contains('a'),
                traced_x86_64: cols[3].contains('x'),
                priority_class: cols[4].parse().expect("priority class"),
                arg_schema: schema,
                alias_of: cols.get(6).map(|s| s.to_string()),
            });
        }
        let mut by_name = HashMap::new();
        let mut arm64_by_nr = HashMap::new();
        let mut x86_64_by_nr = HashMap::new();
        for (i, spec) in specs.iter().enumerate() {
            let prev = by_name.insert(spec.name.clone(), i);
            assert!(prev.is_none(), "duplicate catalog name {}", spec.name);
            if spec.alias_of.is_none() {
                if let Some(nr) = spec.arm64_nr {
                    let prev = arm64_by_nr.insert(nr, i);
                    assert!(prev.is_none(), "duplicate arm64 nr {nr}");
                }
                if let Some(nr) = spec.x86_64_nr {
                    let prev = x86_64_by_nr.insert(nr, i);
                    assert!(prev.is_none(), "duplicate x86_64 nr {nr}");
                }
            }
        }
        Catalog {
            specs,
            by_name,
            arm64_by_nr,
            x86_64_by_nr,
        }
    }

    pub fn all(&self) -> &[SyscallSpec] {
        &self.specs
    }

    pub fn by_name(&self, name: &str) -> Option<&SyscallSpec> {
        self.by_name.get(name).map(|&i| &self.specs[i])
    }

    /// Canonical spec for a syscall number (aliases never match).
    pub fn by_nr(&self, arch: Arch, nr: u32) -> Option<&SyscallSpec> {
        let map = match arch {
            Arch::Arm64 => &self.arm64_by_nr,
            Arch::X86_64 => &self.x86_64_by_nr,
        };
        map.get(&nr).map(|&i| &self.specs[i])
    }

    pub fn nr(&self, arch: Arch, name: &str) -> Option<u32> {
        self.by_name(name).and_then(|s| s.nr(arch))
    }
}

/// The process-wide catalog instance.
pub fn catalog() -> &'static Catalog {
    static CATALOG: LazyLock<Catalog> =
        LazyLock::new(|| Catalog::parse(include_str!("../data/syscalls.tsv")));
    &CATALOG
}

/// Names traced on `arch`, sorted. The sort order also fixes the compact
/// encoding's type-code assignment.
pub fn traced_set(arch: Arch) -> BTreeSet<&'static str> {
    catalog()
        .all()
        .iter()
        .filter(|s| s.traced_on(arch))
        .map(|s| s.name.as_str())
        .collect()
}

/// Which side of a syscall an event describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Enter,
    Exit,
    /// Enter and exit merged into one event; `ret` is present.
    Joined,
}

/// One normalized syscall event, the currency of the trace-comparison
/// pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyscallEvent {
    pub ts_ns: i64,
    pub pid: u32,
    /// Thread-group id; 0 when the source does not report one.
    pub tgid: u32,
    pub nr: u32,
    pub args: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ret: Option<i64>,
    pub phase: Phase,
}

/// Join enter/exit pairs into single events.
///
/// An exit joins the most recent unjoined enter of the same `(pid, nr)`.
/// Joined events are emitted at their enter's position with the exit's
/// return value, so the output stays ordered by syscall start. Enters that
/// never return are emitted as pending `Enter` events, exits without a
/// matching enter as `Exit` orphans. Already-joined inputs pass through.
pub fn join_enter_exit(events: Vec<SyscallEvent>) -> Vec<SyscallEvent> {
    // Joined output slot per input index: enters become Some(joined) when an
    // exit claims them; claimed exits become None.
    let mut slots: Vec<Option<SyscallEvent>> = events.iter().cloned().map(Some).collect();
    let mut open: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (i, ev) in events.iter().enumerate() {
        match ev.phase {
            Phase::Enter => open.entry((ev.pid, ev.nr)).or_default().push(i),
            Phase::Exit => {
                if let Some(enter_idx) = open.get_mut(&(ev.pid, ev.nr)).and_then(Vec::pop) {
                    let slot = slots[enter_idx].as_mut().unwrap();
                    slot.phase = Phase::Joined;
                    slot.ret = ev.ret;
                    slots[i] = None;
                }
            }
            Phase::Joined => {}
        }
    }
    slots.into_iter().flatten().collect()
}
