use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How the chunks of one loop are executed.
///
/// Every submitted loop is already asynchronous with respect to the driver,
/// so the `*Task` variants behave like their synchronous counterparts inside
/// the engine; they are kept so call sites can state intent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Seq,
    Par,
    SeqTask,
    ParTask,
}

impl PolicyKind {
    /// True when chunks may run concurrently on the pool.
    pub fn is_parallel(self) -> bool {
        matches!(self, PolicyKind::Par | PolicyKind::ParTask)
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq" => Ok(PolicyKind::Seq),
            "par" => Ok(PolicyKind::Par),
            "seq_task" | "seq(task)" => Ok(PolicyKind::SeqTask),
            "par_task" | "par(task)" => Ok(PolicyKind::ParTask),
            _ => Err(format!("unknown execution policy `{s}`")),
        }
    }
}

/// Chunk-size selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChunkPolicy {
    Fixed(usize),
    /// `set_size / (4 * workers)`, at least 1.
    Auto,
    /// Equalize per-chunk wall time across the loops of one group.
    PersistentAuto(u32),
}

impl fmt::Display for ChunkPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChunkPolicy::Fixed(c) => write!(f, "fixed:{c}"),
            ChunkPolicy::Auto => f.write_str("auto"),
            ChunkPolicy::PersistentAuto(0) => f.write_str("persistent"),
            ChunkPolicy::PersistentAuto(g) => write!(f, "persistent:{g}"),
        }
    }
}

impl FromStr for ChunkPolicy {
    type Err = String;

    /// `fixed:C`, `auto`, `persistent` or `persistent:G`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        match (head, tail) {
            ("auto", None) => Ok(ChunkPolicy::Auto),
            ("persistent", None) => Ok(ChunkPolicy::PersistentAuto(0)),
            ("persistent", Some(g)) => g
                .parse()
                .map(ChunkPolicy::PersistentAuto)
                .map_err(|_| format!("bad chunk group `{g}`")),
            ("fixed", Some(c)) => match c.parse::<usize>() {
                Ok(0) | Err(_) => Err(format!("bad fixed chunk size `{c}`")),
                Ok(c) => Ok(ChunkPolicy::Fixed(c)),
            },
            _ => Err(format!(
                "unknown chunk policy `{s}` (expected fixed:C, auto or persistent)"
            )),
        }
    }
}

/// Software prefetch settings for a loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrefetchConfig {
    pub distance_factor: usize,
    pub cache_line_bytes: usize,
}

impl PrefetchConfig {
    pub const DEFAULT_CACHE_LINE: usize = 64;

    pub fn new(distance_factor: usize) -> Self {
        PrefetchConfig {
            distance_factor,
            cache_line_bytes: Self::DEFAULT_CACHE_LINE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExecutionPolicy {
    pub kind: PolicyKind,
    pub chunk: ChunkPolicy,
    pub prefetch: Option<PrefetchConfig>,
}

impl ExecutionPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        ExecutionPolicy {
            kind,
            chunk: ChunkPolicy::Auto,
            prefetch: None,
        }
    }

    pub fn seq() -> Self {
        Self::new(PolicyKind::Seq)
    }

    pub fn par() -> Self {
        Self::new(PolicyKind::Par)
    }

    pub fn seq_task() -> Self {
        Self::new(PolicyKind::SeqTask)
    }

    pub fn par_task() -> Self {
        Self::new(PolicyKind::ParTask)
    }

    pub fn with_chunk(mut self, chunk: ChunkPolicy) -> Self {
        self.chunk = chunk;
        self
    }

    /// A factor of 0 disables prefetching.
    pub fn with_prefetch(mut self, distance_factor: usize) -> Self {
        self.prefetch = (distance_factor > 0).then(|| PrefetchConfig::new(distance_factor));
        self
    }
}

impl Default for ExecutionPolicy {
    fn default() -> Self {
        Self::par_task()
    }
}
