use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Global, MeshDat, MeshMap, Resource};

/// How a loop touches one of its arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AccessMode {
    Read,
    Write,
    /// Read then write in place.
    Rw,
    /// Additive accumulation; the kernel sees a zeroed buffer whose contents
    /// are added to the target after the call.
    Inc,
}

impl AccessMode {
    pub fn reads(self) -> bool {
        !matches!(self, AccessMode::Write)
    }

    pub fn mutates(self) -> bool {
        !matches!(self, AccessMode::Read)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AccessMode::Read => "READ",
            AccessMode::Write => "WRITE",
            AccessMode::Rw => "RW",
            AccessMode::Inc => "INC",
        }
    }
}

impl fmt::Display for AccessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AccessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().trim_start_matches("OP_") {
            "READ" => Ok(AccessMode::Read),
            "WRITE" => Ok(AccessMode::Write),
            "RW" => Ok(AccessMode::Rw),
            "INC" => Ok(AccessMode::Inc),
            _ => Err(format!("unknown access mode `{s}`")),
        }
    }
}

/// One argument of a parallel loop.
///
/// `map_slot` follows the usual convention: `-1` with no map means direct
/// access to the iterated element, otherwise it selects one of the map's
/// `arity` targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoopArg {
    Dat {
        dat: MeshDat,
        map: Option<MeshMap>,
        map_slot: i32,
        dim: usize,
        mode: AccessMode,
    },
    Gbl {
        cell: Global,
        dim: usize,
        mode: AccessMode,
    },
}

impl LoopArg {
    /// Direct access to the iterated element's own data.
    pub fn direct(dat: MeshDat, mode: AccessMode) -> Self {
        LoopArg::Dat {
            dat,
            map: None,
            map_slot: -1,
            dim: dat.dim,
            mode,
        }
    }

    /// Access through `map` to its `slot`-th target.
    pub fn indirect(dat: MeshDat, map: MeshMap, slot: usize, mode: AccessMode) -> Self {
        LoopArg::Dat {
            dat,
            map: Some(map),
            map_slot: i32::try_from(slot).unwrap_or(i32::MAX),
            dim: dat.dim,
            mode,
        }
    }

    pub fn gbl(cell: Global, mode: AccessMode) -> Self {
        LoopArg::Gbl {
            cell,
            dim: cell.dim,
            mode,
        }
    }

    /// Overrides the declared per-element dimension (validated at submission).
    pub fn with_dim(mut self, new_dim: usize) -> Self {
        match &mut self {
            LoopArg::Dat { dim, .. } | LoopArg::Gbl { dim, .. } => *dim = new_dim,
        }
        self
    }

    pub fn mode(&self) -> AccessMode {
        match self {
            LoopArg::Dat { mode, .. } | LoopArg::Gbl { mode, .. } => *mode,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LoopArg::Dat { dim, .. } | LoopArg::Gbl { dim, .. } => *dim,
        }
    }

    pub fn resource(&self) -> Resource {
        match self {
            LoopArg::Dat { dat, .. } => Resource::Dat(dat.id),
            LoopArg::Gbl { cell, .. } => Resource::Global(cell.id),
        }
    }

    /// The map of an indirect dat argument.
    pub fn map(&self) -> Option<MeshMap> {
        match self {
            LoopArg::Dat { map, .. } => *map,
            LoopArg::Gbl { .. } => None,
        }
    }
}
