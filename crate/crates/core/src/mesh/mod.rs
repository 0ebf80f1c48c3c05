//! Declarative mesh model: sets of elements, connectivity maps between sets,
//! and per-element data ("dats").
//!
//! Handles are small `Copy` values scoped to the [`Runtime`](crate::Runtime)
//! that issued them. They carry the metadata needed for validation so that a
//! loop argument can be checked without consulting the registry, but the
//! registry stays the source of truth: a handle from another runtime is
//! rejected with [`Error::UnknownHandle`](crate::Error::UnknownHandle).

mod args;
mod registry;
pub mod text;

pub use args::{AccessMode, LoopArg};
pub(crate) use registry::{DatStore, MapEntry, MeshRegistry};

use serde::Serialize;

use crate::scalar::ScalarKind;

/// A set of mesh elements (nodes, edges, cells, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshSet {
    pub(crate) rt: u32,
    pub(crate) id: u32,
    pub(crate) size: usize,
}

impl MeshSet {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Connectivity from each element of `from` to `arity` elements of `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshMap {
    pub(crate) rt: u32,
    pub(crate) id: u32,
    pub(crate) from: MeshSet,
    pub(crate) to: MeshSet,
    pub(crate) arity: usize,
}

impl MeshMap {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn from_set(&self) -> MeshSet {
        self.from
    }

    pub fn to_set(&self) -> MeshSet {
        self.to
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

/// `dim` values of kind `kind` attached to every element of `set`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshDat {
    pub(crate) rt: u32,
    pub(crate) id: u32,
    pub(crate) set: MeshSet,
    pub(crate) dim: usize,
    pub(crate) kind: ScalarKind,
}

impl MeshDat {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn set(&self) -> MeshSet {
        self.set
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }
}

/// A global reduction cell (not attached to a set).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Global {
    pub(crate) rt: u32,
    pub(crate) id: u32,
    pub(crate) dim: usize,
    pub(crate) kind: ScalarKind,
}

impl Global {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ScalarKind {
        self.kind
    }
}

/// Anything a loop can depend on through its arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Resource {
    Dat(u32),
    Global(u32),
}

impl std::fmt::Display for Resource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Resource::Dat(id) => write!(f, "dat{id}"),
            Resource::Global(id) => write!(f, "gbl{id}"),
        }
    }
}
