use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{ScalarKind, Values};
use crate::storage::Storage;

use super::{Global, MeshDat, MeshMap, MeshSet};

pub(crate) struct SetEntry {
    pub name: String,
    pub size: usize,
}

pub(crate) struct MapEntry {
    pub name: String,
    pub handle: MeshMap,
    pub table: Vec<u32>,
}

impl MapEntry {
    #[inline]
    pub fn target(&self, elem: usize, slot: usize) -> usize {
        self.table[elem * self.handle.arity + slot] as usize
    }
}

/// Backing store shared by dats and global cells.
pub(crate) struct DatStore {
    pub name: String,
    pub storage: Storage,
    /// Number of completed loops that mutated this store.
    pub completed_version: AtomicU64,
}

impl DatStore {
    fn new(name: &str, values: Values) -> Self {
        DatStore {
            name: name.to_owned(),
            storage: Storage::new(values),
            completed_version: AtomicU64::new(0),
        }
    }

    pub fn kind(&self) -> ScalarKind {
        self.storage.kind()
    }

    pub fn bump_version(&self) {
        self.completed_version.fetch_add(1, Ordering::AcqRel);
    }
}

pub(crate) struct DatEntry {
    pub handle: MeshDat,
    pub store: Arc<DatStore>,
}

pub(crate) struct GblEntry {
    pub handle: Global,
    pub store: Arc<DatStore>,
}

/// Append-only registry of declarations for one runtime.
pub(crate) struct MeshRegistry {
    rt: u32,
    pub sets: Vec<SetEntry>,
    pub maps: Vec<Arc<MapEntry>>,
    pub dats: Vec<DatEntry>,
    pub globals: Vec<GblEntry>,
}

fn next_id(len: usize) -> u32 {
    u32::try_from(len).expect("more than u32::MAX declarations")
}

impl MeshRegistry {
    pub fn new(rt: u32) -> Self {
        MeshRegistry {
            rt,
            sets: Vec::new(),
            maps: Vec::new(),
            dats: Vec::new(),
            globals: Vec::new(),
        }
    }

    pub fn rt(&self) -> u32 {
        self.rt
    }

    pub fn decl_set(&mut self, size: usize, name: &str) -> MeshSet {
        let id = next_id(self.sets.len());
        self.sets.push(SetEntry {
            name: name.to_owned(),
            size,
        });
        MeshSet {
            rt: self.rt,
            id,
            size,
        }
    }

    pub fn decl_map(
        &mut self,
        from: MeshSet,
        to: MeshSet,
        arity: usize,
        table: &[i64],
        name: &str,
    ) -> Result<MeshMap> {
        self.check_set(from)?;
        self.check_set(to)?;
        if arity == 0 {
            return Err(Error::InvalidDecl(format!("map `{name}` has arity 0")));
        }
        let expected = from
            .size
            .checked_mul(arity)
            .ok_or_else(|| Error::InvalidDecl(format!("map `{name}` size overflows")))?;
        if table.len() != expected {
            return Err(Error::LengthMismatch {
                what: format!("map `{name}`"),
                expected,
                actual: table.len(),
            });
        }
        if to.size > u32::MAX as usize + 1 {
            return Err(Error::InvalidDecl(format!(
                "map `{name}` targets a set larger than the index range"
            )));
        }
        let mut checked = Vec::with_capacity(table.len());
        for (position, &value) in table.iter().enumerate() {
            if value < 0 || value as u64 >= to.size as u64 {
                return Err(Error::IndexOutOfRange {
                    map: name.to_owned(),
                    position,
                    value,
                    bound: to.size,
                });
            }
            checked.push(value as u32);
        }
        let handle = MeshMap {
            rt: self.rt,
            id: next_id(self.maps.len()),
            from,
            to,
            arity,
        };
        self.maps.push(Arc::new(MapEntry {
            name: name.to_owned(),
            handle,
            table: checked,
        }));
        Ok(handle)
    }

    pub fn decl_dat(
        &mut self,
        set: MeshSet,
        dim: usize,
        init: Values,
        name: &str,
    ) -> Result<MeshDat> {
        self.check_set(set)?;
        if dim == 0 {
            return Err(Error::InvalidDecl(format!("dat `{name}` has dim 0")));
        }
        let expected = set
            .size
            .checked_mul(dim)
            .ok_or_else(|| Error::InvalidDecl(format!("dat `{name}` size overflows")))?;
        if init.len() != expected {
            return Err(Error::LengthMismatch {
                what: format!("dat `{name}`"),
                expected,
                actual: init.len(),
            });
        }
        let kind = init.kind();
        let handle = MeshDat {
            rt: self.rt,
            id: next_id(self.dats.len()),
            set,
            dim,
            kind,
        };
        self.dats.push(DatEntry {
            handle,
            store: Arc::new(DatStore::new(name, init)),
        });
        Ok(handle)
    }

    pub fn decl_global(&mut self, init: Values, name: &str) -> Result<Global> {
        if init.is_empty() {
            return Err(Error::InvalidDecl(format!("global `{name}` has dim 0")));
        }
        let handle = Global {
            rt: self.rt,
            id: next_id(self.globals.len()),
            dim: init.len(),
            kind: init.kind(),
        };
        self.globals.push(GblEntry {
            handle,
            store: Arc::new(DatStore::new(name, init)),
        });
        Ok(handle)
    }

    pub fn check_set(&self, set: MeshSet) -> Result<&SetEntry> {
        match self.sets.get(set.id as usize) {
            Some(entry) if set.rt == self.rt && entry.size == set.size => Ok(entry),
            _ => Err(Error::UnknownHandle(format!("set {}", set.id))),
        }
    }

    pub fn check_map(&self, map: MeshMap) -> Result<&Arc<MapEntry>> {
        match self.maps.get(map.id as usize) {
            Some(entry) if map.rt == self.rt && entry.handle == map => Ok(entry),
            _ => Err(Error::UnknownHandle(format!("map {}", map.id))),
        }
    }

    pub fn check_dat(&self, dat: MeshDat) -> Result<&DatEntry> {
        match self.dats.get(dat.id as usize) {
            Some(entry) if dat.rt == self.rt && entry.handle == dat => Ok(entry),
            _ => Err(Error::UnknownHandle(format!("dat {}", dat.id))),
        }
    }

    pub fn check_global(&self, gbl: Global) -> Result<&GblEntry> {
        match self.globals.get(gbl.id as usize) {
            Some(entry) if gbl.rt == self.rt && entry.handle == gbl => Ok(entry),
            _ => Err(Error::UnknownHandle(format!("global {}", gbl.id))),
        }
    }
}
