//! The user-facing runtime: declarations, loop submission and inspection.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use crate::dataflow::{Access, DependencyGraph, Engine, LoopOutputs, TaskId, TaskState};
use crate::error::{Error, Result};
use crate::executor::{
    greedy_color, ArgTarget, ChunkGroup, ChunkRecord, ColorPlan, ConflictMap, ExecutionPolicy,
    Kernel, LoopBody, ResolvedArg,
};
use crate::mesh::{AccessMode, DatStore, Global, LoopArg, MeshDat, MeshMap, MeshRegistry, MeshSet, Resource};
use crate::scalar::Values;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "MESHFLOW_WORKERS";

static NEXT_RUNTIME: AtomicU32 = AtomicU32::new(0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuntimeConfig {
    pub workers: usize,
}

impl RuntimeConfig {
    pub fn new(workers: usize) -> Self {
        RuntimeConfig {
            workers: workers.max(1),
        }
    }

    /// Reads `MESHFLOW_WORKERS`, falling back to the available parallelism.
    pub fn from_env() -> Self {
        let workers = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&w| w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        RuntimeConfig::new(workers)
    }
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig::from_env()
    }
}

/// Owns a mesh registry and a worker pool.
///
/// Declarations and submissions come from one driver thread. Loops run on
/// the pool as soon as the loops they depend on have finished.
pub struct Runtime {
    engine: Engine,
    registry: MeshRegistry,
    workers: usize,
}

impl Runtime {
    pub fn new(config: RuntimeConfig) -> Self {
        let rt = NEXT_RUNTIME.fetch_add(1, Ordering::Relaxed);
        Runtime {
            engine: Engine::new(config.workers),
            registry: MeshRegistry::new(rt),
            workers: config.workers.max(1),
        }
    }

    pub fn with_workers(workers: usize) -> Self {
        Runtime::new(RuntimeConfig::new(workers))
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn decl_set(&mut self, size: usize, name: &str) -> MeshSet {
        self.registry.decl_set(size, name)
    }

    /// Declares a map. `table` is row-major, `arity` entries per element of
    /// `from`; every entry must index into `to`.
    pub fn decl_map<T>(&mut self, from: MeshSet, to: MeshSet, arity: usize, table: &[T], name: &str) -> Result<MeshMap>
    where
        T: Copy + TryInto<i64>,
    {
        let wide: Vec<i64> = table
            .iter()
            .map(|&v| v.try_into().unwrap_or(i64::MAX))
            .collect();
        self.registry.decl_map(from, to, arity, &wide, name)
    }

    /// Declares a dat; `init` is copied.
    pub fn decl_dat(&mut self, set: MeshSet, dim: usize, init: impl Into<Values>, name: &str) -> Result<MeshDat> {
        self.registry.decl_dat(set, dim, init.into(), name)
    }

    pub fn decl_global(&mut self, init: impl Into<Values>, name: &str) -> Result<Global> {
        self.registry.decl_global(init.into(), name)
    }

    /// Validates and submits a loop without waiting for anything.
    pub fn submit_loop(
        &self,
        name: &str,
        set: MeshSet,
        args: &[LoopArg],
        kernel: Kernel,
        policy: &ExecutionPolicy,
    ) -> Result<LoopOutputs> {
        self.registry.check_set(set)?;
        let invalid = |index: usize, reason: String| Error::InvalidArg {
            name: name.to_owned(),
            index,
            reason,
        };

        let mut resolved = Vec::with_capacity(args.len());
        let mut accesses: Vec<(Access, Vec<(usize, AccessMode)>)> = Vec::new();
        for (index, arg) in args.iter().enumerate() {
            let (target, mode, dim, store) = match *arg {
                LoopArg::Dat {
                    dat,
                    map,
                    map_slot,
                    dim,
                    mode,
                } => {
                    let entry = self.registry.check_dat(dat)?;
                    if dim != dat.dim {
                        return Err(invalid(index, format!("dim {dim} but dat has dim {}", dat.dim)));
                    }
                    let store = entry.store.clone();
                    let target = match map {
                        None => {
                            if map_slot != -1 {
                                return Err(invalid(index, format!("direct access needs slot -1, got {map_slot}")));
                            }
                            if dat.set != set {
                                return Err(invalid(index, "direct dat is not on the iteration set".into()));
                            }
                            ArgTarget::Direct(store.clone())
                        }
                        Some(map) => {
                            let map_entry = self.registry.check_map(map)?;
                            if map.from != set {
                                return Err(invalid(index, "map does not start at the iteration set".into()));
                            }
                            if map.to != dat.set {
                                return Err(invalid(index, "map does not point at the dat's set".into()));
                            }
                            if map_slot < 0 || map_slot as usize >= map.arity {
                                return Err(invalid(
                                    index,
                                    format!("slot {map_slot} outside map arity {}", map.arity),
                                ));
                            }
                            ArgTarget::Indirect {
                                store: store.clone(),
                                map: map_entry.clone(),
                                slot: map_slot as usize,
                            }
                        }
                    };
                    (target, mode, dim, store)
                }
                LoopArg::Gbl { cell, dim, mode } => {
                    let entry = self.registry.check_global(cell)?;
                    if dim != cell.dim {
                        return Err(invalid(index, format!("dim {dim} but global has dim {}", cell.dim)));
                    }
                    if !matches!(mode, AccessMode::Read | AccessMode::Inc) {
                        return Err(invalid(index, format!("global access must be READ or INC, got {mode}")));
                    }
                    let store = entry.store.clone();
                    (ArgTarget::Global(store.clone()), mode, dim, store)
                }
            };

            let resource = arg.resource();
            match accesses.iter_mut().find(|(a, _)| a.resource == resource) {
                Some((access, uses)) => {
                    uses.push((index, mode));
                    access.reads |= mode.reads();
                    access.writes |= mode.mutates();
                }
                None => accesses.push((
                    Access {
                        resource,
                        reads: mode.reads(),
                        writes: mode.mutates(),
                        store: store.clone(),
                    },
                    vec![(index, mode)],
                )),
            }
            resolved.push(ResolvedArg {
                mode,
                dim,
                kind: store.kind(),
                target,
            });
        }

        for (_, uses) in &accesses {
            if uses.len() < 2 {
                continue;
            }
            let first = uses[0].1;
            let compatible = matches!(first, AccessMode::Read | AccessMode::Inc) && uses.iter().all(|&(_, m)| m == first);
            if !compatible {
                let (index, mode) = uses[1];
                return Err(invalid(
                    index,
                    format!("{mode} conflicts with another argument on the same data ({first})"),
                ));
            }
        }

        let body = LoopBody {
            task: self.engine.next_task_id(),
            name: name.to_owned(),
            set_id: set.id,
            set_size: set.size,
            args: resolved,
            kernel,
            policy: *policy,
        };
        let set_name = self.registry.sets[set.id as usize].name.clone();
        Ok(self
            .engine
            .submit(body, set_name, accesses.into_iter().map(|(a, _)| a).collect()))
    }

    /// Blocks until every submitted loop finished.
    pub fn wait_all(&self) -> Result<()> {
        self.engine.wait_all()
    }

    pub fn wait_task(&self, task: TaskId) -> Result<()> {
        match self.engine.task_done(task) {
            Some(done) => done.wait(),
            None => Err(Error::UnknownHandle(format!("task {task}"))),
        }
    }

    pub fn task_state(&self, task: TaskId) -> Option<TaskState> {
        self.engine.task_state(task)
    }

    pub fn export_graph(&self) -> DependencyGraph {
        self.engine.export_graph()
    }

    fn settled(&self, resource: Resource) -> Result<()> {
        match self.engine.writer_done(resource) {
            Some(done) => done.wait(),
            None => Ok(()),
        }
    }

    /// Current contents of a dat, after every submitted loop that mutates it.
    pub fn read_dat(&self, dat: MeshDat) -> Result<Values> {
        let store = self.registry.check_dat(dat)?.store.clone();
        self.settled(Resource::Dat(dat.id))?;
        // SAFETY: the latest writer finished; later submissions cannot start
        // while the driver thread is here.
        Ok(unsafe { store.storage.snapshot() })
    }

    pub fn read_global(&self, gbl: Global) -> Result<Values> {
        let store = self.registry.check_global(gbl)?.store.clone();
        self.settled(Resource::Global(gbl.id))?;
        // SAFETY: as in `read_dat`.
        Ok(unsafe { store.storage.snapshot() })
    }

    /// Number of completed loops that mutated `dat`.
    pub fn dat_version(&self, dat: MeshDat) -> Result<u64> {
        let store = &self.registry.check_dat(dat)?.store;
        Ok(store.completed_version.load(Ordering::Acquire))
    }

    pub fn global_version(&self, gbl: Global) -> Result<u64> {
        let store = &self.registry.check_global(gbl)?.store;
        Ok(store.completed_version.load(Ordering::Acquire))
    }

    /// Greedy coloring of `set` under the conflicts induced by `maps`.
    pub fn color_iteration_set(&self, set: MeshSet, maps: &[MeshMap]) -> Result<ColorPlan> {
        self.registry.check_set(set)?;
        let mut entries = Vec::with_capacity(maps.len());
        for &m in maps {
            let entry = self.registry.check_map(m)?;
            if m.from != set {
                return Err(Error::InvalidDecl(format!(
                    "map `{}` does not start at the iteration set",
                    entry.name
                )));
            }
            entries.push(entry);
        }
        let conflict: Vec<ConflictMap<'_>> = entries
            .iter()
            .map(|e| ConflictMap {
                target_set: e.handle.to.id,
                target_size: e.handle.to.size,
                arity: e.handle.arity,
                table: &e.table,
            })
            .collect();
        Ok(greedy_color(set.size, &conflict))
    }

    pub fn chunk_records(&self) -> Vec<ChunkRecord> {
        self.engine.exec().records.lock().unwrap().clone()
    }

    pub fn take_chunk_records(&self) -> Vec<ChunkRecord> {
        std::mem::take(&mut *self.engine.exec().records.lock().unwrap())
    }

    pub fn chunk_group(&self, id: u32) -> Option<ChunkGroup> {
        self.engine.exec().groups.lock().unwrap().get(&id).cloned()
    }

    /// Prefetch hint batches issued so far.
    pub fn hint_batches(&self) -> u64 {
        self.engine.exec().hint_batches.load(Ordering::Relaxed)
    }

    pub fn completed_tasks(&self) -> u64 {
        self.engine.completed()
    }

    pub fn submitted_tasks(&self) -> u64 {
        self.engine.submitted()
    }

    pub fn set_name(&self, set: MeshSet) -> Result<&str> {
        Ok(&self.registry.check_set(set)?.name)
    }

    pub fn map_name(&self, map: MeshMap) -> Result<&str> {
        Ok(&self.registry.check_map(map)?.name)
    }

    pub fn dat_name(&self, dat: MeshDat) -> Result<&str> {
        Ok(&self.registry.check_dat(dat)?.store.name)
    }

    /// Map table as stored (row-major).
    pub fn map_table(&self, map: MeshMap) -> Result<&[u32]> {
        Ok(&self.registry.check_map(map)?.table)
    }

    pub(crate) fn registry(&self) -> &MeshRegistry {
        &self.registry
    }

    #[allow(dead_code)]
    pub(crate) fn dat_store(&self, dat: MeshDat) -> Result<Arc<DatStore>> {
        Ok(self.registry.check_dat(dat)?.store.clone())
    }
}

impl Default for Runtime {
    fn default() -> Self {
        Runtime::new(RuntimeConfig::default())
    }
}

impl Drop for Runtime {
    fn drop(&mut self) {
        let _ = self.engine.wait_all();
    }
}
