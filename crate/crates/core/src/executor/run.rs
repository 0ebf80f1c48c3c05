//! Execution of one runnable loop: coloring, chunk planning, per-element
//! gather/kernel/scatter, and the ordered fold of global increments.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataflow::TaskId;
use crate::mesh::{AccessMode, DatStore, MapEntry};
use crate::prefetch::{Container, PlatformHints, PrefetchContext};
use crate::scalar::{Scalar, ScalarKind, Values};
use crate::storage::{ArgBuf, Storage};

use super::chunk::{plan_chunks, Block, ChunkGroup, ChunkPlan};
use super::color::{greedy_color, ConflictMap};
use super::kernel::{Kernel, KernelArgs};
use super::policy::{ChunkPolicy, ExecutionPolicy};

/// Timing of one executed chunk, relative to the runtime's epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChunkRecord {
    pub task: TaskId,
    pub name: String,
    pub chunk: usize,
    pub color: u32,
    pub start_ns: u64,
    pub end_ns: u64,
    pub nelem: usize,
    pub hint_batches: u32,
}

impl ChunkRecord {
    pub fn duration_secs(&self) -> f64 {
        (self.end_ns - self.start_ns) as f64 * 1e-9
    }
}

pub(crate) enum ArgTarget {
    Direct(Arc<DatStore>),
    Indirect {
        store: Arc<DatStore>,
        map: Arc<MapEntry>,
        slot: usize,
    },
    Global(Arc<DatStore>),
}

pub(crate) struct ResolvedArg {
    pub mode: AccessMode,
    pub dim: usize,
    pub kind: ScalarKind,
    pub target: ArgTarget,
}

impl ResolvedArg {
    fn store(&self) -> &DatStore {
        match &self.target {
            ArgTarget::Direct(s) | ArgTarget::Global(s) => s,
            ArgTarget::Indirect { store, .. } => store,
        }
    }

    #[inline]
    fn offset(&self, elem: usize) -> usize {
        match &self.target {
            ArgTarget::Direct(_) => elem * self.dim,
            ArgTarget::Indirect { map, slot, .. } => map.target(elem, *slot) * self.dim,
            ArgTarget::Global(_) => 0,
        }
    }
}

pub(crate) struct LoopBody {
    pub task: TaskId,
    pub name: String,
    pub set_id: u32,
    pub set_size: usize,
    pub args: Vec<ResolvedArg>,
    pub kernel: Kernel,
    pub policy: ExecutionPolicy,
}

impl LoopBody {
    /// Maps through which this loop mutates indirectly; these drive coloring.
    fn conflict_maps(&self) -> Vec<&Arc<MapEntry>> {
        let mut maps: Vec<&Arc<MapEntry>> = Vec::new();
        for a in &self.args {
            if let ArgTarget::Indirect { map, .. } = &a.target {
                if a.mode.mutates() && !maps.iter().any(|m| m.handle.id == map.handle.id) {
                    maps.push(map);
                }
            }
        }
        maps.sort_by_key(|m| m.handle.id);
        maps
    }
}

/// Iteration set id and the ids of the maps it was colored over.
type ColoringKey = (u32, Vec<u32>);

pub(crate) struct Coloring {
    pub order: Vec<u32>,
    pub offsets: Vec<usize>,
}

/// Executor state shared by all tasks of a runtime.
pub(crate) struct ExecCtx {
    pub workers: usize,
    pub epoch: Instant,
    pub groups: Mutex<HashMap<u32, ChunkGroup>>,
    pub records: Mutex<Vec<ChunkRecord>>,
    pub colorings: Mutex<HashMap<ColoringKey, Arc<Coloring>>>,
    pub hint_batches: AtomicU64,
}

impl ExecCtx {
    pub fn new(workers: usize) -> Self {
        ExecCtx {
            workers,
            epoch: Instant::now(),
            groups: Mutex::new(HashMap::new()),
            records: Mutex::new(Vec::new()),
            colorings: Mutex::new(HashMap::new()),
            hint_batches: AtomicU64::new(0),
        }
    }

    pub fn now_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    pub fn coloring(&self, set_id: u32, set_size: usize, maps: &[&Arc<MapEntry>]) -> Arc<Coloring> {
        let key = (set_id, maps.iter().map(|m| m.handle.id).collect::<Vec<_>>());
        if let Some(c) = self.colorings.lock().unwrap().get(&key) {
            return c.clone();
        }
        let conflict: Vec<ConflictMap<'_>> = maps
            .iter()
            .map(|m| ConflictMap {
                target_set: m.handle.to.id,
                target_size: m.handle.to.size,
                arity: m.handle.arity,
                table: &m.table,
            })
            .collect();
        let plan = greedy_color(set_size, &conflict);
        let (order, offsets) = plan.execution_order();
        let coloring = Arc::new(Coloring { order, offsets });
        self.colorings.lock().unwrap().insert(key, coloring.clone());
        coloring
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "kernel panicked".to_owned()
    }
}

struct ChunkJob<'a> {
    index: usize,
    block: Block,
    color: u32,
    order: Option<&'a [u32]>,
}

/// Runs a loop to completion on the current pool. Returns the panic message
/// of the first failing chunk, if any.
pub(crate) fn execute_task(body: &LoopBody, ctx: &ExecCtx) -> Result<(), String> {
    let n = body.set_size;
    if n == 0 {
        return Ok(());
    }

    let maps = body.conflict_maps();
    let coloring = (!maps.is_empty()).then(|| ctx.coloring(body.set_id, n, &maps));
    let (order, offsets): (Option<&[u32]>, Vec<usize>) = match &coloring {
        Some(c) => (Some(&c.order), c.offsets.clone()),
        None => (None, vec![0, n]),
    };

    let group_id = match body.policy.chunk {
        ChunkPolicy::PersistentAuto(g) => Some(g),
        _ => None,
    };
    let group_snapshot = group_id.map(|g| {
        ctx.groups
            .lock()
            .unwrap()
            .get(&g)
            .cloned()
            .unwrap_or_else(|| ChunkGroup::new(g))
    });

    let mut jobs = Vec::new();
    let mut color_ranges = Vec::new();
    for (color, seg) in offsets.windows(2).enumerate() {
        let (lo, hi) = (seg[0], seg[1]);
        let plan = plan_chunks(
            hi - lo,
            &body.policy.chunk,
            ctx.workers,
            group_snapshot.as_ref().map(|g| (g, body.name.as_str())),
        );
        let first = jobs.len();
        for b in plan.blocks {
            jobs.push(ChunkJob {
                index: jobs.len(),
                block: Block {
                    offset: lo + b.offset,
                    nelem: b.nelem,
                },
                color: color as u32,
                order,
            });
        }
        color_ranges.push(first..jobs.len());
    }

    let staging: Vec<Option<Storage>> = body
        .args
        .iter()
        .map(|a| {
            matches!((a.mode, &a.target), (AccessMode::Inc, ArgTarget::Global(_)))
                .then(|| Storage::new(Values::zeros(a.kind, n * a.dim)))
        })
        .collect();

    let containers = prefetch_containers(body, order);
    let prefetch = match body.policy.prefetch {
        Some(cfg) if !containers.is_empty() => {
            PrefetchContext::new(0, n, cfg.distance_factor, cfg.cache_line_bytes, containers).ok()
        }
        _ => None,
    };
    let line = body.policy.prefetch.map_or(64, |c| c.cache_line_bytes);
    let sink = PlatformHints::new(line);

    let run = |job: &ChunkJob<'_>| run_chunk(body, ctx, job, &staging, prefetch.as_ref(), &sink);

    let mut durations = vec![0.0; jobs.len()];
    if body.policy.kind.is_parallel() {
        for range in color_ranges {
            let results: Vec<Result<f64, String>> = jobs[range.clone()].par_iter().map(run).collect();
            for (slot, r) in durations[range].iter_mut().zip(results) {
                *slot = r?;
            }
        }
    } else {
        for job in &jobs {
            durations[job.index] = run(job)?;
        }
    }

    for (arg, staged) in body.args.iter().zip(&staging) {
        if let Some(staged) = staged {
            // SAFETY: all chunks have finished; the dependency graph gives
            // this task exclusive access to the global.
            unsafe { fold_global(&arg.store().storage, staged, arg.dim) };
        }
    }

    if let Some(g) = group_id {
        let plan = ChunkPlan {
            blocks: jobs.iter().map(|j| j.block).collect(),
            durations,
        };
        ctx.groups
            .lock()
            .unwrap()
            .entry(g)
            .or_insert_with(|| ChunkGroup::new(g))
            .record(&body.name, &plan);
    }
    Ok(())
}

fn prefetch_containers<'a>(body: &'a LoopBody, order: Option<&'a [u32]>) -> Vec<Container<'a>> {
    let mut out = Vec::new();
    let mut seen_maps = Vec::new();
    for a in &body.args {
        match &a.target {
            ArgTarget::Direct(store) => {
                // SAFETY: the store holds set_size * dim elements and lives
                // as long as `body`; order entries are element indices.
                out.push(unsafe {
                    Container::from_raw(
                        store.storage.base_ptr(),
                        body.set_size,
                        a.dim * a.kind.size_bytes(),
                        order,
                    )
                });
            }
            ArgTarget::Indirect { map, .. } => {
                if !seen_maps.contains(&map.handle.id) {
                    seen_maps.push(map.handle.id);
                    // SAFETY: the table holds set_size * arity u32 entries.
                    out.push(unsafe {
                        Container::from_raw(
                            map.table.as_ptr() as *const u8,
                            body.set_size,
                            map.handle.arity * 4,
                            order,
                        )
                    });
                }
            }
            ArgTarget::Global(_) => {}
        }
    }
    out
}

fn run_chunk(
    body: &LoopBody,
    ctx: &ExecCtx,
    job: &ChunkJob<'_>,
    staging: &[Option<Storage>],
    prefetch: Option<&PrefetchContext<'_>>,
    sink: &PlatformHints,
) -> Result<f64, String> {
    let start_ns = ctx.now_ns();
    let started = Instant::now();
    let mut batches = 0u32;
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        let mut bufs: Vec<ArgBuf> = body.args.iter().map(|a| ArgBuf::zeros(a.kind, a.dim)).collect();
        let mut offs = vec![0usize; body.args.len()];
        for p in job.block.offset..job.block.end() {
            if let Some(pf) = prefetch {
                batches += pf.step(p, sink) as u32;
            }
            let e = job.order.map_or(p, |o| o[p] as usize);
            for ((a, buf), off) in body.args.iter().zip(bufs.iter_mut()).zip(offs.iter_mut()) {
                *off = a.offset(e);
                match a.mode {
                    AccessMode::Inc => buf.clear(),
                    // SAFETY: readers are ordered after the last writer of
                    // this store; no other writer is active.
                    _ => unsafe { a.store().storage.load(*off, buf) },
                }
            }
            body.kernel.call(&mut KernelArgs {
                element: e,
                bufs: &mut bufs,
            });
            for (((a, buf), off), staged) in body.args.iter().zip(&bufs).zip(&offs).zip(staging) {
                // SAFETY: direct targets are owned by this chunk's elements;
                // indirect mutating targets are unique within a color.
                unsafe {
                    match (a.mode, staged) {
                        (AccessMode::Read, _) => {}
                        (AccessMode::Inc, Some(stage)) => stage.store(p * a.dim, buf),
                        (AccessMode::Inc, None) => a.store().storage.accumulate(*off, buf),
                        (AccessMode::Write | AccessMode::Rw, _) => a.store().storage.store(*off, buf),
                    }
                }
            }
        }
    }));
    let elapsed = started.elapsed().as_secs_f64();
    let end_ns = ctx.now_ns();
    outcome.map_err(panic_message)?;
    ctx.hint_batches.fetch_add(batches as u64, Ordering::Relaxed);
    ctx.records.lock().unwrap().push(ChunkRecord {
        task: body.task,
        name: body.name.clone(),
        chunk: job.index,
        color: job.color,
        start_ns,
        end_ns,
        nelem: job.block.nelem,
        hint_batches: batches,
    });
    Ok(elapsed)
}

/// Adds staged per-element contributions to the global, one element at a
/// time in execution order, starting from its current value.
unsafe fn fold_global(global: &Storage, staged: &Storage, dim: usize) {
    fn fold<T: Scalar>(acc: &mut [T], staged: &[T], dim: usize) {
        for row in staged.chunks_exact(dim) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a = a.accumulate(*v);
            }
        }
    }
    let mut acc = global.snapshot();
    match (&mut acc, staged.snapshot()) {
        (Values::F64(a), Values::F64(s)) => fold(a, &s, dim),
        (Values::F32(a), Values::F32(s)) => fold(a, &s, dim),
        (Values::I32(a), Values::I32(s)) => fold(a, &s, dim),
        _ => unreachable!("staging kind matches the global"),
    }
    let buf = match acc {
        Values::F64(v) => ArgBuf::F64(v),
        Values::F32(v) => ArgBuf::F32(v),
        Values::I32(v) => ArgBuf::I32(v),
    };
    global.store(0, &buf);
}
