//! Partitioning of an iteration range into chunks, and the persistent
//! chunk-size groups that equalize per-chunk time across dependent loops.

use std::collections::HashMap;

use serde::Serialize;

use super::policy::ChunkPolicy;

/// Chunks per worker used by [`ChunkPolicy::Auto`].
pub const AUTO_CHUNKS_PER_WORKER: usize = 4;

/// Smoothing weight for per-loop cost estimates in a [`ChunkGroup`].
pub const COST_SMOOTHING: f64 = 0.3;

pub const MIN_CHUNK: usize = 1;

/// One contiguous block of iterations: `[offset, offset + nelem)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Block {
    pub offset: usize,
    pub nelem: usize,
}

impl Block {
    pub fn end(&self) -> usize {
        self.offset + self.nelem
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ChunkPlan {
    pub blocks: Vec<Block>,
    /// Measured wall time per block in seconds, filled in after execution.
    pub durations: Vec<f64>,
}

impl ChunkPlan {
    /// Splits `[0, set_size)` into blocks of `chunk` elements (the last may
    /// be shorter).
    pub fn uniform(set_size: usize, chunk: usize) -> Self {
        let chunk = chunk.max(MIN_CHUNK);
        let blocks = (0..set_size)
            .step_by(chunk)
            .map(|offset| Block {
                offset,
                nelem: chunk.min(set_size - offset),
            })
            .collect();
        ChunkPlan {
            blocks,
            durations: Vec::new(),
        }
    }

    pub fn nblocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn chunk_size(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nelem)
    }
}

/// Block size chosen by [`ChunkPolicy::Auto`].
pub fn auto_chunk_size(set_size: usize, workers: usize) -> usize {
    (set_size / (AUTO_CHUNKS_PER_WORKER * workers.max(1))).clamp(MIN_CHUNK, set_size.max(MIN_CHUNK))
}

/// Plans the chunks of a loop over `set_size` elements.
///
/// For [`ChunkPolicy::PersistentAuto`] the caller passes the group snapshot
/// and the loop's name; the group formula applies once both the reference
/// duration and this loop's cost are known, otherwise the plan falls back to
/// the auto size (which is how a group calibrates).
pub fn plan_chunks(
    set_size: usize,
    policy: &ChunkPolicy,
    workers: usize,
    group: Option<(&ChunkGroup, &str)>,
) -> ChunkPlan {
    if set_size == 0 {
        return ChunkPlan::default();
    }
    let chunk = match policy {
        ChunkPolicy::Fixed(c) => (*c).max(MIN_CHUNK),
        ChunkPolicy::Auto => auto_chunk_size(set_size, workers),
        ChunkPolicy::PersistentAuto(_) => group
            .and_then(|(g, name)| g.chunk_size_for(name, set_size))
            .unwrap_or_else(|| auto_chunk_size(set_size, workers)),
    };
    ChunkPlan::uniform(set_size, chunk)
}

/// Shared state of one persistent chunk-size group.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ChunkGroup {
    pub id: u32,
    /// Reference chunk duration in seconds, from the first loop measured.
    pub t_ref: Option<f64>,
    /// Loop name that provided `t_ref`.
    pub reference_loop: Option<String>,
    /// Smoothed seconds per element, per loop name.
    pub cost_per_elem: HashMap<String, f64>,
}

impl ChunkGroup {
    pub fn new(id: u32) -> Self {
        ChunkGroup {
            id,
            ..Default::default()
        }
    }

    /// `clamp(round(t_ref / cost), MIN_CHUNK, set_size)` once calibrated.
    pub fn chunk_size_for(&self, loop_name: &str, set_size: usize) -> Option<usize> {
        let t_ref = self.t_ref?;
        let cost = *self.cost_per_elem.get(loop_name)?;
        if cost.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !t_ref.is_finite() {
            return None;
        }
        let ideal = (t_ref / cost).round();
        let size = if ideal >= set_size as f64 {
            set_size
        } else {
            ideal as usize
        };
        Some(size.clamp(MIN_CHUNK, set_size.max(MIN_CHUNK)))
    }

    /// Feeds the measured durations of one executed plan into the group.
    pub fn record(&mut self, loop_name: &str, plan: &ChunkPlan) {
        let per_elem: Vec<f64> = plan
            .blocks
            .iter()
            .zip(&plan.durations)
            .filter(|(b, _)| b.nelem > 0)
            .map(|(b, d)| d / b.nelem as f64)
            .collect();
        let Some(measured) = median(per_elem) else {
            return;
        };
        if self.t_ref.is_none() {
            if let Some(t) = median(plan.durations.clone()).filter(|t| *t > 0.0) {
                self.t_ref = Some(t);
                self.reference_loop = Some(loop_name.to_owned());
            }
        }
        self.cost_per_elem
            .entry(loop_name.to_owned())
            .and_modify(|c| *c = COST_SMOOTHING * measured + (1.0 - COST_SMOOTHING) * *c)
            .or_insert(measured);
    }
}

pub(crate) fn median(mut xs: Vec<f64>) -> Option<f64> {
    xs.retain(|x| x.is_finite());
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}
