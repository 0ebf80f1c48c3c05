//! Chunked, colored execution of a single loop.

mod chunk;
mod color;
mod kernel;
mod policy;
mod run;

pub use chunk::{
    auto_chunk_size, plan_chunks, Block, ChunkGroup, ChunkPlan, AUTO_CHUNKS_PER_WORKER,
    COST_SMOOTHING, MIN_CHUNK,
};
pub use color::{greedy_color, ColorPlan, ConflictMap};
pub use kernel::{Kernel, KernelArgs};
pub use policy::{ChunkPolicy, ExecutionPolicy, PolicyKind, PrefetchConfig};
pub use run::ChunkRecord;

pub(crate) use chunk::median;
pub(crate) use run::{execute_task, ArgTarget, ExecCtx, LoopBody, ResolvedArg};
