//! Unstructured-mesh parallel loops scheduled as an asynchronous dataflow
//! graph.
//!
//! A [`Runtime`] holds sets, maps and dats. Each [`Runtime::submit_loop`]
//! call turns a loop over a set into a task whose dependencies on earlier
//! loops are derived from the declared access modes; tasks run on a worker
//! pool as soon as their inputs are ready, without barriers between loops.
//!
//! ```
//! use meshflow::{AccessMode, ExecutionPolicy, Kernel, LoopArg, Runtime, Values};
//!
//! # fn main() -> meshflow::Result<()> {
//! let mut rt = Runtime::with_workers(2);
//! let nodes = rt.decl_set(3, "nodes");
//! let edges = rt.decl_set(2, "edges");
//! let e2n = rt.decl_map(edges, nodes, 2, &[0, 1, 1, 2], "e2n")?;
//! let x = rt.decl_dat(nodes, 1, vec![1.0f64, 4.0, 9.0], "x")?;
//! let flux = rt.decl_dat(nodes, 1, vec![0.0f64; 3], "flux")?;
//!
//! rt.submit_loop(
//!     "edge_flux",
//!     edges,
//!     &[
//!         LoopArg::indirect(x, e2n, 0, AccessMode::Read),
//!         LoopArg::indirect(x, e2n, 1, AccessMode::Read),
//!         LoopArg::indirect(flux, e2n, 0, AccessMode::Inc),
//!         LoopArg::indirect(flux, e2n, 1, AccessMode::Inc),
//!     ],
//!     Kernel::new(|a| {
//!         let d = a.f64(1)[0] - a.f64(0)[0];
//!         a.f64_mut(2)[0] = d;
//!         a.f64_mut(3)[0] = -d;
//!     }),
//!     &ExecutionPolicy::par_task(),
//! )?;
//! assert_eq!(rt.read_dat(flux)?, Values::F64(vec![3.0, 2.0, -5.0]));
//! # Ok(())
//! # }
//! ```

pub mod airfoil;
pub mod dataflow;
pub mod error;
pub mod executor;
pub mod harness;
pub mod mesh;
pub mod prefetch;
pub mod runtime;
pub mod scalar;
mod storage;

pub use dataflow::{DeferredValue, DependencyGraph, GraphEdge, GraphNode, Hazard, LoopOutputs, TaskId, TaskState};
pub use error::{Error, Result};
pub use executor::{
    ChunkGroup, ChunkPlan, ChunkPolicy, ChunkRecord, ColorPlan, ExecutionPolicy, Kernel, KernelArgs, PolicyKind,
    PrefetchConfig,
};
pub use mesh::{AccessMode, Global, LoopArg, MeshDat, MeshMap, MeshSet, Resource};
pub use runtime::{Runtime, RuntimeConfig, WORKERS_ENV};
pub use scalar::{ScalarKind, Values};
