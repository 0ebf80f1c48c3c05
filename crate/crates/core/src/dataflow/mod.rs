//! Deferred values and the loop dependency graph.

mod deferred;
mod engine;
mod graph;

pub use deferred::{DeferredValue, LoopOutputs};
pub use engine::{TaskId, TaskState};
pub use graph::{DependencyGraph, GraphEdge, GraphNode, Hazard};

pub(crate) use engine::{Access, Engine};
