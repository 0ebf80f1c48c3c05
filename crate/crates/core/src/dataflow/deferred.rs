use std::sync::{Arc, Condvar, Mutex};

use crate::error::{Error, Result};
use crate::mesh::Resource;

use super::TaskId;

/// Completion cell of one task, shared by all of its tokens.
#[derive(Debug, Default)]
pub(crate) struct Completion {
    state: Mutex<Option<Result<()>>>,
    ready: Condvar,
}

impl Completion {
    /// Sets the outcome. Only the first call has an effect.
    pub fn complete(&self, outcome: Result<()>) {
        let mut state = self.state.lock().unwrap();
        if state.is_none() {
            *state = Some(outcome);
            self.ready.notify_all();
        }
    }

    pub fn is_complete(&self) -> bool {
        self.state.lock().unwrap().is_some()
    }

    pub fn wait(&self) -> Result<()> {
        let mut state = self.state.lock().unwrap();
        loop {
            if let Some(outcome) = state.as_ref() {
                return outcome.clone();
            }
            state = self.ready.wait(state).unwrap();
        }
    }

    pub fn peek(&self) -> Option<Result<()>> {
        self.state.lock().unwrap().clone()
    }
}

/// Token for the version of a dat (or global) produced by a submitted loop.
///
/// Waiting on a token blocks only the caller; the pool keeps running every
/// task whose inputs are ready.
#[derive(Debug, Clone)]
pub struct DeferredValue {
    pub(crate) task: TaskId,
    pub(crate) resource: Resource,
    pub(crate) version: u64,
    pub(crate) done: Arc<Completion>,
}

impl DeferredValue {
    pub fn task(&self) -> TaskId {
        self.task
    }

    pub fn resource(&self) -> Resource {
        self.resource
    }

    /// The version of `resource` this token completes (1 for the first loop
    /// that mutates it).
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn is_ready(&self) -> bool {
        self.done.is_complete()
    }

    /// Blocks until the producing loop finished. Fails with
    /// [`Error::TaskPanicked`] if it, or any loop it depended on, panicked.
    pub fn get(&self) -> Result<(), Error> {
        self.done.wait()
    }

    /// Whether two tokens come from the same loop.
    pub fn same_task(&self, other: &DeferredValue) -> bool {
        Arc::ptr_eq(&self.done, &other.done)
    }
}

/// Everything a submitted loop hands back to the driver.
#[derive(Debug, Clone)]
pub struct LoopOutputs {
    pub(crate) task: TaskId,
    pub(crate) values: Vec<DeferredValue>,
    pub(crate) done: Arc<Completion>,
}

impl LoopOutputs {
    pub fn task(&self) -> TaskId {
        self.task
    }

    /// One token per mutated dat and per incremented global, in argument
    /// order.
    pub fn values(&self) -> &[DeferredValue] {
        &self.values
    }

    pub fn into_values(self) -> Vec<DeferredValue> {
        self.values
    }

    /// Token for `resource`, if this loop mutates it.
    pub fn value_for(&self, resource: Resource) -> Option<&DeferredValue> {
        self.values.iter().find(|v| v.resource == resource)
    }

    pub fn is_ready(&self) -> bool {
        self.done.is_complete()
    }

    /// Waits for the loop itself, which also covers read-only loops.
    pub fn wait(&self) -> Result<()> {
        self.done.wait()
    }
}
