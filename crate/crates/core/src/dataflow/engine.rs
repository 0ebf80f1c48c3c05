//! Task graph construction and scheduling.
//!
//! Each submitted loop becomes a task. Dependencies are derived per resource
//! from its access chain: a reader waits for the latest writer; a writer
//! additionally waits for every reader of the version it overwrites. INC is
//! a read-modify-write, so successive INC loops on one dat run in submission
//! order. A task is handed to the pool as soon as its last predecessor
//! finishes; nothing else blocks it.

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::executor::{execute_task, ExecCtx, LoopBody};
use crate::mesh::{DatStore, Resource};

use super::deferred::{Completion, DeferredValue, LoopOutputs};
use super::graph::{DependencyGraph, GraphEdge, GraphNode, Hazard};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct TaskId(pub u64);

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskState {
    Waiting,
    Runnable,
    Running,
    Done,
    Failed,
}

/// Merged access of one task to one resource.
pub(crate) struct Access {
    pub resource: Resource,
    pub reads: bool,
    pub writes: bool,
    pub store: Arc<DatStore>,
}

struct TaskNode {
    name: String,
    set_name: String,
    state: TaskState,
    pending: usize,
    successors: Vec<usize>,
    poison: Option<Error>,
    body: Option<LoopBody>,
    empty: bool,
    done: Arc<Completion>,
    mutated: Vec<Arc<DatStore>>,
}

#[derive(Default)]
struct ResourceState {
    version: u64,
    last_writer: Option<usize>,
    readers: Vec<usize>,
    writer_done: Option<Arc<Completion>>,
}

#[derive(Default)]
struct EngineState {
    tasks: Vec<TaskNode>,
    resources: HashMap<Resource, ResourceState>,
    edges: Vec<GraphEdge>,
    outstanding: usize,
    completed: u64,
    first_error: Option<Error>,
}

struct Shared {
    state: Mutex<EngineState>,
    idle: Condvar,
    pool: rayon::ThreadPool,
    exec: ExecCtx,
}

pub(crate) struct Engine {
    shared: Arc<Shared>,
}

type Launch = (usize, LoopBody);

impl Engine {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("meshflow-worker-{i}"))
            .build()
            .expect("worker pool");
        Engine {
            shared: Arc::new(Shared {
                state: Mutex::new(EngineState::default()),
                idle: Condvar::new(),
                pool,
                exec: ExecCtx::new(workers),
            }),
        }
    }

    pub fn exec(&self) -> &ExecCtx {
        &self.shared.exec
    }

    pub fn next_task_id(&self) -> TaskId {
        TaskId(self.lock().tasks.len() as u64)
    }

    fn lock(&self) -> MutexGuard<'_, EngineState> {
        self.shared.state.lock().unwrap()
    }

    /// Registers a task. `body.task` must equal [`Engine::next_task_id`].
    pub fn submit(&self, body: LoopBody, set_name: String, accesses: Vec<Access>) -> LoopOutputs {
        let done = Arc::new(Completion::default());
        let mut launches = Vec::new();
        let outputs;
        {
            let mut st = self.lock();
            let id = st.tasks.len();
            let task = TaskId(id as u64);
            assert_eq!(body.task, task, "task ids are assigned in submission order");

            let mut preds = Vec::new();
            let mut values = Vec::new();
            let mut mutated = Vec::new();
            for acc in &accesses {
                let mut new_edges = Vec::new();
                let rs = st.resources.entry(acc.resource).or_default();
                if let Some(w) = rs.last_writer {
                    let hazard = if acc.reads { Hazard::Raw } else { Hazard::Waw };
                    new_edges.push((w, hazard));
                }
                if acc.writes {
                    for r in rs.readers.drain(..) {
                        new_edges.push((r, Hazard::War));
                    }
                    rs.last_writer = Some(id);
                    rs.version += 1;
                    rs.writer_done = Some(done.clone());
                    values.push(DeferredValue {
                        task,
                        resource: acc.resource,
                        version: rs.version,
                        done: done.clone(),
                    });
                    mutated.push(acc.store.clone());
                } else if acc.reads {
                    rs.readers.push(id);
                }
                for (from, hazard) in new_edges {
                    preds.push(from);
                    st.edges.push(GraphEdge {
                        from: TaskId(from as u64),
                        to: task,
                        dat: acc.resource,
                        hazard,
                    });
                }
            }
            preds.sort_unstable();
            preds.dedup();

            let mut pending = 0;
            let mut poison = None;
            for &p in &preds {
                let pred = &mut st.tasks[p];
                match pred.state {
                    TaskState::Done => {}
                    TaskState::Failed => {
                        if poison.is_none() {
                            poison = pred.done.peek().and_then(Result::err);
                        }
                    }
                    _ => {
                        pred.successors.push(id);
                        pending += 1;
                    }
                }
            }

            let empty = body.set_size == 0;
            st.tasks.push(TaskNode {
                name: body.name.clone(),
                set_name,
                state: TaskState::Waiting,
                pending,
                successors: Vec::new(),
                poison,
                body: Some(body),
                empty,
                done: done.clone(),
                mutated,
            });
            st.outstanding += 1;

            if pending == 0 {
                Self::release(&mut st, id, &mut launches);
            }
            outputs = LoopOutputs {
                task,
                values,
                done,
            };
        }
        self.spawn_all(launches);
        outputs
    }

    /// Called with a task whose predecessors are all finished.
    fn release(st: &mut EngineState, id: usize, launches: &mut Vec<Launch>) {
        let node = &mut st.tasks[id];
        if let Some(err) = node.poison.clone() {
            Self::finish_locked(st, id, Err(err), launches);
        } else if node.empty {
            Self::finish_locked(st, id, Ok(()), launches);
        } else {
            node.state = TaskState::Runnable;
            let body = node.body.take().expect("body present until launch");
            launches.push((id, body));
        }
    }

    fn finish_locked(st: &mut EngineState, id: usize, outcome: Result<()>, launches: &mut Vec<Launch>) {
        let mut work = vec![(id, outcome)];
        while let Some((t, outcome)) = work.pop() {
            let node = &mut st.tasks[t];
            node.body = None;
            match &outcome {
                Ok(()) => {
                    node.state = TaskState::Done;
                    node.mutated.iter().for_each(|s| s.bump_version());
                }
                Err(_) => node.state = TaskState::Failed,
            }
            node.done.complete(outcome.clone());
            let successors = std::mem::take(&mut node.successors);
            st.outstanding -= 1;
            st.completed += 1;
            if let Err(e) = &outcome {
                if st.first_error.is_none() {
                    st.first_error = Some(e.clone());
                }
            }
            for s in successors {
                let succ = &mut st.tasks[s];
                succ.pending -= 1;
                if let Err(e) = &outcome {
                    succ.poison.get_or_insert_with(|| e.clone());
                }
                if succ.pending == 0 {
                    if let Some(err) = succ.poison.clone() {
                        work.push((s, Err(err)));
                    } else if succ.empty {
                        work.push((s, Ok(())));
                    } else {
                        succ.state = TaskState::Runnable;
                        let body = succ.body.take().expect("body present until launch");
                        launches.push((s, body));
                    }
                }
            }
        }
    }

    fn spawn_all(&self, launches: Vec<Launch>) {
        if self.lock().outstanding == 0 {
            self.shared.idle.notify_all();
        }
        for (id, body) in launches {
            Self::spawn(&self.shared, id, body);
        }
    }

    fn spawn(shared: &Arc<Shared>, id: usize, body: LoopBody) {
        let shared_task = shared.clone();
        shared.pool.spawn(move || {
            let shared = shared_task;
            shared.state.lock().unwrap().tasks[id].state = TaskState::Running;
            let result = execute_task(&body, &shared.exec).map_err(|message| Error::TaskPanicked {
                task: body.task,
                name: body.name.clone(),
                message,
            });
            drop(body);
            let mut launches = Vec::new();
            let idle = {
                let mut st = shared.state.lock().unwrap();
                Self::finish_locked(&mut st, id, result, &mut launches);
                st.outstanding == 0
            };
            if idle {
                shared.idle.notify_all();
            }
            for (next, body) in launches {
                Self::spawn(&shared, next, body);
            }
        });
    }

    /// Blocks until every submitted task finished; reports the first failure.
    pub fn wait_all(&self) -> Result<()> {
        let mut st = self.lock();
        while st.outstanding > 0 {
            st = self.shared.idle.wait(st).unwrap();
        }
        match &st.first_error {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    /// Completion of the latest loop that mutates `resource`, if any.
    pub fn writer_done(&self, resource: Resource) -> Option<Arc<Completion>> {
        self.lock().resources.get(&resource).and_then(|r| r.writer_done.clone())
    }

    pub fn task_done(&self, task: TaskId) -> Option<Arc<Completion>> {
        self.lock().tasks.get(task.0 as usize).map(|t| t.done.clone())
    }

    pub fn task_state(&self, task: TaskId) -> Option<TaskState> {
        self.lock().tasks.get(task.0 as usize).map(|t| t.state)
    }

    pub fn completed(&self) -> u64 {
        self.lock().completed
    }

    pub fn submitted(&self) -> u64 {
        self.lock().tasks.len() as u64
    }

    pub fn export_graph(&self) -> DependencyGraph {
        let st = self.lock();
        DependencyGraph {
            nodes: st
                .tasks
                .iter()
                .enumerate()
                .map(|(i, t)| GraphNode {
                    id: TaskId(i as u64),
                    name: t.name.clone(),
                    set: t.set_name.clone(),
                })
                .collect(),
            edges: st.edges.clone(),
        }
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        let _ = self.wait_all();
    }
}
