use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;

use crate::mesh::Resource;

use super::TaskId;

/// Why a consumer waits on a producer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Hazard {
    /// Consumer reads what the producer wrote.
    Raw,
    /// Consumer overwrites what the producer read.
    War,
    /// Consumer overwrites what the producer wrote, without reading it.
    Waw,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    pub id: TaskId,
    pub name: String,
    pub set: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GraphEdge {
    pub from: TaskId,
    pub to: TaskId,
    pub dat: Resource,
    pub hazard: Hazard,
}

/// Snapshot of the loop dependency graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DependencyGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl DependencyGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    /// GraphViz rendering, one edge label per hazard and resource.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph loops {\n  node [shape=box];\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  t{} [label=\"{}#{}\\n{}\"];", n.id.0, n.name, n.id.0, n.set);
        }
        for e in &self.edges {
            let style = match e.hazard {
                Hazard::Raw => "solid",
                Hazard::War => "dashed",
                Hazard::Waw => "dotted",
            };
            let _ = writeln!(
                out,
                "  t{} -> t{} [label=\"{} {:?}\", style={style}];",
                e.from.0, e.to.0, e.dat, e.hazard
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn edges_between(&self, from: TaskId, to: TaskId) -> impl Iterator<Item = &GraphEdge> {
        self.edges.iter().filter(move |e| e.from == from && e.to == to)
    }

    /// Kahn's algorithm; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<TaskId>> {
        let index_of = |id: TaskId| self.nodes.iter().position(|n| n.id == id);
        let mut indegree = vec![0usize; self.nodes.len()];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let (f, t) = (index_of(e.from)?, index_of(e.to)?);
            succ[f].push(t);
            indegree[t] += 1;
        }
        let mut queue: VecDeque<usize> = (0..self.nodes.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(i) = queue.pop_front() {
            order.push(self.nodes[i].id);
            for &t in &succ[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    queue.push_back(t);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }
}
