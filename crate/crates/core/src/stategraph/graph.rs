use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ExecutionTrace, GraphError, StateId, StateKey, StateTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: StateId,
    pub to: StateId,
    pub count: u64,
}

/// Deduplicated states with transition counts. Every edge endpoint is a
/// node and every count is positive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionGraph {
    pub nodes: BTreeSet<StateId>,
    pub edges: BTreeMap<(StateId, StateId), u64>,
    pub provenance: BTreeSet<String>,
}

#[derive(Serialize)]
struct GraphDoc<'a> {
    provenance: &'a BTreeSet<String>,
    nodes: &'a BTreeSet<StateId>,
    edges: Vec<Edge>,
}

impl ExecutionGraph {
    pub fn edge_count_sum(&self) -> u64 {
        self.edges.values().sum()
    }

    pub fn edge_list(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .map(|(&(from, to), &count)| Edge { from, to, count })
            .collect()
    }

    pub fn has_edge(&self, from: StateId, to: StateId) -> bool {
        self.edges.contains_key(&(from, to))
    }

    /// Add another graph's nodes, counts and provenance into this one.
    pub fn absorb(&mut self, other: &ExecutionGraph) {
        self.nodes.extend(other.nodes.iter().copied());
        for (edge, count) in &other.edges {
            *self.edges.entry(*edge).or_insert(0) += count;
        }
        self.provenance.extend(other.provenance.iter().cloned());
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            provenance: &self.provenance,
            nodes: &self.nodes,
            edges: self.edge_list(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
        s.push('\n');
        s
    }
}

pub fn build_graph(trace: &ExecutionTrace) -> ExecutionGraph {
    let mut graph = ExecutionGraph::default();
    graph.nodes.extend(trace.states.iter().copied());
    for pair in trace.states.windows(2) {
        *graph.edges.entry((pair[0], pair[1])).or_insert(0) += 1;
    }
    graph.provenance.insert(trace.run_id.clone());
    graph
}

/// Global state table, unified graph and per-run paths through it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Unified {
    pub table: StateTable,
    pub graph: ExecutionGraph,
    pub paths: BTreeMap<String, Vec<StateId>>,
}

pub fn unify(traces: &[ExecutionTrace]) -> Result<Unified, GraphError> {
    let mut unified = Unified::default();
    let Some(first) = traces.first() else {
        return Ok(unified);
    };
    let expected = first.config;
    let per_run = crate::par::map(traces, build_graph);
    for (trace, graph) in traces.iter().zip(&per_run) {
        if trace.config != expected {
            return Err(GraphError::ModeMismatch {
                run_id: trace.run_id.clone(),
                expected,
                found: trace.config,
            });
        }
        if unified
            .paths
            .insert(trace.run_id.clone(), trace.states.clone())
            .is_some()
        {
            return Err(GraphError::DuplicateRunId(trace.run_id.clone()));
        }
        unified.table.merge(&trace.table)?;
        unified.graph.absorb(graph);
    }
    Ok(unified)
}

/// Replay `path` through `graph`, de-interning each state via `table`.
pub fn reconstruct(
    graph: &ExecutionGraph,
    table: &StateTable,
    path: &[StateId],
) -> Result<Vec<StateKey>, GraphError> {
    for id in path {
        if !graph.nodes.contains(id) {
            return Err(GraphError::StateNotInGraph(*id));
        }
    }
    for pair in path.windows(2) {
        if !graph.has_edge(pair[0], pair[1]) {
            return Err(GraphError::EdgeNotInGraph {
                from: pair[0],
                to: pair[1],
            });
        }
    }
    path.iter()
        .map(|id| table.get(*id).cloned().ok_or(GraphError::UnknownState(*id)))
        .collect()
}
