use std::collections::BTreeSet;
use std::fmt::Write;

use super::{ExecutionGraph, StateId};

/// States and transitions to draw emphasized.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Highlight {
    pub states: BTreeSet<StateId>,
    pub edges: BTreeSet<(StateId, StateId)>,
}

/// Render `graph` as DOT. Nodes are emitted in id order and edges in
/// (from, to) order, so equal graphs give identical text.
pub fn export_dot(graph: &ExecutionGraph, highlight: Option<&Highlight>) -> String {
    let mut out = String::from("digraph execution {\n");
    if !graph.nodes.is_empty() {
        out.push_str("  node [shape=box, fontname=monospace];\n");
    }
    for id in &graph.nodes {
        let hot = highlight.is_some_and(|h| h.states.contains(id));
        let _ = write!(out, "  \"{id}\" [label=\"{}\"", id.short());
        if hot {
            out.push_str(", color=red, style=bold");
        }
        out.push_str("];\n");
    }
    for (&(from, to), count) in &graph.edges {
        let hot = highlight.is_some_and(|h| h.edges.contains(&(from, to)));
        let _ = write!(out, "  \"{from}\" -> \"{to}\" [label=\"{count}\"");
        if hot {
            out.push_str(", color=red, penwidth=2");
        }
        out.push_str("];\n");
    }
    out.push_str("}\n");
    out
}
