//! Expander and routing-gadget constructions, their certification, and DOT export.

pub mod expander;
pub mod flow;
pub mod gadget;

use std::fmt::Write as _;

use thiserror::Error;

pub use expander::{build_expander, verify_edge_expansion, ExpanderGraph, ExpansionMode, ExpansionVerdict};
pub use flow::{
    max_vertex_disjoint_paths, try_verify_routing, verify_routing, DisjointPaths, RoutingMode,
    RoutingReport,
};
pub use gadget::{build_certified_gadget, build_gadget_graph, certify_gadget, GadgetBackend, GadgetGraph, VertexRole};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("exhaustive check needs at most {limit} vertices, graph has {vertices}")]
    TooLargeForExhaustive { vertices: usize, limit: usize },
    #[error("gadget failed routing certification (min flow {} of {})", .0.min_flow_found, .0.ell)]
    RoutingVerificationFailed(Box<RoutingReport>),
    #[error("invalid size: {0}")]
    InvalidSize(String),
}

/// Graphs that can be rendered as Graphviz DOT.
pub trait ToDot {
    fn to_dot(&self) -> String;
}

impl ToDot for GadgetGraph {
    fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph gadget_{} {{", self.ell);
        out.push_str("  rankdir=TB;\n");
        for (v, role) in self.roles.iter().enumerate() {
            let (shape, label) = match role {
                VertexRole::Input => ("box", "u"),
                VertexRole::Output => ("doublecircle", "v"),
                VertexRole::Internal => ("circle", "w"),
            };
            let _ = writeln!(out, "  n{v} [shape={shape}, label=\"{label}{v}\"];");
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  n{a} -> n{b};");
        }
        out.push_str("}\n");
        out
    }
}

impl ToDot for ExpanderGraph {
    fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph expander_{} {{", self.vertex_count);
        for v in 0..self.vertex_count {
            let _ = writeln!(out, "  n{v} [shape=circle];");
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "  n{a} -- n{b};");
        }
        out.push_str("}\n");
        out
    }
}

pub fn export_dot<G: ToDot>(g: &G) -> String {
    g.to_dot()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gadget_dot_has_roles() {
        let g = build_gadget_graph(1, GadgetBackend::Benes).unwrap();
        let dot = export_dot(&g);
        assert!(dot.starts_with("digraph"));
        assert!(dot.matches("[shape=").count() >= 3);
        assert!(dot.contains("box") && dot.contains("doublecircle") && dot.contains("circle"));
        assert_eq!(dot.matches(" -> ").count(), g.edges.len());
    }

    #[test]
    fn expander_dot_keeps_multi_edges() {
        let g = build_expander(4);
        let dot = export_dot(&g);
        assert!(dot.starts_with("graph"));
        assert_eq!(dot.matches(" -- ").count(), g.edges.len());
    }
}
