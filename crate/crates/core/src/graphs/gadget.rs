//! Routing gadgets: DAGs with `2l` degree-one inputs and `l` outputs such that
//! every `l`-subset of inputs reaches all outputs by vertex-disjoint paths.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::flow::{verify_routing, RoutingMode, RoutingReport};
use super::GraphError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GadgetBackend {
    /// Wire graph of a Benes permutation network.
    Benes,
    /// Linear-size recursive superconcentrator; certified by flow checks on build.
    Recursive,
}

impl fmt::Display for GadgetBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GadgetBackend::Benes => "benes",
            GadgetBackend::Recursive => "recursive",
        })
    }
}

impl FromStr for GadgetBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "benes" => Ok(GadgetBackend::Benes),
            "recursive" => Ok(GadgetBackend::Recursive),
            other => Err(format!("unknown backend `{other}` (expected benes|recursive)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexRole {
    Input,
    Output,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetGraph {
    pub ell: usize,
    pub roles: Vec<VertexRole>,
    /// `2 * ell` input vertices in order.
    pub inputs: Vec<usize>,
    /// `ell` output vertices in order.
    pub outputs: Vec<usize>,
    pub internal: Vec<usize>,
    /// Directed edges `(tail, head)`.
    pub edges: Vec<(usize, usize)>,
    /// Largest in- or out-degree.
    pub degree_bound: usize,
    pub backend: GadgetBackend,
}

impl GadgetGraph {
    /// Assembles a gadget from raw parts, numbering vertices `0..vertex_count`.
    pub fn from_parts(
        ell: usize,
        vertex_count: usize,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
        edges: Vec<(usize, usize)>,
        backend: GadgetBackend,
    ) -> Self {
        let mut roles = vec![VertexRole::Internal; vertex_count];
        inputs.iter().for_each(|&u| roles[u] = VertexRole::Input);
        outputs.iter().for_each(|&v| roles[v] = VertexRole::Output);
        let internal = (0..vertex_count)
            .filter(|&v| roles[v] == VertexRole::Internal)
            .collect();
        let mut g = GadgetGraph {
            ell,
            roles,
            inputs,
            outputs,
            internal,
            edges,
            degree_bound: 0,
            backend,
        };
        g.degree_bound = g.observed_degree_bound();
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.roles.len()
    }

    pub fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.vertex_count()];
        for (i, &(a, _)) in self.edges.iter().enumerate() {
            out[a].push(i);
        }
        out
    }

    pub fn in_edges(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertex_count()];
        for (i, &(_, b)) in self.edges.iter().enumerate() {
            inc[b].push(i);
        }
        inc
    }

    pub fn observed_degree_bound(&self) -> usize {
        let out = self.out_edges();
        let inc = self.in_edges();
        out.iter()
            .chain(inc.iter())
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }

    /// Kahn's algorithm; `None` when a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.vertex_count();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let out = self.out_edges();
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &e in &out[v] {
                let h = self.edges[e].1;
                indeg[h] -= 1;
                if indeg[h] == 0 {
                    queue.push_back(h);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Structural invariants: acyclic, inputs with indegree 0 and outdegree 1,
    /// outputs with outdegree 0, recorded degree bound equal to the observed one.
    pub fn check_structure(&self) -> Result<(), String> {
        if self.inputs.len() != 2 * self.ell || self.outputs.len() != self.ell {
            return Err(format!(
                "expected {} inputs and {} outputs, found {} and {}",
                2 * self.ell,
                self.ell,
                self.inputs.len(),
                self.outputs.len()
            ));
        }
        if self.topological_order().is_none() {
            return Err("graph has a directed cycle".into());
        }
        let out = self.out_edges();
        let inc = self.in_edges();
        for &u in &self.inputs {
            if !inc[u].is_empty() || out[u].len() != 1 {
                return Err(format!(
                    "input {u} has indegree {} and outdegree {}",
                    inc[u].len(),
                    out[u].len()
                ));
            }
        }
        for &v in &self.outputs {
            if !out[v].is_empty() {
                return Err(format!("output {v} has outdegree {}", out[v].len()));
            }
        }
        let observed = self.observed_degree_bound();
        if observed != self.degree_bound {
            return Err(format!(
                "recorded degree bound {} differs from observed {observed}",
                self.degree_bound
            ));
        }
        Ok(())
    }

    /// Keeps only vertices lying on some input-to-output path and renumbers them
    /// (inputs first, then outputs, then internal vertices in construction order).
    fn pruned(self) -> Self {
        let n = self.vertex_count();
        let out = self.out_edges();
        let inc = self.in_edges();
        let reach = |starts: &[usize], adj: &Vec<Vec<usize>>, forward: bool| {
            let mut seen = vec![false; n];
            let mut stack: Vec<usize> = starts.to_vec();
            starts.iter().for_each(|&s| seen[s] = true);
            while let Some(v) = stack.pop() {
                for &e in &adj[v] {
                    let w = if forward { self.edges[e].1 } else { self.edges[e].0 };
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen
        };
        let fwd = reach(&self.inputs, &out, true);
        let bwd = reach(&self.outputs, &inc, false);
        let keep: Vec<bool> = (0..n).map(|v| fwd[v] && bwd[v]).collect();

        let mut new_id = vec![usize::MAX; n];
        let mut next = 0;
        let order = self
            .inputs
            .iter()
            .chain(self.outputs.iter())
            .copied()
            .chain((0..n).filter(|&v| self.roles[v] == VertexRole::Internal));
        for v in order {
            if keep[v] && new_id[v] == usize::MAX {
                new_id[v] = next;
                next += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| keep[a] && keep[b])
            .map(|&(a, b)| (new_id[a], new_id[b]))
            .collect();
        GadgetGraph::from_parts(
            self.ell,
            next,
            self.inputs.iter().map(|&u| new_id[u]).collect(),
            self.outputs.iter().map(|&v| new_id[v]).collect(),
            edges,
            self.backend,
        )
    }
}

/// Builds `G^(ell)`. The recursive backend is certified with [`verify_routing`]
/// (exhaustive up to `ell = 10`, otherwise 1000 seeded samples) before it is returned.
pub fn build_gadget_graph(ell: usize, backend: GadgetBackend) -> Result<GadgetGraph, GraphError> {
    build_certified_gadget(ell, backend).map(|(g, _)| g)
}

/// Like [`build_gadget_graph`], also returning the routing report when one was computed.
pub fn build_certified_gadget(
    ell: usize,
    backend: GadgetBackend,
) -> Result<(GadgetGraph, Option<RoutingReport>), GraphError> {
    if ell == 0 {
        return Err(GraphError::InvalidSize(
            "gadget size must be at least 1".into(),
        ));
    }
    match backend {
        GadgetBackend::Benes => Ok((benes_gadget(ell), None)),
        GadgetBackend::Recursive => {
            let g = recursive_gadget(ell);
            let report = verify_routing(&g, RoutingMode::default_for(ell));
            if report.passed() {
                Ok((g, Some(report)))
            } else {
                Err(GraphError::RoutingVerificationFailed(Box::new(report)))
            }
        }
    }
}

/// Certification report used by the recursive backend.
pub fn certify_gadget(g: &GadgetGraph) -> RoutingReport {
    verify_routing(g, RoutingMode::default_for(g.ell))
}

#[derive(Default)]
struct Builder {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl Builder {
    fn vertex(&mut self) -> usize {
        self.vertices += 1;
        self.vertices - 1
    }

    fn edge(&mut self, a: usize, b: usize) {
        self.edges.push((a, b));
    }

    /// 2x2 switch: both input wires feed both fresh output wires.
    fn switch(&mut self, a: usize, b: usize) -> (usize, usize) {
        let (x, y) = (self.vertex(), self.vertex());
        for i in [a, b] {
            for o in [x, y] {
                self.edge(i, o);
            }
        }
        (x, y)
    }

    /// Benes network on `ins.len()` (a power of two, at least 2) wires.
    fn benes(&mut self, ins: &[usize]) -> Vec<usize> {
        let n = ins.len();
        if n == 2 {
            let (x, y) = self.switch(ins[0], ins[1]);
            return vec![x, y];
        }
        let mut upper = Vec::with_capacity(n / 2);
        let mut lower = Vec::with_capacity(n / 2);
        for pair in ins.chunks(2) {
            let (x, y) = self.switch(pair[0], pair[1]);
            upper.push(x);
            lower.push(y);
        }
        let up = self.benes(&upper);
        let lo = self.benes(&lower);
        let mut outs = Vec::with_capacity(n);
        for (a, b) in up.into_iter().zip(lo) {
            let (x, y) = self.switch(a, b);
            outs.push(x);
            outs.push(y);
        }
        outs
    }
}

fn benes_gadget(ell: usize) -> GadgetGraph {
    let half = ell.next_power_of_two();
    let ports = 2 * half;
    let mut b = Builder::default();
    let inputs: Vec<usize> = (0..2 * ell).map(|_| b.vertex()).collect();
    let wires: Vec<usize> = (0..ports).map(|_| b.vertex()).collect();
    for (i, &u) in inputs.iter().enumerate() {
        b.edge(u, wires[i]);
    }
    let outs = b.benes(&wires);
    let outputs = outs[..ell].to_vec();
    GadgetGraph::from_parts(ell, b.vertices, inputs, outputs, b.edges, GadgetBackend::Benes)
        .pruned()
}

/// Largest superconcentrator built directly as a complete bipartite graph.
const RECURSION_BASE: usize = 4;

/// Input `i` of a concentrator with `mid` middle vertices feeds these offsets.
fn concentrator_targets(i: usize, mid: usize) -> Vec<usize> {
    let mut t = vec![i % mid, (i + 1) % mid, (3 * i + 2) % mid, (5 * i / 2 + 3) % mid];
    t.sort_unstable();
    t.dedup();
    t
}

impl Builder {
    /// Superconcentrator between the given input and output vertices:
    /// direct matching, concentrator into three quarters as many vertices,
    /// recursive core, and the mirrored concentrator out. The direct matching
    /// covers all but at most half of any routed set.
    fn superconcentrator(&mut self, ins: &[usize], outs: &[usize]) {
        let n = ins.len();
        if n <= RECURSION_BASE {
            for &i in ins {
                for &o in outs {
                    self.edge(i, o);
                }
            }
            return;
        }
        for (&i, &o) in ins.iter().zip(outs) {
            self.edge(i, o);
        }
        let mid = (3 * n).div_ceil(4);
        let mid_in: Vec<usize> = (0..mid).map(|_| self.vertex()).collect();
        let mid_out: Vec<usize> = (0..mid).map(|_| self.vertex()).collect();
        for (i, &v) in ins.iter().enumerate() {
            for t in concentrator_targets(i, mid) {
                self.edge(v, mid_in[t]);
            }
        }
        for (i, &v) in outs.iter().enumerate() {
            for t in concentrator_targets(i, mid) {
                self.edge(mid_out[t], v);
            }
        }
        self.superconcentrator(&mid_in, &mid_out);
    }
}

fn recursive_gadget(ell: usize) -> GadgetGraph {
    let mut b = Builder::default();
    let inputs: Vec<usize> = (0..2 * ell).map(|_| b.vertex()).collect();
    let core_in: Vec<usize> = (0..ell).map(|_| b.vertex()).collect();
    let outputs: Vec<usize> = (0..ell).map(|_| b.vertex()).collect();
    for i in 0..ell {
        b.edge(inputs[i], core_in[i]);
        b.edge(inputs[ell + i], outputs[i]);
    }
    b.superconcentrator(&core_in, &outputs);
    GadgetGraph::from_parts(
        ell,
        b.vertices,
        inputs,
        outputs,
        b.edges,
        GadgetBackend::Recursive,
    )
    .pruned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_output_gadget() {
        let g = build_gadget_graph(1, GadgetBackend::Benes).unwrap();
        assert_eq!(g.inputs.len(), 2);
        assert_eq!(g.outputs.len(), 1);
        let out = g.out_edges();
        assert!(g.inputs.iter().all(|&u| out[u].len() == 1));
        // no vertex keeps two out-edges after pruning
        assert!(out.iter().all(|o| o.len() <= 1));
        g.check_structure().unwrap();
    }

    #[test]
    fn benes_structure_holds() {
        for ell in 1..=40 {
            let g = build_gadget_graph(ell, GadgetBackend::Benes).unwrap();
            g.check_structure().unwrap_or_else(|e| panic!("ell={ell}: {e}"));
            assert!(g.degree_bound <= 2, "ell={ell}");
        }
    }

    #[test]
    fn benes_edge_count_is_n_log_n() {
        for ell in [8usize, 32, 128] {
            let g = build_gadget_graph(ell, GadgetBackend::Benes).unwrap();
            let ports = 2 * ell;
            let stages = 2 * (ports.trailing_zeros() as usize) - 1;
            assert!(g.edges.len() <= 2 * ports * stages + 2 * ell);
        }
    }

    #[test]
    fn recursive_structure_and_linear_size() {
        for ell in 1..=24 {
            let g = build_gadget_graph(ell, GadgetBackend::Recursive)
                .unwrap_or_else(|e| panic!("ell={ell}: {e}"));
            g.check_structure().unwrap();
            assert!(g.edges.len() <= 40 * ell, "ell={ell} edges={}", g.edges.len());
        }
    }

    #[test]
    fn zero_size_is_rejected() {
        assert!(matches!(
            build_gadget_graph(0, GadgetBackend::Benes),
            Err(GraphError::InvalidSize(_))
        ));
    }
}
