//! Vertex-disjoint routing checks via unit-capacity flow with vertex splitting.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gadget::GadgetGraph;
use super::GraphError;

/// Largest `ell` for which all `C(2 ell, ell)` subsets are enumerated.
pub const EXHAUSTIVE_MAX_ELL: usize = 10;
/// Sample count used when the caller does not choose one.
pub const DEFAULT_SAMPLES: usize = 1000;
/// Seed used for build-time certification of the recursive backend.
pub const CERTIFICATION_SEED: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum RoutingMode {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
}

impl RoutingMode {
    /// Exhaustive when feasible, otherwise the default sample count with the
    /// certification seed.
    pub fn default_for(ell: usize) -> Self {
        if ell <= EXHAUSTIVE_MAX_ELL {
            RoutingMode::Exhaustive
        } else {
            RoutingMode::Sampled {
                samples: DEFAULT_SAMPLES,
                seed: CERTIFICATION_SEED,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub mode: RoutingMode,
    pub ell: usize,
    pub subsets_checked: usize,
    pub min_flow_found: usize,
    /// Positions (into the input list) of the first subset that failed to route.
    pub witness_failure: Option<Vec<usize>>,
}

impl RoutingReport {
    pub fn passed(&self) -> bool {
        self.witness_failure.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisjointPaths {
    pub count: usize,
    /// Vertex sequences from a source in `S` to an output; filled only when
    /// every source was routed.
    pub paths: Vec<Vec<usize>>,
}

/// Residual network for a gadget with every vertex split into `in -> out`.
#[derive(Clone)]
struct SplitNetwork {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<u8>,
    base_cap: Vec<u8>,
    adj: Vec<Vec<usize>>,
    /// Arc index from the source to each input, by input position.
    source_arcs: Vec<usize>,
    source: usize,
    sink: usize,
    vertices: usize,
}

impl SplitNetwork {
    fn new(g: &GadgetGraph) -> Self {
        let n = g.vertex_count();
        let source = 2 * n;
        let sink = 2 * n + 1;
        let mut net = SplitNetwork {
            head: Vec::new(),
            to: Vec::new(),
            cap: Vec::new(),
            base_cap: Vec::new(),
            adj: vec![Vec::new(); 2 * n + 2],
            source_arcs: Vec::new(),
            source,
            sink,
            vertices: n,
        };
        for v in 0..n {
            net.arc(2 * v, 2 * v + 1, 1);
        }
        for &(a, b) in &g.edges {
            net.arc(2 * a + 1, 2 * b, 1);
        }
        for &v in &g.outputs {
            net.arc(2 * v + 1, sink, 1);
        }
        for &u in &g.inputs {
            let id = net.arc(source, 2 * u, 0);
            net.source_arcs.push(id);
        }
        net.base_cap = net.cap.clone();
        net
    }

    fn arc(&mut self, a: usize, b: usize, c: u8) -> usize {
        let id = self.to.len();
        self.head.push(a);
        self.to.push(b);
        self.cap.push(c);
        self.adj[a].push(id);
        self.head.push(b);
        self.to.push(a);
        self.cap.push(0);
        self.adj[b].push(id + 1);
        id
    }

    fn reset(&mut self, sources: impl Iterator<Item = usize>) {
        self.cap.copy_from_slice(&self.base_cap);
        for pos in sources {
            self.cap[self.source_arcs[pos]] = 1;
        }
    }

    /// Repeated BFS augmentation; returns the flow value.
    fn max_flow(&mut self, limit: usize) -> usize {
        let nodes = self.adj.len();
        let mut parent = vec![usize::MAX; nodes];
        let mut queue = Vec::with_capacity(nodes);
        let mut flow = 0;
        while flow < limit {
            parent.iter_mut().for_each(|p| *p = usize::MAX);
            queue.clear();
            queue.push(self.source);
            parent[self.source] = usize::MAX - 1;
            let mut qi = 0;
            'bfs: while qi < queue.len() {
                let v = queue[qi];
                qi += 1;
                for &e in &self.adj[v] {
                    let w = self.to[e];
                    if self.cap[e] > 0 && parent[w] == usize::MAX {
                        parent[w] = e;
                        if w == self.sink {
                            break 'bfs;
                        }
                        queue.push(w);
                    }
                }
            }
            if parent[self.sink] == usize::MAX {
                break;
            }
            let mut v = self.sink;
            while v != self.source {
                let e = parent[v];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                v = self.head[e];
            }
            flow += 1;
        }
        flow
    }

    /// Follows saturated arcs from the given source vertex to an output.
    fn trace_path(&self, start: usize) -> Vec<usize> {
        let mut path = vec![start];
        let mut node = 2 * start + 1;
        loop {
            let next = self.adj[node]
                .iter()
                .copied()
                .find(|&e| e % 2 == 0 && self.base_cap[e] == 1 && self.cap[e] == 0);
            let Some(e) = next else { break };
            let w = self.to[e];
            if w == self.sink {
                break;
            }
            let v = w / 2;
            path.push(v);
            node = 2 * v + 1;
            if path.len() > self.vertices {
                break;
            }
        }
        path
    }
}

/// Maximum number of vertex-disjoint directed paths from the inputs at the given
/// positions to the output set (Menger via split-vertex flow).
pub fn max_vertex_disjoint_paths(g: &GadgetGraph, subset: &[usize]) -> DisjointPaths {
    let mut net = SplitNetwork::new(g);
    net.reset(subset.iter().copied());
    let count = net.max_flow(subset.len());
    let paths = if count == subset.len() {
        subset.iter().map(|&p| net.trace_path(g.inputs[p])).collect()
    } else {
        Vec::new()
    };
    DisjointPaths { count, paths }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Checks that every (or every sampled) `ell`-subset of inputs routes to all outputs.
///
/// Panics if exhaustive mode is requested for `ell > 10`; use [`try_verify_routing`]
/// to get an error instead.
pub fn verify_routing(g: &GadgetGraph, mode: RoutingMode) -> RoutingReport {
    try_verify_routing(g, mode).expect("routing mode within limits")
}

pub fn try_verify_routing(g: &GadgetGraph, mode: RoutingMode) -> Result<RoutingReport, GraphError> {
    let ell = g.ell;
    let subsets: Vec<Vec<usize>> = match mode {
        RoutingMode::Exhaustive => {
            if ell > EXHAUSTIVE_MAX_ELL {
                return Err(GraphError::TooLargeForExhaustive {
                    vertices: 2 * ell,
                    limit: 2 * EXHAUSTIVE_MAX_ELL,
                });
            }
            combinations(2 * ell, ell)
        }
        RoutingMode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..samples)
                .map(|_| {
                    let mut s = sample(&mut rng, 2 * ell, ell).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect()
        }
    };
    let base = SplitNetwork::new(g);
    let flows: Vec<usize> = subsets
        .par_chunks(256)
        .flat_map_iter(|chunk| {
            let mut net = base.clone();
            chunk
                .iter()
                .map(|s| {
                    net.reset(s.iter().copied());
                    net.max_flow(ell)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let min_flow_found = flows.iter().copied().min().unwrap_or(ell);
    let witness_failure = flows
        .iter()
        .position(|&f| f < ell)
        .map(|i| subsets[i].clone());
    Ok(RoutingReport {
        mode,
        ell,
        subsets_checked: subsets.len(),
        min_flow_found,
        witness_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::gadget::{build_gadget_graph, GadgetBackend};

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(12, 6).len(), 924);
        assert_eq!(combinations(3, 0).len(), 1);
        assert_eq!(combinations(6, 3)[0], vec![0, 1, 2]);
        assert_eq!(combinations(6, 3).last().unwrap(), &vec![3, 4, 5]);
    }

    #[test]
    fn empty_subset_has_no_paths() {
        let g = build_gadget_graph(3, GadgetBackend::Benes).unwrap();
        assert_eq!(max_vertex_disjoint_paths(&g, &[]).count, 0);
    }

    #[test]
    fn single_source_routes() {
        let g = build_gadget_graph(1, GadgetBackend::Benes).unwrap();
        for s in [0, 1] {
            let r = max_vertex_disjoint_paths(&g, &[s]);
            assert_eq!(r.count, 1);
            assert_eq!(r.paths[0][0], g.inputs[s]);
            assert_eq!(*r.paths[0].last().unwrap(), g.outputs[0]);
        }
    }

    #[test]
    fn paths_are_vertex_disjoint_and_follow_edges() {
        let g = build_gadget_graph(5, GadgetBackend::Benes).unwrap();
        let r = max_vertex_disjoint_paths(&g, &[0, 2, 4, 6, 9]);
        assert_eq!(r.count, 5);
        let mut seen = std::collections::HashSet::new();
        let mut ends = std::collections::HashSet::new();
        for p in &r.paths {
            for w in p.windows(2) {
                assert!(g.edges.contains(&(w[0], w[1])));
            }
            for &v in p {
                assert!(seen.insert(v), "vertex {v} reused");
            }
            ends.insert(*p.last().unwrap());
        }
        assert_eq!(ends.len(), 5);
        assert!(ends.iter().all(|v| g.outputs.contains(v)));
    }

    #[test]
    fn small_benes_exhaustive() {
        let g = build_gadget_graph(2, GadgetBackend::Benes).unwrap();
        let r = verify_routing(&g, RoutingMode::Exhaustive);
        assert_eq!(r.subsets_checked, 6);
        assert_eq!(r.min_flow_found, 2);
        assert!(r.passed());

        let g = build_gadget_graph(3, GadgetBackend::Benes).unwrap();
        let r = verify_routing(&g, RoutingMode::Exhaustive);
        assert_eq!((r.subsets_checked, r.min_flow_found), (20, 3));
    }

    #[test]
    fn removing_sole_incoming_edge_breaks_routing() {
        // u0 -> v directly, u1 -> w -> v
        let g = GadgetGraph::from_parts(
            1,
            4,
            vec![0, 1],
            vec![2],
            vec![(0, 2), (1, 3), (3, 2)],
            GadgetBackend::Benes,
        );
        assert!(verify_routing(&g, RoutingMode::Exhaustive).passed());
        let broken = GadgetGraph::from_parts(
            1,
            4,
            vec![0, 1],
            vec![2],
            vec![(0, 3), (1, 3)],
            GadgetBackend::Benes,
        );
        let r = verify_routing(&broken, RoutingMode::Exhaustive);
        assert_eq!(r.min_flow_found, 0);
        assert_eq!(r.witness_failure, Some(vec![0]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = build_gadget_graph(16, GadgetBackend::Benes).unwrap();
        let mode = RoutingMode::Sampled { samples: 50, seed: 3 };
        assert_eq!(verify_routing(&g, mode), verify_routing(&g, mode));
        assert!(try_verify_routing(&g, RoutingMode::Exhaustive).is_err());
    }
}
