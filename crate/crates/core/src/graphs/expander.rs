//! Regular multigraphs with strict edge expansion.
//!
//! The construction is the 8-regular Margulis-Gabber-Galil graph on `Z_m x Z_m`
//! with every edge replicated three times.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::GraphError;

/// Edge multiplicity applied to the base graph.
pub const REPLICATION: usize = 3;
/// Degree of the base graph (four maps and their inverses).
pub const BASE_DEGREE: usize = 8;
/// Largest vertex count accepted by exhaustive subset checks.
pub const EXHAUSTIVE_LIMIT: usize = 20;
/// Vertex count above which the second eigenvalue is found by power iteration.
pub const DENSE_EIGEN_LIMIT: usize = 2000;
/// Safety margin used when comparing a spectral certificate against 1.
pub const CERTIFICATE_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpanderGraph {
    pub vertex_count: usize,
    /// Total degree, counting every parallel edge and counting self-loops twice.
    pub degree: usize,
    pub base_degree: usize,
    pub replication: usize,
    /// Unordered pairs; parallel edges and self-loops appear as separate entries.
    pub edges: Vec<(usize, usize)>,
    /// `(degree - lambda_2) / 2` once computed; `None` before certification or
    /// for a single vertex, where expansion is vacuous.
    pub spectral_gap_certificate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionMode {
    Exhaustive,
    Spectral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionVerdict {
    pub holds: bool,
    /// Exhaustive: smallest `cut(S) / min(|S|, |S^c|)` over all proper subsets.
    /// Spectral: `(degree - lambda_2) / 2`.
    pub certificate: Option<f64>,
    pub lambda2: Option<f64>,
    /// A proper subset violating strict expansion, if one was found.
    pub witness: Option<Vec<usize>>,
}

/// Side length of the torus used for `n` requested vertices.
pub fn torus_side(n: usize) -> usize {
    let mut m = 1usize;
    while m * m < n {
        m += 1;
    }
    m
}

pub fn build_expander(n: usize) -> ExpanderGraph {
    let m = torus_side(n.max(1));
    let id = |x: usize, y: usize| (x % m) * m + (y % m);
    let mut edges = Vec::with_capacity(m * m * 4 * REPLICATION);
    for x in 0..m {
        for y in 0..m {
            let v = id(x, y);
            let targets = [
                id(x + 2 * y, y),
                id(x + 2 * y + 1, y),
                id(x, y + 2 * x),
                id(x, y + 2 * x + 1),
            ];
            for t in targets {
                for _ in 0..REPLICATION {
                    edges.push((v, t));
                }
            }
        }
    }
    let mut g = ExpanderGraph {
        vertex_count: m * m,
        degree: BASE_DEGREE * REPLICATION,
        base_degree: BASE_DEGREE,
        replication: REPLICATION,
        edges,
        spectral_gap_certificate: None,
    };
    g.certify();
    g
}

impl ExpanderGraph {
    /// Wraps an arbitrary undirected multigraph. `degree` is taken from vertex 0.
    pub fn from_edges(vertex_count: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut g = ExpanderGraph {
            vertex_count,
            degree: 0,
            base_degree: 0,
            replication: 1,
            edges,
            spectral_gap_certificate: None,
        };
        g.degree = g.degrees().first().copied().unwrap_or(0);
        g.base_degree = g.degree;
        g
    }

    /// Incident edge endpoints per vertex; a self-loop contributes two.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn is_regular(&self) -> bool {
        self.degrees().iter().all(|&d| d == self.degree)
    }

    /// Edges crossing between `set` and its complement, with multiplicity.
    pub fn cut_size(&self, set: &[bool]) -> usize {
        self.edges.iter().filter(|&&(a, b)| set[a] != set[b]).count()
    }

    pub fn non_loop_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied().filter(|&(a, b)| a != b)
    }

    /// Dense adjacency with self-loops counted twice on the diagonal.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.vertex_count;
        let mut a = DMatrix::zeros(n, n);
        for &(u, v) in &self.edges {
            a[(u, v)] += 1.0;
            a[(v, u)] += 1.0;
        }
        a
    }

    /// Computes and stores the spectral certificate; returns it.
    pub fn certify(&mut self) -> Option<f64> {
        let verdict = verify_edge_expansion(self, ExpansionMode::Spectral)
            .expect("spectral mode has no size limit");
        self.spectral_gap_certificate = verdict.certificate;
        verdict.certificate
    }
}

/// Checks `|E(S, S^c)| > min(|S|, |S^c|)` for every nonempty proper subset.
pub fn verify_edge_expansion(
    g: &ExpanderGraph,
    mode: ExpansionMode,
) -> Result<ExpansionVerdict, GraphError> {
    match mode {
        ExpansionMode::Exhaustive => exhaustive(g),
        ExpansionMode::Spectral => Ok(spectral(g)),
    }
}

fn exhaustive(g: &ExpanderGraph) -> Result<ExpansionVerdict, GraphError> {
    let n = g.vertex_count;
    if n > EXHAUSTIVE_LIMIT {
        return Err(GraphError::TooLargeForExhaustive {
            vertices: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    if n < 2 {
        return Ok(ExpansionVerdict {
            holds: true,
            certificate: None,
            lambda2: None,
            witness: None,
        });
    }
    // weight[u][v] = parallel edges between u and v, loops excluded
    let mut weight = vec![vec![0usize; n]; n];
    for (a, b) in g.non_loop_edges() {
        weight[a][b] += 1;
        weight[b][a] += 1;
    }
    let outer: Vec<usize> = weight.iter().map(|row| row.iter().sum()).collect();

    // Gray-code walk over all subsets; `inside[u]` = edges from u into S.
    let mut in_set = vec![false; n];
    let mut inside = vec![0usize; n];
    let mut size = 0usize;
    let mut cut = 0usize;
    let mut worst: Option<(f64, u64)> = None;
    let mut mask = 0u64;
    for step in 1u64..(1u64 << n) {
        let v = step.trailing_zeros() as usize;
        mask ^= 1 << v;
        if in_set[v] {
            in_set[v] = false;
            size -= 1;
            cut = cut + 2 * inside[v] - outer[v];
            for u in 0..n {
                inside[u] -= weight[v][u];
            }
        } else {
            cut = cut + outer[v] - 2 * inside[v];
            in_set[v] = true;
            size += 1;
            for u in 0..n {
                inside[u] += weight[v][u];
            }
        }
        if size == 0 || size == n {
            continue;
        }
        let side = size.min(n - size);
        let ratio = cut as f64 / side as f64;
        if worst.is_none_or(|(r, _)| ratio < r) {
            worst = Some((ratio, mask));
        }
    }
    let (ratio, mask) = worst.expect("n >= 2 has proper subsets");
    let holds = ratio > 1.0;
    Ok(ExpansionVerdict {
        holds,
        certificate: Some(ratio),
        lambda2: None,
        witness: (!holds).then(|| (0..n).filter(|&v| mask >> v & 1 == 1).collect()),
    })
}

fn spectral(g: &ExpanderGraph) -> ExpansionVerdict {
    if g.vertex_count < 2 {
        return ExpansionVerdict {
            holds: true,
            certificate: None,
            lambda2: None,
            witness: None,
        };
    }
    let lambda2 = if g.vertex_count <= DENSE_EIGEN_LIMIT {
        dense_second_eigenvalue(g)
    } else {
        power_second_eigenvalue(g, 1e-6)
    };
    let certificate = (g.degree as f64 - lambda2) / 2.0;
    ExpansionVerdict {
        holds: certificate > 1.0 + CERTIFICATE_MARGIN,
        certificate: Some(certificate),
        lambda2: Some(lambda2),
        witness: None,
    }
}

fn dense_second_eigenvalue(g: &ExpanderGraph) -> f64 {
    let eig = SymmetricEigen::new(g.adjacency());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    values[1]
}

/// Power iteration on `A + d I` restricted to the complement of the constant
/// vector, which is the top eigenvector of a regular graph.
fn power_second_eigenvalue(g: &ExpanderGraph, tolerance: f64) -> f64 {
    let n = g.vertex_count;
    let shift = g.degree as f64;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &g.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let project = |x: &mut [f64]| {
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
    };
    // deterministic start vector with no symmetry
    let mut x: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.618_033_988_75).fract() - 0.5)
        .collect();
    project(&mut x);
    let mut y = vec![0.0; n];
    let mut estimate = f64::NEG_INFINITY;
    for _ in 0..200_000 {
        for v in 0..n {
            y[v] = shift * x[v] + adj[v].iter().map(|&u| x[u]).sum::<f64>();
        }
        let rayleigh: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        std::mem::swap(&mut x, &mut y);
        project(&mut x);
        if (rayleigh - estimate).abs() < tolerance * 1e-3 {
            estimate = rayleigh;
            break;
        }
        estimate = rayleigh;
    }
    estimate - shift
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle4() -> ExpanderGraph {
        ExpanderGraph::from_edges(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)])
    }

    fn complete4() -> ExpanderGraph {
        let mut e = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                e.push((a, b));
            }
        }
        ExpanderGraph::from_edges(4, e)
    }

    #[test]
    fn nine_vertex_construction() {
        let g = build_expander(9);
        assert_eq!(g.vertex_count, 9);
        assert_eq!(g.degree, 24);
        assert_eq!(g.edges.len(), 108);
        assert!(g.is_regular());
    }

    #[test]
    fn sizes_follow_torus_side() {
        assert_eq!(build_expander(5).vertex_count, 9);
        assert_eq!(build_expander(4).vertex_count, 4);
        assert_eq!(build_expander(10).vertex_count, 16);
        assert_eq!(build_expander(1).vertex_count, 1);
    }

    #[test]
    fn single_vertex_is_vacuous() {
        let g = build_expander(1);
        assert!(g.is_regular());
        let v = verify_edge_expansion(&g, ExpansionMode::Exhaustive).unwrap();
        assert!(v.holds);
    }

    #[test]
    fn four_cycle_fails_strict_expansion() {
        let g = cycle4();
        // opposite pair: cut 4 > 2
        assert_eq!(g.cut_size(&[true, false, true, false]), 4);
        // adjacent pair: cut 2 == min
        assert_eq!(g.cut_size(&[true, true, false, false]), 2);
        let v = verify_edge_expansion(&g, ExpansionMode::Exhaustive).unwrap();
        assert!(!v.holds);
        let w = v.witness.unwrap();
        let mut set = vec![false; 4];
        w.iter().for_each(|&i| set[i] = true);
        assert!(g.cut_size(&set) <= w.len().min(4 - w.len()));
    }

    #[test]
    fn complete_graph_expands() {
        assert!(verify_edge_expansion(&complete4(), ExpansionMode::Exhaustive).unwrap().holds);
        assert!(verify_edge_expansion(&complete4(), ExpansionMode::Spectral).unwrap().holds);
    }

    #[test]
    fn small_expander_passes_exhaustive() {
        let g = build_expander(4);
        assert!(verify_edge_expansion(&g, ExpansionMode::Exhaustive).unwrap().holds);
    }

    #[test]
    fn exhaustive_refuses_large_graphs() {
        let g = build_expander(25);
        assert!(matches!(
            verify_edge_expansion(&g, ExpansionMode::Exhaustive),
            Err(GraphError::TooLargeForExhaustive { .. })
        ));
    }

    #[test]
    fn power_iteration_matches_dense() {
        for n in [16, 49, 100] {
            let g = build_expander(n);
            let dense = dense_second_eigenvalue(&g);
            let power = power_second_eigenvalue(&g, 1e-6);
            assert!((dense - power).abs() < 1e-4, "n={n} dense={dense} power={power}");
        }
    }

    #[test]
    fn nine_vertex_certificate_clears_bound() {
        let mut g = build_expander(9);
        let c = g.certify().unwrap();
        // lambda_2 <= 5 sqrt 2 gives at least 3 (8 - 5 sqrt 2) / 2
        assert!(c >= 3.0 * (8.0 - 5.0 * 2f64.sqrt()) / 2.0 - 1e-9, "{c}");
    }
}
