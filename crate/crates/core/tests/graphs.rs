use proptest::prelude::*;
use qbfocc::graphs::{
    build_expander, build_gadget_graph, max_vertex_disjoint_paths, verify_edge_expansion,
    verify_routing, ExpansionMode, GadgetBackend, RoutingMode,
};

#[test]
fn gadgets_are_well_formed() {
    for backend in [GadgetBackend::Benes, GadgetBackend::Recursive] {
        for ell in 1..=24 {
            let g = build_gadget_graph(ell, backend).unwrap();
            g.check_structure().unwrap();
            assert!(g.topological_order().is_some());
            assert_eq!(g.degree_bound, g.observed_degree_bound());
        }
    }
}

#[test]
fn removing_an_output_edge_breaks_routing() {
    let g = build_gadget_graph(3, GadgetBackend::Benes).unwrap();
    let target = g.outputs[0];
    let mut broken = g.clone();
    broken.edges.retain(|&(_, b)| b != target);
    let report = verify_routing(&broken, RoutingMode::Exhaustive);
    assert!(report.witness_failure.is_some());
}

#[test]
fn small_expanders_expand() {
    for n in [1, 2, 4, 9, 16] {
        let g = build_expander(n);
        assert!(g.is_regular());
        assert!(verify_edge_expansion(&g, ExpansionMode::Exhaustive).unwrap().holds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disjoint_paths_monotone_under_deletion(
        ell in 1usize..=8,
        recursive in any::<bool>(),
        picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..8),
        cut in any::<prop::sample::Index>(),
    ) {
        let backend = if recursive { GadgetBackend::Recursive } else { GadgetBackend::Benes };
        let g = build_gadget_graph(ell, backend).unwrap();
        let mut subset: Vec<usize> = picks.iter().map(|i| i.index(2 * ell)).collect();
        subset.sort();
        subset.dedup();
        subset.truncate(ell);
        let before = max_vertex_disjoint_paths(&g, &subset).count;
        let mut smaller = g.clone();
        smaller.edges.remove(cut.index(g.edges.len()));
        prop_assert!(max_vertex_disjoint_paths(&smaller, &subset).count <= before);
        prop_assert_eq!(before, subset.len());
    }
}
