mod common;

use proptest::prelude::*;
use qbfocc::formula::{
    normalize_blocks, occurrence_profile, parse_qdimacs, serialize_qdimacs, Clause, PrenexFormula,
    Quantifier, QuantifierBlock, Var,
};
use qbfocc::oracle::brute_force_value;

#[test]
fn forall_exists_example_round_trips() {
    let text = "p cnf 2 2\na 1 0\ne 2 0\n1 2 0\n-1 -2 0\n";
    let f = parse_qdimacs(text).unwrap();
    assert_eq!(serialize_qdimacs(&f), text);
}

#[test]
fn adjacent_blocks_merge() {
    let f = PrenexFormula::new(
        3,
        vec![
            QuantifierBlock::new(Quantifier::Universal, vec![Var(1)]),
            QuantifierBlock::new(Quantifier::Universal, vec![Var(2)]),
            QuantifierBlock::new(Quantifier::Existential, vec![Var(3)]),
        ],
        vec![Clause::from_dimacs(&[1, 2, 3])],
    )
    .unwrap();
    let g = normalize_blocks(&f);
    assert_eq!(g.blocks().len(), 2);
    assert_eq!(g.blocks()[0].vars, vec![Var(1), Var(2)]);
    assert_eq!(normalize_blocks(&g), g);
}

proptest! {
    #[test]
    fn parse_inverts_serialize(f in common::formula(common::small_params(12, 16))) {
        prop_assert_eq!(parse_qdimacs(&serialize_qdimacs(&f)).unwrap(), f);
    }

    #[test]
    fn profile_sums_match(f in common::formula(common::small_params(12, 16))) {
        let p = occurrence_profile(&f);
        prop_assert_eq!(p.per_variable.values().sum::<usize>(), p.total_literals);
        prop_assert_eq!(f.clauses().iter().map(Clause::len).sum::<usize>(), p.total_literals);
    }

    #[test]
    fn normalize_preserves_value(f in common::formula(common::small_params(10, 10))) {
        prop_assert_eq!(brute_force_value(&normalize_blocks(&f)), brute_force_value(&f));
    }
}
