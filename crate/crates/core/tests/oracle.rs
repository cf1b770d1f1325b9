mod common;

use proptest::prelude::*;
use qbfocc::corpus::generate_corpus;
use qbfocc::formula::{parse_qdimacs, Literal, PrenexFormula, Quantifier, QuantifierBlock, Var};
use qbfocc::oracle::{
    brute_force_value, check_mismatch_bound, evaluate, expansion_value, game_value,
    game_value_with_witness, repair_outdegree, solve_exists_occ2, unsat_count, value_at_most,
    Assignment, Limits, Method, OracleError,
};
use qbfocc::reduction::{step1_reduce, ClauseKind, PipelineOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn with_clauses(f: &PrenexFormula, keep: impl Fn(usize) -> bool) -> Option<PrenexFormula> {
    let clauses = f
        .clauses()
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, c)| c.clone())
        .collect();
    PrenexFormula::new(f.num_vars(), f.blocks().to_vec(), clauses).ok()
}

#[test]
fn forall_exists_pair_has_value_one() {
    let f = parse_qdimacs("p cnf 2 4\na 1 0\ne 2 0\n1 2 0\n-1 2 0\n1 -2 0\n-1 -2 0\n").unwrap();
    assert_eq!(game_value(&f, &Limits::default()).unwrap().value, 1);
    let (v, witness) = game_value_with_witness(&f, &Limits::default()).unwrap();
    assert_eq!(v.value, 1);
    assert_eq!(unsat_count(&f, &witness).unwrap(), 1);
    assert_eq!(witness.get(Var(1)), Some(false));
}

#[test]
fn all_universal_value_is_max_unsat() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.gen_range(1..=6u32);
        let clauses: Vec<_> = (0..rng.gen_range(1..=8))
            .map(|_| {
                let lits = (0..rng.gen_range(1..=3))
                    .map(|_| Literal::with_sign(Var(rng.gen_range(1..=n)), rng.gen_bool(0.5)))
                    .collect();
                qbfocc::formula::Clause::new(lits)
            })
            .collect();
        let block = QuantifierBlock::new(Quantifier::Universal, (1..=n).map(Var).collect());
        let f = PrenexFormula::new(n, vec![block], clauses).unwrap();
        let best = (0u32..1 << n)
            .map(|m| unsat_count(&f, &Assignment::total(&f, |v| m >> (v.0 - 1) & 1 == 1)).unwrap())
            .max()
            .unwrap();
        assert_eq!(game_value(&f, &Limits::default()).unwrap().value, best);
    }
}

#[test]
fn budget_is_enforced() {
    let f = &generate_corpus(9, 1, &common::small_params(12, 16))[0];
    let tiny = Limits {
        method: Method::Search,
        ..Limits::with_budget(1)
    };
    assert_eq!(game_value(f, &tiny), Err(OracleError::BudgetExceeded { limit: 1 }));
}

#[test]
fn mismatch_bound_holds_on_step1_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let opts = PipelineOptions::only(1);
    for f in generate_corpus(100, 30, &common::small_params(12, 16)) {
        let (g, trace) = step1_reduce(&f, &opts).unwrap();
        for _ in 0..20 {
            let raw = Assignment::total(&g, |_| rng.gen_bool(0.5));
            let fixed = repair_outdegree(&g, &trace, &raw).unwrap();
            assert!(unsat_count(&g, &fixed).unwrap() <= unsat_count(&g, &raw).unwrap());
            let outdegree_ok = g
                .clauses()
                .iter()
                .zip(trace.clause_tags())
                .filter(|(_, t)| t.kind == ClauseKind::Outdegree)
                .all(|(c, _)| c.iter().any(|l| l.eval(fixed.get(l.var).unwrap())));
            assert!(outdegree_ok);
            let (a, t) = common::valid_step1_assignment(&g, &trace, f.num_vars(), &mut rng);
            assert_eq!(check_mismatch_bound(&g, &trace, &a, &t), Ok(true));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn search_matches_reference(f in common::formula(common::small_params(9, 10))) {
        let expected = brute_force_value(&f);
        for pruning in [true, false] {
            let limits = Limits { pruning, method: Method::Search, ..Limits::default() };
            prop_assert_eq!(game_value(&f, &limits).unwrap().value, expected);
        }
    }

    #[test]
    fn expansion_matches_search(f in common::formula(common::small_params(12, 16))) {
        let limits = Limits { method: Method::Search, ..Limits::default() };
        let v = game_value(&f, &limits).unwrap().value;
        prop_assert_eq!(expansion_value(&f, &Limits::default()).unwrap().value, v);
        let exp = Limits { method: Method::Expansion, ..Limits::default() };
        prop_assert!(value_at_most(&f, v, &exp).unwrap());
        prop_assert!(v == 0 || !value_at_most(&f, v - 1, &exp).unwrap());
    }

    #[test]
    fn deleting_a_clause_never_raises_value(
        f in common::formula(common::small_params(10, 12)),
        drop in any::<prop::sample::Index>(),
    ) {
        let i = drop.index(f.num_clauses());
        if let Some(g) = with_clauses(&f, |j| j != i) {
            let limits = Limits::default();
            prop_assert!(evaluate(&g, &limits).unwrap() <= evaluate(&f, &limits).unwrap());
        }
    }

    #[test]
    fn flipping_one_variable_is_lipschitz(
        f in common::formula(common::small_params(12, 16)),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Assignment::total(&f, |_| rng.gen_bool(0.5));
        let base = unsat_count(&f, &a).unwrap() as i64;
        let counts = f.occurrence_counts();
        for v in f.bound_vars() {
            let mut b = a.clone();
            b.set(v, !a.get(v).unwrap());
            let diff = (unsat_count(&f, &b).unwrap() as i64 - base).unsigned_abs() as usize;
            prop_assert!(diff <= counts[v.index()]);
        }
    }

    #[test]
    fn occ2_solver_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (clauses, vars) = common::random_occ2(&mut rng, 12);
        let out = solve_exists_occ2(&clauses, &vars).unwrap();
        prop_assert_eq!(out.is_sat(), common::brute_sat(&clauses, vars.len()));
        if let qbfocc::oracle::Occ2Outcome::Sat(a) = out {
            prop_assert!(clauses.iter().all(|c| c.iter().any(|l| l.eval(a.get(l.var).unwrap()))));
        }
    }
}
