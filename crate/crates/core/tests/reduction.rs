mod common;

use proptest::prelude::*;
use qbfocc::formula::{occurrence_profile, parse_qdimacs, serialize_qdimacs};
use qbfocc::oracle::{verify_value_preservation, Limits};
use qbfocc::reduction::{run_pipeline, step3_exact3, PipelineOptions, Step2Style, VarOrigin};

#[test]
fn pipeline_output_is_bounded_and_exact3() {
    let f = parse_qdimacs("p cnf 3 4\na 1 0\ne 2 3 0\n1 2 0\n-1 3 0\n1 -2 -3 0\n-1 2 3 0\n").unwrap();
    let (g, trace, report) = run_pipeline(&f, &PipelineOptions::default()).unwrap();
    assert!(report.after.max_universal <= 2);
    assert_eq!((report.after.min_clause_size, report.after.max_clause_size), (3, 3));
    assert_eq!(trace.clause_tags().len(), g.num_clauses());
    assert!(verify_value_preservation(&f, &g, &Limits::default()).unwrap());
}

#[test]
fn exact3_input_is_left_alone() {
    let f = parse_qdimacs("p cnf 3 2\na 1 0\ne 2 3 0\n1 2 3 0\n-1 -2 3 0\n").unwrap();
    let (g, _) = step3_exact3(&f).unwrap();
    assert_eq!(serialize_qdimacs(&g), serialize_qdimacs(&f));
}

#[test]
fn every_output_variable_has_an_origin() {
    let f = parse_qdimacs("p cnf 3 5\na 1 0\ne 2 3 0\n1 2 0\n-1 3 0\n1 -2 0\n-1 2 3 0\n2 3 -2 3 0\n").unwrap();
    let (g, trace, _) = run_pipeline(&f, &PipelineOptions::default()).unwrap();
    let map = &trace.steps.last().unwrap().var_origin;
    assert!(g.bound_vars().all(|v| map.contains_key(&v)));
    let step1 = &trace.step(1).unwrap().var_origin;
    assert!(step1.values().any(|o| matches!(o, VarOrigin::GadgetEdge { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cycle_style_meets_occurrence_bounds(f in common::formula(common::small_params(8, 10))) {
        let opts = PipelineOptions { step2_style: Step2Style::Cycle, ..PipelineOptions::default() };
        let (g, _, _) = run_pipeline(&f, &opts).unwrap();
        let p = occurrence_profile(&g);
        prop_assert!(p.max_universal <= 2);
        prop_assert!(p.max_existential <= 3);
        prop_assert_eq!((p.min_clause_size, p.max_clause_size), (3, 3));
    }

    #[test]
    fn single_steps_preserve_value(
        f in common::formula(common::small_params(8, 10)),
        step in 1u8..=3,
    ) {
        let (g, _, _) = run_pipeline(&f, &PipelineOptions::only(step)).unwrap();
        prop_assert!(verify_value_preservation(&f, &g, &Limits::default()).unwrap());
    }
}
