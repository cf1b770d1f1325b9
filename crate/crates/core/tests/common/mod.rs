#![allow(dead_code)]

use proptest::prelude::*;
use qbfocc::corpus::{random_formula, CorpusParams};
use qbfocc::formula::PrenexFormula;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn small_params(max_vars: usize, max_clauses: usize) -> CorpusParams {
    CorpusParams {
        max_vars,
        max_clauses,
        ..CorpusParams::default()
    }
}

/// Formulas drawn from the corpus generator by seed.
pub fn formula(p: CorpusParams) -> impl Strategy<Value = PrenexFormula> {
    any::<u64>().prop_map(move |seed| random_formula(&mut ChaCha8Rng::seed_from_u64(seed), &p))
}

use qbfocc::formula::{Clause, Literal, Var};
use qbfocc::oracle::{repair_outdegree, Assignment};
use qbfocc::reduction::ReductionTrace;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random existential CNF over `1..=n` in which every variable occurs at most twice.
pub fn random_occ2(rng: &mut impl Rng, max_vars: usize) -> (Vec<Clause>, Vec<Var>) {
    let n = rng.gen_range(1..=max_vars);
    let mut slots: Vec<Literal> = Vec::new();
    for v in 1..=n as u32 {
        for _ in 0..rng.gen_range(0..=2) {
            slots.push(Literal::with_sign(Var(v), rng.gen_bool(0.5)));
        }
    }
    slots.shuffle(rng);
    let mut clauses = Vec::new();
    while !slots.is_empty() {
        let k = rng.gen_range(1..=3).min(slots.len());
        clauses.push(Clause::new(slots.drain(..k).collect()));
    }
    (clauses, (1..=n as u32).map(Var).collect())
}

/// Satisfiability by enumerating all assignments as bit masks.
pub fn brute_sat(clauses: &[Clause], n: usize) -> bool {
    let masks: Vec<(u32, u32)> = clauses
        .iter()
        .map(|c| {
            c.iter().fold((0, 0), |(p, q), l| {
                let bit = 1u32 << (l.var.0 - 1);
                if l.negated { (p, q | bit) } else { (p | bit, q) }
            })
        })
        .collect();
    (0u32..1 << n).any(|a| masks.iter().all(|&(p, q)| a & p != 0 || !a & q != 0))
}

/// A valid input for the mismatch check: random values, gadget inputs equal to
/// their owner's value under `t`, outdegree clauses repaired.
pub fn valid_step1_assignment(
    g: &qbfocc::formula::PrenexFormula,
    trace: &ReductionTrace,
    original_vars: u32,
    rng: &mut impl Rng,
) -> (Assignment, Assignment) {
    let mut t = Assignment::new(original_vars);
    for v in 1..=original_vars {
        t.set(Var(v), rng.gen_bool(0.5));
    }
    let mut a = Assignment::total(g, |_| rng.gen_bool(0.5));
    for gadget in &trace.steps[0].universal_gadgets {
        let x = t.get(gadget.owner).unwrap();
        gadget.u_vars.iter().for_each(|&u| a.set(u, x));
    }
    (repair_outdegree(g, trace, &a).unwrap(), t)
}
