//! Seeded random prenex formulas for property tests and acceptance runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formula::{Clause, Literal, PrenexFormula, Quantifier, QuantifierBlock, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusParams {
    /// Number of universal/existential block pairs is drawn from `1..=max_levels`.
    pub max_levels: usize,
    pub max_vars: usize,
    pub max_clauses: usize,
    pub min_clause_size: usize,
    pub max_clause_size: usize,
    /// Occurrence cap for the single universal allowed to exceed two occurrences.
    pub heavy_universal_cap: usize,
    /// Occurrence cap for every existential.
    pub existential_cap: usize,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            max_levels: 2,
            max_vars: 12,
            max_clauses: 16,
            min_clause_size: 1,
            max_clause_size: 5,
            heavy_universal_cap: 4,
            existential_cap: 6,
        }
    }
}

/// One formula drawn from `rng`.
///
/// Every block is non-empty and the prefix ends existentially. At most one
/// universal variable (chosen at random, possibly none) may occur more than
/// twice, up to `heavy_universal_cap` times.
pub fn random_formula(rng: &mut impl Rng, p: &CorpusParams) -> PrenexFormula {
    let levels = rng.gen_range(1..=p.max_levels.max(1));
    let num_vars = rng.gen_range(2 * levels..=p.max_vars.max(2 * levels));
    // One variable per block first, the rest spread at random.
    let mut owner: Vec<usize> = (0..2 * levels).collect();
    owner.extend((2 * levels..num_vars).map(|_| rng.gen_range(0..2 * levels)));
    owner.shuffle(rng);
    let blocks: Vec<QuantifierBlock> = (0..2 * levels)
        .map(|b| {
            let kind = if b % 2 == 0 {
                Quantifier::Universal
            } else {
                Quantifier::Existential
            };
            let vars = (0..num_vars)
                .filter(|&v| owner[v] == b)
                .map(|v| Var(v as u32 + 1))
                .collect();
            QuantifierBlock::new(kind, vars)
        })
        .collect();

    let universal: Vec<bool> = owner.iter().map(|&b| b % 2 == 0).collect();
    let heavy = if rng.gen_bool(0.7) {
        let us: Vec<usize> = (0..num_vars).filter(|&v| universal[v]).collect();
        us.choose(rng).copied()
    } else {
        None
    };
    let cap = |v: usize| match (universal[v], Some(v) == heavy) {
        (true, true) => p.heavy_universal_cap,
        (true, false) => 2,
        (false, _) => p.existential_cap,
    };
    let mut used = vec![0usize; num_vars];
    let num_clauses = rng.gen_range(1..=p.max_clauses.max(1));
    let mut clauses = Vec::with_capacity(num_clauses);
    for _ in 0..num_clauses {
        let size = rng.gen_range(p.min_clause_size.max(1)..=p.max_clause_size.max(1));
        let mut lits = Vec::with_capacity(size);
        for _ in 0..size {
            let open: Vec<usize> = (0..num_vars).filter(|&v| used[v] < cap(v)).collect();
            let Some(&v) = open.choose(rng) else { break };
            used[v] += 1;
            lits.push(Literal::with_sign(Var(v as u32 + 1), rng.gen_bool(0.5)));
        }
        if !lits.is_empty() {
            clauses.push(Clause::new(lits));
        }
    }
    PrenexFormula::new(num_vars as u32, blocks, clauses).expect("generated formula is valid")
}

/// `count` formulas; formula `i` is drawn from its own stream seeded by `seed + i`.
pub fn generate_corpus(seed: u64, count: usize, p: &CorpusParams) -> Vec<PrenexFormula> {
    (0..count as u64)
        .map(|i| random_formula(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(i)), p))
        .collect()
}
