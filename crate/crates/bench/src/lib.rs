//! Shared inputs for the benchmarks.

use qbfocc::corpus::{generate_corpus, CorpusParams};
use qbfocc::formula::PrenexFormula;

pub const SEED: u64 = 42;

/// A fixed slice of the default corpus.
pub fn fixture(count: usize) -> Vec<PrenexFormula> {
    generate_corpus(SEED, count, &CorpusParams::default())
}
