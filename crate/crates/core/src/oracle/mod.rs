//! Exact evaluation of the alternating unsatisfied-clause game, plus the
//! degree-2 satisfiability solver and checks for the gadget repair arguments.

mod claims;
mod expansion;
mod occ2;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{PrenexFormula, Quantifier, Var};

pub use claims::{check_mismatch_bound, repair_outdegree};
pub use expansion::{expansion_value, expansion_value_at_most};
pub use occ2::{solve_exists_occ2, Occ2Outcome};

/// Default number of leaf evaluations a single evaluation may spend.
pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// Formulas with at most this many occurring variables are evaluated by
/// exhaustive search under [`Method::Auto`].
pub const AUTO_SEARCH_VARS: usize = 20;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("assignment leaves variable {0} unset")]
    IncompleteAssignment(Var),
    #[error("evaluation budget of {limit} leaves exceeded")]
    BudgetExceeded { limit: u64 },
    #[error("variable {var} occurs {count} times (at most 2 allowed)")]
    OccurrenceBoundViolated { var: Var, count: usize },
    #[error("trace does not match formula: {0}")]
    TraceMismatch(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("prefix shape not supported by the expansion evaluator: {0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GameValue {
    pub value: usize,
}

impl fmt::Display for GameValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Search for small formulas, expansion otherwise.
    #[default]
    Auto,
    Search,
    Expansion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Leaf evaluations (search) or universal-assignment checks and solver calls (expansion).
    pub budget: u64,
    /// Integer-bound cutoffs in the search; the result is identical either way.
    pub pruning: bool,
    pub method: Method,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            budget: DEFAULT_BUDGET,
            pruning: true,
            method: Method::Auto,
        }
    }
}

impl Limits {
    pub fn with_budget(budget: u64) -> Self {
        Limits {
            budget,
            ..Self::default()
        }
    }
}

pub(crate) struct Budget {
    used: u64,
    limit: u64,
}

impl Budget {
    pub(crate) fn new(limit: u64) -> Self {
        Budget { used: 0, limit }
    }

    pub(crate) fn charge(&mut self) -> Result<(), OracleError> {
        self.used += 1;
        if self.used > self.limit {
            Err(OracleError::BudgetExceeded { limit: self.limit })
        } else {
            Ok(())
        }
    }
}

/// Partial map from variables to truth values, indexed by variable number.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn new(num_vars: u32) -> Self {
        Assignment {
            values: vec![None; num_vars as usize + 1],
        }
    }

    /// Assigns every bound variable of `f` with `value`.
    pub fn total(f: &PrenexFormula, mut value: impl FnMut(Var) -> bool) -> Self {
        let mut a = Assignment::new(f.num_vars());
        for v in f.bound_vars() {
            a.set(v, value(v));
        }
        a
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.values.get(var.index()).copied().flatten()
    }

    pub fn set(&mut self, var: Var, value: bool) {
        if var.index() >= self.values.len() {
            self.values.resize(var.index() + 1, None);
        }
        self.values[var.index()] = Some(value);
    }

    pub fn unset(&mut self, var: Var) {
        if let Some(slot) = self.values.get_mut(var.index()) {
            *slot = None;
        }
    }

    /// Assigned variables in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (Var(i as u32), b)))
    }

    /// Certificate line `v ±i ... 0` listing the assigned variables.
    pub fn certificate_line(&self) -> String {
        let mut line = String::from("v");
        for (var, value) in self.iter() {
            line.push(' ');
            if !value {
                line.push('-');
            }
            line.push_str(&var.0.to_string());
        }
        line.push_str(" 0");
        line
    }
}

/// Number of clauses with no true literal.
pub fn unsat_count(f: &PrenexFormula, a: &Assignment) -> Result<usize, OracleError> {
    if let Some(v) = f.bound_vars().find(|&v| a.get(v).is_none()) {
        return Err(OracleError::IncompleteAssignment(v));
    }
    Ok(f.clauses()
        .iter()
        .filter(|c| !c.iter().any(|l| l.eval(a.get(l.var).unwrap_or(false))))
        .count())
}

/// Dispatches to [`game_value`] or [`expansion_value`] according to `limits.method`.
pub fn evaluate(f: &PrenexFormula, limits: &Limits) -> Result<GameValue, OracleError> {
    match resolve_method(f, limits) {
        Method::Expansion => expansion_value(f, limits),
        _ => game_value(f, limits),
    }
}

/// Decides `value(f) <= k` with the method chosen by `limits`.
pub fn value_at_most(f: &PrenexFormula, k: usize, limits: &Limits) -> Result<bool, OracleError> {
    match resolve_method(f, limits) {
        Method::Expansion => expansion_value_at_most(f, k, limits),
        _ => Ok(game_value(f, limits)?.value <= k),
    }
}

fn resolve_method(f: &PrenexFormula, limits: &Limits) -> Method {
    match limits.method {
        Method::Auto => {
            let counts = f.occurrence_counts();
            let occurring = f.bound_vars().filter(|v| counts[v.index()] > 0).count();
            if occurring <= AUTO_SEARCH_VARS {
                Method::Search
            } else {
                Method::Expansion
            }
        }
        m => m,
    }
}

/// True iff both formulas have the same game value. The value of `original` is
/// computed; for `reduced` only the two decisions `<= v` and `<= v - 1` are asked.
pub fn verify_value_preservation(
    original: &PrenexFormula,
    reduced: &PrenexFormula,
    limits: &Limits,
) -> Result<bool, OracleError> {
    let v = evaluate(original, limits)?.value;
    if !value_at_most(reduced, v, limits)? {
        return Ok(false);
    }
    Ok(v == 0 || !value_at_most(reduced, v - 1, limits)?)
}

/// Exhaustive minimax over the prefix: universal blocks maximize and
/// existential blocks minimize the number of unsatisfied clauses.
/// Variables that occur in no clause are not branched on.
pub fn game_value(f: &PrenexFormula, limits: &Limits) -> Result<GameValue, OracleError> {
    let mut s = Search::new(f, limits);
    let value = s.value(0, -1, s.m as i64 + 1)?;
    Ok(GameValue {
        value: value as usize,
    })
}

/// Game value with its principal line of play: at every variable, in prefix
/// order, the first value (false before true) that keeps the optimum.
pub fn game_value_with_witness(
    f: &PrenexFormula,
    limits: &Limits,
) -> Result<(GameValue, Assignment), OracleError> {
    let mut s = Search::new(f, limits);
    let value = s.value(0, -1, s.m as i64 + 1)?;
    for depth in 0..s.order.len() {
        let (var, _) = s.order[depth];
        s.assign(var, false);
        let child = s.value(depth + 1, value - 1, value + 1)?;
        if child != value {
            s.unassign(var);
            s.assign(var, true);
        }
    }
    let mut witness = Assignment::new(f.num_vars());
    for v in f.bound_vars() {
        witness.set(v, s.values[v.index()].unwrap_or(false));
    }
    Ok((
        GameValue {
            value: value as usize,
        },
        witness,
    ))
}

struct Search {
    order: Vec<(Var, Quantifier)>,
    /// `(clause, negated)` per occurrence, indexed by variable number.
    occurrences: Vec<Vec<(usize, bool)>>,
    true_lits: Vec<u32>,
    open_lits: Vec<u32>,
    values: Vec<Option<bool>>,
    m: usize,
    falsified: usize,
    satisfied: usize,
    pruning: bool,
    budget: Budget,
}

impl Search {
    fn new(f: &PrenexFormula, limits: &Limits) -> Self {
        let n = f.num_vars() as usize + 1;
        let mut occurrences = vec![Vec::new(); n];
        for (ci, c) in f.clauses().iter().enumerate() {
            for l in c.iter() {
                occurrences[l.var.index()].push((ci, l.negated));
            }
        }
        let order = f
            .blocks()
            .iter()
            .flat_map(|b| b.vars.iter().map(move |&v| (v, b.kind)))
            .filter(|(v, _)| !occurrences[v.index()].is_empty())
            .collect();
        let m = f.num_clauses();
        Search {
            order,
            occurrences,
            true_lits: vec![0; m],
            open_lits: f.clauses().iter().map(|c| c.len() as u32).collect(),
            values: vec![None; n],
            m,
            falsified: 0,
            satisfied: 0,
            pruning: limits.pruning,
            budget: Budget::new(limits.budget),
        }
    }

    fn assign(&mut self, var: Var, value: bool) {
        self.values[var.index()] = Some(value);
        for &(c, negated) in &self.occurrences[var.index()] {
            self.open_lits[c] -= 1;
            if value != negated {
                self.true_lits[c] += 1;
                if self.true_lits[c] == 1 {
                    self.satisfied += 1;
                }
            } else if self.true_lits[c] == 0 && self.open_lits[c] == 0 {
                self.falsified += 1;
            }
        }
    }

    fn unassign(&mut self, var: Var) {
        let value = self.values[var.index()].take().expect("assigned");
        for &(c, negated) in self.occurrences[var.index()].iter().rev() {
            if value != negated {
                if self.true_lits[c] == 1 {
                    self.satisfied -= 1;
                }
                self.true_lits[c] -= 1;
            } else if self.true_lits[c] == 0 && self.open_lits[c] == 0 {
                self.falsified -= 1;
            }
            self.open_lits[c] += 1;
        }
    }

    /// Fail-soft alpha-beta: exact when the value lies strictly inside `(alpha, beta)`.
    fn value(&mut self, depth: usize, mut alpha: i64, mut beta: i64) -> Result<i64, OracleError> {
        let lower = self.falsified as i64;
        let upper = (self.m - self.satisfied) as i64;
        if depth == self.order.len() || (self.pruning && lower == upper) {
            self.budget.charge()?;
            return Ok(lower);
        }
        if self.pruning {
            if lower >= beta {
                return Ok(lower);
            }
            if upper <= alpha {
                return Ok(upper);
            }
        }
        let (var, kind) = self.order[depth];
        let maximize = kind == Quantifier::Universal;
        let mut best = if maximize { i64::MIN } else { i64::MAX };
        for value in [false, true] {
            self.assign(var, value);
            let child = self.value(depth + 1, alpha, beta);
            self.unassign(var);
            let child = child?;
            if maximize {
                best = best.max(child);
                alpha = alpha.max(child);
            } else {
                best = best.min(child);
                beta = beta.min(child);
            }
            if self.pruning && alpha >= beta {
                break;
            }
        }
        Ok(best)
    }
}

/// Plain minimax without cutoffs or skipping, kept as the reference the
/// pruned search is tested against.
pub fn brute_force_value(f: &PrenexFormula) -> usize {
    fn go(f: &PrenexFormula, vars: &[(Var, Quantifier)], a: &mut Assignment) -> usize {
        match vars.split_first() {
            None => unsat_count(f, a).expect("all bound variables assigned"),
            Some((&(v, q), rest)) => {
                let mut vals = [false, true].map(|b| {
                    a.set(v, b);
                    go(f, rest, a)
                });
                vals.sort_unstable();
                if q == Quantifier::Universal {
                    vals[1]
                } else {
                    vals[0]
                }
            }
        }
    }
    let vars: Vec<(Var, Quantifier)> = f
        .blocks()
        .iter()
        .flat_map(|b| b.vars.iter().map(move |&v| (v, b.kind)))
        .collect();
    go(f, &vars, &mut Assignment::new(f.num_vars()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_qdimacs;

    fn f(text: &str) -> PrenexFormula {
        parse_qdimacs(text).unwrap()
    }

    fn value(text: &str) -> usize {
        game_value(&f(text), &Limits::default()).unwrap().value
    }

    #[test]
    fn unsat_count_examples() {
        let g = f("p cnf 2 2\ne 1 2 0\n1 2 0\n-1 -2 0\n");
        let a = Assignment::total(&g, |_| true);
        assert_eq!(unsat_count(&g, &a), Ok(1));
        let g = f("p cnf 2 1\ne 1 2 0\n1 2 2 0\n");
        assert_eq!(unsat_count(&g, &Assignment::total(&g, |_| false)), Ok(1));
        let g = f("p cnf 1 0\ne 1 0\n");
        assert_eq!(unsat_count(&g, &Assignment::total(&g, |_| false)), Ok(0));
    }

    #[test]
    fn unsat_count_requires_total_assignment() {
        let g = f("p cnf 2 1\ne 1 2 0\n1 2 0\n");
        let mut a = Assignment::new(2);
        a.set(Var(1), true);
        assert_eq!(unsat_count(&g, &a), Err(OracleError::IncompleteAssignment(Var(2))));
    }

    #[test]
    fn small_game_values() {
        assert_eq!(value("p cnf 2 2\na 1 0\ne 2 0\n1 2 0\n-1 -2 0\n"), 0);
        assert_eq!(value("p cnf 1 2\na 1 0\n1 0\n-1 0\n"), 1);
        assert_eq!(value("p cnf 2 2\ne 2 0\na 1 0\n1 2 0\n-1 -2 0\n"), 1);
    }

    #[test]
    fn pruning_does_not_change_values() {
        let text = "p cnf 4 5\na 1 0\ne 2 0\na 3 0\ne 4 0\n1 2 3 0\n-1 -2 4 0\n3 -4 0\n-3 4 2 0\n-2 -4 0\n";
        let g = f(text);
        let plain = Limits {
            pruning: false,
            ..Limits::default()
        };
        assert_eq!(game_value(&g, &plain), game_value(&g, &Limits::default()));
        assert_eq!(game_value(&g, &plain).unwrap().value, brute_force_value(&g));
    }

    #[test]
    fn budget_is_enforced() {
        let mut text = String::from("p cnf 30 30\na");
        for v in 1..=30 {
            text.push_str(&format!(" {v}"));
        }
        text.push_str(" 0\n");
        for v in 1..=30 {
            text.push_str(&format!("{v} -{} 0\n", v % 30 + 1));
        }
        let limits = Limits {
            budget: 1000,
            pruning: false,
            method: Method::Search,
        };
        assert_eq!(
            game_value(&f(&text), &limits),
            Err(OracleError::BudgetExceeded { limit: 1000 })
        );
    }

    #[test]
    fn witness_is_lexicographically_first() {
        let g = f("p cnf 2 2\na 1 0\ne 2 0\n1 2 0\n-1 -2 0\n");
        let (v, w) = game_value_with_witness(&g, &Limits::default()).unwrap();
        assert_eq!(v.value, 0);
        assert_eq!(w.certificate_line(), "v -1 2 0");
    }

    #[test]
    fn verify_examples() {
        let g = f("p cnf 1 1\na 1 0\n1 0\n");
        let h = f("p cnf 1 0\na 1 0\n");
        assert_eq!(verify_value_preservation(&g, &h, &Limits::default()), Ok(false));
        assert_eq!(verify_value_preservation(&g, &g, &Limits::default()), Ok(true));
    }
}
