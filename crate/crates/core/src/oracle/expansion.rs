//! Exact evaluation for formulas too large to search, for prefixes of the form
//! `forall A exists E forall B exists F` (any part may be empty).
//!
//! Pure literals are fixed first (universal ones to false, existential ones to
//! true); by monotonicity of the count this leaves the value unchanged. The
//! decision `value <= k` is then a QBF over the relaxed clauses plus an at-most-`k`
//! constraint: `A` is enumerated, `E` is found by counterexample-guided
//! expansion over `B`, and every propositional query goes to a SAT solver.

use varisat::{ExtendFormula, Lit, Solver};

use super::{Budget, GameValue, Limits, OracleError};
use crate::formula::{Literal, PrenexFormula, Quantifier, Var};

/// Solver models cached per decision when `B` is empty.
const MODEL_CACHE: usize = 16;

/// Largest enumerated block.
const MAX_ENUMERATED: usize = 40;

struct Prepared {
    num_vars: usize,
    base_cost: usize,
    blocks: Vec<(Quantifier, Vec<Var>)>,
    clauses: Vec<Vec<Literal>>,
}

fn prepare(f: &PrenexFormula) -> Prepared {
    let table = f.binding_table();
    let n = f.num_vars() as usize;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    for c in f.clauses() {
        let mut lits = c.literals.clone();
        lits.sort();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var == w[1].var) {
            continue;
        }
        clauses.push(lits);
    }

    let mut value: Vec<Option<bool>> = vec![None; n + 1];
    let mut live = vec![true; clauses.len()];
    let mut base_cost = 0;
    let mut pos = vec![0usize; n + 1];
    let mut neg = vec![0usize; n + 1];
    loop {
        pos.iter_mut().for_each(|c| *c = 0);
        neg.iter_mut().for_each(|c| *c = 0);
        for lits in clauses.iter().zip(&live).filter(|(_, &l)| l).map(|(c, _)| c) {
            for l in lits.iter().filter(|l| value[l.var.index()].is_none()) {
                if l.negated {
                    neg[l.var.index()] += 1;
                } else {
                    pos[l.var.index()] += 1;
                }
            }
        }
        let mut changed = false;
        for v in 1..=n {
            let (p, q) = (pos[v], neg[v]);
            if value[v].is_some() || p + q == 0 || (p > 0 && q > 0) {
                continue;
            }
            let kind = table[v].expect("occurring variables are bound").kind;
            let positive_only = q == 0;
            value[v] = Some(match kind {
                Quantifier::Existential => positive_only,
                Quantifier::Universal => !positive_only,
            });
            changed = true;
        }
        if !changed {
            break;
        }
        for (c, lits) in clauses.iter().enumerate() {
            if !live[c] {
                continue;
            }
            let satisfied = lits
                .iter()
                .any(|l| value[l.var.index()].is_some_and(|b| l.eval(b)));
            let decided = lits.iter().all(|l| value[l.var.index()].is_some());
            if satisfied || decided {
                live[c] = false;
                base_cost += usize::from(!satisfied);
            }
        }
    }

    let clauses: Vec<Vec<Literal>> = clauses
        .into_iter()
        .zip(&live)
        .filter(|(_, &l)| l)
        .map(|(lits, _)| {
            lits.into_iter()
                .filter(|l| value[l.var.index()].is_none())
                .collect()
        })
        .collect();
    let mut blocks: Vec<(Quantifier, Vec<Var>)> = Vec::new();
    for b in f.blocks() {
        let vars: Vec<Var> = b
            .vars
            .iter()
            .copied()
            .filter(|v| value[v.index()].is_none() && pos[v.index()] + neg[v.index()] > 0)
            .collect();
        if vars.is_empty() {
            continue;
        }
        match blocks.last_mut() {
            Some((kind, vs)) if *kind == b.kind => vs.extend(vars),
            _ => blocks.push((b.kind, vars)),
        }
    }
    Prepared {
        num_vars: n,
        base_cost,
        blocks,
        clauses,
    }
}

/// Splits the prefix into `(A, E, B, F)`.
fn shape(p: &Prepared) -> Result<[Vec<Var>; 4], OracleError> {
    let mut parts: [Vec<Var>; 4] = Default::default();
    let mut slot = 0;
    for (kind, vars) in &p.blocks {
        let want = if slot % 2 == 0 {
            Quantifier::Universal
        } else {
            Quantifier::Existential
        };
        if *kind != want {
            slot += 1;
        }
        if slot >= 4 {
            return Err(OracleError::Unsupported(format!(
                "{} quantifier blocks remain after simplification",
                p.blocks.len()
            )));
        }
        parts[slot] = vars.clone();
        slot += 1;
    }
    Ok(parts)
}

fn sat_lit(l: Literal) -> Lit {
    Lit::from_index(l.var.index(), !l.negated)
}

fn var_lit(v: Var, value: bool) -> Lit {
    Lit::from_index(v.index(), value)
}

/// SAT instance whose first `num_vars + 1` indices are the formula's variables.
struct Cnf {
    solver: Solver<'static>,
    next: usize,
}

impl Cnf {
    fn new(num_vars: usize) -> Self {
        Cnf {
            solver: Solver::new(),
            next: num_vars + 1,
        }
    }

    fn fresh(&mut self) -> Lit {
        self.next += 1;
        Lit::from_index(self.next - 1, true)
    }

    fn add(&mut self, lits: &[Lit]) {
        self.solver.add_clause(lits);
    }

    /// Adds every clause with its own relaxation literal and allows at most `k`
    /// of them to be relaxed.
    fn add_relaxed(&mut self, clauses: impl IntoIterator<Item = Vec<Lit>>, k: usize) {
        let mut relax = Vec::new();
        for mut c in clauses {
            let r = self.fresh();
            c.push(r);
            self.add(&c);
            relax.push(r);
        }
        self.at_most(&relax, k);
    }

    /// Sequential counter encoding of `sum(xs) <= k`.
    fn at_most(&mut self, xs: &[Lit], k: usize) {
        let n = xs.len();
        if k >= n {
            return;
        }
        if k == 0 {
            xs.iter().for_each(|&x| self.add(&[!x]));
            return;
        }
        let mut prev: Vec<Lit> = Vec::new();
        for (i, &x) in xs[..n - 1].iter().enumerate() {
            let cur: Vec<Lit> = (0..k).map(|_| self.fresh()).collect();
            self.add(&[!x, cur[0]]);
            if i == 0 {
                cur[1..].iter().for_each(|&s| self.add(&[!s]));
            } else {
                for j in 0..k {
                    self.add(&[!prev[j], cur[j]]);
                }
                for j in 1..k {
                    self.add(&[!x, !prev[j - 1], cur[j]]);
                }
                self.add(&[!x, !prev[k - 1]]);
            }
            prev = cur;
        }
        self.add(&[!xs[n - 1], !prev[k - 1]]);
    }

    fn solve(&mut self, assumptions: &[Lit], budget: &mut Budget) -> Result<bool, OracleError> {
        budget.charge()?;
        self.solver.assume(assumptions);
        Ok(self.solver.solve().expect("solver without proof output cannot fail"))
    }

    fn model(&self) -> Vec<bool> {
        let mut out = vec![false; self.next];
        for l in self.solver.model().unwrap_or_default() {
            if l.index() < out.len() {
                out[l.index()] = l.is_positive();
            }
        }
        out
    }
}

fn assumptions(vars: &[Var], mask: u64) -> Vec<Lit> {
    vars.iter()
        .enumerate()
        .map(|(i, &v)| var_lit(v, mask >> i & 1 == 1))
        .collect()
}

fn enumeration_size(vars: &[Var]) -> Result<u64, OracleError> {
    if vars.len() > MAX_ENUMERATED {
        return Err(OracleError::Unsupported(format!(
            "universal block of {} variables",
            vars.len()
        )));
    }
    Ok(1u64 << vars.len())
}

fn holds(p: &Prepared, k: usize, budget: &mut Budget) -> Result<bool, OracleError> {
    let Some(k) = k.checked_sub(p.base_cost) else {
        return Ok(false);
    };
    let [a, e, b, f] = shape(p)?;
    let relaxed = || p.clauses.iter().map(|c| c.iter().map(|&l| sat_lit(l)).collect());
    let mut inner = Cnf::new(p.num_vars);
    inner.add_relaxed(relaxed(), k);

    if b.is_empty() {
        return holds_two_level(p, k, &a, &mut inner, budget);
    }

    let in_b: Vec<bool> = membership(p.num_vars, &b);
    let in_f: Vec<bool> = membership(p.num_vars, &f);
    let mut abstraction = Cnf::new(p.num_vars);
    for mask in 0..enumeration_size(&a)? {
        let a_lits = assumptions(&a, mask);
        loop {
            if !abstraction.solve(&a_lits, budget)? {
                return Ok(false);
            }
            let model = abstraction.model();
            let mut query = a_lits.clone();
            query.extend(e.iter().map(|&v| var_lit(v, model[v.index()])));
            let base = query.len();
            let mut counter = None;
            for bmask in 0..enumeration_size(&b)? {
                query.truncate(base);
                query.extend(assumptions(&b, bmask));
                if !inner.solve(&query, budget)? {
                    counter = Some(bmask);
                    break;
                }
            }
            let Some(bmask) = counter else { break };
            // Expand the abstraction with a fresh copy of F under this move of B.
            let b_value = |v: Var| b.iter().position(|&w| w == v).map(|i| bmask >> i & 1 == 1);
            let copy: Vec<usize> = {
                let mut copy = vec![usize::MAX; p.num_vars + 1];
                for &v in &f {
                    copy[v.index()] = abstraction.fresh().index();
                }
                copy
            };
            let clauses: Vec<Vec<Lit>> = p
                .clauses
                .iter()
                .filter(|c| {
                    !c.iter()
                        .any(|l| in_b[l.var.index()] && b_value(l.var).is_some_and(|x| l.eval(x)))
                })
                .map(|c| {
                    c.iter()
                        .filter(|l| !in_b[l.var.index()])
                        .map(|&l| {
                            if in_f[l.var.index()] {
                                Lit::from_index(copy[l.var.index()], !l.negated)
                            } else {
                                sat_lit(l)
                            }
                        })
                        .collect()
                })
                .collect();
            abstraction.add_relaxed(clauses, k);
        }
    }
    Ok(true)
}

fn membership(n: usize, vars: &[Var]) -> Vec<bool> {
    let mut m = vec![false; n + 1];
    vars.iter().for_each(|v| m[v.index()] = true);
    m
}

/// `forall A exists rest`: every move of `A` must leave a model of `inner`.
fn holds_two_level(
    p: &Prepared,
    k: usize,
    a: &[Var],
    inner: &mut Cnf,
    budget: &mut Budget,
) -> Result<bool, OracleError> {
    let in_a = membership(p.num_vars, a);
    let (touching, rest): (Vec<&Vec<Literal>>, Vec<&Vec<Literal>>) = p
        .clauses
        .iter()
        .partition(|c| c.iter().any(|l| in_a[l.var.index()]));
    let falsified = |c: &Vec<Literal>, value: &dyn Fn(Var) -> bool| !c.iter().any(|l| l.eval(value(l.var)));
    // Each cached model with the number of clauses outside `A` it falsifies.
    let mut cache: Vec<(Vec<bool>, usize)> = Vec::new();
    let mut position = vec![usize::MAX; p.num_vars + 1];
    for (i, v) in a.iter().enumerate() {
        position[v.index()] = i;
    }
    for mask in 0..enumeration_size(a)? {
        budget.charge()?;
        let covered = cache.iter().any(|(model, outside)| {
            let value = |v: Var| match position[v.index()] {
                usize::MAX => model[v.index()],
                i => mask >> i & 1 == 1,
            };
            let cost = outside + touching.iter().filter(|c| falsified(c, &value)).count();
            cost <= k
        });
        if covered {
            continue;
        }
        if !inner.solve(&assumptions(a, mask), budget)? {
            return Ok(false);
        }
        let model = inner.model();
        let outside = rest
            .iter()
            .filter(|c| falsified(c, &|v: Var| model[v.index()]))
            .count();
        cache.insert(0, (model, outside));
        cache.truncate(MODEL_CACHE);
    }
    Ok(true)
}

/// Decides whether the game value of `f` is at most `k`.
pub fn expansion_value_at_most(
    f: &PrenexFormula,
    k: usize,
    limits: &Limits,
) -> Result<bool, OracleError> {
    let p = prepare(f);
    holds(&p, k, &mut Budget::new(limits.budget))
}

/// Game value by deciding `value <= k` for increasing `k`.
pub fn expansion_value(f: &PrenexFormula, limits: &Limits) -> Result<GameValue, OracleError> {
    let p = prepare(f);
    let mut budget = Budget::new(limits.budget);
    let mut k = p.base_cost;
    while !holds(&p, k, &mut budget)? {
        k += 1;
    }
    Ok(GameValue { value: k })
}
