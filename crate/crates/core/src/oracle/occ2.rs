//! Satisfiability of existential CNF in which every variable occurs at most twice.

use serde::{Deserialize, Serialize};

use super::{Assignment, OracleError};
use crate::formula::{Clause, Var};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Occ2Outcome {
    Sat(Assignment),
    Unsat,
}

impl Occ2Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Occ2Outcome::Sat(_))
    }
}

/// Decides `clauses` over `vars`.
///
/// Variables whose live occurrences all share one sign are set to satisfy them,
/// in ascending order until none is left. Each remaining variable then occurs
/// once positively and once negatively, and the residue is satisfiable exactly
/// when some matching of clauses to their variables covers every clause.
pub fn solve_exists_occ2(clauses: &[Clause], vars: &[Var]) -> Result<Occ2Outcome, OracleError> {
    let n = vars.iter().map(|v| v.index()).max().unwrap_or(0);
    let mut known = vec![false; n + 1];
    vars.iter().for_each(|v| known[v.index()] = true);
    let mut occurrences: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n + 1];
    for (ci, c) in clauses.iter().enumerate() {
        for l in c.iter() {
            if !known.get(l.var.index()).copied().unwrap_or(false) {
                return Err(OracleError::PreconditionViolated(format!(
                    "variable {} is not in the variable set",
                    l.var
                )));
            }
            occurrences[l.var.index()].push((ci, l.negated));
        }
    }
    if let Some(v) = (1..=n).find(|&v| occurrences[v].len() > 2) {
        return Err(OracleError::OccurrenceBoundViolated {
            var: Var(v as u32),
            count: occurrences[v].len(),
        });
    }

    let mut assignment = Assignment::new(n as u32);
    let mut live = vec![true; clauses.len()];
    let mut sorted: Vec<Var> = vars.to_vec();
    sorted.sort();
    loop {
        let mut changed = false;
        for &v in &sorted {
            let occ: Vec<(usize, bool)> = occurrences[v.index()]
                .iter()
                .copied()
                .filter(|&(c, _)| live[c])
                .collect();
            let Some(&(_, sign)) = occ.first() else { continue };
            if assignment.get(v).is_some() || occ.iter().any(|&(_, s)| s != sign) {
                continue;
            }
            assignment.set(v, !sign);
            occ.iter().for_each(|&(c, _)| live[c] = false);
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let residue: Vec<usize> = (0..clauses.len()).filter(|&c| live[c]).collect();
    let mut matched_clause: Vec<Option<usize>> = vec![None; n + 1];
    for &c in &residue {
        let mut seen = vec![false; n + 1];
        if !augment(c, clauses, &assignment, &mut matched_clause, &mut seen) {
            return Ok(Occ2Outcome::Unsat);
        }
    }
    for &v in &sorted {
        if assignment.get(v).is_none() {
            let value = matched_clause[v.index()].is_some_and(|c| {
                clauses[c]
                    .iter()
                    .any(|l| l.var == v && !l.negated)
            });
            assignment.set(v, value);
        }
    }
    debug_assert!(clauses
        .iter()
        .all(|c| c.iter().any(|l| l.eval(assignment.get(l.var).unwrap_or(false)))));
    Ok(Occ2Outcome::Sat(assignment))
}

/// Kuhn's augmenting path from clause `c`, preferring free variables first.
fn augment(
    c: usize,
    clauses: &[Clause],
    fixed: &Assignment,
    matched_clause: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    let candidates: Vec<Var> = clauses[c]
        .iter()
        .map(|l| l.var)
        .filter(|&v| fixed.get(v).is_none())
        .collect();
    if let Some(&v) = candidates.iter().find(|v| matched_clause[v.index()].is_none()) {
        matched_clause[v.index()] = Some(c);
        return true;
    }
    for v in candidates {
        if std::mem::replace(&mut seen[v.index()], true) {
            continue;
        }
        let other = matched_clause[v.index()].expect("checked above");
        if augment(other, clauses, fixed, matched_clause, seen) {
            matched_clause[v.index()] = Some(c);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cls(rows: &[&[i64]]) -> Vec<Clause> {
        rows.iter().map(|c| Clause::from_dimacs(c)).collect()
    }

    fn vars(n: u32) -> Vec<Var> {
        (1..=n).map(Var).collect()
    }

    #[test]
    fn matching_gives_witness() {
        let out = solve_exists_occ2(&cls(&[&[1, 2], &[-1, -2]]), &vars(2)).unwrap();
        let Occ2Outcome::Sat(a) = out else { panic!("expected SAT") };
        assert_eq!((a.get(Var(1)), a.get(Var(2))), (Some(true), Some(false)));
    }

    #[test]
    fn counting_unsat_cases() {
        assert_eq!(solve_exists_occ2(&cls(&[&[1], &[-1]]), &vars(1)), Ok(Occ2Outcome::Unsat));
        assert_eq!(
            solve_exists_occ2(&cls(&[&[1, 2], &[-1], &[-2]]), &vars(2)),
            Ok(Occ2Outcome::Unsat)
        );
    }

    #[test]
    fn occurrence_bound_is_checked() {
        let err = solve_exists_occ2(&cls(&[&[1], &[1], &[-1]]), &vars(1)).unwrap_err();
        assert_eq!(err, OracleError::OccurrenceBoundViolated { var: Var(1), count: 3 });
    }

    #[test]
    fn pure_variables_are_eliminated() {
        let out = solve_exists_occ2(&cls(&[&[1, 1], &[2, -3], &[3, -2]]), &vars(3)).unwrap();
        assert!(out.is_sat());
    }
}
