//! Executable forms of the two soundness arguments for Step-1 gadgets.

use std::collections::BTreeMap;

use super::{Assignment, OracleError};
use crate::formula::{PrenexFormula, Var};
use crate::reduction::{ClauseKind, ReductionTrace, StepTrace, UniversalGadgetMap};

fn step1_of<'a>(f: &PrenexFormula, trace: &'a ReductionTrace) -> Result<&'a StepTrace, OracleError> {
    let step = trace
        .step(1)
        .ok_or_else(|| OracleError::TraceMismatch("trace has no Step-1 record".into()))?;
    if step.clause_tags.len() != f.num_clauses() {
        return Err(OracleError::TraceMismatch(format!(
            "{} clause tags for {} clauses",
            step.clause_tags.len(),
            f.num_clauses()
        )));
    }
    let bound: Vec<Var> = f.bound_vars().collect();
    if step.var_origin.len() != bound.len() || bound.iter().any(|v| !step.var_origin.contains_key(v)) {
        return Err(OracleError::TraceMismatch(
            "bound variables differ from the Step-1 variable map".into(),
        ));
    }
    Ok(step)
}

fn value(a: &Assignment, v: Var) -> Result<bool, OracleError> {
    a.get(v).ok_or(OracleError::IncompleteAssignment(v))
}

/// Edge variables grouped by the variable of their tail vertex.
fn out_edges(g: &UniversalGadgetMap) -> BTreeMap<Var, Vec<Var>> {
    let mut out: BTreeMap<Var, Vec<Var>> = BTreeMap::new();
    for (&e, &(tail, _)) in g.e_vars.iter().zip(&g.edge_endpoints) {
        out.entry(tail).or_default().push(e);
    }
    out
}

/// Sets every outgoing edge of a gadget vertex to false whenever two or more
/// of them are true, so that all outdegree clauses hold.
pub fn repair_outdegree(
    f: &PrenexFormula,
    trace: &ReductionTrace,
    a: &Assignment,
) -> Result<Assignment, OracleError> {
    let step = step1_of(f, trace)?;
    if let Some(v) = f.bound_vars().find(|&v| a.get(v).is_none()) {
        return Err(OracleError::IncompleteAssignment(v));
    }
    let mut repaired = a.clone();
    for g in &step.universal_gadgets {
        for edges in out_edges(g).values() {
            let on = edges.iter().filter(|&&e| a.get(e) == Some(true)).count();
            if on >= 2 {
                edges.iter().for_each(|&e| repaired.set(e, false));
            }
        }
    }
    Ok(repaired)
}

/// With all outdegree clauses satisfied and every gadget input equal to its
/// owner's value under `t`, checks per gadget that at least as many flow,
/// output-degree and edge-consistency clauses are unsatisfied as there are
/// outputs disagreeing with the owner.
pub fn check_mismatch_bound(
    f: &PrenexFormula,
    trace: &ReductionTrace,
    a: &Assignment,
    t: &Assignment,
) -> Result<bool, OracleError> {
    let step = step1_of(f, trace)?;
    let satisfied = |ci: usize| -> Result<bool, OracleError> {
        for l in f.clauses()[ci].iter() {
            if l.eval(value(a, l.var)?) {
                return Ok(true);
            }
        }
        Ok(false)
    };
    let mut broken: BTreeMap<Var, usize> = BTreeMap::new();
    for (ci, tag) in step.clause_tags.iter().enumerate() {
        let Some(owner) = tag.gadget_owner else { continue };
        match tag.kind {
            ClauseKind::Outdegree if !satisfied(ci)? => {
                return Err(OracleError::PreconditionViolated(format!(
                    "outdegree clause {ci} is unsatisfied"
                )));
            }
            ClauseKind::Flow | ClauseKind::VDegree | ClauseKind::EdgeConsistency if !satisfied(ci)? => {
                *broken.entry(owner).or_default() += 1;
            }
            _ => {}
        }
    }
    for g in &step.universal_gadgets {
        let x = value(t, g.owner)?;
        for &u in &g.u_vars {
            if value(a, u)? != x {
                return Err(OracleError::PreconditionViolated(format!(
                    "input {u} of the gadget for {} disagrees with its owner",
                    g.owner
                )));
            }
        }
        let mut mismatched = 0;
        for &v in &g.v_vars {
            mismatched += usize::from(value(a, v)? != x);
        }
        if broken.get(&g.owner).copied().unwrap_or(0) < mismatched {
            return Ok(false);
        }
    }
    Ok(true)
}
