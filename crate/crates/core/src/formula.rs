//! Prenex CNF quantified Boolean formulas, QDIMACS I/O and occurrence profiling.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A propositional variable, numbered from 1 as in DIMACS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(pub u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: Var,
    pub negated: bool,
}

impl Literal {
    pub fn positive(var: Var) -> Self {
        Literal { var, negated: false }
    }

    pub fn negative(var: Var) -> Self {
        Literal { var, negated: true }
    }

    pub fn with_sign(var: Var, negated: bool) -> Self {
        Literal { var, negated }
    }

    pub fn negate(self) -> Self {
        Literal {
            var: self.var,
            negated: !self.negated,
        }
    }

    /// Parses a signed DIMACS literal; `0` is not a literal.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Literal {
            var: Var(value.unsigned_abs() as u32),
            negated: value < 0,
        })
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.var.0 as i64)
        } else {
            self.var.0 as i64
        }
    }

    /// Truth value of the literal when its variable takes `value`.
    #[inline]
    pub fn eval(self, value: bool) -> bool {
        value != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    Universal,
    Existential,
}

impl Quantifier {
    pub fn symbol(self) -> char {
        match self {
            Quantifier::Universal => 'a',
            Quantifier::Existential => 'e',
        }
    }

    pub fn dual(self) -> Self {
        match self {
            Quantifier::Universal => Quantifier::Existential,
            Quantifier::Existential => Quantifier::Universal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantifierBlock {
    pub kind: Quantifier,
    pub vars: Vec<Var>,
}

impl QuantifierBlock {
    pub fn new(kind: Quantifier, vars: Vec<Var>) -> Self {
        QuantifierBlock { kind, vars }
    }
}

/// A disjunction of literals. Repeats and complementary pairs are kept as written.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Clause { literals }
    }

    /// Builds a clause from signed DIMACS integers. Panics on `0`.
    pub fn from_dimacs(lits: &[i64]) -> Self {
        Clause {
            literals: lits
                .iter()
                .map(|&l| Literal::from_dimacs(l).expect("0 is not a literal"))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Literal> {
        self.literals.iter()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("binding error for variable {var}: {message}")]
    Binding { var: u32, message: String },
    #[error("clause {clause} is empty")]
    EmptyClause { clause: usize },
    #[error("quantifier block {block} binds no variables")]
    EmptyBlock { block: usize },
}

/// Where a variable is bound in the prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Binding {
    pub block: usize,
    pub kind: Quantifier,
}

/// Quantifier prefix (outermost block first) over a clause multiset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrenexFormula {
    num_vars: u32,
    blocks: Vec<QuantifierBlock>,
    clauses: Vec<Clause>,
}

impl PrenexFormula {
    /// Validates and builds a formula.
    ///
    /// Every variable must lie in `1..=num_vars`, be bound at most once, and every
    /// variable used in a clause must be bound. Blocks and clauses must be non-empty.
    pub fn new(
        num_vars: u32,
        blocks: Vec<QuantifierBlock>,
        clauses: Vec<Clause>,
    ) -> Result<Self, FormulaError> {
        let f = PrenexFormula {
            num_vars,
            blocks,
            clauses,
        };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<(), FormulaError> {
        let mut bound = vec![false; self.num_vars as usize + 1];
        for (bi, block) in self.blocks.iter().enumerate() {
            if block.vars.is_empty() {
                return Err(FormulaError::EmptyBlock { block: bi });
            }
            for &v in &block.vars {
                if v.0 == 0 || v.0 > self.num_vars {
                    return Err(FormulaError::Binding {
                        var: v.0,
                        message: format!("outside declared range 1..={}", self.num_vars),
                    });
                }
                if std::mem::replace(&mut bound[v.index()], true) {
                    return Err(FormulaError::Binding {
                        var: v.0,
                        message: "bound more than once".into(),
                    });
                }
            }
        }
        for (ci, clause) in self.clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(FormulaError::EmptyClause { clause: ci });
            }
            for lit in clause.iter() {
                let v = lit.var;
                if v.0 == 0 || v.0 > self.num_vars || !bound[v.index()] {
                    return Err(FormulaError::Binding {
                        var: v.0,
                        message: "used but not bound by any quantifier".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn blocks(&self) -> &[QuantifierBlock] {
        &self.blocks
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// All bound variables in prefix order.
    pub fn bound_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.blocks.iter().flat_map(|b| b.vars.iter().copied())
    }

    pub fn bound_count(&self) -> usize {
        self.blocks.iter().map(|b| b.vars.len()).sum()
    }

    /// Binding table indexed by variable number (index 0 unused).
    pub fn binding_table(&self) -> Vec<Option<Binding>> {
        let mut table = vec![None; self.num_vars as usize + 1];
        for (block, b) in self.blocks.iter().enumerate() {
            for &v in &b.vars {
                table[v.index()] = Some(Binding {
                    block,
                    kind: b.kind,
                });
            }
        }
        table
    }

    pub fn quantifier_of(&self, var: Var) -> Option<Quantifier> {
        self.blocks
            .iter()
            .find(|b| b.vars.contains(&var))
            .map(|b| b.kind)
    }

    /// Literal-occurrence count per variable number, repeats included.
    pub fn occurrence_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_vars as usize + 1];
        for clause in &self.clauses {
            for lit in clause.iter() {
                counts[lit.var.index()] += 1;
            }
        }
        counts
    }

    pub fn into_parts(self) -> (u32, Vec<QuantifierBlock>, Vec<Clause>) {
        (self.num_vars, self.blocks, self.clauses)
    }
}

/// Parses QDIMACS text. Comment lines starting with `c` are ignored.
pub fn parse_qdimacs(text: &str) -> Result<PrenexFormula, FormulaError> {
    let mut header: Option<(u32, usize)> = None;
    let mut blocks: Vec<QuantifierBlock> = Vec::new();
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pending: Vec<Literal> = Vec::new();
    let mut pending_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        let syntax = |message: String| FormulaError::Syntax {
            line: line_no,
            message,
        };
        let mut tokens = line.split_whitespace();
        let first = tokens.next().unwrap_or_default();

        if first == "p" {
            if header.is_some() {
                return Err(syntax("duplicate problem line".into()));
            }
            let fmt = tokens.next();
            if fmt != Some("cnf") {
                return Err(syntax("expected `p cnf <vars> <clauses>`".into()));
            }
            let vars = tokens
                .next()
                .and_then(|t| t.parse::<u32>().ok())
                .ok_or_else(|| syntax("bad variable count".into()))?;
            let count = tokens
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| syntax("bad clause count".into()))?;
            if tokens.next().is_some() {
                return Err(syntax("trailing tokens after problem line".into()));
            }
            header = Some((vars, count));
            continue;
        }
        if header.is_none() {
            return Err(syntax("missing `p cnf` problem line".into()));
        }

        if first == "a" || first == "e" {
            if !clauses.is_empty() || !pending.is_empty() {
                return Err(syntax("quantifier line after clauses".into()));
            }
            let kind = if first == "a" {
                Quantifier::Universal
            } else {
                Quantifier::Existential
            };
            let mut vars = Vec::new();
            let mut terminated = false;
            for tok in tokens {
                if terminated {
                    return Err(syntax("tokens after terminating 0".into()));
                }
                let v: i64 = tok
                    .parse()
                    .map_err(|_| syntax(format!("malformed token `{tok}`")))?;
                match v {
                    0 => terminated = true,
                    v if v > 0 && v <= u32::MAX as i64 => vars.push(Var(v as u32)),
                    _ => return Err(syntax(format!("invalid quantified variable `{tok}`"))),
                }
            }
            if !terminated {
                return Err(syntax("quantifier line not terminated by 0".into()));
            }
            if vars.is_empty() {
                return Err(syntax("quantifier line binds no variables".into()));
            }
            blocks.push(QuantifierBlock::new(kind, vars));
            continue;
        }

        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| syntax(format!("malformed token `{tok}`")))?;
            if pending.is_empty() {
                pending_line = line_no;
            }
            if v == 0 {
                if pending.is_empty() {
                    return Err(FormulaError::EmptyClause {
                        clause: clauses.len(),
                    });
                }
                clauses.push(Clause::new(std::mem::take(&mut pending)));
            } else {
                let lit = Literal::from_dimacs(v)
                    .ok_or_else(|| syntax(format!("literal `{tok}` out of range")))?;
                pending.push(lit);
            }
        }
    }

    let (num_vars, declared) = header.ok_or(FormulaError::Syntax {
        line: 0,
        message: "missing `p cnf` problem line".into(),
    })?;
    if !pending.is_empty() {
        return Err(FormulaError::Syntax {
            line: pending_line,
            message: "clause not terminated by 0".into(),
        });
    }
    if clauses.len() != declared {
        return Err(FormulaError::Syntax {
            line: 0,
            message: format!(
                "header declares {declared} clauses but {} were given",
                clauses.len()
            ),
        });
    }
    PrenexFormula::new(num_vars, blocks, clauses)
}

/// Canonical QDIMACS text: header, one line per block, one line per clause.
pub fn serialize_qdimacs(f: &PrenexFormula) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p cnf {} {}", f.num_vars, f.clauses.len());
    for block in &f.blocks {
        out.push(block.kind.symbol());
        for v in &block.vars {
            let _ = write!(out, " {v}");
        }
        out.push_str(" 0\n");
    }
    for clause in &f.clauses {
        for lit in clause.iter() {
            let _ = write!(out, "{lit} ");
        }
        out.push_str("0\n");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceProfile {
    /// Every bound variable, including those with zero occurrences.
    pub per_variable: BTreeMap<Var, usize>,
    pub max_universal: usize,
    pub max_existential: usize,
    pub max_clause_size: usize,
    pub min_clause_size: usize,
    pub clause_count: usize,
    pub total_literals: usize,
}

pub fn occurrence_profile(f: &PrenexFormula) -> OccurrenceProfile {
    let counts = f.occurrence_counts();
    let mut per_variable = BTreeMap::new();
    let mut max_universal = 0;
    let mut max_existential = 0;
    for block in f.blocks() {
        for &v in &block.vars {
            let c = counts[v.index()];
            per_variable.insert(v, c);
            match block.kind {
                Quantifier::Universal => max_universal = max_universal.max(c),
                Quantifier::Existential => max_existential = max_existential.max(c),
            }
        }
    }
    let sizes = f.clauses().iter().map(Clause::len);
    OccurrenceProfile {
        per_variable,
        max_universal,
        max_existential,
        max_clause_size: sizes.clone().max().unwrap_or(0),
        min_clause_size: sizes.clone().min().unwrap_or(0),
        clause_count: f.num_clauses(),
        total_literals: sizes.sum(),
    }
}

/// Merges adjacent blocks of the same kind and drops universal variables that
/// never occur. Clauses are untouched.
pub fn normalize_blocks(f: &PrenexFormula) -> PrenexFormula {
    let counts = f.occurrence_counts();
    let mut blocks: Vec<QuantifierBlock> = Vec::new();
    for block in f.blocks() {
        let vars: Vec<Var> = block
            .vars
            .iter()
            .copied()
            .filter(|v| block.kind == Quantifier::Existential || counts[v.index()] > 0)
            .collect();
        if vars.is_empty() {
            continue;
        }
        match blocks.last_mut() {
            Some(last) if last.kind == block.kind => last.vars.extend(vars),
            _ => blocks.push(QuantifierBlock::new(block.kind, vars)),
        }
    }
    PrenexFormula {
        num_vars: f.num_vars,
        blocks,
        clauses: f.clauses.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lits(f: &PrenexFormula) -> Vec<Vec<i64>> {
        f.clauses()
            .iter()
            .map(|c| c.iter().map(|l| l.to_dimacs()).collect())
            .collect()
    }

    #[test]
    fn parses_forall_exists_example() {
        let f = parse_qdimacs("p cnf 2 2\na 1 0\ne 2 0\n1 2 0\n-1 -2 0\n").unwrap();
        assert_eq!(f.blocks().len(), 2);
        assert_eq!(f.blocks()[0].kind, Quantifier::Universal);
        assert_eq!(f.blocks()[0].vars, vec![Var(1)]);
        assert_eq!(f.blocks()[1].kind, Quantifier::Existential);
        assert_eq!(lits(&f), vec![vec![1, 2], vec![-1, -2]]);
    }

    #[test]
    fn repeated_literal_is_accepted() {
        let f = parse_qdimacs("p cnf 1 1\ne 1 0\n1 1 0\n").unwrap();
        assert_eq!(lits(&f), vec![vec![1, 1]]);
        assert_eq!(occurrence_profile(&f).per_variable[&Var(1)], 2);
    }

    #[test]
    fn unbound_variable_is_binding_error() {
        let err = parse_qdimacs("p cnf 2 1\na 1 0\n2 0\n").unwrap_err();
        assert!(matches!(err, FormulaError::Binding { var: 2, .. }), "{err:?}");
    }

    #[test]
    fn double_binding_is_rejected() {
        let err = parse_qdimacs("p cnf 2 1\na 1 0\ne 1 2 0\n1 2 0\n").unwrap_err();
        assert!(matches!(err, FormulaError::Binding { var: 1, .. }));
    }

    #[test]
    fn empty_clause_is_rejected() {
        let err = parse_qdimacs("p cnf 1 2\ne 1 0\n1 0\n0\n").unwrap_err();
        assert_eq!(err, FormulaError::EmptyClause { clause: 1 });
    }

    #[test]
    fn malformed_tokens_are_syntax_errors() {
        for text in [
            "p cnf x 1\n",
            "p dnf 1 1\n",
            "e 1 0\n",
            "p cnf 1 1\ne 1 0\n1 foo 0\n",
            "p cnf 1 1\ne 1\n1 0\n",
            "p cnf 1 1\ne 1 0\n1\n",
            "p cnf 1 2\ne 1 0\n1 0\n",
            "p cnf 1 1\ne 1 0\n1 0\ne 1 0\n",
        ] {
            let err = parse_qdimacs(text).unwrap_err();
            assert!(matches!(err, FormulaError::Syntax { .. }), "{text:?} -> {err:?}");
        }
    }

    #[test]
    fn comments_and_split_clauses() {
        let f = parse_qdimacs("c hello\np cnf 3 2\nc mid\na 1 0\ne 2 3 0\n1 2\n3 0 -1 0\n")
            .unwrap();
        assert_eq!(lits(&f), vec![vec![1, 2, 3], vec![-1]]);
    }

    #[test]
    fn serialize_block_order_and_degenerate() {
        let f = PrenexFormula::new(
            3,
            vec![
                QuantifierBlock::new(Quantifier::Universal, vec![Var(1)]),
                QuantifierBlock::new(Quantifier::Existential, vec![Var(2)]),
                QuantifierBlock::new(Quantifier::Universal, vec![Var(3)]),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(serialize_qdimacs(&f), "p cnf 3 0\na 1 0\ne 2 0\na 3 0\n");
    }

    #[test]
    fn serialize_canonical_text() {
        let text = "p cnf 2 2\na 1 0\ne 2 0\n1 2 0\n-1 -2 0\n";
        assert_eq!(serialize_qdimacs(&parse_qdimacs(text).unwrap()), text);
    }

    #[test]
    fn profile_counts() {
        let f = parse_qdimacs("p cnf 2 2\na 1 0\ne 2 0\n1 2 0\n-1 -2 0\n").unwrap();
        let p = occurrence_profile(&f);
        assert_eq!(p.per_variable[&Var(1)], 2);
        assert_eq!(p.per_variable[&Var(2)], 2);
        assert_eq!((p.max_universal, p.max_existential, p.max_clause_size), (2, 2, 2));

        let g = parse_qdimacs("p cnf 1 1\ne 1 0\n1 1 1 0\n").unwrap();
        assert_eq!(occurrence_profile(&g).per_variable[&Var(1)], 3);
    }

    #[test]
    fn normalize_merges_and_drops_unused_universals() {
        let f = parse_qdimacs("p cnf 4 1\na 1 0\na 2 0\ne 3 0\na 4 0\n1 2 3 0\n").unwrap();
        let n = normalize_blocks(&f);
        assert_eq!(
            n.blocks(),
            &[
                QuantifierBlock::new(Quantifier::Universal, vec![Var(1), Var(2)]),
                QuantifierBlock::new(Quantifier::Existential, vec![Var(3)]),
            ]
        );
        assert_eq!(normalize_blocks(&n), n);
    }
}
