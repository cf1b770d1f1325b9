//! The three-step pipeline: universal gadgets, existential consistency gadgets,
//! and exactly-3 normalization, with a clause- and variable-level trace.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{
    occurrence_profile, Clause, FormulaError, Literal, OccurrenceProfile, PrenexFormula,
    Quantifier, QuantifierBlock, Var,
};
use crate::graphs::{
    build_certified_gadget, build_expander, build_gadget_graph, GadgetBackend, GadgetGraph, GraphError,
    RoutingReport,
};

/// Existential variables with at most this many occurrences skip Step 2.
pub const STEP2_THRESHOLD: usize = 3;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("steps must be a non-empty strictly ascending subset of 1, 2, 3 (got {0:?})")]
    StepOrder(Vec<u8>),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("expander on {vertices} vertices failed its expansion certificate")]
    ExpanderCertificate { vertices: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseKind {
    /// Input clause carried through a step that does not rewrite it.
    Original,
    Major,
    Outdegree,
    Flow,
    VDegree,
    EdgeConsistency,
    Consistency,
    Split,
    Pad,
}

impl ClauseKind {
    /// Gadget clause kinds produced only by Step 1.
    pub fn is_universal_gadget(self) -> bool {
        matches!(
            self,
            ClauseKind::Outdegree | ClauseKind::Flow | ClauseKind::VDegree | ClauseKind::EdgeConsistency
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseTag {
    pub kind: ClauseKind,
    /// Index of the pipeline-input clause this clause descends from.
    pub origin: Option<usize>,
    /// Variable whose gadget emitted the clause, numbered as in the step input.
    pub gadget_owner: Option<Var>,
    /// Index of the clause in the step input that this clause rewrites.
    pub parent: Option<usize>,
}

impl ClauseTag {
    fn gadget(kind: ClauseKind, owner: Var) -> Self {
        ClauseTag {
            kind,
            origin: None,
            gadget_owner: Some(owner),
            parent: None,
        }
    }

    fn original(index: usize) -> Self {
        ClauseTag {
            kind: ClauseKind::Original,
            origin: Some(index),
            gadget_owner: None,
            parent: Some(index),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum VarOrigin {
    Retained { var: Var },
    GadgetInput { owner: Var, index: usize },
    GadgetOutput { owner: Var, index: usize },
    GadgetInternal { owner: Var, vertex: usize },
    GadgetEdge { owner: Var, edge: usize },
    Copy { owner: Var, index: usize },
    Pad { clause: usize },
    Chain { clause: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step2Style {
    #[default]
    Expander,
    Cycle,
}

impl fmt::Display for Step2Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Step2Style::Expander => "expander",
            Step2Style::Cycle => "cycle",
        })
    }
}

impl FromStr for Step2Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "expander" => Ok(Step2Style::Expander),
            "cycle" => Ok(Step2Style::Cycle),
            other => Err(format!("unknown style `{other}` (expected expander|cycle)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub steps: Vec<u8>,
    pub step2_style: Step2Style,
    pub gadget_backend: GadgetBackend,
    /// Universal variables with at most this many occurrences skip Step 1.
    pub bypass_threshold: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            steps: vec![1, 2, 3],
            step2_style: Step2Style::Expander,
            gadget_backend: GadgetBackend::Benes,
            bypass_threshold: 2,
        }
    }
}

impl PipelineOptions {
    pub fn only(step: u8) -> Self {
        PipelineOptions {
            steps: vec![step],
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), ReductionError> {
        let ascending = self.steps.windows(2).all(|w| w[0] < w[1]);
        let in_range = self.steps.iter().all(|s| (1..=3).contains(s));
        if self.steps.is_empty() || !ascending || !in_range {
            return Err(ReductionError::StepOrder(self.steps.clone()));
        }
        Ok(())
    }
}

/// Step-1 gadget attached to one universal variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniversalGadgetMap {
    pub owner: Var,
    /// Index of the block that bound the owner.
    pub block: usize,
    pub ell: usize,
    pub u_vars: Vec<Var>,
    pub v_vars: Vec<Var>,
    pub w_vars: Vec<Var>,
    pub e_vars: Vec<Var>,
    /// `(tail, head)` vertex variables of each edge, parallel to `e_vars`.
    pub edge_endpoints: Vec<(Var, Var)>,
    pub degree_bound: usize,
    pub duplication: usize,
    pub backend: GadgetBackend,
    /// Flow certificate, present for backends that need one.
    pub routing: Option<RoutingReport>,
}

/// Step-2 gadget attached to one existential variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistentialGadgetMap {
    pub owner: Var,
    pub ell: usize,
    /// Copy `j < ell` replaces the `j`-th occurrence; the rest only appear in the gadget.
    pub copies: Vec<Var>,
    pub style: Step2Style,
    pub expansion_certificate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: u8,
    /// One tag per output clause.
    pub clause_tags: Vec<ClauseTag>,
    /// Origin of every bound output variable.
    pub var_origin: BTreeMap<Var, VarOrigin>,
    pub universal_gadgets: Vec<UniversalGadgetMap>,
    pub existential_gadgets: Vec<ExistentialGadgetMap>,
    pub fresh_universals: Vec<Var>,
    pub fresh_existentials: Vec<Var>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    /// Largest clause width of the output.
    pub clause_width: usize,
    pub b_universal: usize,
    pub b_existential: usize,
    /// Output clause count over input clause count.
    pub size_ratio: f64,
    /// Largest gadget degree bound `d` used.
    pub gadget_degree: usize,
    /// Outdegree-clause duplication `R = d^2` (0 when no gadget was built).
    pub duplication: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub steps: Vec<StepTrace>,
    pub constants: ConstantsReport,
}

impl ReductionTrace {
    /// Tags of the final output's clauses.
    pub fn clause_tags(&self) -> &[ClauseTag] {
        self.steps.last().map_or(&[], |s| s.clause_tags.as_slice())
    }

    pub fn step(&self, step: u8) -> Option<&StepTrace> {
        self.steps.iter().find(|s| s.step == step)
    }

    fn single(step: StepTrace, input: &PrenexFormula, output: &PrenexFormula) -> Self {
        let mut t = ReductionTrace {
            steps: vec![step],
            constants: ConstantsReport::default(),
        };
        t.constants = constants_report(&t, input, output);
        t
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub before: OccurrenceProfile,
    pub after: OccurrenceProfile,
    pub constants: ConstantsReport,
    pub steps: Vec<u8>,
}

fn constants_report(
    trace: &ReductionTrace,
    input: &PrenexFormula,
    output: &PrenexFormula,
) -> ConstantsReport {
    let profile = occurrence_profile(output);
    let gadgets = trace.steps.iter().flat_map(|s| s.universal_gadgets.iter());
    let (gadget_degree, duplication) = gadgets.fold((0, 0), |(d, r), g| {
        (d.max(g.degree_bound), r.max(g.duplication))
    });
    ConstantsReport {
        clause_width: profile.max_clause_size,
        b_universal: profile.max_universal,
        b_existential: profile.max_existential,
        size_ratio: output.num_clauses() as f64 / input.num_clauses().max(1) as f64,
        gadget_degree,
        duplication,
    }
}

/// Hands out fresh variable numbers above a starting point.
struct Allocator {
    next: u32,
}

impl Allocator {
    fn above(max: u32) -> Self {
        Allocator { next: max + 1 }
    }

    fn fresh(&mut self) -> Var {
        self.next += 1;
        Var(self.next - 1)
    }

    fn fresh_many(&mut self, count: usize) -> Vec<Var> {
        (0..count).map(|_| self.fresh()).collect()
    }

    fn max_var(&self) -> u32 {
        self.next - 1
    }
}

/// Clauses of one universal gadget over freshly numbered variables.
#[derive(Clone, Debug)]
pub struct UniversalGadget {
    pub graph: GadgetGraph,
    pub u_vars: Vec<Var>,
    pub v_vars: Vec<Var>,
    pub w_vars: Vec<Var>,
    pub e_vars: Vec<Var>,
    pub clauses: Vec<(Clause, ClauseKind)>,
    /// Number of existential gadget variables (`V`, `W` and edges).
    pub k: usize,
    pub duplication: usize,
}

impl UniversalGadget {
    /// Variable of each graph vertex.
    pub fn vertex_vars(&self) -> Vec<Var> {
        let mut vars = vec![Var(0); self.graph.vertex_count()];
        for (vs, verts) in [
            (&self.u_vars, &self.graph.inputs),
            (&self.v_vars, &self.graph.outputs),
            (&self.w_vars, &self.graph.internal),
        ] {
            for (&var, &v) in vs.iter().zip(verts) {
                vars[v] = var;
            }
        }
        vars
    }
}

/// Builds the gadget formula for a universal variable with `ell` occurrences,
/// numbering variables from `first_var` in the order inputs, outputs, internal
/// vertices, edges.
pub fn build_universal_gadget(
    ell: usize,
    backend: GadgetBackend,
    first_var: u32,
) -> Result<UniversalGadget, GraphError> {
    let graph = build_gadget_graph(ell, backend)?;
    Ok(universal_gadget_on(graph, first_var))
}

fn universal_gadget_on(graph: GadgetGraph, first_var: u32) -> UniversalGadget {
    let mut alloc = Allocator::above(first_var - 1);
    let u_vars = alloc.fresh_many(graph.inputs.len());
    let v_vars = alloc.fresh_many(graph.outputs.len());
    let w_vars = alloc.fresh_many(graph.internal.len());
    let e_vars = alloc.fresh_many(graph.edges.len());
    let duplication = graph.degree_bound * graph.degree_bound;
    let mut gadget = UniversalGadget {
        graph,
        u_vars,
        v_vars,
        w_vars,
        e_vars,
        clauses: Vec::new(),
        k: 0,
        duplication,
    };
    gadget.k = gadget.v_vars.len() + gadget.w_vars.len() + gadget.e_vars.len();

    let g = &gadget.graph;
    let vertex = gadget.vertex_vars();
    let out = g.out_edges();
    let inc = g.in_edges();
    let e = &gadget.e_vars;
    let pos = Literal::positive;
    let neg = Literal::negative;
    let mut clauses = Vec::new();

    for edges in &out {
        for (i, &a) in edges.iter().enumerate() {
            for &b in &edges[i + 1..] {
                for _ in 0..duplication {
                    clauses.push((Clause::new(vec![neg(e[a]), neg(e[b])]), ClauseKind::Outdegree));
                }
            }
        }
    }
    for &w in &g.internal {
        for &leaving in &out[w] {
            let mut lits = vec![neg(e[leaving])];
            lits.extend(inc[w].iter().map(|&i| pos(e[i])));
            clauses.push((Clause::new(lits), ClauseKind::Flow));
        }
    }
    for &v in &g.outputs {
        let lits = inc[v].iter().map(|&i| pos(e[i])).collect();
        clauses.push((Clause::new(lits), ClauseKind::VDegree));
    }
    for (i, &(a, b)) in g.edges.iter().enumerate() {
        let (a, b) = (vertex[a], vertex[b]);
        clauses.push((Clause::new(vec![neg(e[i]), pos(a), neg(b)]), ClauseKind::EdgeConsistency));
        clauses.push((Clause::new(vec![neg(e[i]), neg(a), pos(b)]), ClauseKind::EdgeConsistency));
    }
    gadget.clauses = clauses;
    gadget
}

/// Tags of a step input: those of the previous step, or `Original` tags.
fn input_tags(f: &PrenexFormula, prior: Option<&[ClauseTag]>) -> Vec<ClauseTag> {
    match prior {
        Some(tags) => tags.to_vec(),
        None => (0..f.num_clauses()).map(ClauseTag::original).collect(),
    }
}

fn retained_origins(blocks: &[QuantifierBlock]) -> BTreeMap<Var, VarOrigin> {
    blocks
        .iter()
        .flat_map(|b| b.vars.iter())
        .map(|&var| (var, VarOrigin::Retained { var }))
        .collect()
}

/// Occurrence positions `(clause, literal)` per variable, in reading order.
fn occurrence_positions(f: &PrenexFormula) -> Vec<Vec<(usize, usize)>> {
    let mut positions = vec![Vec::new(); f.num_vars() as usize + 1];
    for (ci, clause) in f.clauses().iter().enumerate() {
        for (li, lit) in clause.iter().enumerate() {
            positions[lit.var.index()].push((ci, li));
        }
    }
    positions
}

/// Step 1: every universal variable with more than `bypass_threshold`
/// occurrences is replaced by a routing gadget.
pub fn step1_reduce(
    f: &PrenexFormula,
    opts: &PipelineOptions,
) -> Result<(PrenexFormula, ReductionTrace), ReductionError> {
    let (out, step) = step1_core(f, opts, None)?;
    let trace = ReductionTrace::single(step, f, &out);
    Ok((out, trace))
}

fn step1_core(
    f: &PrenexFormula,
    opts: &PipelineOptions,
    prior: Option<&[ClauseTag]>,
) -> Result<(PrenexFormula, StepTrace), ReductionError> {
    let positions = occurrence_positions(f);
    let mut targets: Vec<(Var, usize)> = f
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.kind == Quantifier::Universal)
        .flat_map(|(bi, b)| b.vars.iter().map(move |&v| (v, bi)))
        .filter(|&(v, _)| {
            let ell = positions[v.index()].len();
            ell > 0 && ell > opts.bypass_threshold
        })
        .collect();
    targets.sort();

    let mut graphs: HashMap<usize, (GadgetGraph, Option<RoutingReport>)> = HashMap::new();
    let mut alloc = Allocator::above(f.num_vars());
    let mut clauses: Vec<Clause> = f.clauses().to_vec();
    let mut tags: Vec<ClauseTag> = input_tags(f, prior)
        .into_iter()
        .enumerate()
        .map(|(i, t)| ClauseTag {
            kind: ClauseKind::Major,
            parent: Some(i),
            ..t
        })
        .collect();
    let mut gadget_clauses = Vec::new();
    let mut gadget_tags = Vec::new();
    let mut maps = Vec::new();
    let mut var_origin = retained_origins(f.blocks());

    for &(x, block) in &targets {
        let occ = &positions[x.index()];
        let ell = occ.len();
        let (graph, routing) = match graphs.entry(ell) {
            Entry::Occupied(e) => e.get().clone(),
            Entry::Vacant(e) => e.insert(build_certified_gadget(ell, opts.gadget_backend)?).clone(),
        };
        let gadget = universal_gadget_on(graph, alloc.next);
        alloc.next += (gadget.u_vars.len() + gadget.k) as u32;

        for (j, &(ci, li)) in occ.iter().enumerate() {
            let lit = clauses[ci].literals[li];
            clauses[ci].literals[li] = Literal::with_sign(gadget.v_vars[j], lit.negated);
        }
        for (clause, kind) in &gadget.clauses {
            gadget_clauses.push(clause.clone());
            gadget_tags.push(ClauseTag::gadget(*kind, x));
        }
        var_origin.remove(&x);
        for (index, &v) in gadget.u_vars.iter().enumerate() {
            var_origin.insert(v, VarOrigin::GadgetInput { owner: x, index });
        }
        for (index, &v) in gadget.v_vars.iter().enumerate() {
            var_origin.insert(v, VarOrigin::GadgetOutput { owner: x, index });
        }
        for (&v, &vertex) in gadget.w_vars.iter().zip(&gadget.graph.internal) {
            var_origin.insert(v, VarOrigin::GadgetInternal { owner: x, vertex });
        }
        for (edge, &v) in gadget.e_vars.iter().enumerate() {
            var_origin.insert(v, VarOrigin::GadgetEdge { owner: x, edge });
        }
        let vertex = gadget.vertex_vars();
        maps.push(UniversalGadgetMap {
            owner: x,
            block,
            ell,
            edge_endpoints: gadget
                .graph
                .edges
                .iter()
                .map(|&(a, b)| (vertex[a], vertex[b]))
                .collect(),
            u_vars: gadget.u_vars,
            v_vars: gadget.v_vars,
            w_vars: gadget.w_vars,
            e_vars: gadget.e_vars,
            degree_bound: gadget.graph.degree_bound,
            duplication: gadget.duplication,
            backend: gadget.graph.backend,
            routing,
        });
    }
    clauses.extend(gadget_clauses);
    tags.extend(gadget_tags);

    // Inputs replace the owner in place; gadget existentials join the next block.
    let mut blocks: Vec<QuantifierBlock> = f.blocks().to_vec();
    let mut hosted: BTreeMap<usize, Vec<Var>> = BTreeMap::new();
    for m in &maps {
        let vars = &mut blocks[m.block].vars;
        let at = vars.iter().position(|&v| v == m.owner).expect("owner is bound here");
        vars.splice(at..=at, m.u_vars.iter().copied());
        let existentials = m.v_vars.iter().chain(&m.w_vars).chain(&m.e_vars).copied();
        hosted.entry(m.block + 1).or_default().extend(existentials);
    }
    for (host, vars) in hosted.into_iter().rev() {
        match blocks.get_mut(host) {
            Some(b) if b.kind == Quantifier::Existential => b.vars.extend(vars),
            _ => blocks.insert(host, QuantifierBlock::new(Quantifier::Existential, vars)),
        }
    }
    let out = PrenexFormula::new(alloc.max_var(), blocks, clauses)?;
    let step = StepTrace {
        step: 1,
        clause_tags: tags,
        var_origin,
        universal_gadgets: maps,
        ..StepTrace::default()
    };
    Ok((out, step))
}

/// Consistency gadget over the copies of one existential variable.
#[derive(Clone, Debug)]
pub struct ExistentialGadget {
    pub copies: Vec<Var>,
    pub clauses: Vec<Clause>,
    pub expansion_certificate: Option<f64>,
}

/// Builds the copies and consistency clauses for a variable with `ell`
/// occurrences, numbering copies from `first_var`.
pub fn build_existential_gadget(
    ell: usize,
    style: Step2Style,
    first_var: u32,
) -> Result<ExistentialGadget, ReductionError> {
    let mut alloc = Allocator::above(first_var - 1);
    let pos = Literal::positive;
    let neg = Literal::negative;
    match style {
        Step2Style::Cycle => {
            let copies = alloc.fresh_many(ell);
            let clauses = (0..ell)
                .map(|j| Clause::new(vec![neg(copies[j]), pos(copies[(j + 1) % ell])]))
                .collect();
            Ok(ExistentialGadget {
                copies,
                clauses,
                expansion_certificate: None,
            })
        }
        Step2Style::Expander => {
            let g = build_expander(ell);
            let certificate = g.spectral_gap_certificate;
            if g.vertex_count > 1 && !certificate.is_some_and(|c| c > 1.0) {
                return Err(ReductionError::ExpanderCertificate {
                    vertices: g.vertex_count,
                });
            }
            let copies = alloc.fresh_many(g.vertex_count);
            let mut clauses = Vec::with_capacity(2 * g.edges.len());
            // Self-loops would only yield tautologies.
            for (a, b) in g.non_loop_edges() {
                clauses.push(Clause::new(vec![neg(copies[a]), pos(copies[b])]));
                clauses.push(Clause::new(vec![pos(copies[a]), neg(copies[b])]));
            }
            Ok(ExistentialGadget {
                copies,
                clauses,
                expansion_certificate: certificate,
            })
        }
    }
}

/// Step 2: every existential variable with more than three occurrences is
/// split into copies tied together by consistency clauses.
pub fn step2_reduce(
    f: &PrenexFormula,
    opts: &PipelineOptions,
) -> Result<(PrenexFormula, ReductionTrace), ReductionError> {
    let (out, step) = step2_core(f, opts, None)?;
    let trace = ReductionTrace::single(step, f, &out);
    Ok((out, trace))
}

fn step2_core(
    f: &PrenexFormula,
    opts: &PipelineOptions,
    prior: Option<&[ClauseTag]>,
) -> Result<(PrenexFormula, StepTrace), ReductionError> {
    let positions = occurrence_positions(f);
    let mut targets: Vec<Var> = f
        .blocks()
        .iter()
        .filter(|b| b.kind == Quantifier::Existential)
        .flat_map(|b| b.vars.iter().copied())
        .filter(|v| positions[v.index()].len() > STEP2_THRESHOLD)
        .collect();
    targets.sort();

    let mut alloc = Allocator::above(f.num_vars());
    let mut clauses: Vec<Clause> = f.clauses().to_vec();
    let mut tags: Vec<ClauseTag> = input_tags(f, prior)
        .into_iter()
        .enumerate()
        .map(|(i, t)| ClauseTag {
            parent: Some(i),
            ..t
        })
        .collect();
    let mut var_origin = retained_origins(f.blocks());
    let mut maps = Vec::new();
    let mut replaced: HashMap<Var, Vec<Var>> = HashMap::new();

    for &y in &targets {
        let occ = &positions[y.index()];
        let ell = occ.len();
        let gadget = build_existential_gadget(ell, opts.step2_style, alloc.next)?;
        alloc.next += gadget.copies.len() as u32;
        for (j, &(ci, li)) in occ.iter().enumerate() {
            let lit = clauses[ci].literals[li];
            clauses[ci].literals[li] = Literal::with_sign(gadget.copies[j], lit.negated);
        }
        for clause in gadget.clauses {
            clauses.push(clause);
            tags.push(ClauseTag::gadget(ClauseKind::Consistency, y));
        }
        var_origin.remove(&y);
        for (index, &c) in gadget.copies.iter().enumerate() {
            var_origin.insert(c, VarOrigin::Copy { owner: y, index });
        }
        replaced.insert(y, gadget.copies.clone());
        maps.push(ExistentialGadgetMap {
            owner: y,
            ell,
            copies: gadget.copies,
            style: opts.step2_style,
            expansion_certificate: gadget.expansion_certificate,
        });
    }

    let blocks = f
        .blocks()
        .iter()
        .map(|b| {
            let vars = b
                .vars
                .iter()
                .flat_map(|v| replaced.get(v).cloned().unwrap_or_else(|| vec![*v]))
                .collect();
            QuantifierBlock::new(b.kind, vars)
        })
        .collect();
    let out = PrenexFormula::new(alloc.max_var(), blocks, clauses)?;
    let step = StepTrace {
        step: 2,
        clause_tags: tags,
        var_origin,
        existential_gadgets: maps,
        ..StepTrace::default()
    };
    Ok((out, step))
}

/// Step 3: pads short clauses with fresh universals and splits long clauses
/// into chains over fresh existentials, so every clause has exactly three slots.
pub fn step3_exact3(f: &PrenexFormula) -> Result<(PrenexFormula, ReductionTrace), ReductionError> {
    let (out, step) = step3_core(f, None)?;
    let trace = ReductionTrace::single(step, f, &out);
    Ok((out, trace))
}

fn step3_core(
    f: &PrenexFormula,
    prior: Option<&[ClauseTag]>,
) -> Result<(PrenexFormula, StepTrace), ReductionError> {
    let mut alloc = Allocator::above(f.num_vars());
    let in_tags = input_tags(f, prior);
    let mut clauses = Vec::with_capacity(f.num_clauses());
    let mut tags = Vec::with_capacity(f.num_clauses());
    let mut fresh_universals = Vec::new();
    let mut fresh_existentials = Vec::new();
    let mut var_origin = retained_origins(f.blocks());
    let pos = Literal::positive;
    let neg = Literal::negative;

    for (ci, clause) in f.clauses().iter().enumerate() {
        let base = ClauseTag {
            parent: Some(ci),
            ..in_tags[ci]
        };
        let tagged = |kind| ClauseTag { kind, ..base };
        let lits = &clause.literals;
        match lits.len() {
            3 => {
                clauses.push(clause.clone());
                tags.push(base);
            }
            1 | 2 => {
                let z = alloc.fresh();
                fresh_universals.push(z);
                var_origin.insert(z, VarOrigin::Pad { clause: ci });
                let mut padded = lits.clone();
                padded.resize(3, pos(z));
                clauses.push(Clause::new(padded));
                tags.push(tagged(ClauseKind::Pad));
            }
            r => {
                let links = alloc.fresh_many(r - 3);
                for &z in &links {
                    var_origin.insert(z, VarOrigin::Chain { clause: ci });
                }
                fresh_existentials.extend(links.iter().copied());
                clauses.push(Clause::new(vec![lits[0], lits[1], pos(links[0])]));
                for i in 1..r - 3 {
                    clauses.push(Clause::new(vec![neg(links[i - 1]), lits[i + 1], pos(links[i])]));
                }
                clauses.push(Clause::new(vec![neg(links[r - 4]), lits[r - 2], lits[r - 1]]));
                tags.extend(std::iter::repeat_n(tagged(ClauseKind::Split), r - 2));
            }
        }
    }

    let mut blocks: Vec<QuantifierBlock> = f.blocks().to_vec();
    if !fresh_universals.is_empty() {
        match blocks.iter().rposition(|b| b.kind == Quantifier::Universal) {
            Some(i) => blocks[i].vars.extend(fresh_universals.iter().copied()),
            None => blocks.insert(
                0,
                QuantifierBlock::new(Quantifier::Universal, fresh_universals.clone()),
            ),
        }
    }
    if !fresh_existentials.is_empty() {
        // Links must be chosen after every literal of their clause.
        match blocks.last_mut() {
            Some(b) if b.kind == Quantifier::Existential => {
                b.vars.extend(fresh_existentials.iter().copied())
            }
            _ => blocks.push(QuantifierBlock::new(
                Quantifier::Existential,
                fresh_existentials.clone(),
            )),
        }
    }
    let out = PrenexFormula::new(alloc.max_var(), blocks, clauses)?;
    let step = StepTrace {
        step: 3,
        clause_tags: tags,
        var_origin,
        fresh_universals,
        fresh_existentials,
        ..StepTrace::default()
    };
    Ok((out, step))
}

/// Runs the selected steps in ascending order.
pub fn run_pipeline(
    f: &PrenexFormula,
    opts: &PipelineOptions,
) -> Result<(PrenexFormula, ReductionTrace, PipelineReport), ReductionError> {
    opts.validate()?;
    let mut current = f.clone();
    let mut steps: Vec<StepTrace> = Vec::new();
    for &s in &opts.steps {
        let prior = steps.last().map(|t| t.clause_tags.as_slice());
        let (next, step) = match s {
            1 => step1_core(&current, opts, prior)?,
            2 => step2_core(&current, opts, prior)?,
            _ => step3_core(&current, prior)?,
        };
        current = next;
        steps.push(step);
    }
    let mut trace = ReductionTrace {
        steps,
        constants: ConstantsReport::default(),
    };
    trace.constants = constants_report(&trace, f, &current);
    let report = PipelineReport {
        before: occurrence_profile(f),
        after: occurrence_profile(&current),
        constants: trace.constants.clone(),
        steps: opts.steps.clone(),
    };
    Ok((current, trace, report))
}
