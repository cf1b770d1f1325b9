use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qbfocc::formula::{occurrence_profile, parse_qdimacs, serialize_qdimacs, OccurrenceProfile, PrenexFormula, Quantifier};
use qbfocc::graphs::{
    build_certified_gadget, build_expander, export_dot, verify_edge_expansion, verify_routing,
    ExpansionMode, GadgetBackend, GraphError, RoutingMode, RoutingReport,
};
use qbfocc::oracle::{evaluate, value_at_most, verify_value_preservation, Limits, Method, OracleError, DEFAULT_BUDGET};
use qbfocc::reduction::{run_pipeline, ConstantsReport, PipelineOptions, ReductionError, Step2Style};

/// `println!` that ignores write errors such as a closed pipe.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

const EXIT_VIOLATED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CERTIFICATION: u8 = 3;
const EXIT_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "qbfocc", version, about = "Bounded-occurrence reductions for quantified CNF")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite a QDIMACS formula into bounded-occurrence, exactly-3 form.
    Reduce {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Comma-separated steps to run, ascending.
        #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
        steps: Vec<u8>,
        #[arg(long, default_value = "expander")]
        style: Step2Style,
        #[arg(long, default_value = "benes")]
        backend: GadgetBackend,
        /// Universals with at most this many occurrences keep their original form.
        #[arg(long, default_value_t = 2)]
        bypass: usize,
        /// Trace destination; defaults to OUTPUT with `.trace.json` appended.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Also check value preservation with the game oracle.
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long)]
        json: bool,
    },
    /// Compare the game values of an original and a reduced formula.
    Verify {
        original: PathBuf,
        reduced: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, value_enum, default_value = "exact")]
        mode: VerifyMode,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
        #[arg(long)]
        json: bool,
    },
    /// Build and check an expander or a routing gadget.
    Graph {
        #[arg(value_enum)]
        kind: GraphKind,
        size: usize,
        #[arg(long, default_value = "benes")]
        backend: GadgetBackend,
        /// exhaustive | sampled:K:SEED | spectral | none
        #[arg(long)]
        verify: Option<VerifyArg>,
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Graph JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print the occurrence profile and prefix of a formula.
    Stats {
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum VerifyMode {
    /// Values are equal.
    Exact,
    /// Value zero is preserved in both directions.
    Zero,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Search,
    Expansion,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Search => Method::Search,
            MethodArg::Expansion => Method::Expansion,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GraphKind {
    Expander,
    Gadget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VerifyArg {
    Exhaustive,
    Sampled { samples: usize, seed: u64 },
    Spectral,
    None,
}

impl FromStr for VerifyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["exhaustive"] => Ok(VerifyArg::Exhaustive),
            ["spectral"] => Ok(VerifyArg::Spectral),
            ["none"] => Ok(VerifyArg::None),
            ["sampled", k, seed] => Ok(VerifyArg::Sampled {
                samples: k.parse().map_err(|e| format!("bad sample count `{k}`: {e}"))?,
                seed: seed.parse().map_err(|e| format!("bad seed `{seed}`: {e}"))?,
            }),
            _ => Err(format!(
                "unknown verification `{s}` (expected exhaustive|sampled:K:SEED|spectral|none)"
            )),
        }
    }
}

/// A report field that is either computed or deliberately not computed.
#[derive(Serialize)]
#[serde(untagged)]
enum Field<T> {
    Value(T),
    Skipped(&'static str),
}

impl<T> From<Option<T>> for Field<T> {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Skipped("skipped"), Field::Value)
    }
}

impl<T: fmt::Display> fmt::Display for Field<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Value(v) => v.fmt(f),
            Field::Skipped(s) => f.write_str(s),
        }
    }
}

#[derive(Serialize)]
struct OracleVerdict {
    method: &'static str,
    budget: u64,
    original_value: Field<usize>,
    preserved: Field<bool>,
    error: Field<String>,
}

#[derive(Serialize)]
struct RunReport {
    input: PathBuf,
    output: PathBuf,
    trace: PathBuf,
    steps: Vec<u8>,
    style: String,
    backend: String,
    bypass: usize,
    before: OccurrenceProfile,
    after: OccurrenceProfile,
    constants: ConstantsReport,
    oracle: Field<OracleVerdict>,
    elapsed_ms: u128,
    seed: Field<u64>,
}

#[derive(Serialize)]
struct VerifyReport {
    mode: VerifyMode,
    budget: u64,
    original_value: Field<usize>,
    reduced_value_matches: Field<bool>,
    holds: bool,
}

#[derive(Serialize)]
struct GraphReport {
    kind: GraphKind,
    size: usize,
    vertices: usize,
    edges: usize,
    degree: usize,
    backend: Field<String>,
    verification: &'static str,
    routing: Field<RoutingReport>,
    expansion_certificate: Field<f64>,
    lambda2: Field<f64>,
    passed: Field<bool>,
}

#[derive(Serialize)]
struct BlockSummary {
    kind: char,
    size: usize,
}

#[derive(Serialize)]
struct StatsReport {
    num_vars: u32,
    blocks: Vec<BlockSummary>,
    b_universal: usize,
    b_existential: usize,
    profile: OccurrenceProfile,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::BudgetExceeded { .. } | OracleError::Unsupported(_) => EXIT_BUDGET,
            _ => EXIT_VIOLATED,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ReductionError> for Failure {
    fn from(e: ReductionError) -> Self {
        let code = match &e {
            ReductionError::StepOrder(_) | ReductionError::Formula(_) => EXIT_USAGE,
            ReductionError::Graph(GraphError::InvalidSize(_)) => EXIT_USAGE,
            ReductionError::Graph(_) | ReductionError::ExpanderCertificate { .. } => EXIT_CERTIFICATION,
        };
        Failure::new(code, e.to_string())
    }
}

fn read_formula(path: &Path) -> Result<PrenexFormula, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    parse_qdimacs(&text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("report serializes")
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Auto => "auto",
        Method::Search => "search",
        Method::Expansion => "expansion",
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_reduce(
    input: PathBuf,
    output: PathBuf,
    steps: Vec<u8>,
    style: Step2Style,
    backend: GadgetBackend,
    bypass: usize,
    trace: Option<PathBuf>,
    check: bool,
    budget: u64,
    json: bool,
) -> Result<u8, Failure> {
    let start = Instant::now();
    let f = read_formula(&input)?;
    let opts = PipelineOptions {
        steps: steps.clone(),
        step2_style: style,
        gadget_backend: backend,
        bypass_threshold: bypass,
    };
    let (reduced, trace_data, report) = run_pipeline(&f, &opts)?;
    let trace_path = trace.unwrap_or_else(|| {
        let mut p = output.clone().into_os_string();
        p.push(".trace.json");
        PathBuf::from(p)
    });
    write_file(&output, &serialize_qdimacs(&reduced))?;
    write_file(&trace_path, &to_json(&trace_data))?;

    let mut code = 0;
    let oracle = if check {
        let limits = Limits::with_budget(budget);
        let verdict = match verify_value_preservation(&f, &reduced, &limits) {
            Ok(holds) => {
                if !holds {
                    code = EXIT_VIOLATED;
                }
                OracleVerdict {
                    method: method_name(limits.method),
                    budget,
                    original_value: evaluate(&f, &limits).ok().map(|v| v.value).into(),
                    preserved: Field::Value(holds),
                    error: Field::Skipped("skipped"),
                }
            }
            Err(e) => {
                let failure = Failure::from(e.clone());
                code = failure.code;
                OracleVerdict {
                    method: method_name(limits.method),
                    budget,
                    original_value: Field::Skipped("skipped"),
                    preserved: Field::Skipped("skipped"),
                    error: Field::Value(e.to_string()),
                }
            }
        };
        Some(verdict)
    } else {
        None
    };

    let run = RunReport {
        input,
        output,
        trace: trace_path,
        steps,
        style: style.to_string(),
        backend: backend.to_string(),
        bypass,
        before: report.before,
        after: report.after,
        constants: report.constants,
        oracle: oracle.into(),
        elapsed_ms: start.elapsed().as_millis(),
        seed: Field::Skipped("skipped"),
    };
    if json {
        out!("{}", to_json(&run));
    } else {
        print_run(&run);
    }
    Ok(code)
}

fn print_run(r: &RunReport) {
    let steps: Vec<String> = r.steps.iter().map(u8::to_string).collect();
    out!("input: {}", r.input.display());
    out!("output: {}", r.output.display());
    out!("trace: {}", r.trace.display());
    out!(
        "steps: {}  style: {}  backend: {}  bypass: {}",
        steps.join(","),
        r.style,
        r.backend,
        r.bypass
    );
    for (label, p) in [("before", &r.before), ("after", &r.after)] {
        out!(
            "{label}: clauses={} literals={} B_universal={} B_existential={} width={}..{}",
            p.clause_count, p.total_literals, p.max_universal, p.max_existential, p.min_clause_size, p.max_clause_size
        );
    }
    let c = &r.constants;
    out!(
        "constants: width={} B_universal={} B_existential={} size_ratio={:.3} d={} R={}",
        c.clause_width, c.b_universal, c.b_existential, c.size_ratio, c.gadget_degree, c.duplication
    );
    match &r.oracle {
        Field::Value(o) => out!(
            "oracle: method={} budget={} original_value={} preserved={} error={}",
            o.method, o.budget, o.original_value, o.preserved, o.error
        ),
        Field::Skipped(s) => out!("oracle: {s}"),
    }
    out!("elapsed_ms: {}", r.elapsed_ms);
    out!("seed: {}", r.seed);
}

fn cmd_verify(
    original: PathBuf,
    reduced: PathBuf,
    budget: u64,
    mode: VerifyMode,
    method: MethodArg,
    json: bool,
) -> Result<u8, Failure> {
    let f = read_formula(&original)?;
    let g = read_formula(&reduced)?;
    let limits = Limits {
        method: method.into(),
        ..Limits::with_budget(budget)
    };
    let report = match mode {
        VerifyMode::Exact => {
            let v = evaluate(&f, &limits)?.value;
            let holds = verify_value_preservation(&f, &g, &limits)?;
            VerifyReport {
                mode,
                budget,
                original_value: Field::Value(v),
                reduced_value_matches: Field::Value(holds),
                holds,
            }
        }
        VerifyMode::Zero => {
            let a = value_at_most(&f, 0, &limits)?;
            let b = value_at_most(&g, 0, &limits)?;
            VerifyReport {
                mode,
                budget,
                original_value: Field::Skipped("skipped"),
                reduced_value_matches: Field::Skipped("skipped"),
                holds: a == b,
            }
        }
    };
    if json {
        out!("{}", to_json(&report));
    } else {
        out!(
            "original_value: {}  reduced_value_matches: {}  holds: {}",
            report.original_value, report.reduced_value_matches, report.holds
        );
    }
    Ok(if report.holds { 0 } else { EXIT_VIOLATED })
}

fn cmd_graph(
    kind: GraphKind,
    size: usize,
    backend: GadgetBackend,
    verify: Option<VerifyArg>,
    dot: Option<PathBuf>,
    out: Option<PathBuf>,
    json: bool,
) -> Result<u8, Failure> {
    if size == 0 {
        return Err(Failure::new(EXIT_USAGE, "size must be at least 1"));
    }
    let report = match kind {
        GraphKind::Gadget => {
            let (g, built) = build_certified_gadget(size, backend).map_err(|e| match e {
                GraphError::InvalidSize(m) => Failure::new(EXIT_USAGE, m),
                other => Failure::new(EXIT_CERTIFICATION, other.to_string()),
            })?;
            let mode = match verify {
                Some(VerifyArg::Exhaustive) => Some(RoutingMode::Exhaustive),
                Some(VerifyArg::Sampled { samples, seed }) => Some(RoutingMode::Sampled { samples, seed }),
                Some(VerifyArg::None) => None,
                Some(VerifyArg::Spectral) => {
                    return Err(Failure::new(EXIT_USAGE, "spectral verification applies to expanders"))
                }
                None => (size <= 10).then_some(RoutingMode::Exhaustive),
            };
            let routing = match (mode, built) {
                (Some(m), Some(r)) if r.mode == m => Some(r),
                (Some(m), _) => Some(verify_routing(&g, m)),
                (None, _) => None,
            };
            if let Some(p) = &out {
                write_file(p, &to_json(&g))?;
            }
            if let Some(p) = &dot {
                write_file(p, &export_dot(&g))?;
            }
            GraphReport {
                kind,
                size,
                vertices: g.vertex_count(),
                edges: g.edges.len(),
                degree: g.degree_bound,
                backend: Field::Value(backend.to_string()),
                verification: match mode {
                    Some(RoutingMode::Exhaustive) => "exhaustive",
                    Some(RoutingMode::Sampled { .. }) => "sampled",
                    None => "skipped",
                },
                passed: routing.as_ref().map(RoutingReport::passed).into(),
                routing: routing.into(),
                expansion_certificate: Field::Skipped("skipped"),
                lambda2: Field::Skipped("skipped"),
            }
        }
        GraphKind::Expander => {
            let g = build_expander(size);
            let mode = match verify.unwrap_or(VerifyArg::Spectral) {
                VerifyArg::Exhaustive => Some(ExpansionMode::Exhaustive),
                VerifyArg::Spectral => Some(ExpansionMode::Spectral),
                VerifyArg::None => None,
                VerifyArg::Sampled { .. } => {
                    return Err(Failure::new(EXIT_USAGE, "sampled verification applies to gadgets"))
                }
            };
            let verdict = match mode {
                Some(m) => Some(verify_edge_expansion(&g, m).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?),
                None => None,
            };
            if let Some(p) = &out {
                write_file(p, &to_json(&g))?;
            }
            if let Some(p) = &dot {
                write_file(p, &export_dot(&g))?;
            }
            GraphReport {
                kind,
                size,
                vertices: g.vertex_count,
                edges: g.edges.len(),
                degree: g.degree,
                backend: Field::Skipped("skipped"),
                verification: match mode {
                    Some(ExpansionMode::Exhaustive) => "exhaustive",
                    Some(ExpansionMode::Spectral) => "spectral",
                    None => "skipped",
                },
                routing: Field::Skipped("skipped"),
                expansion_certificate: verdict.as_ref().and_then(|v| v.certificate).into(),
                lambda2: verdict.as_ref().and_then(|v| v.lambda2).into(),
                passed: verdict.as_ref().map(|v| v.holds).into(),
            }
        }
    };
    if json {
        out!("{}", to_json(&report));
    } else {
        out!(
            "{} size={} vertices={} edges={} degree={} backend={}",
            match kind {
                GraphKind::Expander => "expander",
                GraphKind::Gadget => "gadget",
            },
            report.size,
            report.vertices,
            report.edges,
            report.degree,
            report.backend
        );
        if let Field::Value(r) = &report.routing {
            out!(
                "routing: subsets_checked={} min_flow={} of {}",
                r.subsets_checked, r.min_flow_found, r.ell
            );
        }
        if let Field::Value(c) = &report.expansion_certificate {
            out!("certificate: {c:.4} lambda2: {}", report.lambda2);
        }
        let verdict = match report.passed {
            Field::Value(true) => "pass",
            Field::Value(false) => "FAIL",
            Field::Skipped(s) => s,
        };
        out!("verification: {} {verdict}", report.verification);
    }
    Ok(match report.passed {
        Field::Value(false) => EXIT_CERTIFICATION,
        _ => 0,
    })
}

fn cmd_stats(input: PathBuf, json: bool) -> Result<u8, Failure> {
    let f = read_formula(&input)?;
    let profile = occurrence_profile(&f);
    let report = StatsReport {
        num_vars: f.num_vars(),
        blocks: f
            .blocks()
            .iter()
            .map(|b| BlockSummary {
                kind: match b.kind {
                    Quantifier::Universal => 'a',
                    Quantifier::Existential => 'e',
                },
                size: b.vars.len(),
            })
            .collect(),
        b_universal: profile.max_universal,
        b_existential: profile.max_existential,
        profile,
    };
    if json {
        out!("{}", to_json(&report));
        return Ok(0);
    }
    let prefix: Vec<String> = report.blocks.iter().map(|b| format!("{}{}", b.kind, b.size)).collect();
    let p = &report.profile;
    out!("vars: {}  bound: {}", report.num_vars, p.per_variable.len());
    out!("prefix: {}", prefix.join(" "));
    out!("clauses: {}  literals: {}", p.clause_count, p.total_literals);
    out!("clause width: {}..{}", p.min_clause_size, p.max_clause_size);
    out!("B_universal={}", report.b_universal);
    out!("B_existential={}", report.b_existential);
    for (v, c) in &p.per_variable {
        out!("  {v}: {c}");
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Reduce {
            input,
            output,
            steps,
            style,
            backend,
            bypass,
            trace,
            check,
            budget,
            json,
        } => cmd_reduce(input, output, steps, style, backend, bypass, trace, check, budget, json),
        Command::Verify {
            original,
            reduced,
            budget,
            mode,
            method,
            json,
        } => cmd_verify(original, reduced, budget, mode, method, json),
        Command::Graph {
            kind,
            size,
            backend,
            verify,
            dot,
            out,
            json,
        } => cmd_graph(kind, size, backend, verify, dot, out, json),
        Command::Stats { input, json } => cmd_stats(input, json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qbfocc: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_flag_parses() {
        assert_eq!("exhaustive".parse(), Ok(VerifyArg::Exhaustive));
        assert_eq!(
            "sampled:1000:7".parse(),
            Ok(VerifyArg::Sampled { samples: 1000, seed: 7 })
        );
        assert!("sampled:10".parse::<VerifyArg>().is_err());
        assert!("sampled:x:1".parse::<VerifyArg>().is_err());
    }

    #[test]
    fn skipped_fields_serialize_as_marker() {
        let f: Field<u64> = None.into();
        assert_eq!(to_json(&f), "\"skipped\"");
        let g: Field<u64> = Some(3).into();
        assert_eq!(to_json(&g), "3");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
