//! Command-line front end.
//!
//! Exit codes: 0 when the answer is yes (separated, identifiable, pair
//! found), 2 when it is no, 1 on any error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::cgid::{cgid_decide_with, ConditionalQuery};
use crate::components::{c_components, HedgeWitness};
use crate::dsl::{parse_graph, parse_node_list, parse_spec, render_spec};
use crate::estimand::Render;
use crate::gid::{GidOptions, InputFailure, Outcome, QSpec, Verdict};
use crate::graph::CausalGraph;
use crate::nodeset::NodeSet;
use crate::sem::{estimand_error, random_model, witness_search_with, ModelFile, WitnessConfig};
use crate::separation::d_separated;

#[derive(Parser, Debug)]
#[command(
    name = "cgid",
    version,
    about = "Causal effect identification from observational and experimental distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for the parallel parts.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Test whether X and Y are d-separated given Z.
    Dsep(SetArgs),
    /// List the c-components of the graph, or of the subgraph induced by X.
    Ccomp(CcompArgs),
    /// Identify P_x(y | z) from the observational distribution alone.
    Id(QueryArgs),
    /// Identify P_x(y) from the distributions listed in --spec.
    Gid(QueryArgs),
    /// Identify P_x(y | z) from the distributions listed in --spec.
    Cgid(QueryArgs),
    /// Identify a query and check the estimand against a model.
    Eval(EvalArgs),
    /// Search for two models that agree on the inputs but not on the query.
    Witness(WitnessArgs),
}

#[derive(Args, Debug)]
struct SetArgs {
    /// Graph file in the text format.
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    #[arg(long, default_value = "", value_name = "LIST")]
    x: String,
    #[arg(long, default_value = "", value_name = "LIST")]
    y: String,
    #[arg(long, default_value = "", value_name = "LIST")]
    z: String,
}

#[derive(Args, Debug)]
struct CcompArgs {
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,
    /// Restrict to these nodes; defaults to all.
    #[arg(long, value_name = "LIST")]
    x: Option<String>,
    /// Print the graph in DOT format with one cluster per c-component.
    #[arg(long)]
    emit_dot: bool,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[command(flatten)]
    sets: SetArgs,
    /// Available distributions, e.g. "A0=V; A1=Y,Z". V means all nodes.
    #[arg(long, value_name = "SPEC")]
    spec: Option<String>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Graph file; optional when --model is given.
    #[arg(long, value_name = "FILE")]
    graph: Option<PathBuf>,
    #[arg(long, default_value = "", value_name = "LIST")]
    x: String,
    #[arg(long, default_value = "", value_name = "LIST")]
    y: String,
    #[arg(long, default_value = "", value_name = "LIST")]
    z: String,
    #[arg(long, value_name = "SPEC")]
    spec: Option<String>,
    /// Model file (JSON). Without it a random model is drawn from --seed.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest domain size of a random model.
    #[arg(long, default_value_t = 2)]
    max_card: usize,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct WitnessArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total number of search steps.
    #[arg(long, default_value_t = 400)]
    budget: u64,
}

#[derive(Debug)]
struct CliError(String);

impl<E: std::error::Error> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.to_string())
    }
}

struct Output {
    code: i32,
    text: String,
    diagnostic: Option<String>,
}

impl Output {
    fn new(code: i32, text: String) -> Output {
        Output {
            code,
            text,
            diagnostic: None,
        }
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError(msg.into()))
}

/// Runs the command line `argv` (including the program name) and returns
/// the exit code. Results go to `out`, diagnostics to `err`.
pub fn run_cli<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{text}");
                0
            } else {
                let _ = write!(err, "{text}");
                1
            };
        }
    };
    let result = match cli.threads {
        Some(0) => fail("--threads must be at least 1"),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(e.into()),
        },
        None => execute(&cli),
    };
    match result {
        Ok(output) => {
            let _ = out.write_all(output.text.as_bytes());
            if let Some(msg) = output.diagnostic {
                let _ = writeln!(err, "error: {msg}");
            }
            output.code
        }
        Err(CliError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn load_graph(path: &Path) -> Result<CausalGraph, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    let doc = parse_graph(&text).map_err(|e| {
        CliError(format!(
            "{}:{}:{}: {}",
            path.display(),
            e.span.line,
            e.span.col,
            e.message
        ))
    })?;
    Ok(doc.graph())
}

fn nodes(text: &str, g: &CausalGraph, flag: &str) -> Result<NodeSet, CliError> {
    parse_node_list(text, g).map_err(|e| CliError(format!("--{flag}: {}", e.message)))
}

fn spec_arg(text: Option<&str>, g: &CausalGraph) -> Result<QSpec, CliError> {
    match text {
        None => Ok(QSpec::observational(g)),
        Some(t) => parse_spec(t, g)
            .map_err(|e| CliError(format!("--spec: column {}: {}", e.span.col, e.message))),
    }
}

fn names(g: &CausalGraph, s: &NodeSet) -> Vec<String> {
    g.names_of(s).into_iter().map(String::from).collect()
}

fn braces(g: &CausalGraph, s: &NodeSet) -> String {
    format!("{{{}}}", g.names_of(s).join(","))
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn options(cli: &Cli) -> GidOptions {
    GidOptions {
        parallel: cli.threads.is_some_and(|n| n > 1),
        ..GidOptions::default()
    }
}

fn execute(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Dsep(a) => dsep(cli, a),
        Command::Ccomp(a) => ccomp(cli, a),
        Command::Id(a) => {
            if a.spec.is_some() {
                return fail(
                    "id always uses the observational distribution; use gid or cgid with --spec",
                );
            }
            query(cli, "id", a)
        }
        Command::Gid(a) => {
            if !a.sets.z.trim().is_empty() {
                return fail("gid takes no --z; use cgid for conditional queries");
            }
            query(cli, "gid", a)
        }
        Command::Cgid(a) => query(cli, "cgid", a),
        Command::Eval(a) => eval(cli, a),
        Command::Witness(a) => witness(cli, a),
    }
}

fn dsep(cli: &Cli, a: &SetArgs) -> Result<Output, CliError> {
    let g = load_graph(&a.graph)?;
    let (x, y, z) = (
        nodes(&a.x, &g, "x")?,
        nodes(&a.y, &g, "y")?,
        nodes(&a.z, &g, "z")?,
    );
    let sep = d_separated(&g, &x, &y, &z)?;
    let code = if sep { 0 } else { 2 };
    let text = if cli.json {
        json_text(&json!({
            "command": "dsep",
            "x": names(&g, &x),
            "y": names(&g, &y),
            "z": names(&g, &z),
            "separated": sep,
            "verdict": if sep { "separated" } else { "connected" },
        }))
    } else if sep {
        "separated\n".to_string()
    } else {
        "not separated\n".to_string()
    };
    Ok(Output::new(code, text))
}

fn ccomp(cli: &Cli, a: &CcompArgs) -> Result<Output, CliError> {
    let g = load_graph(&a.graph)?;
    let within = match &a.x {
        Some(t) => nodes(t, &g, "x")?,
        None => g.nodes().clone(),
    };
    let comps = c_components(&g.induced(&within)?, &within)?;
    if a.emit_dot {
        return Ok(Output::new(0, dot(&g, &within, &comps)));
    }
    let text = if cli.json {
        json_text(&json!({
            "command": "ccomp",
            "components": comps.iter().map(|c| names(&g, c)).collect::<Vec<_>>(),
        }))
    } else {
        comps.iter().map(|c| braces(&g, c) + "\n").collect()
    };
    Ok(Output::new(0, text))
}

fn dot(g: &CausalGraph, within: &NodeSet, comps: &[NodeSet]) -> String {
    let mut s = String::from("digraph G {\n");
    for (i, c) in comps.iter().enumerate() {
        let _ = writeln!(s, "  subgraph cluster_{i} {{");
        for v in c.iter() {
            let _ = writeln!(s, "    \"{}\";", g.name(v));
        }
        s.push_str("  }\n");
    }
    for (a, b) in g.directed_edges() {
        if within.contains(a) && within.contains(b) {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", g.name(a), g.name(b));
        }
    }
    for (a, b) in g.bidirected_edges() {
        if within.contains(a) && within.contains(b) {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [dir=both, style=dashed, constraint=false];",
                g.name(a),
                g.name(b)
            );
        }
    }
    s.push_str("}\n");
    s
}

struct Query {
    g: CausalGraph,
    spec: QSpec,
    q: ConditionalQuery,
}

fn build_query(
    g: CausalGraph,
    x: &str,
    y: &str,
    z: &str,
    spec: Option<&str>,
) -> Result<Query, CliError> {
    let spec = spec_arg(spec, &g)?;
    let (x, y, z) = (nodes(x, &g, "x")?, nodes(y, &g, "y")?, nodes(z, &g, "z")?);
    let q = ConditionalQuery::new(&g, x, y, z)?;
    Ok(Query { g, spec, q })
}

fn hedge_json(g: &CausalGraph, w: &HedgeWitness) -> Value {
    let edges = |es: &[(usize, usize)]| -> Vec<[String; 2]> {
        es.iter()
            .map(|&(a, b)| [g.name(a).to_string(), g.name(b).to_string()])
            .collect()
    };
    json!({
        "roots": names(g, &w.roots),
        "nodes": names(g, &w.nodes),
        "bidirected": edges(&w.bidirected_tree),
        "directed": edges(&w.directed),
    })
}

fn verdict_json(command: &str, qd: &Query, v: &Verdict) -> Value {
    let g = &qd.g;
    let labels = qd.spec.labels();
    let render = |compact| Render {
        names: g.names(),
        labels: &labels,
        compact,
    };
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("x".into(), json!(names(g, &qd.q.x)));
    m.insert("y".into(), json!(names(g, &qd.q.y)));
    m.insert("z".into(), json!(names(g, &qd.q.z)));
    m.insert("spec".into(), json!(render_spec(&qd.spec, g)));
    m.insert(
        "moved_to_intervention".into(),
        json!(names(g, &v.moved_to_intervention)),
    );
    match &v.outcome {
        Outcome::Identifiable { estimand, chosen } => {
            m.insert("verdict".into(), json!("identifiable"));
            m.insert(
                "chosen_inputs".into(),
                json!(chosen
                    .iter()
                    .map(|c| json!({"component": names(g, &c.component), "input": labels[c.input]}))
                    .collect::<Vec<_>>()),
            );
            m.insert("estimand".into(), render(false).json(estimand));
            m.insert("estimand_text".into(), json!(render(true).text(estimand)));
            m.insert("witnesses".into(), json!([]));
        }
        Outcome::NotIdentifiable(f) => {
            m.insert("verdict".into(), json!("not_identifiable"));
            m.insert("chosen_inputs".into(), json!([]));
            m.insert("estimand".into(), Value::Null);
            m.insert("failed_component".into(), json!(names(g, &f.component)));
            let witnesses: Vec<Value> = f
                .reasons
                .iter()
                .enumerate()
                .map(|(i, r)| match r {
                    InputFailure::NotSuperset => {
                        json!({"input": labels[i], "reason": "not_superset"})
                    }
                    InputFailure::Hedge {
                        blocking,
                        hedge,
                        hedge_error,
                    } => json!({
                        "input": labels[i],
                        "reason": "hedge",
                        "blocking": names(g, blocking),
                        "hedge": hedge.as_ref().map(|w| hedge_json(g, w)),
                        "hedge_error": hedge_error,
                    }),
                })
                .collect();
            m.insert("witnesses".into(), json!(witnesses));
        }
    }
    Value::Object(m)
}

fn verdict_text(qd: &Query, v: &Verdict) -> String {
    let g = &qd.g;
    let labels = qd.spec.labels();
    let mut s = String::new();
    match &v.outcome {
        Outcome::Identifiable { estimand, chosen } => {
            s.push_str("identifiable\n");
            if !v.moved_to_intervention.is_empty() {
                let _ = writeln!(
                    s,
                    "moved to intervention: {}",
                    braces(g, &v.moved_to_intervention)
                );
            }
            let parts: Vec<String> = chosen
                .iter()
                .map(|c| format!("{} from {}", braces(g, &c.component), labels[c.input]))
                .collect();
            let _ = writeln!(s, "inputs: {}", parts.join("; "));
            let render = Render {
                names: g.names(),
                labels: &labels,
                compact: true,
            };
            let _ = writeln!(s, "estimand: {}", render.text(estimand));
        }
        Outcome::NotIdentifiable(f) => {
            s.push_str("not identifiable\n");
            if !v.moved_to_intervention.is_empty() {
                let _ = writeln!(
                    s,
                    "moved to intervention: {}",
                    braces(g, &v.moved_to_intervention)
                );
            }
            let _ = writeln!(
                s,
                "no input yields Q[{}]",
                g.names_of(&f.component).join(",")
            );
            for (i, r) in f.reasons.iter().enumerate() {
                let _ = match r {
                    InputFailure::NotSuperset => {
                        writeln!(s, "  {}: does not contain the component", labels[i])
                    }
                    InputFailure::Hedge { hedge: Some(w), .. } => writeln!(
                        s,
                        "  {}: hedge on {} rooted at {}",
                        labels[i],
                        braces(g, &w.nodes),
                        braces(g, &w.roots)
                    ),
                    InputFailure::Hedge {
                        blocking,
                        hedge_error,
                        ..
                    } => writeln!(
                        s,
                        "  {}: blocked by {} ({})",
                        labels[i],
                        braces(g, blocking),
                        hedge_error.as_deref().unwrap_or("no hedge search")
                    ),
                };
            }
        }
    }
    s
}

fn query(cli: &Cli, command: &str, a: &QueryArgs) -> Result<Output, CliError> {
    let g = load_graph(&a.sets.graph)?;
    let qd = build_query(g, &a.sets.x, &a.sets.y, &a.sets.z, a.spec.as_deref())?;
    let v = cgid_decide_with(&qd.g, &qd.q, &qd.spec, &options(cli))?;
    let code = if v.is_identifiable() { 0 } else { 2 };
    let text = if cli.json {
        json_text(&verdict_json(command, &qd, &v))
    } else {
        verdict_text(&qd, &v)
    };
    Ok(Output::new(code, text))
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<Output, CliError> {
    let (model, source) = match (&a.model, &a.graph) {
        (Some(path), graph) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError(format!("{}: {e}", path.display())))?;
            let m = ModelFile::parse(&text)?.to_model()?;
            if let Some(gp) = graph {
                if load_graph(gp)? != *m.graph() {
                    return fail("the model does not match the graph file");
                }
            }
            (m, json!({"file": path.display().to_string()}))
        }
        (None, Some(gp)) => {
            let g = load_graph(gp)?;
            (
                random_model(&g, a.seed, a.max_card)?,
                json!({"seed": a.seed, "max_card": a.max_card}),
            )
        }
        (None, None) => return fail("eval needs --graph or --model"),
    };
    let qd = build_query(model.graph().clone(), &a.x, &a.y, &a.z, a.spec.as_deref())?;
    let v = cgid_decide_with(&qd.g, &qd.q, &qd.spec, &options(cli))?;
    let error = match v.estimand() {
        Some(e) => Some(estimand_error(&model, &qd.spec, &qd.q, e)?),
        None => None,
    };
    let within = error.map(|e| e <= a.tolerance);
    let code = match within {
        None => 2,
        Some(true) => 0,
        Some(false) => 1,
    };
    let text = if cli.json {
        let mut j = verdict_json("eval", &qd, &v);
        j["model"] = source;
        j["max_abs_error"] = json!(error);
        j["tolerance"] = json!(a.tolerance);
        j["within_tolerance"] = json!(within);
        json_text(&j)
    } else {
        let mut s = verdict_text(&qd, &v);
        if let Some(e) = error {
            let _ = writeln!(
                s,
                "largest difference from ground truth: {e:.3e} (tolerance {:.1e})",
                a.tolerance
            );
        }
        s
    };
    let mut output = Output::new(code, text);
    if within == Some(false) {
        output.diagnostic = Some("estimand disagrees with the model".into());
    }
    Ok(output)
}

fn witness(cli: &Cli, a: &WitnessArgs) -> Result<Output, CliError> {
    let g = load_graph(&a.query.sets.graph)?;
    let qd = build_query(
        g,
        &a.query.sets.x,
        &a.query.sets.y,
        &a.query.sets.z,
        a.query.spec.as_deref(),
    )?;
    let cfg = WitnessConfig {
        budget: a.budget,
        seed: a.seed,
        parallel: cli.threads.is_some_and(|n| n > 1),
        ..WitnessConfig::default()
    };
    let found = witness_search_with(&qd.g, &qd.spec, &qd.q, &cfg)?;
    let g = &qd.g;
    let code = if found.is_some() { 0 } else { 2 };
    let text = match (&found, cli.json) {
        (Some(p), true) => json_text(&json!({
            "command": "witness",
            "verdict": "found",
            "spec": render_spec(&qd.spec, g),
            "mismatch": p.check.mismatch,
            "gap": p.check.gap,
            "cell": p.check.cell.iter().map(|&(v, a)| (g.name(v).to_string(), json!(a))).collect::<Map<_, _>>(),
            "restart": p.restart,
            "m1": serde_json::to_value(ModelFile::from_model(&p.m1))?,
            "m2": serde_json::to_value(ModelFile::from_model(&p.m2))?,
        })),
        (None, true) => json_text(
            &json!({"command": "witness", "verdict": "not_found", "budget": a.budget, "seed": a.seed}),
        ),
        (Some(p), false) => {
            let cell: Vec<String> = p
                .check
                .cell
                .iter()
                .map(|&(v, a)| format!("{}={a}", g.name(v)))
                .collect();
            format!(
                "found a pair of models\ninput mismatch: {:.3e}\ntarget gap: {:.4} at {}\n",
                p.check.mismatch,
                p.check.gap,
                cell.join(", ")
            )
        }
        (None, false) => "no pair found within the budget\n".to_string(),
    };
    Ok(Output::new(code, text))
}
