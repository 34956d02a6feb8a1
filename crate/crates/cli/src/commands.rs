use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use esdtrace_core::diffstats::{
    combined_histogram, correlate_metadata, diff_states, value_distribution, MetadataField,
    Partition,
};
use esdtrace_core::logmodel::{ParseMode, RegisterSchema};
use esdtrace_core::stategraph::{
    build_graph, export_dot, traces_from_logs, unify, AbstractionConfig, AddressMode,
    ExecutionTrace, Highlight,
};
use esdtrace_core::synthcorpus::{generate_corpus, make_machine, PerturbationModel};
use esdtrace_core::weights::{
    build_counts, build_weights, classify, sweep_delta, Protocol, Variant, WeightError,
    WeightTable,
};
use serde_json::json;

use crate::io::{csv_bytes, load_logs, load_schema, load_traces, read_to_string, Outputs};
use crate::usage;

#[derive(Parser, Debug)]
#[command(name = "esdtrace", version, about = "Execution-trace analysis of driver register logs")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse logs and their .meta sidecars into trace files.
    Ingest(IngestArgs),
    /// Per-run execution graphs as DOT and JSON.
    Graph(TraceArgs),
    /// One graph over every run.
    Unify(TraceArgs),
    /// States and transitions reached only under ESD.
    Diff(TraceArgs),
    /// Statistics tables.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Build a weight table from the whole corpus.
    Train(TrainArgs),
    /// Score traces against a weight table.
    Classify(ClassifyArgs),
    /// Evaluate the classifier across a range of delta values.
    Sweep(SweepArgs),
    /// Generate a synthetic corpus.
    Gen(GenArgs),
}

#[derive(Subcommand, Debug)]
enum StatsCommand {
    /// Per-register value probabilities in each group.
    Dist(DistArgs),
    /// Mean state occurrence counts per group.
    Occurrences(OccurrenceArgs),
    /// Non-baseline transition share of each ESD run against its metadata.
    Transitions(TransitionArgs),
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct LogInput {
    /// Directory of *.log files with matching *.meta sidecars.
    input: PathBuf,
    /// Register schema JSON; defaults to the OHCI register set.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Reject any malformed or truncated block instead of recovering.
    #[arg(long)]
    strict: bool,
}

impl LogInput {
    fn mode(&self) -> ParseMode {
        if self.strict {
            ParseMode::Strict
        } else {
            ParseMode::Lenient
        }
    }
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[command(flatten)]
    logs: LogInput,
    #[arg(long, default_value_t = AddressMode::Delta)]
    address_mode: AddressMode,
    /// Make the logging function part of each state's identity.
    #[arg(long)]
    include_function: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Trace files, or directories holding them (an ingest output directory works).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct DistArgs {
    #[command(flatten)]
    logs: LogInput,
    /// Register to tabulate; repeatable. Defaults to every register.
    #[arg(long = "register")]
    registers: Vec<String>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct OccurrenceArgs {
    #[command(flatten)]
    traces: TraceArgs,
    /// Keep only the first N rows.
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args, Debug)]
struct TransitionArgs {
    #[command(flatten)]
    traces: TraceArgs,
    /// Metadata field to pair with each run: voltage or pulse_width.
    #[arg(long, default_value = "voltage")]
    field: MetadataField,
}

#[derive(Args, Debug)]
struct VariantArgs {
    #[arg(long, default_value_t = Variant::Plain)]
    variant: Variant,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    traces: TraceArgs,
    #[command(flatten)]
    variant: VariantArgs,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[command(flatten)]
    traces: TraceArgs,
    /// Weight table written by `train`.
    #[arg(long)]
    weights: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    traces: TraceArgs,
    #[arg(long, default_value_t = Variant::Plain)]
    variant: Variant,
    /// Comma-separated delta values.
    #[arg(long = "delta", value_delimiter = ',', default_value = "0.1,0.5,1,2,5,10,100")]
    deltas: Vec<f64>,
    /// `loo` or `split:<fraction>:<seed>`.
    #[arg(long, default_value = "loo")]
    protocol: Protocol,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Baseline logs.
    #[arg(long, default_value_t = 20)]
    baseline: usize,
    /// ESD logs.
    #[arg(long, default_value_t = 20)]
    esd: usize,
    /// Snapshots per log.
    #[arg(long, default_value_t = 200)]
    length: usize,
    /// Per-snapshot corruption probability in ESD logs.
    #[arg(short = 'p', long = "probability", default_value_t = 0.05)]
    probability: f64,
    /// Bits flipped per corruption event.
    #[arg(short = 'k', long, default_value_t = 2)]
    flips: u32,
    /// Machine states.
    #[arg(long, default_value_t = 6)]
    states: usize,
    /// Registers that can be corrupted, comma-separated; defaults to the
    /// schema's address registers.
    #[arg(long, value_delimiter = ',')]
    eligible: Option<Vec<String>>,
    /// Keep a corrupted value until the chain next rewrites the register.
    #[arg(long)]
    sticky: bool,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

pub fn run(cli: Cli) -> Result<()> {
    let outputs = match cli.command {
        Command::Ingest(a) => ingest(a)?,
        Command::Graph(a) => graph(a)?,
        Command::Unify(a) => unify_cmd(a)?,
        Command::Diff(a) => diff(a)?,
        Command::Stats(StatsCommand::Dist(a)) => dist(a)?,
        Command::Stats(StatsCommand::Occurrences(a)) => occurrences(a)?,
        Command::Stats(StatsCommand::Transitions(a)) => transitions(a)?,
        Command::Train(a) => train(a)?,
        Command::Classify(a) => classify_cmd(a)?,
        Command::Sweep(a) => sweep(a)?,
        Command::Gen(a) => gen(a)?,
    };
    outputs.commit()
}

fn partition(traces: Vec<ExecutionTrace>) -> Result<Partition<ExecutionTrace>> {
    Ok(Partition::split(traces)?)
}

fn ingest(a: IngestArgs) -> Result<Outputs> {
    let schema = load_schema(a.logs.schema.as_deref())?;
    let config = AbstractionConfig {
        mode: a.address_mode,
        include_function: a.include_function,
    };
    let (logs, warnings) = load_logs(&a.logs.input, &schema, a.logs.mode())?;
    let traces = traces_from_logs(&logs, config)?;

    let out = &a.out.out;
    let mut outputs = Outputs::default();
    let mut runs = Vec::new();
    for (log, trace) in logs.iter().zip(&traces) {
        outputs.add(out.join("traces").join(format!("{}.json", trace.run_id)), trace.to_json());
        runs.push(json!({
            "run_id": trace.run_id,
            "condition": trace.condition,
            "snapshots": log.snapshots.len(),
            "states": trace.table.len(),
            "warnings": log.warnings.len(),
        }));
    }
    let manifest = json!({
        "tool": "esdtrace",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "parse_mode": if a.logs.strict { "strict" } else { "lenient" },
        "abstraction": config,
        "schema": schema,
        "runs": runs,
    });
    outputs.add(out.join("manifest.json"), pretty(&manifest));
    outputs.add(out.join("warnings.txt"), lines(&warnings));
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(outputs)
}

fn graph(a: TraceArgs) -> Result<Outputs> {
    let traces = load_traces(&a.inputs)?;
    let mut outputs = Outputs::default();
    for trace in &traces {
        let g = build_graph(trace);
        let stem = a.out.out.join(&trace.run_id);
        outputs.add(stem.with_extension("dot"), export_dot(&g, None));
        outputs.add(stem.with_extension("json"), g.to_json());
    }
    Ok(outputs)
}

fn unify_cmd(a: TraceArgs) -> Result<Outputs> {
    let traces = load_traces(&a.inputs)?;
    let unified = unify(&traces)?;
    let out = &a.out.out;
    let mut outputs = Outputs::default();
    outputs.add(out.join("unified.dot"), export_dot(&unified.graph, None));
    outputs.add(out.join("unified.json"), unified.graph.to_json());
    outputs.add(out.join("states.json"), pretty(&unified.table));
    outputs.add(out.join("paths.json"), pretty(&unified.paths));
    Ok(outputs)
}

const DIFF_HEADER: [&str; 5] = ["kind", "state_id", "from", "to", "category"];

fn diff(a: TraceArgs) -> Result<Outputs> {
    let traces = load_traces(&a.inputs)?;
    let unified = unify(&traces)?;
    let report = diff_states(&partition(traces)?)?;

    let state_row = |kind: &str, id: &dyn ToString| {
        vec![kind.to_string(), id.to_string(), String::new(), String::new(), String::new()]
    };
    let esd_rows: Vec<Vec<String>> = report
        .esd_only_states
        .iter()
        .map(|id| state_row("esd_only_state", id))
        .chain(report.esd_only_edges.iter().map(|((from, to), cat)| {
            vec![
                "esd_only_edge".into(),
                String::new(),
                from.to_string(),
                to.to_string(),
                cat.number().to_string(),
            ]
        }))
        .collect();
    let mut all_rows = esd_rows.clone();
    all_rows.extend(report.baseline_only_states.iter().map(|id| state_row("baseline_only_state", id)));
    all_rows.extend(report.shared_states.iter().map(|id| state_row("shared_state", id)));

    let highlight = Highlight {
        states: report.esd_only_states.clone(),
        edges: report.esd_only_edges.keys().copied().collect(),
    };
    let counts = report.category_counts();
    let summary = json!({
        "esd_only_states": report.esd_only_states.len(),
        "baseline_only_states": report.baseline_only_states.len(),
        "shared_states": report.shared_states.len(),
        "esd_only_edges": report.esd_only_edges.len(),
        "edge_categories": {"1": counts[0], "2": counts[1], "3": counts[2], "4": counts[3]},
    });

    let out = &a.out.out;
    let mut outputs = Outputs::default();
    outputs.add(out.join("esd_only.csv"), csv_bytes(&DIFF_HEADER, esd_rows)?);
    outputs.add(out.join("diff.csv"), csv_bytes(&DIFF_HEADER, all_rows)?);
    outputs.add(out.join("diff.dot"), export_dot(&unified.graph, Some(&highlight)));
    outputs.add(out.join("summary.json"), pretty(&summary));
    Ok(outputs)
}

fn dist(a: DistArgs) -> Result<Outputs> {
    let schema = load_schema(a.logs.schema.as_deref())?;
    let registers = if a.registers.is_empty() {
        schema.names().to_vec()
    } else {
        for r in &a.registers {
            if schema.index_of(r).is_none() {
                return Err(usage(format!("--register {r}: not in the schema")));
            }
        }
        a.registers.clone()
    };
    let (logs, _) = load_logs(&a.logs.input, &schema, a.logs.mode())?;
    let logs = Partition::split(logs)?;
    let mut rows = Vec::new();
    for register in &registers {
        let d = value_distribution(&logs, register)?;
        rows.extend(d.rows().into_iter().map(|r| {
            vec![
                register.clone(),
                format!("{:#x}", r.value),
                r.p_baseline.to_string(),
                r.p_esd.to_string(),
                r.difference.to_string(),
            ]
        }));
    }
    let mut outputs = Outputs::default();
    outputs.add(
        a.out.out.join("distributions.csv"),
        csv_bytes(&["register", "value_hex", "p_baseline", "p_esd", "difference"], rows)?,
    );
    Ok(outputs)
}

fn occurrences(a: OccurrenceArgs) -> Result<Outputs> {
    let p = partition(load_traces(&a.traces.inputs)?)?;
    let rows = combined_histogram(&p, a.top)?.into_iter().map(|r| {
        vec![r.state.to_string(), r.mean_baseline.to_string(), r.mean_esd.to_string()]
    });
    let mut outputs = Outputs::default();
    outputs.add(
        a.traces.out.out.join("histogram.csv"),
        csv_bytes(&["state_id", "mean_baseline", "mean_esd"], rows)?,
    );
    Ok(outputs)
}

fn transitions(a: TransitionArgs) -> Result<Outputs> {
    let p = partition(load_traces(&a.traces.inputs)?)?;
    p.require_both()?;
    let corr = correlate_metadata(&p, a.field)?;
    for w in &corr.warnings {
        eprintln!("warning: {w}");
    }
    let field = a.field.to_string();
    let rows = corr
        .rows
        .into_iter()
        .map(|r| vec![r.value.to_string(), r.run_id, r.pct_nonbaseline.to_string()]);
    let mut outputs = Outputs::default();
    outputs.add(
        a.traces.out.out.join("scatter.csv"),
        csv_bytes(&[field.as_str(), "run_id", "pct_nonbaseline"], rows)?,
    );
    Ok(outputs)
}

fn check_delta(variant: Variant, delta: f64) -> Result<()> {
    variant
        .check_delta(delta)
        .map_err(|e| usage(format!("--delta {delta}: {e}")))
}

fn train(a: TrainArgs) -> Result<Outputs> {
    check_delta(a.variant.variant, a.variant.delta)?;
    let p = partition(load_traces(&a.traces.inputs)?)?;
    let counts = build_counts(&p)?;
    let table = build_weights(&counts, a.variant.variant, a.variant.delta)?;
    let mut outputs = Outputs::default();
    outputs.add(a.traces.out.out.join("weights.json"), table.to_json());
    Ok(outputs)
}

fn classify_cmd(a: ClassifyArgs) -> Result<Outputs> {
    let table = WeightTable::from_json(&read_to_string(&a.weights)?)
        .with_context(|| format!("weight table {}", a.weights.display()))?;
    let traces = load_traces(&a.traces.inputs)?;
    let mut rows = Vec::with_capacity(traces.len());
    for t in &traces {
        let row = match classify(&table, t) {
            Ok(r) => vec![
                r.run_id,
                t.condition.to_string(),
                r.score.to_string(),
                r.label.to_string(),
                r.unseen_state_mass.to_string(),
            ],
            Err(WeightError::EmptyTrace) => vec![
                t.run_id.clone(),
                t.condition.to_string(),
                String::new(),
                "indeterminate".into(),
                String::new(),
            ],
            Err(e) => return Err(e).with_context(|| format!("classifying {}", t.run_id)),
        };
        rows.push(row);
    }
    let mut outputs = Outputs::default();
    outputs.add(
        a.traces.out.out.join("classification.csv"),
        csv_bytes(&["run_id", "condition", "score", "label", "unseen_state_mass"], rows)?,
    );
    Ok(outputs)
}

fn sweep(a: SweepArgs) -> Result<Outputs> {
    if a.deltas.is_empty() {
        return Err(usage("--delta: at least one value is required"));
    }
    for &d in &a.deltas {
        check_delta(a.variant, d)?;
    }
    let p = partition(load_traces(&a.traces.inputs)?)?;
    let rows = sweep_delta(&p, a.variant, &a.deltas, a.protocol)?
        .into_iter()
        .map(|r| {
            vec![
                r.delta.to_string(),
                r.accuracy.to_string(),
                r.straightline_deviation.to_string(),
                r.middle_weight_abs.to_string(),
            ]
        });
    let mut outputs = Outputs::default();
    outputs.add(
        a.traces.out.out.join("sweep.csv"),
        csv_bytes(&["delta", "accuracy", "straightline_deviation", "middle_weight_abs"], rows)?,
    );
    Ok(outputs)
}

fn gen(a: GenArgs) -> Result<Outputs> {
    if a.baseline == 0 || a.esd == 0 {
        return Err(usage("--baseline and --esd must both be at least 1"));
    }
    if a.states == 0 {
        return Err(usage("--states must be at least 1"));
    }
    let schema: RegisterSchema = load_schema(a.schema.as_deref())?;
    let model = PerturbationModel::new(a.probability, a.flips, a.eligible.as_deref(), &schema)
        .map_err(|e| usage(e.to_string()))?
        .sticky(a.sticky);
    let machine = make_machine(a.seed, a.states, &schema)?;
    let corpus = generate_corpus(&machine, a.baseline, a.esd, a.length, &model, a.seed)?;
    let mut outputs = Outputs::default();
    for (name, contents) in corpus.files() {
        outputs.add(a.out.out.join(name), contents);
    }
    Ok(outputs)
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document serializes");
    s.push('\n');
    s
}

fn lines(items: &[String]) -> String {
    items.iter().map(|l| format!("{l}\n")).collect()
}
