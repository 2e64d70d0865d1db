//! `pcea`: classify, compile, run and cross-check hierarchical conjunctive
//! queries over tuple streams.

mod bench;

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pcea::compiler::compile;
use pcea::cq::{build_q_tree, classify, compact_q_tree, hierarchy_violation, parse_cq, Cq};
use pcea::engine::Engine;
use pcea::model::{LineSource, Schema, Tuple, Valuation};
use pcea::pcea::{Oracle, Pcea};
use pcea::workload::query_schema;
use pcea::Error;

#[derive(Parser, Debug)]
#[command(name = "pcea", version, about = "Hierarchical conjunctive queries over streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the structural flags of a query and its q-tree.
    Classify {
        query: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Compile a hierarchical query into an automaton.
    Compile {
        query: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Write the automaton here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Evaluate over a stream with the streaming engine.
    Run(RunArgs),
    /// Evaluate with the exhaustive run-tree oracle.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Also run the engine and fail on any difference.
        #[arg(long)]
        diff: bool,
        /// Refuse inputs needing more than this many partial runs.
        #[arg(long, default_value_t = 1_000_000)]
        cap: usize,
    },
    /// Measure update cost, union-tree depth and delay on a synthetic stream.
    Bench(bench::BenchArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Stream file, or `-` for stdin.
    stream: PathBuf,
    /// Window size: a non-negative integer or `inf`.
    #[arg(long, default_value = "inf", value_parser = parse_window)]
    window: Window,
    /// Skip positions without outputs.
    #[arg(long)]
    only_nonempty: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
pub(crate) struct SourceArgs {
    #[command(flatten)]
    kind: SourceKind,
    /// Schema file with one `Rel/arity` per line.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct SourceKind {
    /// Query file (compiled on the fly).
    #[arg(long)]
    query: Option<PathBuf>,
    /// Automaton file, as written by `compile`.
    #[arg(long)]
    automaton: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Window(pub Option<usize>);

fn parse_window(s: &str) -> Result<Window, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(Window(None));
    }
    s.parse::<usize>()
        .map(|w| Window(Some(w)))
        .map_err(|_| format!("`{s}` is neither a non-negative integer nor `inf`"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Human,
}

/// An oracle diff found differences.
#[derive(Debug)]
struct Mismatch(usize);

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "engine and oracle differ at {} position(s)", self.0)
    }
}

impl std::error::Error for Mismatch {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Mismatch>().is_some() {
        return 4;
    }
    if let Some(err) = e.downcast_ref::<Error>() {
        return match err.root() {
            Error::Parse { .. } | Error::Schema(_) | Error::Input(_) | Error::InvalidAutomaton(_) => 2,
            Error::NotHierarchical(_) => 3,
            Error::ResourceLimit(_) => 5,
            _ => 1,
        };
    }
    if e.downcast_ref::<io::Error>().is_some() {
        return 2;
    }
    1
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match cli.command {
        Command::Classify { query, schema } => cmd_classify(&query, schema.as_deref(), &mut out)?,
        Command::Compile { query, schema, out: path } => cmd_compile(&query, schema.as_deref(), path.as_deref(), &mut out)?,
        Command::Run(args) => cmd_run(&args, &mut out)?,
        Command::Oracle { run, diff, cap } => cmd_oracle(&run, diff, cap, &mut out)?,
        Command::Bench(args) => bench::cmd_bench(&args, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_schema(path: Option<&Path>) -> anyhow::Result<Option<Schema>> {
    path.map(|p| Ok(Schema::parse(&read_text(p)?)?)).transpose()
}

fn load_query(path: &Path, schema: Option<&Schema>) -> anyhow::Result<Cq> {
    Ok(parse_cq(&read_text(path)?, schema)?)
}

fn cmd_classify(query: &Path, schema: Option<&Path>, out: &mut impl Write) -> anyhow::Result<()> {
    let schema = load_schema(schema)?;
    let q = load_query(query, schema.as_ref())?;
    let c = classify(&q);
    write!(out, "{c}")?;
    if let Some(v) = hierarchy_violation(&q) {
        writeln!(out, "violation: {v}")?;
    }
    if c.hierarchical && c.connected {
        if let Some(tree) = build_q_tree(&q) {
            writeln!(out, "q-tree: {tree}")?;
            writeln!(out, "compact q-tree: {}", compact_q_tree(&tree))?;
        }
    }
    Ok(())
}

fn cmd_compile(query: &Path, schema: Option<&Path>, path: Option<&Path>, out: &mut impl Write) -> anyhow::Result<()> {
    let schema = load_schema(schema)?;
    let q = load_query(query, schema.as_ref())?;
    let compiled = compile(&q).map_err(|e| match e {
        Error::NotHierarchical(m) => anyhow!(Error::NotHierarchical(format!(
            "{m}; no automaton of this kind defines a non-hierarchical query, so it is rejected"
        ))),
        other => anyhow!(other),
    })?;
    let json = compiled.automaton.to_json();
    let a = &compiled.automaton;
    let stats = format!(
        "query size |Q| = {}\nautomaton size |P| = {}\nstates = {}\ntransitions = {}\nstate map:\n{}",
        q.size(),
        a.size(),
        a.num_states(),
        a.transitions().len(),
        compiled.state_map_report()
    );
    match path {
        Some(p) => {
            fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?;
            write!(out, "{stats}")?;
        }
        None => {
            writeln!(out, "{json}")?;
            eprint!("{stats}");
        }
    }
    Ok(())
}

/// The automaton and the schema tuples are checked against.
pub(crate) fn load_source(src: &SourceArgs) -> anyhow::Result<(Pcea, Schema)> {
    let schema = load_schema(src.schema.as_deref())?;
    if let Some(qp) = &src.kind.query {
        let q = load_query(qp, schema.as_ref())?;
        let schema = schema.unwrap_or_else(|| query_schema(&q));
        return Ok((compile(&q)?.automaton, schema));
    }
    let ap = src.kind.automaton.as_ref().expect("clap enforces one source");
    let pcea = Pcea::from_json(&read_text(ap)?)?;
    let Some(schema) = schema else {
        bail!(Error::Schema("--schema is required with --automaton".into()));
    };
    pcea.validate_schema(&schema)?;
    Ok((pcea, schema))
}

fn open_stream(path: &Path) -> anyhow::Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Box::new(BufReader::new(f)))
}

fn write_position(
    out: &mut impl Write,
    format: Format,
    only_nonempty: bool,
    i: usize,
    outputs: &[Valuation],
) -> anyhow::Result<()> {
    if only_nonempty && outputs.is_empty() {
        return Ok(());
    }
    match format {
        Format::Json => {
            let line = serde_json::json!({ "position": i, "outputs": outputs });
            writeln!(out, "{line}")?;
        }
        Format::Human if outputs.is_empty() => writeln!(out, "{i}:")?,
        Format::Human => {
            for v in outputs {
                writeln!(out, "{i}: {v}")?;
            }
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs, out: &mut impl Write) -> anyhow::Result<()> {
    let (pcea, schema) = load_source(&args.source)?;
    let mut engine = Engine::new(pcea, args.window.0);
    for t in LineSource::new(open_stream(&args.stream)?, schema) {
        let i = engine.feed(&t?)?;
        let mut outputs: Vec<Valuation> = engine.results().collect();
        outputs.sort();
        write_position(out, args.format, args.only_nonempty, i, &outputs)?;
    }
    Ok(())
}

fn cmd_oracle(args: &RunArgs, diff: bool, cap: usize, out: &mut impl Write) -> anyhow::Result<()> {
    let (pcea, schema) = load_source(&args.source)?;
    let stream: Vec<Tuple> = LineSource::new(open_stream(&args.stream)?, schema).collect::<Result<_, _>>()?;
    let oracle = Oracle::with_cap(&pcea, &stream, cap)?;
    let mut engine = diff.then(|| Engine::new(pcea.clone(), args.window.0));
    let mut mismatches = 0;
    for (i, t) in stream.iter().enumerate() {
        let mut want = oracle.evaluate_windowed(i, args.window.0);
        want.sort();
        if let Some(engine) = engine.as_mut() {
            engine.feed(t)?;
            let mut got: Vec<Valuation> = engine.results().collect();
            got.sort();
            if got != want {
                mismatches += 1;
                let line = serde_json::json!({ "position": i, "engine": got, "oracle": want });
                writeln!(out, "{line}")?;
            }
        } else {
            write_position(out, args.format, args.only_nonempty, i, &want)?;
        }
    }
    if mismatches > 0 {
        return Err(Mismatch(mismatches).into());
    }
    if diff {
        writeln!(out, "diff clean: {} positions", stream.len())?;
    }
    Ok(())
}
