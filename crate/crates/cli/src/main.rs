//! `trace`: record a run of a mini-language program, then view, query, search
//! and serve the recorded trace.
//!
//! Exit status: 0 on success, 1 when the traced program did not complete
//! (the trace is still written), 2 on usage or internal errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tracer_core::minilang::{link, parse};
use tracer_core::query::{evaluate, grep, parse_selector};
use tracer_core::render::{render, source_to_trace, LineMap, RenderedLine, ViewState};
use tracer_core::store::{load, JsonlSink, LoadedTrace, TRACE_EXTENSION};
use tracer_core::tracer::{execute, parse_data_file, Environment, ExecutionLimits, ExitStatus};
use tracer_service::{meta_path, serve, sources_from_dir, Service};

#[derive(Parser)]
#[command(name = "trace", version, about = "Record and explore complete execution traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program and record its trace.
    Run(RunArgs),
    /// Print the plain-text rendering of a trace.
    View {
        trace: PathBuf,
        #[command(flatten)]
        view: ViewArgs,
        /// Rendered lines A to B (B exclusive); either bound may be omitted.
        #[arg(long, value_name = "A:B")]
        range: Option<String>,
    },
    /// Print the nodes matching a selector.
    Query {
        trace: PathBuf,
        selector: String,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        json: bool,
    },
    /// Print the rendered lines matching a regular expression.
    Grep {
        trace: PathBuf,
        pattern: String,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        max: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Print the rendered lines showing executions of a source line.
    Occurrences {
        trace: PathBuf,
        #[arg(value_name = "FILE:LINE")]
        location: String,
        #[command(flatten)]
        view: ViewArgs,
        #[arg(long)]
        json: bool,
    },
    /// Print summary statistics of a trace.
    Stats {
        trace: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API over a trace.
    Serve {
        trace: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Directory holding the program sources; defaults to the trace's directory.
        #[arg(long)]
        src: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Source files of the program.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "main")]
    entry: String,
    /// Integers returned by read_from_file(), one per line.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output trace file; defaults to ENTRY.trace.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_events: Option<u64>,
    #[arg(long)]
    max_call_depth: Option<usize>,
    #[arg(long)]
    max_snapshot_depth: Option<usize>,
    #[arg(long)]
    max_snapshot_elems: Option<usize>,
    #[arg(long)]
    max_output_bytes: Option<usize>,
}

#[derive(Args, Default)]
struct ViewArgs {
    /// Collapse every call to NAME, or the calls and loops opened at FILE:LINE.
    #[arg(long, value_name = "NAME|FILE:LINE")]
    collapse: Vec<String>,
    #[arg(long)]
    no_subexpr: bool,
    #[arg(long)]
    no_output: bool,
    #[arg(long)]
    ascii: bool,
}

/// Failure that maps to exit status 1.
struct ProgramFailed;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = BufWriter::new(io::stdout().lock());
    let result = dispatch(cli.command, &mut out).and_then(|code| {
        out.flush()?;
        Ok(code)
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(ProgramFailed)) => ExitCode::from(1),
        Err(e) => {
            let _ = out.flush();
            if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) {
                return ExitCode::SUCCESS;
            }
            eprintln!("trace: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command, out: &mut impl Write) -> Result<Result<(), ProgramFailed>> {
    match command {
        Command::Run(args) => return run(args, out),
        Command::View { trace, view, range } => {
            let trace = open(&trace)?;
            let state = view_state(&trace, &view)?;
            let (start, end) = parse_range(range.as_deref())?;
            for line in render(&trace.tree, &state).skip(start).take(end.saturating_sub(start)) {
                writeln!(out, "{}", line.text)?;
            }
        }
        Command::Query { trace, selector, view, json } => {
            let selector = parse_selector(&selector).map_err(|e| {
                anyhow::anyhow!("{e}\n  {}\n  {}^", selector, " ".repeat(e.position))
            })?;
            let trace = open(&trace)?;
            let state = view_state(&trace, &view)?;
            let lines: Vec<RenderedLine> = render(&trace.tree, &state).collect();
            let map = LineMap::new(&trace.tree, &state, &lines);
            for id in evaluate(&selector, &trace.tree, Some(&trace.index)) {
                let line = map.line_of(id);
                let header = line.map(|i| lines[i].text.as_str());
                if json {
                    writeln!(out, "{}", json!({ "node_id": id, "line_index": line, "header": header }))?;
                } else {
                    match line {
                        Some(i) => writeln!(out, "{i}\t{}", lines[i].text)?,
                        None => writeln!(out, "-\tnode {id}")?,
                    }
                }
            }
        }
        Command::Grep { trace, pattern, view, max, json } => {
            let trace = open(&trace)?;
            let state = view_state(&trace, &view)?;
            let lines: Vec<RenderedLine> = render(&trace.tree, &state).collect();
            for m in grep(&lines, &pattern, max)? {
                if json {
                    writeln!(out, "{}", serde_json::to_string(&m)?)?;
                } else {
                    writeln!(out, "{}\t{}", m.line_index, lines[m.line_index].text)?;
                }
            }
        }
        Command::Occurrences { trace, location, view, json } => {
            let (file, line) = parse_location(&location).context("expected FILE:LINE")?;
            let trace = open(&trace)?;
            let state = view_state(&trace, &view)?;
            let lines: Vec<RenderedLine> = render(&trace.tree, &state).collect();
            if json {
                let map = LineMap::new(&trace.tree, &state, &lines);
                for id in trace.index.occurrences(file, line) {
                    writeln!(out, "{}", json!({ "node_id": id, "line_index": map.line_of(*id) }))?;
                }
            } else {
                for i in source_to_trace(&trace.tree, &state, &trace.index, &lines, file, line) {
                    writeln!(out, "{i}\t{}", lines[i].text)?;
                }
            }
        }
        Command::Stats { trace, json } => {
            let trace = open(&trace)?;
            let s = &trace.stats;
            if json {
                writeln!(out, "{}", serde_json::to_string(s)?)?;
            } else {
                writeln!(out, "outcome\t{}", s.outcome)?;
                writeln!(out, "events\t{}", s.event_count)?;
                writeln!(out, "nodes\t{}", s.node_count)?;
                writeln!(out, "max_depth\t{}", s.max_depth)?;
                if let Some(b) = s.byte_size {
                    writeln!(out, "bytes\t{b}")?;
                }
                for (kind, n) in &s.kind_counts {
                    writeln!(out, "{kind}\t{n}")?;
                }
            }
        }
        Command::Serve { trace, port, host, src } => {
            let src = src.unwrap_or_else(|| trace.parent().map(Path::to_path_buf).unwrap_or_default());
            let src = if src.as_os_str().is_empty() { PathBuf::from(".") } else { src };
            let sources = sources_from_dir(&src).with_context(|| format!("reading sources in {}", src.display()))?;
            let loaded = open(&trace)?;
            let service = Arc::new(Service::new(loaded, sources, Some(meta_path(&trace)))?);
            let addr = SocketAddr::new(host, port);
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("serving {} on http://{addr}", trace.display());
            runtime.block_on(serve(service, addr))?;
        }
    }
    Ok(Ok(()))
}

fn run(args: RunArgs, out: &mut impl Write) -> Result<Result<(), ProgramFailed>> {
    let defaults = ExecutionLimits::default();
    let limits = ExecutionLimits {
        max_events: args.max_events.unwrap_or(defaults.max_events),
        max_call_depth: args.max_call_depth.unwrap_or(defaults.max_call_depth),
        max_snapshot_depth: args.max_snapshot_depth.unwrap_or(defaults.max_snapshot_depth),
        max_snapshot_elems: args.max_snapshot_elems.unwrap_or(defaults.max_snapshot_elems),
        max_output_bytes: args.max_output_bytes.unwrap_or(defaults.max_output_bytes),
    };
    limits.validate()?;
    let env = match &args.data {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let data = parse_data_file(&text).with_context(|| path.display().to_string())?;
            Environment::with_data(data)
        }
        None => Environment::default(),
    };
    let mut files = Vec::new();
    for path in &args.files {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            bail!("{}: not a file name", path.display());
        };
        files.push(parse(name, &text)?);
    }
    let program = link(files, &args.entry)?;
    let out_path = args.out.unwrap_or_else(|| PathBuf::from(format!("{}{TRACE_EXTENSION}", args.entry)));
    let file = File::create(&out_path).with_context(|| format!("creating {}", out_path.display()))?;
    let mut sink = JsonlSink::new(BufWriter::new(file));
    let status = execute(&program, &limits, &env, &mut sink)?;
    let events = sink.events_written();
    let bytes = sink.bytes_written();
    sink.finish()?;
    writeln!(out, "wrote {} ({events} events, {bytes} bytes)", out_path.display())?;
    Ok(match status {
        ExitStatus::Completed => Ok(()),
        ExitStatus::Errored { message, span } => {
            eprintln!("trace: program failed at {span}: {message}");
            Err(ProgramFailed)
        }
        ExitStatus::BudgetExhausted => {
            eprintln!("trace: event budget of {} exhausted; trace truncated", limits.max_events);
            Err(ProgramFailed)
        }
    })
}

fn open(path: &Path) -> Result<LoadedTrace> {
    load(path).with_context(|| format!("loading {}", path.display()))
}

fn parse_location(s: &str) -> Option<(&str, u32)> {
    let (file, line) = s.rsplit_once(':')?;
    Some((file, line.parse().ok()?))
}

fn view_state(trace: &LoadedTrace, args: &ViewArgs) -> Result<ViewState> {
    let mut state = ViewState {
        show_subexpr: !args.no_subexpr,
        show_output: !args.no_output,
        ascii: args.ascii,
        ..ViewState::default()
    };
    for c in &args.collapse {
        let added = match parse_location(c) {
            Some((file, line)) => state.collapse_at(&trace.tree, file, line),
            None => state.collapse_calls_named(&trace.tree, c),
        };
        if added == 0 {
            eprintln!("trace: warning: --collapse {c} matched nothing");
        }
    }
    Ok(state)
}

fn parse_range(range: Option<&str>) -> Result<(usize, usize)> {
    let Some(r) = range else { return Ok((0, usize::MAX)) };
    let Some((a, b)) = r.split_once(':') else { bail!("--range expects A:B, got '{r}'") };
    let bound = |s: &str, default| -> Result<usize> {
        if s.is_empty() {
            Ok(default)
        } else {
            s.parse().with_context(|| format!("--range bound '{s}'"))
        }
    };
    let (a, b) = (bound(a, 0)?, bound(b, usize::MAX)?);
    if a > b {
        bail!("--range start {a} is past its end {b}");
    }
    Ok((a, b))
}
