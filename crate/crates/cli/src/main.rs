use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use congest_mst::algorithms::{build_mst, build_st, BuildOptions, PhaseConfig};
use congest_mst::experiment::{
    oracle_match, run_churn, run_experiment, summarize_churn, traced_trial, write_csv, Algorithm, ChurnSpec, Density,
    ExperimentSpec, GraphModel,
};
use congest_mst::graph::Graph;
use congest_mst::params::{Knowledge, Params};
use congest_mst::runtime::{DelayPolicy, Mode, RunConfig};

/// Runs seeded CONGEST simulations of the build and repair algorithms and
/// writes one CSV row per trial.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Args {
    /// build-mst, build-st, repair-mst or repair-st.
    #[arg(long)]
    alg: Algorithm,
    /// Comma-separated, ascending network sizes.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    n: Vec<usize>,
    /// Edge count: an integer, or `n^P` for `round(n^P)`.
    #[arg(long, default_value = "n^1.5")]
    m: String,
    /// Weight bound; defaults to n³.
    #[arg(long)]
    u: Option<u64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Confidence exponent.
    #[arg(long, default_value_t = 2)]
    c: u32,
    /// sync or async.
    #[arg(long, default_value = "sync")]
    mode: String,
    /// uniform:D or lifo; used in async mode and for repairs.
    #[arg(long, default_value = "uniform:4")]
    delay: String,
    /// erdos-renyi, random-tree-plus, grid or complete.
    #[arg(long, default_value = "random-tree-plus")]
    model: GraphModel,
    /// For repair algorithms: run a churn sequence of this many events on the
    /// first size instead of independent single-deletion trials.
    #[arg(long)]
    events: Option<usize>,
    /// Build on this graph file (`n m u` then `u v w` lines) instead of generating.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// With --graph: write the resulting marks here, one `u v` per line.
    #[arg(long)]
    marks_out: Option<PathBuf>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the frame trace of the first trial to stderr.
    #[arg(long)]
    trace: bool,
}

fn parse_delay(s: &str) -> Result<DelayPolicy> {
    if s == "lifo" {
        return Ok(DelayPolicy::Lifo);
    }
    match s.strip_prefix("uniform:").map(str::parse::<u64>) {
        Some(Ok(d)) if d >= 1 => Ok(DelayPolicy::Uniform(d)),
        _ => bail!("--delay must be uniform:D with D >= 1, or lifo"),
    }
}

fn parse_density(s: &str) -> Result<Density> {
    if let Some(p) = s.strip_prefix("n^") {
        return Ok(Density::Power(p.parse().context("bad exponent in --m")?));
    }
    Ok(Density::Fixed(s.parse().context("--m must be an integer or n^P")?))
}

fn output(args: &Args) -> Result<Box<dyn Write>> {
    Ok(match &args.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_file(args: &Args, path: &PathBuf, params: &Params, run: RunConfig) -> Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut g = Graph::parse(&text)?;
    let know = Knowledge::for_graph(&g, params);
    let opts = BuildOptions::default();
    let rep = match args.alg {
        Algorithm::BuildMst => build_mst(&mut g, &PhaseConfig::mst(&know), params, run, opts)?,
        Algorithm::BuildSt => build_st(&mut g, &PhaseConfig::st(&know), params, run, opts)?,
        _ => bail!("--graph supports build-mst and build-st"),
    };
    if let Some(p) = &args.marks_out {
        std::fs::write(p, g.marks_to_text())?;
    }
    if args.trace {
        for line in &rep.trace {
            eprintln!("{line}");
        }
    }
    let ok = rep.completed && oracle_match(&g, args.alg.forest());
    let mut out = output(args)?;
    writeln!(out, "algorithm,n,m,messages,bits,rounds,phases,oracle_match")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        args.alg,
        g.n(),
        g.m(),
        rep.messages,
        rep.bits,
        rep.rounds,
        rep.outcome.phases_run,
        ok
    )?;
    Ok(ok)
}

fn run(args: &Args) -> Result<bool> {
    let params = Params { c: args.c, ..Params::default() };
    let delay = parse_delay(&args.delay)?;
    let mode = match args.mode.as_str() {
        "sync" => Mode::Sync,
        "async" => Mode::Async(delay),
        other => bail!("--mode must be sync or async, not {other:?}"),
    };
    if let Some(path) = &args.graph {
        let run = RunConfig { mode, trace: args.trace, ..RunConfig::sync(args.seed) };
        return run_file(args, path, &params, run);
    }
    let density = parse_density(&args.m)?;
    if let (Some(events), Algorithm::RepairMst | Algorithm::RepairSt) = (args.events, args.alg) {
        let n = args.n[0];
        let mut spec = ChurnSpec::new(args.alg.forest(), n, density.edges(n), events, args.seed);
        spec.u = args.u;
        spec.params = params;
        spec.delay = delay;
        let rows = run_churn(&spec)?;
        for s in summarize_churn(&rows) {
            eprintln!("{}: {} events, mean {:.1} msgs, p95 {} msgs", s.kind, s.count, s.mean_messages, s.p95_messages);
        }
        write_csv(&rows, output(args)?)?;
        return Ok(rows.iter().all(|r| r.oracle_match && r.checks));
    }
    let mut spec = ExperimentSpec::new(args.alg, args.n.clone(), density, args.trials, args.seed);
    spec.model = args.model;
    spec.u = args.u;
    spec.params = params;
    spec.mode = mode;
    if args.trace {
        let (_, lines) = traced_trial(&spec, spec.n_values[0], 0, true);
        for line in lines {
            eprintln!("{line}");
        }
    }
    let rows = run_experiment(&spec)?;
    write_csv(&rows, output(args)?)?;
    Ok(rows.iter().all(|r| r.success && r.oracle_match))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
