use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use aggsched::collision::{build_extended_collision_graph, build_forwarding_graph};
use aggsched::dcas::Interleaving;
use aggsched::harness::{
    run_single, run_sweep, write_csv, write_summary, Algo, Axis, Deployment, Execution,
    ExperimentConfig, HarnessError, RunSpec,
};
use aggsched::schedule::Schedule;
use aggsched::validator::validate;
use aggsched::wsn::{compute_hops, random_unit_disk_deployment, DeploymentParams, Wsn};

const SEED_ENV: &str = "AGGSCHED_SEED";

#[derive(Parser, Debug)]
#[command(name = "aggsched", version, about = "Multi-channel aggregation scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Schedule one network and print its result row
    Simulate(SimulateArgs),
    /// Replicated parameter sweep, one CSV row per run
    Sweep(SweepArgs),
    /// Check a schedule file against a topology
    Validate(ValidateArgs),
    /// Print topology, hop counts, forwarding arcs and conflict graph
    DumpGraph(DumpArgs),
}

#[derive(Args, Debug, Clone)]
struct NetworkArgs {
    /// Topology document; overrides the random deployment flags
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Nodes to deploy, sink included
    #[arg(long, default_value_t = 200)]
    sensors: usize,
    /// Side of the square deployment area
    #[arg(long, default_value_t = 30.0)]
    area: f64,
    /// Transmission range
    #[arg(long, default_value_t = 5.0)]
    range: f64,
    /// Upper bound of generated data per sensor
    #[arg(long, default_value_t = 3)]
    beta: u32,
    /// Deployment seed; AGGSCHED_SEED takes precedence
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgoArg {
    Dcas,
    Greedy,
    Periodic,
    Bruteforce,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Algo {
        match a {
            AlgoArg::Dcas => Algo::Dcas,
            AlgoArg::Greedy => Algo::Greedy,
            AlgoArg::Periodic => Algo::Periodic,
            AlgoArg::Bruteforce => Algo::BruteForce,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Order {
    Ascending,
    Shuffled,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Packet capacity in data units
    #[arg(long, default_value_t = 3)]
    alpha: u32,
    #[arg(long, default_value_t = 2)]
    channels: u32,
    #[arg(long, value_enum, default_value_t = AlgoArg::Dcas)]
    algo: AlgoArg,
    /// Node activation order of the distributed driver
    #[arg(long, value_enum, default_value_t = Order::Ascending)]
    order: Order,
    /// CSV output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the schedule in text form to this file
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Write the event trace to this file, or to stderr without a path
    #[arg(long, num_args = 0..=1)]
    trace: Option<Option<PathBuf>>,
    /// Record scheduler wall time in the row
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Parameter to vary
    #[arg(long, value_parser = Axis::NAMES)]
    axis: String,
    /// Comma-separated axis points; defaults depend on the axis
    #[arg(long)]
    points: Option<String>,
    /// Packet capacities used on the other axes
    #[arg(long, value_delimiter = ',', default_value = "4")]
    alpha: Vec<u32>,
    /// Channel counts used on the other axes
    #[arg(long, value_delimiter = ',', default_value = "2")]
    channels: Vec<u32>,
    #[arg(long, default_value_t = 30)]
    runs: u32,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dcas")]
    algo: Vec<AlgoArg>,
    /// CSV output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the table of means here instead of stderr
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Run on one thread
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, default_value_t = 3)]
    alpha: u32,
    #[arg(long, default_value_t = 2)]
    channels: u32,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, default_value_t = 2)]
    channels: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes with their exit codes.
#[derive(Debug, Clone, Copy)]
enum Failure {
    Usage,
    Invalid,
    SizeCap,
}

impl Failure {
    fn code(self) -> u8 {
        match self {
            Failure::Usage => 1,
            Failure::Invalid => 2,
            Failure::SizeCap => 3,
        }
    }
}

fn classify(err: &anyhow::Error) -> Failure {
    for cause in err.chain() {
        match cause.downcast_ref::<HarnessError>() {
            Some(HarnessError::SizeCap(_)) => return Failure::SizeCap,
            Some(HarnessError::Invalid { .. }) => return Failure::Invalid,
            _ => {}
        }
        if cause.downcast_ref::<ValidationFailed>().is_some() {
            return Failure::Invalid;
        }
    }
    Failure::Usage
}

#[derive(Debug)]
struct ValidationFailed;

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("schedule failed validation")
    }
}

impl std::error::Error for ValidationFailed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e).code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate_cmd(a),
        Command::DumpGraph(a) => dump_graph(a),
    }
}

fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(anyhow!("{SEED_ENV}: {e}")),
    }
}

fn load_topology(path: &Path) -> Result<Wsn> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse().with_context(|| format!("parsing {}", path.display()))
}

fn network(net: &NetworkArgs, seed: u64) -> Result<(Wsn, Deployment)> {
    if let Some(path) = &net.topology {
        return Ok((load_topology(path)?, Deployment::default()));
    }
    let params = DeploymentParams::new(net.sensors, net.area, net.range, net.beta);
    let w = random_unit_disk_deployment(&params, seed)
        .with_context(|| format!("deploying {} nodes in a {}x{} area", net.sensors, net.area, net.area))?;
    Ok((
        w,
        Deployment {
            area_side: Some(net.area),
            beta: Some(net.beta),
        },
    ))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let seed = effective_seed(a.net.seed)?;
    let (w, meta) = network(&a.net, seed)?;
    let mut spec = RunSpec::new(a.algo.into(), a.alpha, a.channels, seed);
    spec.trace = a.trace.is_some();
    spec.timing = a.timing;
    spec.interleaving = match a.order {
        Order::Ascending => Interleaving::Ascending,
        Order::Shuffled => Interleaving::Shuffled { seed },
    };
    let out = run_single(&w, meta, &spec)?;
    if let Some(path) = &a.schedule {
        fs::write(path, out.schedule.to_string()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(target) = &a.trace {
        let mut text = out.transcript.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        match target {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
            None => eprint!("{text}"),
        }
    }
    emit(a.out.as_deref(), &write_csv(std::slice::from_ref(&out.row)))
}

fn sweep(a: SweepArgs) -> Result<()> {
    if a.net.topology.is_some() {
        bail!("sweep deploys its own networks; --topology is not supported here");
    }
    let axis = match &a.points {
        Some(list) => Axis::with_points(&a.axis, list)?,
        None => Axis::default_for(&a.axis).ok_or_else(|| anyhow!("unknown axis `{}`", a.axis))?,
    };
    let cfg = ExperimentConfig {
        sensors: a.net.sensors,
        area_side: a.net.area,
        range: a.net.range,
        beta: a.net.beta,
        alpha_list: a.alpha,
        channels_list: a.channels,
        runs: a.runs,
        seed: effective_seed(a.net.seed)?,
        algos: a.algo.into_iter().map(Algo::from).collect(),
        timing: a.timing,
    };
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let res = run_sweep(&cfg, &axis, exec).context("sweep aborted")?;
    emit(a.out.as_deref(), &write_csv(&res.rows))?;
    let summary = write_summary(&res.summary);
    match &a.summary {
        Some(p) => fs::write(p, summary).with_context(|| format!("writing {}", p.display()))?,
        None => eprint!("{summary}"),
    }
    Ok(())
}

fn validate_cmd(a: ValidateArgs) -> Result<()> {
    let w = load_topology(&a.topology)?;
    let text = fs::read_to_string(&a.schedule).with_context(|| format!("reading {}", a.schedule.display()))?;
    let s: Schedule = text.parse().with_context(|| format!("parsing {}", a.schedule.display()))?;
    let report = validate(&w, &compute_hops(&w), a.alpha, a.channels, &s);
    print!("{report}");
    if report.ok {
        Ok(())
    } else {
        Err(ValidationFailed.into())
    }
}

fn dump_graph(a: DumpArgs) -> Result<()> {
    if a.channels == 0 {
        bail!("--channels must be at least 1");
    }
    let seed = effective_seed(a.net.seed)?;
    let (w, _) = network(&a.net, seed)?;
    let hops = compute_hops(&w);
    let fg = build_forwarding_graph(&w, &hops);
    let ecg = build_extended_collision_graph(&fg, &w, a.channels);
    let mut text = w.to_document();
    for v in w.nodes() {
        text.push_str(&format!("hop {} {}\n", v, hops.hop(v)));
    }
    for l in fg.arcs() {
        text.push_str(&format!("arc {} {}\n", l.sender, l.receiver));
    }
    text.push_str(&ecg.dump());
    emit(a.out.as_deref(), &text)
}
