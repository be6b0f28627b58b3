//! Experiment harness: single runs, seeded sweeps and CSV output.
//!
//! Every row is validated before it is returned, so a CSV produced here only
//! ever contains complete, collision-free schedules.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::baselines::{
    brute_force_min_slots, greedy_centralized_schedule, periodic_reuse_schedule, SearchLimits,
    SizeCapError,
};
use crate::dcas::{self, DcasConfig, DcasError, Interleaving};
use crate::schedule::Schedule;
use crate::validator::{validate, ValidationReport};
use crate::wsn::{compute_hops, random_unit_disk_deployment, DeploymentParams, TopologyError, Wsn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Dcas,
    Greedy,
    Periodic,
    BruteForce,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Dcas, Algo::Greedy, Algo::Periodic, Algo::BruteForce];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Dcas => "dcas",
            Algo::Greedy => "greedy",
            Algo::Periodic => "periodic",
            Algo::BruteForce => "bruteforce",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algo::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown algorithm `{s}` (expected dcas, greedy, periodic or bruteforce)")))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("deployment n={sensors} L={area_side} beta={beta} seed={seed}: {source}")]
    Topology {
        sensors: usize,
        area_side: f64,
        beta: u32,
        seed: u64,
        source: TopologyError,
    },
    #[error("dcas on seed {seed}: {source}")]
    Dcas { seed: u64, source: DcasError },
    #[error(transparent)]
    SizeCap(#[from] SizeCapError),
    #[error("{algo} produced an invalid schedule on seed {seed}\n{report}")]
    Invalid {
        algo: Algo,
        seed: u64,
        report: Box<ValidationReport>,
    },
}

/// Parameters of one scheduler invocation on a fixed topology.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub algo: Algo,
    pub alpha: u32,
    pub channels: u32,
    /// Deployment seed, recorded in the row.
    pub seed: u64,
    pub interleaving: Interleaving,
    pub trace: bool,
    pub timing: bool,
}

impl RunSpec {
    pub fn new(algo: Algo, alpha: u32, channels: u32, seed: u64) -> Self {
        RunSpec {
            algo,
            alpha,
            channels,
            seed,
            interleaving: Interleaving::Ascending,
            trace: false,
            timing: false,
        }
    }
}

/// Deployment metadata carried into the row; empty for file topologies.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Deployment {
    pub area_side: Option<f64>,
    pub beta: Option<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub algo: Algo,
    pub sensors: usize,
    pub area_side: Option<f64>,
    pub beta: Option<u32>,
    pub alpha: u32,
    pub channels: u32,
    pub seed: u64,
    pub slots_used: u32,
    pub delivered: u64,
    /// Scheduler wall time; zero unless timing was requested.
    pub wall_time_ms: f64,
}

pub const CSV_HEADER: &str = "algo,sensors,L,beta,alpha,channels,seed,slots_used,delivered,wall_time_ms";

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.algo,
            self.sensors,
            opt(self.area_side.map(|l| l.to_string())),
            opt(self.beta.map(|b| b.to_string())),
            self.alpha,
            self.channels,
            self.seed,
            self.slots_used,
            self.delivered,
            if self.wall_time_ms == 0.0 {
                "0".to_string()
            } else {
                format!("{:.3}", self.wall_time_ms)
            }
        )
    }
}

pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub row: ResultRow,
    pub schedule: Schedule,
    pub report: ValidationReport,
    /// DCAS event log when tracing was requested.
    pub transcript: Vec<String>,
}

/// Runs one scheduler on `w`, validates the result and builds its row.
pub fn run_single(w: &Wsn, meta: Deployment, spec: &RunSpec) -> Result<RunOutput, HarnessError> {
    if spec.alpha == 0 || spec.channels == 0 {
        return Err(HarnessError::Config("alpha and channels must be at least 1".into()));
    }
    let started = Instant::now();
    let mut transcript = Vec::new();
    let schedule = match spec.algo {
        Algo::Dcas => {
            let cfg = DcasConfig {
                alpha: spec.alpha,
                channels: spec.channels,
                interleaving: spec.interleaving,
                trace: spec.trace,
            };
            let out = dcas::run(w, &cfg).map_err(|source| HarnessError::Dcas { seed: spec.seed, source })?;
            transcript = out.transcript;
            out.schedule
        }
        Algo::Greedy => greedy_centralized_schedule(w, spec.alpha, spec.channels),
        Algo::Periodic => periodic_reuse_schedule(w, spec.alpha, spec.channels),
        Algo::BruteForce => {
            brute_force_min_slots(w, spec.alpha, spec.channels, &SearchLimits::default())?.witness
        }
    };
    let elapsed = started.elapsed();
    let report = validate(w, &compute_hops(w), spec.alpha, spec.channels, &schedule);
    if !report.ok {
        return Err(HarnessError::Invalid {
            algo: spec.algo,
            seed: spec.seed,
            report: Box::new(report),
        });
    }
    let row = ResultRow {
        algo: spec.algo,
        sensors: w.len(),
        area_side: meta.area_side,
        beta: meta.beta,
        alpha: spec.alpha,
        channels: spec.channels,
        seed: spec.seed,
        slots_used: report.slots_used,
        delivered: report.delivered,
        wall_time_ms: if spec.timing { elapsed.as_secs_f64() * 1e3 } else { 0.0 },
    };
    Ok(RunOutput {
        row,
        schedule,
        report,
        transcript,
    })
}

/// The parameter varied by a sweep, with its points.
#[derive(Clone, Debug, PartialEq)]
pub enum Axis {
    Alpha(Vec<u32>),
    Channels(Vec<u32>),
    Sensors(Vec<usize>),
    /// Side length of the deployment square.
    Size(Vec<f64>),
    Beta(Vec<u32>),
}

impl Axis {
    pub const NAMES: [&'static str; 5] = ["alpha", "channels", "sensors", "size", "beta"];

    /// Default points for the named axis.
    pub fn default_for(name: &str) -> Option<Axis> {
        Some(match name {
            "alpha" => Axis::Alpha(vec![1, 2, 4, 8, 16, 32, 64, 128]),
            "channels" => Axis::Channels(vec![1, 2, 4]),
            "sensors" => Axis::Sensors(vec![50, 200, 350]),
            "size" => Axis::Size(vec![20.0, 30.0, 40.0]),
            "beta" => Axis::Beta(vec![1, 3, 5]),
            _ => return None,
        })
    }

    /// Same axis with custom points parsed from a comma-separated list.
    pub fn with_points(name: &str, list: &str) -> Result<Axis, HarnessError> {
        fn parse<T: FromStr>(list: &str) -> Result<Vec<T>, HarnessError> {
            list.split(',')
                .map(|s| s.trim().parse().map_err(|_| HarnessError::Config(format!("bad axis point `{s}`"))))
                .collect()
        }
        let axis = match name {
            "alpha" => Axis::Alpha(parse(list)?),
            "channels" => Axis::Channels(parse(list)?),
            "sensors" => Axis::Sensors(parse(list)?),
            "size" => Axis::Size(parse(list)?),
            "beta" => Axis::Beta(parse(list)?),
            _ => return Err(HarnessError::Config(format!("unknown axis `{name}`"))),
        };
        Ok(axis)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Alpha(_) => "alpha",
            Axis::Channels(_) => "channels",
            Axis::Sensors(_) => "sensors",
            Axis::Size(_) => "size",
            Axis::Beta(_) => "beta",
        }
    }

    fn len(&self) -> usize {
        match self {
            Axis::Alpha(v) | Axis::Channels(v) | Axis::Beta(v) => v.len(),
            Axis::Sensors(v) => v.len(),
            Axis::Size(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub sensors: usize,
    pub area_side: f64,
    pub range: f64,
    pub beta: u32,
    pub alpha_list: Vec<u32>,
    pub channels_list: Vec<u32>,
    pub runs: u32,
    pub seed: u64,
    pub algos: Vec<Algo>,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sensors: 200,
            area_side: 30.0,
            range: 5.0,
            beta: 3,
            alpha_list: vec![4],
            channels_list: vec![2],
            runs: 30,
            seed: 1,
            algos: vec![Algo::Dcas],
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.sensors == 0 || self.runs == 0 || self.beta == 0 {
            return bad("sensors, runs and beta must be at least 1");
        }
        if !(self.area_side > 0.0 && self.range > 0.0) {
            return bad("area side and range must be positive");
        }
        if self.alpha_list.is_empty() || self.alpha_list.contains(&0) {
            return bad("alpha values must be at least 1");
        }
        if self.channels_list.is_empty() || self.channels_list.contains(&0) {
            return bad("channel counts must be at least 1");
        }
        if self.algos.is_empty() {
            return bad("no algorithm selected");
        }
        Ok(())
    }
}

/// How sweep cells are distributed over threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    /// Data-parallel over deployments; sequential when built without the
    /// `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

/// Mean slot count per algorithm and parameter combination.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub algo: Algo,
    pub sensors: usize,
    pub area_side: f64,
    pub beta: u32,
    pub alpha: u32,
    pub channels: u32,
    pub runs: u32,
    pub mean_slots: f64,
}

pub const SUMMARY_HEADER: &str = "algo,sensors,L,beta,alpha,channels,runs,mean_slots";

pub fn write_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.4}\n",
            r.algo, r.sensors, r.area_side, r.beta, r.alpha, r.channels, r.runs, r.mean_slots
        ));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepResult {
    /// Per-seed slot counts for one cell of the sweep, in run order.
    pub fn slots(&self, algo: Algo, sensors: usize, area_side: f64, beta: u32, alpha: u32, channels: u32) -> Vec<u32> {
        self.rows
            .iter()
            .filter(|r| {
                r.algo == algo
                    && r.sensors == sensors
                    && r.area_side == Some(area_side)
                    && r.beta == Some(beta)
                    && r.alpha == alpha
                    && r.channels == channels
            })
            .map(|r| r.slots_used)
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct Site {
    sensors: usize,
    area_side: f64,
    beta: u32,
}

/// Runs every algorithm on every (axis point, alpha, channels) cell over
/// `runs` deployments seeded `seed + r`. Rows come out ordered by axis
/// point, alpha, channels, algorithm and run regardless of `exec`.
pub fn run_sweep(cfg: &ExperimentConfig, axis: &Axis, exec: Execution) -> Result<SweepResult, HarnessError> {
    cfg.check()?;
    if axis.len() == 0 {
        return Err(HarnessError::Config(format!("axis `{}` has no points", axis.name())));
    }
    let base = Site {
        sensors: cfg.sensors,
        area_side: cfg.area_side,
        beta: cfg.beta,
    };
    let mut alphas = cfg.alpha_list.clone();
    let mut channels = cfg.channels_list.clone();
    let sites: Vec<Site> = match axis {
        Axis::Alpha(v) => {
            alphas = v.clone();
            vec![base]
        }
        Axis::Channels(v) => {
            channels = v.clone();
            vec![base]
        }
        Axis::Sensors(v) => v.iter().map(|&sensors| Site { sensors, ..base }).collect(),
        Axis::Size(v) => v.iter().map(|&area_side| Site { area_side, ..base }).collect(),
        Axis::Beta(v) => v.iter().map(|&beta| Site { beta, ..base }).collect(),
    };
    let probe = ExperimentConfig {
        alpha_list: alphas.clone(),
        channels_list: channels.clone(),
        sensors: sites.iter().map(|s| s.sensors).min().unwrap_or(0),
        beta: sites.iter().map(|s| s.beta).min().unwrap_or(0),
        area_side: sites.iter().map(|s| s.area_side).fold(f64::INFINITY, f64::min),
        ..cfg.clone()
    };
    probe.check()?;

    // one work item per deployment; each yields its rows in cell order
    let jobs: Vec<(usize, u32)> = (0..sites.len())
        .flat_map(|i| (0..cfg.runs).map(move |r| (i, r)))
        .collect();
    let work = |&(i, r): &(usize, u32)| -> Result<Vec<ResultRow>, HarnessError> {
        let site = sites[i];
        let seed = cfg.seed.wrapping_add(u64::from(r));
        let params = DeploymentParams::new(site.sensors, site.area_side, cfg.range, site.beta);
        let w = random_unit_disk_deployment(&params, seed).map_err(|source| HarnessError::Topology {
            sensors: site.sensors,
            area_side: site.area_side,
            beta: site.beta,
            seed,
            source,
        })?;
        let meta = Deployment {
            area_side: Some(site.area_side),
            beta: Some(site.beta),
        };
        let mut rows = Vec::new();
        for &alpha in &alphas {
            for &ch in &channels {
                for &algo in &cfg.algos {
                    let mut spec = RunSpec::new(algo, alpha, ch, seed);
                    spec.timing = cfg.timing;
                    rows.push(run_single(&w, meta, &spec)?.row);
                }
            }
        }
        Ok(rows)
    };
    let per_job: Vec<Vec<ResultRow>> = map_jobs(&jobs, exec, work)?;

    // reorder from (site, run, cell) to (site, cell, run)
    let cells = alphas.len() * channels.len() * cfg.algos.len();
    let runs = cfg.runs as usize;
    let mut rows = Vec::with_capacity(per_job.len() * cells);
    let mut summary = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        #[allow(clippy::needless_range_loop)]
        for c in 0..cells {
            let cell: Vec<&ResultRow> = (0..runs).map(|r| &per_job[i * runs + r][c]).collect();
            let first = cell[0];
            let total: u64 = cell.iter().map(|r| u64::from(r.slots_used)).sum();
            summary.push(SummaryRow {
                algo: first.algo,
                sensors: site.sensors,
                area_side: site.area_side,
                beta: site.beta,
                alpha: first.alpha,
                channels: first.channels,
                runs: cfg.runs,
                mean_slots: total as f64 / runs as f64,
            });
            rows.extend(cell.into_iter().cloned());
        }
    }
    Ok(SweepResult { rows, summary })
}

#[cfg(feature = "parallel")]
fn map_jobs<J, T, F>(jobs: &[J], exec: Execution, f: F) -> Result<Vec<T>, HarnessError>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T, HarnessError> + Sync,
{
    use rayon::prelude::*;
    match exec {
        Execution::Parallel => jobs.par_iter().map(&f).collect(),
        Execution::Sequential => jobs.iter().map(&f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<J, T, F>(jobs: &[J], _exec: Execution, f: F) -> Result<Vec<T>, HarnessError>
where
    F: Fn(&J) -> Result<T, HarnessError>,
{
    jobs.iter().map(f).collect()
}
