//! Command-line front end: flat config parsing, subcommand dispatch and CSV emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use hawkes_core::estimators::PEstimate;
use hawkes_core::experiments::{
    default_time_grid, delta_sweep, estimate_at, gaussian_toy, horizon_for_target_count,
    limit_quartiles, run_monte_carlo, scheduled_delta, simulate_replica, LimitConfig, ToyConfig,
};
use hawkes_core::simulator::{counts_on_grid, EventLog};

use config::{Assignments, RunConfig};
use output::{format_f64, write_csv, write_manifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] hawkes_core::Error),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.category(),
        }
    }

    /// 1 config, 2 domain or regime, 3 convergence or explosion, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 1,
            "io" => 4,
            "convergence" | "explosion" => 3,
            _ => 2,
        }
    }

    /// Single-line `error:<category>: <message>`.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error:{}: {msg}", self.category())
    }
}

#[derive(Debug, Parser)]
#[command(name = "hawkes-density", version, about = "Estimate the connection density of a Hawkes system on a random graph")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the file and --set.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// key=value override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate one replica; writes events.csv and counts.csv.
    Simulate,
    /// Estimate p along the time grid for one replica (or an events file).
    Estimate,
    /// Quartile traces of p̂_t − p over replicas; writes summary.csv.
    Mc,
    /// Quartiles of the conjectured graph-only limits; writes limits.csv.
    Limits,
    /// Quartiles of the subcritical estimator across windows; writes sweep.csv.
    Sweep,
    /// Gaussian toy model variance check; writes toy.csv.
    Toy,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Mc => "mc",
            Command::Limits => "limits",
            Command::Sweep => "sweep",
            Command::Toy => "toy",
        }
    }
}

pub fn parse_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut a = match &cli.config {
        Some(path) => Assignments::read(path)?,
        None => Assignments::default(),
    };
    a.apply(&cli.set)?;
    if let Some(seed) = cli.seed {
        a.set("seed", seed.to_string());
    }
    a.into_config()
}

/// Parses `args` (program name first) and runs the selected subcommand.
pub fn run_from_args<I, S>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        CliError::Config(e.to_string().lines().next().unwrap_or("invalid arguments").to_string())
    })?;
    run(&cli)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = parse_config(cli)?;
    dispatch(cli.command, &cfg, &cli.out)
}

type Extra = Vec<(String, String)>;

pub fn dispatch(command: Command, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let (horizon, extra) = match command {
        Command::Simulate => simulate(cfg, out)?,
        Command::Estimate => estimate(cfg, out)?,
        Command::Mc => mc(cfg, out)?,
        Command::Limits => (None, limits(cfg, out)?),
        Command::Sweep => sweep(cfg, out)?,
        Command::Toy => (None, toy(cfg, out)?),
    };
    write_manifest(&out.join("manifest.txt"), command.name(), &cfg.echo(horizon), &extra)
}

/// Configured `T`, or the pilot-refined horizon reaching the target mean count.
fn resolve_horizon(cfg: &RunConfig) -> Result<(f64, Extra), CliError> {
    if let Some(t) = cfg.horizon {
        return Ok((t, Vec::new()));
    }
    let search = horizon_for_target_count(&cfg.experiment(1.0), cfg.target)?;
    Ok((
        search.horizon,
        vec![
            ("horizon.analytic".into(), format_f64(search.analytic)),
            ("horizon.pilot_mean".into(), format_f64(search.pilot_mean)),
        ],
    ))
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<(Option<f64>, Extra), CliError> {
    let (horizon, extra) = resolve_horizon(cfg)?;
    let rep = simulate_replica(&cfg.experiment(horizon), cfg.replica)?;
    let mut events = Vec::with_capacity(rep.log.total());
    for i in 0..rep.log.individuals() {
        for &t in rep.log.times(i) {
            events.push(vec![cfg.replica.to_string(), i.to_string(), format_f64(t)]);
        }
    }
    write_csv(&out.join("events.csv"), &["replica", "individual", "time"], &events)?;
    write_counts(&rep.log, &default_time_grid(horizon), &out.join("counts.csv"))?;
    Ok((Some(horizon), extra))
}

fn write_counts(log: &EventLog, grid: &[f64], path: &Path) -> Result<(), CliError> {
    let counts = counts_on_grid(log, grid)?;
    let mut rows = Vec::new();
    for (c, &t) in counts.times().iter().enumerate() {
        for i in 0..counts.individuals() {
            rows.push(vec![format_f64(t), i.to_string(), counts.count(i, c).to_string()]);
        }
    }
    write_csv(path, &["time", "individual", "count"], &rows)
}

/// Events of one replica from a `replica,individual,time` file.
pub fn read_events(path: &Path, replica: u64, n: usize, horizon: f64) -> Result<EventLog, CliError> {
    let io = |e: &dyn std::fmt::Display| CliError::Io(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| io(&e))?;
    let headers = reader.headers().map_err(|e| io(&e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["replica", "individual", "time"] {
        return Err(io(&"expected header replica,individual,time"));
    }
    let mut times = vec![Vec::new(); n];
    for record in reader.records() {
        let record = record.map_err(|e| io(&e))?;
        let field = |k: usize| record.get(k).unwrap_or("");
        let r: u64 = field(0).parse().map_err(|e| io(&e))?;
        if r != replica {
            continue;
        }
        let i: usize = field(1).parse().map_err(|e| io(&e))?;
        let t: f64 = field(2).parse().map_err(|e| io(&e))?;
        if i >= n {
            return Err(io(&format!("individual {i} outside 0..{n}")));
        }
        times[i].push(t);
    }
    for row in &mut times {
        row.sort_by(f64::total_cmp);
    }
    Ok(EventLog::new(horizon, times)?)
}

pub const ESTIMATE_HEADER: [&str; 12] = [
    "t",
    "regime",
    "E",
    "V",
    "W",
    "U",
    "P",
    "mu_hat",
    "lambda_hat",
    "p_hat",
    "low_count_flag",
    "in_domain",
];

fn estimate_row(t: f64, est: Result<PEstimate, hawkes_core::Error>) -> Vec<String> {
    let f = format_f64;
    let nan = f(f64::NAN);
    match est {
        Ok(e) => {
            let (ev, params) = match &e.sub {
                Some(s) => ([s.sub.e, s.sub.v, s.sub.w], Some(s.practical)),
                None => ([f64::NAN; 3], None),
            };
            vec![
                f(t),
                e.decision.regime.to_string(),
                f(ev[0]),
                f(ev[1]),
                f(ev[2]),
                f(e.sup.u),
                f(e.sup.p),
                params.map(|x| f(x.mu_hat)).unwrap_or_else(|| nan.clone()),
                params.map(|x| f(x.lambda_hat)).unwrap_or_else(|| nan.clone()),
                f(e.p_hat),
                e.sup.low_count_flag.to_string(),
                params.map(|x| x.in_domain).unwrap_or(false).to_string(),
            ]
        }
        Err(_) => {
            let mut row = vec![f(t), "none".to_string()];
            row.extend(std::iter::repeat_n(nan, 8));
            row.extend(["false".to_string(), "false".to_string()]);
            row
        }
    }
}

fn estimate(cfg: &RunConfig, out: &Path) -> Result<(Option<f64>, Extra), CliError> {
    let (horizon, extra, log) = match &cfg.events {
        Some(path) => {
            let horizon = cfg
                .horizon
                .ok_or_else(|| CliError::Config("T: required when events is set".into()))?;
            let log = read_events(Path::new(path), cfg.replica, cfg.n, horizon)?;
            (horizon, Vec::new(), log)
        }
        None => {
            let (horizon, extra) = resolve_horizon(cfg)?;
            let log = simulate_replica(&cfg.experiment(horizon), cfg.replica)?.log;
            (horizon, extra, log)
        }
    };
    let rows: Vec<Vec<String>> = default_time_grid(horizon)
        .into_iter()
        .map(|t| estimate_row(t, estimate_at(&log, t, cfg.k, cfg.q)))
        .collect();
    write_csv(&out.join("estimates.csv"), &ESTIMATE_HEADER, &rows)?;
    Ok((Some(horizon), extra))
}

fn mc(cfg: &RunConfig, out: &Path) -> Result<(Option<f64>, Extra), CliError> {
    let (horizon, extra) = resolve_horizon(cfg)?;
    let summary = run_monte_carlo(&cfg.experiment(horizon), &default_time_grid(horizon), cfg.replicas)?;
    let rows: Vec<Vec<String>> = summary
        .points
        .iter()
        .map(|pt| {
            vec![
                format_f64(pt.t),
                format_f64(pt.quartiles.q25),
                format_f64(pt.quartiles.q50),
                format_f64(pt.quartiles.q75),
                format_f64(pt.good_fraction),
                summary.replicas.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("summary.csv"),
        &["t", "q25", "q50", "q75", "good_fraction", "replicas"],
        &rows,
    )?;
    Ok((Some(horizon), extra))
}

fn limits(cfg: &RunConfig, out: &Path) -> Result<Extra, CliError> {
    let summary = limit_quartiles(&LimitConfig {
        n: cfg.n,
        k: cfg.k,
        p: cfg.p,
        lambda: cfg.kernel_a / cfg.kernel_b,
        mu: cfg.mu,
        mode: cfg.mode,
        graphs: cfg.limit_graphs,
        seed: cfg.seed,
    })?;
    let q = summary.quartiles;
    write_csv(
        &out.join("limits.csv"),
        &["regime", "q25", "q50", "q75", "graphs", "rejected"],
        &[vec![
            summary.regime.to_string(),
            format_f64(q.q25),
            format_f64(q.q50),
            format_f64(q.q75),
            summary.errors.len().to_string(),
            summary.rejected.to_string(),
        ]],
    )?;
    let values: Vec<Vec<String>> = summary
        .errors
        .iter()
        .enumerate()
        .map(|(g, e)| vec![g.to_string(), format_f64(*e)])
        .collect();
    write_csv(&out.join("limit_values.csv"), &["graph", "error"], &values)?;
    Ok(Vec::new())
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<(Option<f64>, Extra), CliError> {
    let (horizon, mut extra) = resolve_horizon(cfg)?;
    let exp = cfg.experiment(horizon);
    let rows = delta_sweep(&exp, &cfg.sweep_deltas, cfg.replicas)?;
    let snapped: Vec<String> = rows.iter().map(|r| format_f64(r.delta)).collect();
    extra.push(("sweep.snapped".into(), snapped.join(",")));
    extra.push(("sweep.scheduled".into(), format_f64(scheduled_delta(&exp)?)));
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format_f64(r.delta),
                format_f64(r.quartiles.q25),
                format_f64(r.quartiles.q50),
                format_f64(r.quartiles.q75),
            ]
        })
        .collect();
    write_csv(&out.join("sweep.csv"), &["delta", "q25", "q50", "q75"], &records)?;
    Ok((Some(horizon), extra))
}

fn toy(cfg: &RunConfig, out: &Path) -> Result<Extra, CliError> {
    let r = gaussian_toy(
        &ToyConfig {
            gamma: cfg.toy_gamma,
            p: cfg.p,
            n: cfg.toy_n,
            m_t: cfg.toy_m_t,
            replicas: cfg.toy_replicas,
        },
        cfg.seed,
    )?;
    write_csv(
        &out.join("toy.csv"),
        &["empirical", "formula", "relative_error"],
        &[vec![
            format_f64(r.empirical),
            format_f64(r.formula),
            format_f64((r.empirical - r.formula).abs() / r.formula),
        ]],
    )?;
    Ok(Vec::new())
}
