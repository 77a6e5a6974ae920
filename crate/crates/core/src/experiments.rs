//! Monte Carlo harnesses: quartile traces of `p̂_t − p`, quartiles of the graph-only limits,
//! horizon search, window sweeps, and the Gaussian toy model.
//!
//! Replicas run on the rayon pool. Each replica owns the random stream
//! `(seed, replica index)` and results are gathered in index order, so every summary
//! is identical whatever the number of worker threads.

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    delta_schedule, estimate_p, estimate_subcritical_with_delta, estimation_times, lattice_times,
    PEstimate, Regime, DEFAULT_Q,
};
use crate::graph::{conjectured_sub_limit, conjectured_sup_limit, GraphMode, InteractionGraph};
use crate::kernel::Kernel;
use crate::rng::{self, FIXED_GRAPH_STREAM, PILOT_STREAM};
use crate::simulator::{
    counts_on_grid, merge_times, simulate_exponential, simulate_thinning_general, EventLog,
    SimConfig, DEFAULT_EVENT_CAP,
};
use crate::stats::{quartiles, variance, Quartiles};

pub const DEFAULT_GRID_POINTS: usize = 50;
pub const DEFAULT_TARGET_COUNT: f64 = 3000.0;
/// Relative tolerance of the pilot bisection in `horizon_for_target_count`.
pub const HORIZON_TOLERANCE: f64 = 0.01;
/// Largest tolerated fraction of rejected graphs in `limit_quartiles`.
pub const MAX_REJECTION_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphPolicy {
    /// Fresh graph per replica: quartiles are unconditional in `θ`.
    Resample,
    /// One graph shared by all replicas.
    Fixed,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub mu: f64,
    pub kernel: Kernel,
    pub mode: GraphMode,
    pub horizon: f64,
    pub q: f64,
    pub seed: u64,
    pub graph_policy: GraphPolicy,
    pub event_cap: usize,
}

impl ExperimentConfig {
    /// `K = N`, `μ = 1`, `q = 12`, independent graphs resampled per replica.
    pub fn new(n: usize, p: f64, kernel: Kernel, horizon: f64) -> Self {
        ExperimentConfig {
            n,
            k: n,
            p,
            mu: 1.0,
            kernel,
            mode: GraphMode::Independent,
            horizon,
            q: DEFAULT_Q,
            seed: 0,
            graph_policy: GraphPolicy::Resample,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.kernel.total_mass()
    }

    /// The regime implied by `Λp`; `None` at criticality.
    pub fn true_regime(&self) -> Option<Regime> {
        let r = self.lambda() * self.p;
        if r < 1.0 {
            Some(Regime::Subcritical)
        } else if r > 1.0 {
            Some(Regime::Supercritical)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return Err(Error::Precondition(format!(
                "need 1 <= K <= N, got K = {}, N = {}",
                self.k, self.n
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Precondition(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if !(self.mu > 0.0) {
            return Err(Error::Precondition(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Precondition(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.q > 3.0) {
            return Err(Error::Precondition(format!("q must exceed 3, got {}", self.q)));
        }
        Ok(())
    }

    fn with_horizon(&self, horizon: f64) -> Self {
        ExperimentConfig {
            horizon,
            ..self.clone()
        }
    }
}

pub struct Replica {
    pub index: u64,
    pub graph: InteractionGraph,
    pub log: EventLog,
}

fn simulate(cfg: &SimConfig) -> Result<EventLog> {
    if cfg.kernel.is_exponential() {
        simulate_exponential(cfg)
    } else {
        simulate_thinning_general(cfg)
    }
}

/// Graph and event-stream seed of replica `index`, both drawn from stream `(seed, index)`.
pub fn replica_inputs(cfg: &ExperimentConfig, index: u64) -> Result<(InteractionGraph, u64)> {
    let mut stream = rng::stream(cfg.seed, index);
    let graph = match cfg.graph_policy {
        GraphPolicy::Resample => InteractionGraph::sample(cfg.n, cfg.p, cfg.mode, &mut stream)?,
        GraphPolicy::Fixed => {
            let mut fixed = rng::stream(cfg.seed, FIXED_GRAPH_STREAM);
            InteractionGraph::sample(cfg.n, cfg.p, cfg.mode, &mut fixed)?
        }
    };
    Ok((graph, stream.next_u64()))
}

pub fn simulate_replica(cfg: &ExperimentConfig, index: u64) -> Result<Replica> {
    cfg.validate()?;
    let (graph, seed) = replica_inputs(cfg, index)?;
    let sim = SimConfig {
        graph,
        mu: cfg.mu,
        kernel: cfg.kernel.clone(),
        horizon: cfg.horizon,
        seed,
        event_cap: cfg.event_cap,
    };
    let log = simulate(&sim)?;
    Ok(Replica {
        index,
        graph: sim.graph,
        log,
    })
}

/// Runs `replicas` independent replicas and maps each through `f`, in index order.
pub fn map_replicas<T, F>(cfg: &ExperimentConfig, replicas: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Replica) -> Result<T> + Sync,
{
    cfg.validate()?;
    if replicas == 0 {
        return Err(Error::Precondition("replica count must be positive".into()));
    }
    (0..replicas as u64)
        .into_par_iter()
        .map(|index| simulate_replica(cfg, index).and_then(|r| f(&r)))
        .collect()
}

/// `p̂` at time `t` from an event log observed on `[0, t]`.
pub fn estimate_at(log: &EventLog, t: f64, k: usize, q: f64) -> Result<PEstimate> {
    let counts = counts_on_grid(log, &estimation_times(t, q))?;
    estimate_p(&counts, t, k, log.individuals(), q)
}

/// `DEFAULT_GRID_POINTS` uniform points ending at `T`, starting at `max(T/50, min(2, T))`.
///
/// The lower end keeps every point at `t ≥ 2` when `T` allows it, which is where the
/// subcritical window schedule is defined.
pub fn default_time_grid(horizon: f64) -> Vec<f64> {
    let start = (horizon / DEFAULT_GRID_POINTS as f64).max(horizon.min(2.0));
    let last = DEFAULT_GRID_POINTS - 1;
    (0..DEFAULT_GRID_POINTS)
        .map(|j| {
            if j == last {
                horizon
            } else {
                start + (horizon - start) * j as f64 / last as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct McPoint {
    pub t: f64,
    pub quartiles: Quartiles,
    /// Fraction of replicas where the detector chose the branch matching `Λp`.
    pub good_fraction: f64,
    /// Replicas whose estimate at this `t` was finite.
    pub valid: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCSummary {
    pub points: Vec<McPoint>,
    pub replicas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TraceValue {
    error: f64,
    good: bool,
}

pub fn run_monte_carlo(cfg: &ExperimentConfig, grid: &[f64], replicas: usize) -> Result<MCSummary> {
    if let Some(&bad) = grid.iter().find(|&&t| !(t > 0.0 && t <= cfg.horizon)) {
        return Err(Error::Range(format!("grid point {bad} outside (0, {}]", cfg.horizon)));
    }
    let truth = cfg.true_regime();
    let traces = map_replicas(cfg, replicas, |rep| {
        Ok(grid
            .iter()
            .map(|&t| match estimate_at(&rep.log, t, cfg.k, cfg.q) {
                Ok(est) => TraceValue {
                    error: est.p_hat - cfg.p,
                    good: Some(est.decision.regime) == truth,
                },
                Err(_) => TraceValue {
                    error: f64::NAN,
                    good: false,
                },
            })
            .collect::<Vec<_>>())
    })?;
    let points = grid
        .iter()
        .enumerate()
        .map(|(c, &t)| {
            let errors: Vec<f64> = traces.iter().map(|tr| tr[c].error).collect();
            let good = traces.iter().filter(|tr| tr[c].good).count();
            McPoint {
                t,
                quartiles: quartiles(&errors),
                good_fraction: good as f64 / replicas as f64,
                valid: errors.iter().filter(|e| e.is_finite()).count(),
            }
        })
        .collect();
    Ok(MCSummary { points, replicas })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonSearch {
    pub analytic: f64,
    pub horizon: f64,
    pub pilot_mean: f64,
    pub pilots: usize,
}

/// `target·(1−Λp)/μ` in the subcritical regime, `log(target)/α₀` in the supercritical one.
pub fn analytic_horizon(cfg: &ExperimentConfig, target: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Precondition(format!("target count must be positive, got {target}")));
    }
    match cfg.true_regime() {
        Some(Regime::Subcritical) => Ok(target * (1.0 - cfg.lambda() * cfg.p) / cfg.mu),
        Some(Regime::Supercritical) => Ok(target.ln() / cfg.kernel.growth_exponent(cfg.p)?),
        None => Err(Error::Precondition("no analytic horizon at criticality Λp = 1".into())),
    }
}

/// Analytic seed refined on one pilot path.
///
/// The pilot uses a fixed stream, so paths for different horizons share their prefix and
/// `Z̄ᴷ_T` is nondecreasing in `T`; the search bisects on that path until `Z̄ᴷ_T` is within
/// `HORIZON_TOLERANCE` of the target.
pub fn horizon_for_target_count(cfg: &ExperimentConfig, target: f64) -> Result<HorizonSearch> {
    let analytic = analytic_horizon(cfg, target)?;
    let mut pilots = 0;
    let mut hi = analytic;
    let log = loop {
        pilots += 1;
        let rep = simulate_replica(&cfg.with_horizon(hi), PILOT_STREAM)?;
        if rep.log.mean_count_at(hi, cfg.k) >= target || pilots >= 30 {
            break rep.log;
        }
        hi *= 1.5;
    };
    let mean_at = |t: f64| log.mean_count_at(t, cfg.k);
    let (mut lo, mut hi) = (0.0, hi);
    let mut horizon = hi;
    for _ in 0..200 {
        let rel = (mean_at(horizon) - target).abs() / target;
        if rel <= HORIZON_TOLERANCE {
            break;
        }
        if mean_at(horizon) > target {
            hi = horizon;
        } else {
            lo = horizon;
        }
        horizon = 0.5 * (lo + hi);
    }
    Ok(HorizonSearch {
        analytic,
        horizon,
        pilot_mean: mean_at(horizon),
        pilots,
    })
}

#[derive(Debug, Clone)]
pub struct LimitConfig {
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub lambda: f64,
    pub mu: f64,
    pub mode: GraphMode,
    pub graphs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSummary {
    pub regime: Regime,
    pub quartiles: Quartiles,
    /// `P∞ − p` for every accepted graph, in stream order.
    pub errors: Vec<f64>,
    pub rejected: usize,
}

/// Quartiles of `P∞ − p` over sampled graphs.
///
/// Graphs on which the limit is undefined (non-positive resolvent, reducible `A_N²`,
/// degenerate `Φ`) are rejected and replaced by further draws; more than
/// `MAX_REJECTION_RATE` rejections is reported as a configuration problem.
pub fn limit_quartiles(cfg: &LimitConfig) -> Result<LimitSummary> {
    if cfg.graphs == 0 || cfg.k == 0 || cfg.k > cfg.n {
        return Err(Error::Precondition("need graphs >= 1 and 1 <= K <= N".into()));
    }
    let criticality = cfg.lambda * cfg.p;
    let regime = if criticality < 1.0 {
        Regime::Subcritical
    } else if criticality > 1.0 {
        Regime::Supercritical
    } else {
        return Err(Error::Precondition("no conjectured limit at Λp = 1".into()));
    };
    let evaluate = |attempt: u64| -> Result<Option<f64>> {
        let mut stream = rng::stream(cfg.seed, attempt);
        let g = InteractionGraph::sample(cfg.n, cfg.p, cfg.mode, &mut stream)?;
        let value = match regime {
            Regime::Subcritical => conjectured_sub_limit(&g, cfg.lambda, cfg.mu, cfg.k).map(|s| s.p),
            Regime::Supercritical => conjectured_sup_limit(&g, cfg.k),
        };
        match value {
            Ok(v) => Ok(Some(v - cfg.p)),
            Err(
                Error::NotSubcriticalGraph(_)
                | Error::Singular
                | Error::Degenerate(_)
                | Error::NotIrreducible(_)
                | Error::Convergence { .. },
            ) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let mut errors = Vec::with_capacity(cfg.graphs);
    let mut rejected = 0;
    let mut next = 0u64;
    while errors.len() < cfg.graphs {
        let batch = (cfg.graphs - errors.len()) as u64;
        let results = (next..next + batch)
            .into_par_iter()
            .map(evaluate)
            .collect::<Result<Vec<_>>>()?;
        next += batch;
        for r in results {
            match r {
                Some(v) => errors.push(v),
                None => rejected += 1,
            }
        }
        if rejected as f64 > MAX_REJECTION_RATE * next as f64 {
            return Err(Error::ConfigWarning(format!(
                "{rejected} of {next} sampled graphs admit no limit"
            )));
        }
    }
    Ok(LimitSummary {
        regime,
        quartiles: quartiles(&errors),
        errors,
        rejected,
    })
}

/// Nearest admissible window `t/(2m)`, `m ∈ ℕ*`.
pub fn snap_delta(t: f64, delta: f64) -> f64 {
    let m = (t / (2.0 * delta)).round().max(1.0);
    t / (2.0 * m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub requested: f64,
    pub delta: f64,
    pub quartiles: Quartiles,
}

/// Quartiles of `P^sub_{Δ,T} − p` for each window, reusing one simulated path per replica.
pub fn delta_sweep(cfg: &ExperimentConfig, deltas: &[f64], replicas: usize) -> Result<Vec<SweepRow>> {
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Precondition("windows must be positive".into()));
    }
    let t = cfg.horizon / 2.0;
    let snapped: Vec<f64> = deltas.iter().map(|&d| snap_delta(t, d)).collect();
    let mut times = Vec::new();
    for &d in &snapped {
        times.extend(lattice_times(t, d)?);
    }
    let times = merge_times(times);
    let per_replica = map_replicas(cfg, replicas, |rep| {
        let counts = counts_on_grid(&rep.log, &times)?;
        Ok(snapped
            .iter()
            .map(|&d| {
                estimate_subcritical_with_delta(&counts, cfg.horizon, d, cfg.k, cfg.n)
                    .map(|e| e.practical.p_hat - cfg.p)
                    .unwrap_or(f64::NAN)
            })
            .collect::<Vec<f64>>())
    })?;
    Ok(deltas
        .iter()
        .zip(&snapped)
        .enumerate()
        .map(|(c, (&requested, &delta))| {
            let column: Vec<f64> = per_replica.iter().map(|r| r[c]).collect();
            SweepRow {
                requested,
                delta,
                quartiles: quartiles(&column),
            }
        })
        .collect())
}

/// The schedule window at `T/2`, for reference next to a sweep.
pub fn scheduled_delta(cfg: &ExperimentConfig) -> Result<f64> {
    delta_schedule(cfg.horizon / 2.0, cfg.q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub gamma: f64,
    pub p: f64,
    pub n: usize,
    /// `m_t = ∫₀ᵗ e^{α₀ s} ds`.
    pub m_t: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyResult {
    pub empirical: f64,
    pub formula: f64,
}

/// `Var T = 2(Γp)⁻⁴ (N^{-1/2} Γ² p(1−p) + N^{1/2} m_t⁻¹ Γp)²`.
pub fn toy_variance_formula(cfg: &ToyConfig) -> f64 {
    let gp = cfg.gamma * cfg.p;
    let n = cfg.n as f64;
    let inner = cfg.gamma * cfg.gamma * cfg.p * (1.0 - cfg.p) / n.sqrt() + n.sqrt() * gp / cfg.m_t;
    2.0 * gp.powi(-4) * inner * inner
}

/// Empirical variance of `T = N(Γp)⁻²(S − m_t⁻¹Γp)`, `S = N⁻¹ Σ (X_i − Γp)²`, over
/// replicas of an `N`-sample from `𝒩(Γp, N⁻¹Γ²p(1−p) + m_t⁻¹Γp)`.
pub fn gaussian_toy(cfg: &ToyConfig, seed: u64) -> Result<ToyResult> {
    if !(cfg.gamma > 0.0 && cfg.p > 0.0 && cfg.p <= 1.0 && cfg.m_t > 0.0 && cfg.n > 0) {
        return Err(Error::Precondition("toy model needs Γ > 0, p ∈ (0,1], m_t > 0, N ≥ 1".into()));
    }
    if cfg.replicas < 1000 {
        return Err(Error::Precondition(format!(
            "toy model needs at least 1000 replicas, got {}",
            cfg.replicas
        )));
    }
    let gp = cfg.gamma * cfg.p;
    let n = cfg.n as f64;
    let noise = cfg.gamma * cfg.gamma * cfg.p * (1.0 - cfg.p) / n + gp / cfg.m_t;
    let normal = Normal::new(gp, noise.sqrt()).map_err(|e| Error::Precondition(e.to_string()))?;
    let stats: Vec<f64> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut stream = rng::stream(seed, r);
            let s = (0..cfg.n)
                .map(|_| (normal.sample(&mut stream) - gp).powi(2))
                .sum::<f64>()
                / n;
            n / (gp * gp) * (s - gp / cfg.m_t)
        })
        .collect();
    Ok(ToyResult {
        empirical: variance(&stats),
        formula: toy_variance_formula(cfg),
    })
}
