//! Exact event-level simulation of the `N`-dimensional Hawkes system
//!
//! ```text
//! λ_i(t) = μ + N⁻¹ Σ_j θ_ij ∫_{[0,t)} φ(t − s) dZ^j_s
//! ```
//!
//! plus grid sampling of counts and a deterministic conditional-mean oracle.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::kernel::Kernel;
use crate::rng;

pub const DEFAULT_EVENT_CAP: usize = 10_000_000;
pub const ORACLE_MAX_N: usize = 50;

// decay exponent at which lazily stored excitations are folded back to the current time
const RESCALE_EXPONENT: f64 = 200.0;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub graph: InteractionGraph,
    pub mu: f64,
    pub kernel: Kernel,
    pub horizon: f64,
    pub seed: u64,
    pub event_cap: usize,
}

impl SimConfig {
    pub fn new(graph: InteractionGraph, mu: f64, kernel: Kernel, horizon: f64, seed: u64) -> Self {
        SimConfig {
            graph,
            mu,
            kernel,
            horizon,
            seed,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Precondition(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Precondition(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Jump times of every individual on `(0, T]`, each list strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    horizon: f64,
    times: Vec<Vec<f64>>,
    total: usize,
}

impl EventLog {
    pub fn new(horizon: f64, times: Vec<Vec<f64>>) -> Result<Self> {
        for (i, list) in times.iter().enumerate() {
            if list.iter().any(|&s| !(s > 0.0 && s <= horizon)) {
                return Err(Error::Range(format!("individual {i} has an event outside (0, {horizon}]")));
            }
            if list.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Range(format!("individual {i} has non-increasing event times")));
            }
        }
        let total = times.iter().map(Vec::len).sum();
        Ok(EventLog {
            horizon,
            times,
            total,
        })
    }

    fn empty(n: usize, horizon: f64) -> Self {
        EventLog {
            horizon,
            times: vec![Vec::new(); n],
            total: 0,
        }
    }

    fn push(&mut self, i: usize, t: f64) {
        self.times[i].push(t);
        self.total += 1;
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn individuals(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self, i: usize) -> &[f64] {
        &self.times[i]
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `Z^i_t` for every `i`.
    pub fn counts_at(&self, t: f64) -> Vec<u64> {
        self.times
            .iter()
            .map(|list| list.partition_point(|&s| s <= t) as u64)
            .collect()
    }

    /// Mean count over the first `k` individuals at time `t`.
    pub fn mean_count_at(&self, t: f64, k: usize) -> f64 {
        self.times[..k]
            .iter()
            .map(|list| list.partition_point(|&s| s <= t) as f64)
            .sum::<f64>()
            / k as f64
    }
}

/// Cumulative counts of every individual on an increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsGrid {
    times: Vec<f64>,
    n: usize,
    // row-major, n × times.len()
    counts: Vec<u64>,
    mean: Vec<f64>,
}

impl CountsGrid {
    pub fn from_rows(times: Vec<f64>, rows: Vec<Vec<u64>>) -> Result<Self> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Range("grid must be strictly increasing".into()));
        }
        let len = times.len();
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::Range("every row must have one count per grid point".into()));
        }
        if rows.iter().any(|r| r.windows(2).any(|w| w[1] < w[0])) {
            return Err(Error::Range("counts must be nondecreasing in time".into()));
        }
        let n = rows.len();
        let counts: Vec<u64> = rows.into_iter().flatten().collect();
        let mean = (0..len)
            .map(|k| (0..n).map(|i| counts[i * len + k] as f64).sum::<f64>() / n.max(1) as f64)
            .collect();
        Ok(CountsGrid {
            times,
            n,
            counts,
            mean,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn individuals(&self) -> usize {
        self.n
    }

    pub fn count(&self, i: usize, k: usize) -> u64 {
        self.counts[i * self.times.len() + k]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        let len = self.times.len();
        &self.counts[i * len..(i + 1) * len]
    }

    /// `Z̄` over all individuals, per grid point.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Column whose time is within `1e-9` (relative, at least absolute) of `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let k = self.times.partition_point(|&s| s < t - tol);
        (k < self.times.len() && (self.times[k] - t).abs() <= tol).then_some(k)
    }
}

/// Sorts and merges time points closer than `1e-9` relative.
pub fn merge_times(mut times: Vec<f64>) -> Vec<f64> {
    times.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(times.len());
    for t in times {
        match out.last() {
            Some(&last) if (t - last).abs() <= 1e-9 * t.abs().max(1.0) => {}
            _ => out.push(t),
        }
    }
    out
}

pub fn counts_on_grid(log: &EventLog, grid: &[f64]) -> Result<CountsGrid> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Range("grid must be strictly increasing".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&t| !(0.0..=log.horizon).contains(&t)) {
        return Err(Error::Range(format!(
            "grid point {bad} lies outside [0, {}]",
            log.horizon
        )));
    }
    let rows = log
        .times
        .iter()
        .map(|list| grid.iter().map(|&t| list.partition_point(|&s| s <= t) as u64).collect())
        .collect();
    CountsGrid::from_rows(grid.to_vec(), rows)
}

/// Fenwick tree over nonnegative weights with prefix-sum descent.
struct WeightTree {
    tree: Vec<f64>,
    weights: Vec<f64>,
    top: usize,
}

impl WeightTree {
    fn new(n: usize) -> Self {
        WeightTree {
            tree: vec![0.0; n + 1],
            weights: vec![0.0; n],
            top: if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) },
        }
    }

    fn add(&mut self, i: usize, delta: f64) {
        self.weights[i] += delta;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    fn scale_and_rebuild(&mut self, factor: f64) {
        let n = self.weights.len();
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.tree.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            let k = i + 1;
            self.tree[k] += self.weights[i];
            let parent = k + (k & k.wrapping_neg());
            if parent <= n {
                self.tree[parent] += self.tree[k];
            }
        }
    }

    fn total(&self) -> f64 {
        let mut k = self.weights.len();
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k -= k & k.wrapping_neg();
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.weights.len();
        let mut pos = 0;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        if pos < n && self.weights[pos] > 0.0 {
            pos
        } else {
            // rounding pushed the target past the total
            self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
        }
    }
}

/// Exact simulation for the exponential kernel `a·e^{-bt}` by Markovian thinning.
///
/// The excitation carried by source `j` is `E_j(t) = a Σ_{s ∈ Z^j, s<t} e^{-b(t−s)}`; every
/// `E_j` decays by the same factor between events, so they are stored relative to a common
/// reference time and only rescaled when that factor approaches underflow. The total rate
/// `Nμ + N⁻¹ Σ_j outdeg(j)·E_j` is non-increasing between events and serves as the thinning
/// bound. An accepted event is attributed either to the baseline (uniform individual) or to a
/// source `j` drawn with weight `outdeg(j)·E_j` followed by a uniform out-neighbour of `j`,
/// which picks individual `i` with probability `λ_i / Σλ` in `O(log N)`.
///
/// Random draws per candidate, in order: exponential inter-arrival, acceptance uniform, and on
/// acceptance a selection uniform (plus one neighbour index when a source is selected).
pub fn simulate_exponential(cfg: &SimConfig) -> Result<EventLog> {
    cfg.validate()?;
    let (a, b) = match cfg.kernel {
        Kernel::Exponential { amplitude, decay } => (amplitude, decay),
        _ => {
            return Err(Error::UnsupportedKernel(
                "simulate_exponential needs an exponential kernel".into(),
            ))
        }
    };
    let n = cfg.graph.n();
    let nf = n as f64;
    let mu = cfg.mu;
    let baseline = nf * mu;
    let targets = cfg.graph.column_lists();
    let out_degree: Vec<f64> = targets.iter().map(|c| c.len() as f64).collect();

    let mut rng = rng::seeded(cfg.seed);
    let mut log = EventLog::empty(n, cfg.horizon);
    let mut tree = WeightTree::new(n);
    let mut t = 0.0;
    let mut t_ref = 0.0;
    let mut weight_total = 0.0;

    loop {
        let decay = (-b * (t - t_ref)).exp();
        let bound = baseline + decay * weight_total / nf;
        let gap: f64 = rng.sample(Exp1);
        let candidate = t + gap / bound;
        if candidate > cfg.horizon {
            break;
        }
        let accept: f64 = rng.random();
        t = candidate;
        let decay = (-b * (t - t_ref)).exp();
        let rate = baseline + decay * weight_total / nf;
        if accept * bound <= rate {
            let pick = rng.random::<f64>() * rate;
            let i = if pick < baseline || weight_total <= 0.0 {
                ((pick / mu) as usize).min(n - 1)
            } else {
                let j = tree.find((pick - baseline) * nf / decay);
                let list = &targets[j];
                list[rng.random_range(0..list.len())] as usize
            };
            if log.total >= cfg.event_cap {
                return Err(Error::Explosion {
                    cap: cfg.event_cap,
                    time: t,
                    partial: Box::new(log),
                });
            }
            log.push(i, t);
            if out_degree[i] > 0.0 {
                let w = out_degree[i] * a / decay;
                tree.add(i, w);
                weight_total += w;
            }
        }
        if b * (t - t_ref) > RESCALE_EXPONENT {
            let factor = (-b * (t - t_ref)).exp();
            tree.scale_and_rebuild(factor);
            weight_total = tree.total();
            t_ref = t;
        }
    }
    Ok(log)
}

/// Thinning with intensities recomputed from the full history at every candidate.
///
/// Valid for any non-increasing kernel: the total rate just after the last event bounds
/// the rate until the next one. Cost per candidate is `O(history + N²)`; intended for
/// small systems and cross-checks.
pub fn simulate_thinning_general(cfg: &SimConfig) -> Result<EventLog> {
    cfg.validate()?;
    if !cfg.kernel.is_non_increasing() {
        return Err(Error::UnsupportedKernel("kernel must be non-increasing".into()));
    }
    let n = cfg.graph.n();
    let nf = n as f64;
    let targets = cfg.graph.column_lists();
    let mut rng = rng::seeded(cfg.seed);
    let mut log = EventLog::empty(n, cfg.horizon);
    let mut t = 0.0;
    let mut source = vec![0.0; n];
    let mut rates = vec![0.0; n];

    let total_rate = |log: &EventLog, at: f64, source: &mut [f64], rates: &mut [f64]| -> f64 {
        for (j, list) in log.times.iter().enumerate() {
            source[j] = list.iter().map(|&s| cfg.kernel.value(at - s)).sum();
        }
        rates.iter_mut().for_each(|r| *r = cfg.mu);
        for (j, list) in targets.iter().enumerate() {
            let x = source[j] / nf;
            for &i in list {
                rates[i as usize] += x;
            }
        }
        rates.iter().sum()
    };

    loop {
        let bound = total_rate(&log, t, &mut source, &mut rates);
        let gap: f64 = rng.sample(Exp1);
        let candidate = t + gap / bound;
        if candidate > cfg.horizon {
            break;
        }
        let accept: f64 = rng.random();
        t = candidate;
        let rate = total_rate(&log, t, &mut source, &mut rates);
        if accept * bound <= rate {
            let mut pick = rng.random::<f64>() * rate;
            let mut i = n - 1;
            for (idx, r) in rates.iter().enumerate() {
                if pick < *r {
                    i = idx;
                    break;
                }
                pick -= r;
            }
            if log.total >= cfg.event_cap {
                return Err(Error::Explosion {
                    cap: cfg.event_cap,
                    time: t,
                    partial: Box::new(log),
                });
            }
            log.push(i, t);
        }
    }
    Ok(log)
}

/// `E_θ[Z^i_t]` on `grid` for a fixed graph and exponential kernel.
///
/// With `h_j(t) = ∫ a e^{-b(t−s)} dm_j(s)` the mean counts solve the linear system
/// `m' = μ𝟏 + A_N h`, `h' = a m' − b h`, integrated by classical RK4 with at most
/// `max_step` per step.
pub fn conditional_mean_oracle(
    graph: &InteractionGraph,
    mu: f64,
    kernel: &Kernel,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    conditional_mean_oracle_with_step(graph, mu, kernel, grid, 1e-3)
}

pub fn conditional_mean_oracle_with_step(
    graph: &InteractionGraph,
    mu: f64,
    kernel: &Kernel,
    grid: &[f64],
    max_step: f64,
) -> Result<Vec<Vec<f64>>> {
    let n = graph.n();
    if n > ORACLE_MAX_N {
        return Err(Error::Scale(n));
    }
    let (a, b) = match *kernel {
        Kernel::Exponential { amplitude, decay } => (amplitude, decay),
        _ => return Err(Error::UnsupportedKernel("oracle needs an exponential kernel".into())),
    };
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Range("grid must be nonnegative and strictly increasing".into()));
    }
    let adjacency = graph.dense_scaled(1.0 / n as f64);
    // state = (m, h)
    let deriv = |state: &[f64], out: &mut [f64]| {
        let (m_dot, h_dot) = out.split_at_mut(n);
        let h = &state[n..];
        for i in 0..n {
            let feed: f64 = adjacency[i * n..(i + 1) * n].iter().zip(h).map(|(x, y)| x * y).sum();
            m_dot[i] = mu + feed;
        }
        for i in 0..n {
            h_dot[i] = a * m_dot[i] - b * h[i];
        }
    };

    let mut state = vec![0.0; 2 * n];
    let mut k1 = vec![0.0; 2 * n];
    let mut k2 = vec![0.0; 2 * n];
    let mut k3 = vec![0.0; 2 * n];
    let mut k4 = vec![0.0; 2 * n];
    let mut tmp = vec![0.0; 2 * n];
    let mut out = vec![Vec::with_capacity(grid.len()); n];
    let mut t = 0.0;
    for &target in grid {
        let span = target - t;
        let steps = (span / max_step).ceil().max(if span > 0.0 { 1.0 } else { 0.0 }) as usize;
        let dt = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            deriv(&state, &mut k1);
            for c in 0..2 * n {
                tmp[c] = state[c] + 0.5 * dt * k1[c];
            }
            deriv(&tmp, &mut k2);
            for c in 0..2 * n {
                tmp[c] = state[c] + 0.5 * dt * k2[c];
            }
            deriv(&tmp, &mut k3);
            for c in 0..2 * n {
                tmp[c] = state[c] + dt * k3[c];
            }
            deriv(&tmp, &mut k4);
            for c in 0..2 * n {
                state[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        t = target;
        for (i, row) in out.iter_mut().enumerate() {
            row.push(state[i]);
        }
    }
    Ok(out)
}
