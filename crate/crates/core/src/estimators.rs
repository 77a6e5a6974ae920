//! Statistics of observed counts that estimate `(μ, Λ, p)`.
//!
//! Only the first `K` of the `N` individuals are assumed observed; `Z̄ᴷ` denotes
//! their mean count. The subcritical route builds the triple `(E, V, W)` on
//! `[t, 2t]` and inverts it through `Φ`; the supercritical route uses the
//! normalized dispersion `U` of the counts at the horizon. A log-count detector
//! picks between them.

use crate::error::{Error, Result};
use crate::simulator::CountsGrid;

pub const DEFAULT_Q: f64 = 12.0;

/// Below this mean count the supercritical statistic is flagged as unreliable.
pub const LOW_COUNT_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubEstimates {
    pub t: f64,
    pub delta: f64,
    pub k: usize,
    pub n: usize,
    pub e: f64,
    pub v: f64,
    pub z_delta: f64,
    pub z_2delta: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamEstimate {
    pub mu_hat: f64,
    pub lambda_hat: f64,
    pub p_hat: f64,
    pub in_domain: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupEstimates {
    pub u: f64,
    pub p: f64,
    pub mean_count: f64,
    pub low_count_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Subcritical,
    Supercritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Subcritical => "subcritical",
            Regime::Supercritical => "supercritical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeDecision {
    pub regime: Regime,
    pub log_mean_count: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubcriticalEstimate {
    pub sub: SubEstimates,
    /// `W − (N−K)/K·E`, signed.
    pub w_corrected: f64,
    /// `Φ` applied to `(E, V, |W − (N−K)/K·E|)`.
    pub practical: ParamEstimate,
    /// `Ψ = 1_D Φ` applied to `(E, V, W − (N−K)/K·E)`.
    pub strict: ParamEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PEstimate {
    pub horizon: f64,
    pub decision: RegimeDecision,
    pub p_hat: f64,
    pub sub: Option<SubcriticalEstimate>,
    pub sup: SupEstimates,
}

fn check_observed(counts: &CountsGrid, k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("observed count K = {k} must lie in 1..={n}")));
    }
    if counts.individuals() < k {
        return Err(Error::Precondition(format!(
            "counts cover {} individuals but K = {k}",
            counts.individuals()
        )));
    }
    Ok(())
}

fn column(counts: &CountsGrid, time: f64) -> Result<usize> {
    counts
        .index_of(time)
        .ok_or_else(|| Error::Range(format!("no count column at t = {time}")))
}

fn observed_mean(counts: &CountsGrid, col: usize, k: usize) -> f64 {
    (0..k).map(|i| counts.count(i, col) as f64).sum::<f64>() / k as f64
}

/// `E = (Z̄ᴷ_{2t} − Z̄ᴷ_t)/t`.
pub fn estimator_e(counts: &CountsGrid, t: f64, k: usize, n: usize) -> Result<f64> {
    check_observed(counts, k, n)?;
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("t must be positive, got {t}")));
    }
    let (c1, c2) = (column(counts, t)?, column(counts, 2.0 * t)?);
    Ok((observed_mean(counts, c2, k) - observed_mean(counts, c1, k)) / t)
}

/// `V = (N/K) Σ_{i≤K} ((Z^i_{2t} − Z^i_t)/t − E)² − (N/t) E`.
pub fn estimator_v(counts: &CountsGrid, t: f64, k: usize, n: usize) -> Result<f64> {
    let e = estimator_e(counts, t, k, n)?;
    let (c1, c2) = (column(counts, t)?, column(counts, 2.0 * t)?);
    let spread: f64 = (0..k)
        .map(|i| {
            let rate = (counts.count(i, c2) as f64 - counts.count(i, c1) as f64) / t;
            (rate - e).powi(2)
        })
        .sum();
    let nf = n as f64;
    Ok(nf / k as f64 * spread - nf / t * e)
}

fn lattice_steps(t: f64, delta: f64) -> Result<usize> {
    if !(t > 0.0 && delta > 0.0) {
        return Err(Error::Schedule(format!("need t > 0 and Δ > 0, got t = {t}, Δ = {delta}")));
    }
    let m = t / (2.0 * delta);
    let rounded = m.round();
    if rounded < 1.0 || (m - rounded).abs() > 1e-9 * m {
        return Err(Error::Schedule(format!("t/(2Δ) = {m} is not a positive integer")));
    }
    Ok(rounded as usize)
}

/// `t, t+Δ, …, 2t`; requires `t/(2Δ) ∈ ℕ*`.
pub fn lattice_times(t: f64, delta: f64) -> Result<Vec<f64>> {
    let m = lattice_steps(t, delta)?;
    let mut times: Vec<f64> = (0..2 * m).map(|j| t + j as f64 * delta).collect();
    times.push(2.0 * t);
    Ok(times)
}

/// `(Z_Δ, Z_2Δ, W)` over `(t, 2t]` with `W = 2Z_2Δ − Z_Δ`.
pub fn estimator_zw(
    counts: &CountsGrid,
    t: f64,
    delta: f64,
    k: usize,
    n: usize,
    e: f64,
) -> Result<(f64, f64, f64)> {
    check_observed(counts, k, n)?;
    let times = lattice_times(t, delta)?;
    let means = times
        .iter()
        .map(|&s| column(counts, s).map(|c| observed_mean(counts, c, k)))
        .collect::<Result<Vec<f64>>>()?;
    let scale = n as f64 / t;
    let z_delta = scale
        * means
            .windows(2)
            .map(|w| (w[1] - w[0] - delta * e).powi(2))
            .sum::<f64>();
    let z_2delta = scale
        * means
            .iter()
            .step_by(2)
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[1] - w[0] - 2.0 * delta * e).powi(2))
            .sum::<f64>();
    Ok((z_delta, z_2delta, 2.0 * z_2delta - z_delta))
}

/// `Δ_t = t / (2⌊t^{1−4/(q+1)}⌋)`.
///
/// Powers within `1e-12` relative of an integer are taken at that integer, so exact
/// powers are not floored down by rounding.
pub fn delta_schedule(t: f64, q: f64) -> Result<f64> {
    if !(q > 3.0) {
        return Err(Error::Schedule(format!("moment order q must exceed 3, got {q}")));
    }
    if !(t >= 1.0) {
        return Err(Error::Schedule(format!("t must be at least 1, got {t}")));
    }
    let x = t.powf(1.0 - 4.0 / (q + 1.0));
    let mut blocks = x.floor();
    if (x - (blocks + 1.0)).abs() <= 1e-12 * x {
        blocks += 1.0;
    }
    if blocks < 1.0 {
        return Err(Error::Schedule(format!("t = {t} too small for q = {q}")));
    }
    Ok(t / (2.0 * blocks))
}

/// Every time point the subcritical estimator at horizon `T` reads: `T/2`, `T`, and the
/// `Δ_{T/2}` lattice between them.
pub fn subcritical_times(horizon: f64, q: f64) -> Result<Vec<f64>> {
    let t = horizon / 2.0;
    lattice_times(t, delta_schedule(t, q)?)
}

/// `Φ(u, v, w)` evaluated without a domain check.
pub fn phi(u: f64, v: f64, w: f64) -> Result<[f64; 3]> {
    if !(u > 0.0 && w > 0.0) {
        return Err(Error::Degenerate(format!("Φ needs u > 0 and w > 0, got u = {u}, w = {w}")));
    }
    let mu = u * (u / w).sqrt();
    let gap = u - mu;
    if gap.abs() <= 1e-12 * u {
        return Err(Error::Degenerate("u − Φ₁ vanishes".into()));
    }
    let lambda = (v + gap * gap) / (u * gap);
    let p = (1.0 - mu / u) / lambda;
    if !(mu.is_finite() && lambda.is_finite() && p.is_finite()) || lambda == 0.0 {
        return Err(Error::Degenerate(format!("Φ is not finite at ({u}, {v}, {w})")));
    }
    Ok([mu, lambda, p])
}

/// `D = {w > u > 0, v ≥ 0}`.
pub fn in_domain(u: f64, v: f64, w: f64) -> bool {
    w > u && u > 0.0 && v >= 0.0
}

/// `Ψ = 1_D Φ`: zeros with `in_domain = false` outside `D`.
pub fn invert_phi(u: f64, v: f64, w: f64) -> Result<ParamEstimate> {
    if !in_domain(u, v, w) {
        return Ok(ParamEstimate {
            mu_hat: 0.0,
            lambda_hat: 0.0,
            p_hat: 0.0,
            in_domain: false,
        });
    }
    let [mu_hat, lambda_hat, p_hat] = phi(u, v, w)?;
    Ok(ParamEstimate {
        mu_hat,
        lambda_hat,
        p_hat,
        in_domain: true,
    })
}

/// `Φ` evaluated wherever it is finite. Outside `D` only `p̂` is kept; `μ̂` and `Λ̂` are NaN.
pub fn phi_practical(u: f64, v: f64, w: f64) -> Result<ParamEstimate> {
    let [mu_hat, lambda_hat, p_hat] = phi(u, v, w)?;
    let inside = in_domain(u, v, w);
    Ok(ParamEstimate {
        mu_hat: if inside { mu_hat } else { f64::NAN },
        lambda_hat: if inside { lambda_hat } else { f64::NAN },
        p_hat,
        in_domain: inside,
    })
}

/// Subcritical estimate at horizon `T` with an explicit window `Δ` (must divide `T/4` evenly
/// in the sense `(T/2)/(2Δ) ∈ ℕ*`).
pub fn estimate_subcritical_with_delta(
    counts: &CountsGrid,
    horizon: f64,
    delta: f64,
    k: usize,
    n: usize,
) -> Result<SubcriticalEstimate> {
    let t = horizon / 2.0;
    let e = estimator_e(counts, t, k, n)?;
    let v = estimator_v(counts, t, k, n)?;
    let (z_delta, z_2delta, w) = estimator_zw(counts, t, delta, k, n, e)?;
    let w_corrected = w - (n - k) as f64 / k as f64 * e;
    let practical = phi_practical(e, v, w_corrected.abs())?;
    let strict = invert_phi(e, v, w_corrected)?;
    Ok(SubcriticalEstimate {
        sub: SubEstimates {
            t,
            delta,
            k,
            n,
            e,
            v,
            z_delta,
            z_2delta,
            w,
        },
        w_corrected,
        practical,
        strict,
    })
}

pub fn estimate_subcritical(
    counts: &CountsGrid,
    horizon: f64,
    k: usize,
    n: usize,
    q: f64,
) -> Result<SubcriticalEstimate> {
    let delta = delta_schedule(horizon / 2.0, q)?;
    estimate_subcritical_with_delta(counts, horizon, delta, k, n)
}

/// `U = [(N/K) Σ_{i≤K} ((Z^i_T − Z̄ᴷ_T)/Z̄ᴷ_T)² − N/Z̄ᴷ_T]·1{Z̄ᴷ_T > 0}` and `P = 1{U ≥ 0}/(U+1)`.
pub fn estimator_u_and_p(counts: &CountsGrid, horizon: f64, k: usize, n: usize) -> Result<SupEstimates> {
    check_observed(counts, k, n)?;
    let col = column(counts, horizon)?;
    let mean = observed_mean(counts, col, k);
    let nf = n as f64;
    let u = if mean > 0.0 {
        let spread: f64 = (0..k)
            .map(|i| ((counts.count(i, col) as f64 - mean) / mean).powi(2))
            .sum();
        nf / k as f64 * spread - nf / mean
    } else {
        0.0
    };
    let p = if u >= 0.0 { 1.0 / (u + 1.0) } else { 0.0 };
    Ok(SupEstimates {
        u,
        p,
        mean_count: mean,
        low_count_flag: mean < LOW_COUNT_THRESHOLD,
    })
}

/// Supercritical iff `log Z̄ > (log T)²`; ties and `Z̄ = 0` go to subcritical.
pub fn detect_regime(mean_count: f64, horizon: f64) -> Result<RegimeDecision> {
    if !(horizon > 1.0) {
        return Err(Error::Precondition(format!("detector needs T > 1, got {horizon}")));
    }
    if !(mean_count >= 0.0) {
        return Err(Error::Precondition(format!("mean count must be nonnegative, got {mean_count}")));
    }
    let log_mean_count = if mean_count > 0.0 { mean_count.ln() } else { f64::NEG_INFINITY };
    let threshold = horizon.ln().powi(2);
    let regime = if log_mean_count > threshold {
        Regime::Supercritical
    } else {
        Regime::Subcritical
    };
    Ok(RegimeDecision {
        regime,
        log_mean_count,
        threshold,
    })
}

/// Combined estimator: the detector picks the subcritical `Φ₃` branch (practical variant)
/// or the supercritical `P` branch.
pub fn estimate_p(counts: &CountsGrid, horizon: f64, k: usize, n: usize, q: f64) -> Result<PEstimate> {
    let sup = estimator_u_and_p(counts, horizon, k, n)?;
    let decision = detect_regime(sup.mean_count, horizon)?;
    match decision.regime {
        Regime::Supercritical => Ok(PEstimate {
            horizon,
            decision,
            p_hat: sup.p,
            sub: None,
            sup,
        }),
        Regime::Subcritical => {
            let sub = estimate_subcritical(counts, horizon, k, n, q)?;
            Ok(PEstimate {
                horizon,
                decision,
                p_hat: sub.practical.p_hat,
                sub: Some(sub),
                sup,
            })
        }
    }
}

/// Time points needed by `estimate_p` at horizon `T`; falls back to `[T]` when the
/// subcritical lattice is undefined (`T < 2`).
pub fn estimation_times(horizon: f64, q: f64) -> Vec<f64> {
    subcritical_times(horizon, q).unwrap_or_else(|_| vec![horizon])
}
