//! Excitation kernels and their analytic functionals.
//!
//! A kernel `φ` is either the exponential `a·e^{-bt}` or a nonnegative function
//! tabulated on a strictly increasing grid starting at zero. All quadrature on
//! tabulated kernels is composite trapezoid on the stored grid.
//!
//! The convolution power `φ^{⋆0}` is the Dirac mass at zero and is never
//! evaluated pointwise; integral-form operations account for it analytically.

use crate::error::{Error, Result};

/// Relative truncation threshold for series in `ρ^n φ^{⋆n}`.
pub const SERIES_REL_TOL: f64 = 1e-14;

/// Residual target for the growth-exponent root.
pub const GROWTH_RESIDUAL_TOL: f64 = 1e-10;

const GROWTH_LOWER_BRACKET: f64 = 1e-6;
const MAX_SERIES_TERMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Exponential { amplitude: f64, decay: f64 },
    Tabulated(TabulatedKernel),
}

/// A kernel sampled on a grid; linear interpolation between nodes, zero past the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    grid: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelMoments {
    pub total_mass: f64,
    pub mean_delay: f64,
    /// `(α₀, p)` when `p·Λ > 1`.
    pub growth_exponent: Option<(f64, f64)>,
}

impl TabulatedKernel {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidKernel(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidKernel("need at least two grid points".into()));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidKernel("grid must start at t = 0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidKernel("grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidKernel("values must be finite and nonnegative".into()));
        }
        let kernel = TabulatedKernel { grid, values };
        let mass = kernel.trapezoid(|_, v| v);
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::InvalidKernel("trapezoidal mass must be finite and positive".into()));
        }
        Ok(kernel)
    }

    /// Samples `f` on `0, step, 2·step, …, horizon`.
    pub fn sample<F: Fn(f64) -> f64>(f: F, step: f64, horizon: f64) -> Result<Self> {
        if !(step > 0.0 && horizon > step) {
            return Err(Error::InvalidKernel("need 0 < step < horizon".into()));
        }
        let points = (horizon / step).round() as usize + 1;
        let grid: Vec<f64> = (0..points).map(|k| k as f64 * step).collect();
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > *self.grid.last().unwrap() {
            return 0.0;
        }
        let k = self.grid.partition_point(|&g| g <= t);
        if k >= self.grid.len() {
            return *self.values.last().unwrap();
        }
        let (t0, t1) = (self.grid[k - 1], self.grid[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    fn trapezoid<F: Fn(f64, f64) -> f64>(&self, integrand: F) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(g, v)| 0.5 * (g[1] - g[0]) * (integrand(g[0], v[0]) + integrand(g[1], v[1])))
            .sum()
    }

    fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    fn uniform_step(&self) -> Result<f64> {
        let step = self.grid[1] - self.grid[0];
        let uniform = self
            .grid
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step);
        if uniform {
            Ok(step)
        } else {
            Err(Error::UnsupportedKernel(
                "convolution powers need a uniformly spaced grid".into(),
            ))
        }
    }

    /// Iterated trapezoid convolutions `φ^{⋆1..=n}` on the nodes up to index `last`.
    fn convolution_powers(&self, n: usize, last: usize) -> Result<Vec<Vec<f64>>> {
        let h = self.uniform_step()?;
        let base = &self.values[..=last];
        let mut powers = vec![base.to_vec()];
        for _ in 1..n {
            let prev = powers.last().unwrap();
            powers.push(trapezoid_convolution(prev, base, h));
        }
        Ok(powers)
    }
}

fn trapezoid_convolution(f: &[f64], g: &[f64], h: f64) -> Vec<f64> {
    (0..f.len())
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let inner: f64 = (1..k).map(|j| f[k - j] * g[j]).sum();
            h * (0.5 * f[k] * g[0] + inner + 0.5 * f[0] * g[k])
        })
        .collect()
}

impl Kernel {
    pub fn exponential(amplitude: f64, decay: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidKernel(format!("amplitude must be > 0, got {amplitude}")));
        }
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(Error::InvalidKernel(format!("decay must be > 0, got {decay}")));
        }
        Ok(Kernel::Exponential { amplitude, decay })
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        TabulatedKernel::new(grid, values).map(Kernel::Tabulated)
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Kernel::Exponential { .. })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Kernel::Exponential { amplitude, decay } => {
                if t < 0.0 {
                    0.0
                } else {
                    amplitude * (-decay * t).exp()
                }
            }
            Kernel::Tabulated(tab) => tab.value(t),
        }
    }

    pub fn is_non_increasing(&self) -> bool {
        match self {
            Kernel::Exponential { .. } => true,
            Kernel::Tabulated(tab) => tab.is_non_increasing(),
        }
    }

    /// `Λ = ∫φ`.
    pub fn total_mass(&self) -> f64 {
        match self {
            Kernel::Exponential { amplitude, decay } => amplitude / decay,
            Kernel::Tabulated(tab) => tab.trapezoid(|_, v| v),
        }
    }

    /// `κ = Λ⁻¹ ∫ s φ(s) ds`.
    ///
    /// For tabulated kernels the first-moment integrand must have decayed by the end of
    /// the grid: if the last tenth of the grid carries more than 0.1% of the moment, the
    /// integral is reported as non-convergent.
    pub fn mean_delay(&self) -> Result<f64> {
        match self {
            Kernel::Exponential { decay, .. } => Ok(1.0 / decay),
            Kernel::Tabulated(tab) => {
                let moment = tab.trapezoid(|s, v| s * v);
                let cutoff = 0.9 * tab.grid.last().unwrap();
                let tail = tab.trapezoid(|s, v| if s >= cutoff { s * v } else { 0.0 });
                if !(moment > 0.0) || tail > 1e-3 * moment {
                    return Err(Error::NonConvergentMoment);
                }
                Ok(moment / self.total_mass())
            }
        }
    }

    /// `∫ e^{-αt} φ(t) dt`.
    pub fn laplace(&self, alpha: f64) -> f64 {
        match self {
            Kernel::Exponential { amplitude, decay } => amplitude / (alpha + decay),
            Kernel::Tabulated(tab) => tab.trapezoid(|s, v| (-alpha * s).exp() * v),
        }
    }

    /// The unique `α₀ > 0` with `p·∫e^{-α₀t}φ(t)dt = 1`, defined when `p·Λ > 1`.
    pub fn growth_exponent(&self, p: f64) -> Result<f64> {
        let mass = p * self.total_mass();
        if !(mass > 1.0) {
            return Err(Error::SubcriticalInput(mass));
        }
        match self {
            Kernel::Exponential { amplitude, decay } => Ok(p * amplitude - decay),
            Kernel::Tabulated(tab) => {
                let residual = |alpha: f64| p * self.laplace(alpha) - 1.0;
                let peak = tab.values.iter().cloned().fold(0.0, f64::max);
                let mut lo = GROWTH_LOWER_BRACKET;
                let mut hi = p * peak;
                if residual(lo) <= 0.0 {
                    // the root sits below the lower bracket; shrink toward zero
                    while residual(lo) <= 0.0 && lo > f64::MIN_POSITIVE {
                        lo *= 0.5;
                    }
                }
                while residual(hi) > 0.0 {
                    hi *= 2.0;
                }
                for _ in 0..400 {
                    let mid = 0.5 * (lo + hi);
                    let r = residual(mid);
                    if r.abs() < GROWTH_RESIDUAL_TOL * 1e-2 || hi - lo <= f64::EPSILON * mid {
                        return Ok(mid);
                    }
                    if r > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    pub fn moments(&self, p: Option<f64>) -> Result<KernelMoments> {
        let total_mass = self.total_mass();
        let mean_delay = self.mean_delay()?;
        let growth_exponent = match p {
            Some(p) if p * total_mass > 1.0 => Some((self.growth_exponent(p)?, p)),
            _ => None,
        };
        Ok(KernelMoments {
            total_mass,
            mean_delay,
            growth_exponent,
        })
    }

    /// Pointwise `φ^{⋆n}(t)` for `n ≥ 1`.
    pub fn convolution_power(&self, n: usize, t: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Contract(
                "φ^{⋆0} is a Dirac mass and has no pointwise value".into(),
            ));
        }
        if t < 0.0 {
            return Err(Error::Contract(format!("t must be nonnegative, got {t}")));
        }
        match self {
            Kernel::Exponential { amplitude, decay } => {
                let log_value = n as f64 * amplitude.ln() + (n as f64 - 1.0) * safe_ln(t)
                    - decay * t
                    - ln_factorial(n - 1);
                if n > 1 && t == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(log_value.exp())
                }
            }
            Kernel::Tabulated(tab) => {
                let last_t = *tab.grid.last().unwrap();
                if t > last_t {
                    return Ok(0.0);
                }
                let upper = tab.grid.partition_point(|&g| g < t).min(tab.grid.len() - 1);
                let powers = tab.convolution_powers(n, upper)?;
                let nodes = &tab.grid[..=upper];
                Ok(interpolate(nodes, powers.last().unwrap(), t))
            }
        }
    }

    /// `Σ_{n≥1} ρ^n φ^{⋆n}(t)`. Closed form for the exponential kernel.
    pub fn weighted_series(&self, rho: f64, t: f64) -> Result<f64> {
        match self {
            Kernel::Exponential { amplitude, decay } => {
                Ok(rho * amplitude * (-(decay - rho * amplitude) * t).exp())
            }
            Kernel::Tabulated(_) => self.weighted_series_truncated(rho, t),
        }
    }

    /// The same series summed term by term until a term drops below
    /// `SERIES_REL_TOL` times the running sum.
    pub fn weighted_series_truncated(&self, rho: f64, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Contract(format!("t must be nonnegative, got {t}")));
        }
        match self {
            Kernel::Exponential { amplitude, decay } => {
                // term_n = (ρa)^n t^{n-1} e^{-bt} / (n-1)!
                let growth = rho * amplitude * t;
                let mut term = rho * amplitude * (-decay * t).exp();
                let mut sum = 0.0;
                for n in 1..MAX_SERIES_TERMS {
                    sum += term;
                    let past_peak = n as f64 > growth;
                    if past_peak && term.abs() < SERIES_REL_TOL * sum.abs() {
                        return Ok(sum);
                    }
                    term *= growth / n as f64;
                }
                Ok(sum)
            }
            Kernel::Tabulated(tab) => {
                let last_t = *tab.grid.last().unwrap();
                if t > last_t {
                    return Ok(0.0);
                }
                let upper = tab.grid.partition_point(|&g| g < t).min(tab.grid.len() - 1);
                let h = tab.uniform_step()?;
                let nodes = &tab.grid[..=upper];
                let base = &tab.values[..=upper];
                let mut power = base.to_vec();
                let mut weight = rho;
                let mut sum = 0.0;
                for _ in 1..MAX_SERIES_TERMS {
                    let term = weight * interpolate(nodes, &power, t);
                    sum += term;
                    if term.abs() <= SERIES_REL_TOL * sum.abs() {
                        break;
                    }
                    power = trapezoid_convolution(&power, base, h);
                    weight *= rho;
                }
                Ok(sum)
            }
        }
    }
}

fn interpolate(nodes: &[f64], values: &[f64], t: f64) -> f64 {
    let k = nodes.partition_point(|&g| g <= t);
    if k == 0 {
        return values[0];
    }
    if k >= nodes.len() {
        return *values.last().unwrap();
    }
    let (t0, t1) = (nodes[k - 1], nodes[k]);
    values[k - 1] + (values[k] - values[k - 1]) * (t - t0) / (t1 - t0)
}

fn safe_ln(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t.ln()
    }
}

fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}
