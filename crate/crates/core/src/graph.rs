//! Bernoulli interaction graphs and the graph-only quantities the estimators converge to.
//!
//! `θ_ij = 1` means individual `j` excites individual `i`; `A_N = θ/N`.
//! The adjacency is stored as bit-packed rows so that products like
//! `N·A_N²(i,j) = N⁻¹·#{k : θ_ik θ_kj = 1}` reduce to popcounts.

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::phi_practical;
use crate::linalg::LuFactorization;
use crate::rng;

pub const PERRON_TOL: f64 = 1e-12;
pub const PERRON_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphMode {
    Independent,
    Symmetric,
}

impl std::str::FromStr for GraphMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "independent" => Ok(GraphMode::Independent),
            "symmetric" => Ok(GraphMode::Symmetric),
            other => Err(format!("unknown graph mode {other:?} (expected independent|symmetric)")),
        }
    }
}

impl std::fmt::Display for GraphMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GraphMode::Independent => "independent",
            GraphMode::Symmetric => "symmetric",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    n: usize,
    mode: GraphMode,
    p_nominal: f64,
    seed: Option<u64>,
    words: usize,
    rows: Vec<u64>,
}

impl InteractionGraph {
    /// Independent mode draws the `N²` entries row-major; symmetric mode draws
    /// the upper triangle including the diagonal row-major (`N(N+1)/2` draws)
    /// and mirrors it.
    pub fn sample<R: Rng + ?Sized>(n: usize, p: f64, mode: GraphMode, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::Precondition("graph size N must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Precondition(format!("p must lie in [0, 1], got {p}")));
        }
        let mut g = Self::empty(n, mode, p);
        match mode {
            GraphMode::Independent => {
                for i in 0..n {
                    for j in 0..n {
                        if rng.random_bool(p) {
                            g.set(i, j);
                        }
                    }
                }
            }
            GraphMode::Symmetric => {
                for i in 0..n {
                    for j in i..n {
                        if rng.random_bool(p) {
                            g.set(i, j);
                            g.set(j, i);
                        }
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn sample_seeded(n: usize, p: f64, mode: GraphMode, seed: u64) -> Result<Self> {
        let mut g = Self::sample(n, p, mode, &mut rng::seeded(seed))?;
        g.seed = Some(seed);
        Ok(g)
    }

    /// Builds a graph from an explicit predicate `θ_ij`.
    pub fn from_fn<F: Fn(usize, usize) -> bool>(n: usize, p_nominal: f64, f: F) -> Self {
        let mut g = Self::empty(n, GraphMode::Independent, p_nominal);
        for i in 0..n {
            for j in 0..n {
                if f(i, j) {
                    g.set(i, j);
                }
            }
        }
        if g.is_symmetric() && n > 1 {
            g.mode = GraphMode::Symmetric;
        }
        g
    }

    pub fn full(n: usize) -> Self {
        Self::from_fn(n, 1.0, |_, _| true)
    }

    pub fn zero(n: usize) -> Self {
        Self::from_fn(n, 0.0, |_, _| false)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, 1.0 / n as f64, |i, j| i == j)
    }

    fn empty(n: usize, mode: GraphMode, p_nominal: f64) -> Self {
        let words = n.div_ceil(64);
        InteractionGraph {
            n,
            mode,
            p_nominal,
            seed: None,
            words,
            rows: vec![0; n * words],
        }
    }

    fn set(&mut self, i: usize, j: usize) {
        self.rows[i * self.words + j / 64] |= 1u64 << (j % 64);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn p_nominal(&self) -> f64 {
        self.p_nominal
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    fn row_words(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Mean of θ over all `N²` entries.
    pub fn density(&self) -> f64 {
        self.edge_count() as f64 / (self.n * self.n) as f64
    }

    pub fn row_degree(&self, i: usize) -> usize {
        self.row_words(i).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn column_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for i in 0..self.n {
            for j in self.row_members(i) {
                deg[j] += 1;
            }
        }
        deg
    }

    /// Indices `j` with `θ_ij = 1`.
    pub fn row_members(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(i).iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            std::iter::from_fn(move || {
                if bits == 0 {
                    None
                } else {
                    let b = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    Some(w * 64 + b)
                }
            })
        })
    }

    /// For every `j`, the individuals `i` with `θ_ij = 1`, i.e. those excited by `j`.
    pub fn column_lists(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for j in self.row_members(i) {
                cols[j].push(i as u32);
            }
        }
        cols
    }

    fn packed_columns(&self) -> Vec<u64> {
        let mut cols = vec![0u64; self.n * self.words];
        for i in 0..self.n {
            for j in self.row_members(i) {
                cols[j * self.words + i / 64] |= 1u64 << (i % 64);
            }
        }
        cols
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// `θ'_ij = θ_{perm[i], perm[j]}`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        let mut g = Self::empty(self.n, self.mode, self.p_nominal);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(perm[i], perm[j]) {
                    g.set(i, j);
                }
            }
        }
        g
    }

    /// Dense row-major `scale·θ`.
    pub fn dense_scaled(&self, scale: f64) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in self.row_members(i) {
                a[i * n + j] = scale;
            }
        }
        a
    }

    /// One line per row of `0`/`1` characters.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.n * (self.n + 1));
        for i in 0..self.n {
            for j in 0..self.n {
                out.push(if self.get(i, j) { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    /// `#{k : θ_ik θ_kj = 1}` for every `(i, j)`, passed row by row to `visit`.
    fn for_each_square_count<F: FnMut(usize, usize, u32) -> bool>(&self, mut visit: F) {
        let cols = self.packed_columns();
        let w = self.words;
        for i in 0..self.n {
            let row = self.row_words(i);
            for j in 0..self.n {
                let col = &cols[j * w..(j + 1) * w];
                let count = row.iter().zip(col).map(|(a, b)| (a & b).count_ones()).sum();
                if !visit(i, j, count) {
                    return;
                }
            }
        }
    }
}

pub fn sample_graph<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    mode: GraphMode,
    rng: &mut R,
) -> Result<InteractionGraph> {
    InteractionGraph::sample(n, p, mode, rng)
}

/// `Λ·‖A_N‖ ≤ (1+Λp)/2` in both the max-row-sum and max-column-sum norms.
pub fn check_omega1(g: &InteractionGraph, lambda: f64, p: f64) -> Result<bool> {
    if lambda * p >= 1.0 {
        return Err(Error::Regime(lambda * p));
    }
    let threshold = (1.0 + lambda * p) / 2.0;
    let n = g.n() as f64;
    let max_row = (0..g.n()).map(|i| g.row_degree(i)).max().unwrap_or(0) as f64 / n;
    let max_col = g.column_degrees().into_iter().max().unwrap_or(0) as f64 / n;
    Ok(lambda * max_row <= threshold && lambda * max_col <= threshold)
}

/// Mean condition `N⁻¹ Σ A_N(i,j) > p/2` and `|N·A_N²(i,j) − p²| < p²/(2N^{3/8})` for all pairs.
pub fn check_omega2(g: &InteractionGraph, p: f64) -> Result<bool> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Precondition(format!("p must lie in (0, 1], got {p}")));
    }
    if !(g.density() > p / 2.0) {
        return Ok(false);
    }
    let n = g.n() as f64;
    let p2 = p * p;
    let tol = p2 / (2.0 * n.powf(0.375));
    let mut ok = true;
    g.for_each_square_count(|_, _, count| {
        ok = (count as f64 / n - p2).abs() < tol;
        ok
    });
    Ok(ok)
}

/// True when `A_N²` is entrywise positive, which makes `A_N` primitive.
pub fn square_is_positive(g: &InteractionGraph) -> bool {
    let mut ok = true;
    g.for_each_square_count(|_, _, count| {
        ok = count > 0;
        ok
    });
    ok
}

/// LU factorization of `I − Λ A_N`, reused across right-hand sides.
///
/// Construction fails unless `ℓ_N = (I − ΛA_N)⁻¹𝟏` is entrywise positive. Since
/// `ΛA_N ≥ 0`, a positive solution of `(I − ΛA_N)x = 𝟏` gives `ΛA_N x < x` and hence
/// spectral radius below one, so `Q_N` equals its Neumann series `Σ Λⁿ A_Nⁿ`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    lu: LuFactorization,
    lambda: f64,
    ell: Vec<f64>,
}

impl Resolvent {
    pub fn new(g: &InteractionGraph, lambda: f64) -> Result<Self> {
        let n = g.n();
        let mut m = g.dense_scaled(-lambda / n as f64);
        for i in 0..n {
            m[i * n + i] += 1.0;
        }
        let lu = LuFactorization::factor(n, m)?;
        let ell = lu.solve(&vec![1.0; n]);
        if ell.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::NotSubcriticalGraph(lambda));
        }
        Ok(Resolvent { lu, lambda, ell })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Row sums `ℓ_N(i) = Σ_j Q_N(i,j)`.
    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    /// `Qᵀ b`, i.e. `Σ_i b_i Q_N(i, ·)`.
    pub fn column_combination(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve_transposed(b)
    }

    /// `Q b`.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventData {
    pub ell: Vec<f64>,
    pub col: Vec<f64>,
    pub lambda_used: f64,
    pub omega1: bool,
    pub threshold: f64,
}

/// `ℓ_N` and `c_N` (row and column sums of `Q_N`), with the `Ω¹` flag.
///
/// The vectors are produced whenever the resolvent is positive, which covers every graph
/// in `Ω¹` and most graphs outside it at moderate `N`.
pub fn resolvent_vectors(g: &InteractionGraph, lambda: f64, p: f64) -> Result<ResolventData> {
    let omega1 = check_omega1(g, lambda, p)?;
    let resolvent = Resolvent::new(g, lambda)?;
    let col = resolvent.column_combination(&vec![1.0; g.n()]);
    Ok(ResolventData {
        ell: resolvent.ell().to_vec(),
        col,
        lambda_used: lambda,
        omega1,
        threshold: (1.0 + lambda * p) / 2.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub rho: f64,
    /// Perron vector scaled to `‖V‖₂ = √N`, all entries positive.
    pub v: Vec<f64>,
    pub omega2: bool,
    /// `‖A_N V − ρV‖₂ / √N`.
    pub residual: f64,
    pub iterations: usize,
}

fn dense_matvec(n: usize, a: &[f64], x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i * n..(i + 1) * n].iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Spectral radius and Perron vector of `A_N` by power iteration on `A_N²`.
pub fn perron(g: &InteractionGraph) -> Result<SpectralData> {
    if !square_is_positive(g) {
        return Err(Error::NotIrreducible("A_N² has a zero entry".into()));
    }
    let omega2 = g.p_nominal() > 0.0 && check_omega2(g, g.p_nominal())?;
    let n = g.n();
    let a = g.dense_scaled(1.0 / n as f64);
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut ax = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut iterations = 0;
    loop {
        if iterations >= PERRON_MAX_ITER {
            return Err(Error::Convergence { iterations });
        }
        iterations += 1;
        dense_matvec(n, &a, &x, &mut ax);
        dense_matvec(n, &a, &ax, &mut y);
        let norm = norm2(&y);
        y.iter_mut().for_each(|v| *v /= norm);
        let step = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        std::mem::swap(&mut x, &mut y);
        if step < PERRON_TOL {
            break;
        }
    }
    dense_matvec(n, &a, &x, &mut ax);
    dense_matvec(n, &a, &ax, &mut y);
    let rayleigh: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() / norm2(&x).powi(2);
    let rho = rayleigh.sqrt();
    let scale = (n as f64).sqrt() / norm2(&x);
    let v: Vec<f64> = x.iter().map(|c| c * scale).collect();
    if v.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::NotIrreducible("Perron vector has a non-positive entry".into()));
    }
    let mut av = vec![0.0; n];
    dense_matvec(n, &a, &v, &mut av);
    let residual = av
        .iter()
        .zip(&v)
        .map(|(p, q)| (p - rho * q).powi(2))
        .sum::<f64>()
        .sqrt()
        / (n as f64).sqrt();
    Ok(SpectralData {
        rho,
        v,
        omega2,
        residual,
        iterations,
    })
}

/// The graph-only limit of the subcritical estimator when the first `K` individuals are observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubLimit {
    pub e: f64,
    pub v: f64,
    pub w: f64,
    /// `W∞ − (N−K)/K·E∞`, before the absolute value.
    pub w_corrected: f64,
    pub p: f64,
}

fn check_observed(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("observed count K = {k} must lie in 1..={n}")));
    }
    Ok(())
}

pub fn conjectured_sub_limit(g: &InteractionGraph, lambda: f64, mu: f64, k: usize) -> Result<SubLimit> {
    let n = g.n();
    check_observed(n, k)?;
    if !(mu > 0.0) {
        return Err(Error::Precondition(format!("mu must be positive, got {mu}")));
    }
    let resolvent = Resolvent::new(g, lambda)?;
    let ell = resolvent.ell();
    let (nf, kf) = (n as f64, k as f64);
    let ell_bar = ell[..k].iter().sum::<f64>() / kf;
    let e = mu * ell_bar;
    let v = mu * mu * nf / kf * ell[..k].iter().map(|l| (l - ell_bar).powi(2)).sum::<f64>();
    let indicator: Vec<f64> = (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
    let col_sums = resolvent.column_combination(&indicator);
    let w = mu * nf / (kf * kf) * col_sums.iter().zip(ell).map(|(s, l)| s * s * l).sum::<f64>();
    let w_corrected = w - (nf - kf) / kf * e;
    let estimate = phi_practical(e, v, w_corrected.abs())
        .map_err(|_| Error::Degenerate("all ℓ_N entries coincide; Φ₃ is undefined".into()))?;
    Ok(SubLimit {
        e,
        v,
        w,
        w_corrected,
        p: estimate.p_hat,
    })
}

/// `U∞ = (N/K)(V̄ᴷ)⁻² Σ_{i≤K} (V(i) − V̄ᴷ)²` for a Perron vector.
pub fn sup_dispersion(v: &[f64], k: usize) -> f64 {
    let n = v.len() as f64;
    let kf = k as f64;
    let mean = v[..k].iter().sum::<f64>() / kf;
    n / (kf * mean * mean) * v[..k].iter().map(|x| (x - mean).powi(2)).sum::<f64>()
}

pub fn conjectured_sup_limit(g: &InteractionGraph, k: usize) -> Result<f64> {
    check_observed(g.n(), k)?;
    let spectral = perron(g)?;
    Ok(1.0 / (1.0 + sup_dispersion(&spectral.v, k)))
}
