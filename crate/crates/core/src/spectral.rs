//! Laplacian spectra, pseudo-inverses, commute times and effective resistance.

use crate::graph::{Graph, NodePair};
use crate::{Error, Matrix, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MAX_SWEEPS: usize = 100;
/// Relative off-diagonal Frobenius tolerance for Jacobi convergence.
pub const JACOBI_TOL: f64 = 1e-12;
/// Eigenvalues with `|λ| < ZERO_TOL * max|λ|` count as zero.
pub const ZERO_TOL: f64 = 1e-9;
/// Per-walker step cap for the Monte-Carlo commute-time estimator.
pub const WALK_STEP_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    /// `I - D^{-1/2} A D^{-1/2}`
    NormalizedLaplacian,
    /// `D - A`
    Laplacian,
    /// Any symmetric matrix.
    General,
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub eigenvectors: Matrix,
    pub source: SpectrumSource,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, l: usize) -> Vec<f64> {
        self.eigenvectors.column(l)
    }

    /// `Σ λ_ℓ φ_ℓ φ_ℓᵀ`
    pub fn reconstruct(&self) -> Matrix {
        self.spectral_function(|_, lambda| lambda)
    }

    /// `Σ_ℓ f(ℓ, λ_ℓ) φ_ℓ φ_ℓᵀ`
    pub fn spectral_function(&self, f: impl Fn(usize, f64) -> f64) -> Matrix {
        let n = self.n();
        let mut out = Matrix::zeros(n, n);
        for (l, &lambda) in self.eigenvalues.iter().enumerate() {
            let c = f(l, lambda);
            if c == 0.0 {
                continue;
            }
            let phi = self.eigenvector(l);
            for i in 0..n {
                let ci = c * phi[i];
                for j in 0..n {
                    out[(i, j)] += ci * phi[j];
                }
            }
        }
        out
    }

    /// Number of eigenvalues below the zero threshold.
    pub fn zero_count(&self) -> usize {
        let scale = self.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.eigenvalues
            .iter()
            .filter(|x| x.abs() < ZERO_TOL * scale)
            .count()
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn eigendecompose(m: &Matrix) -> Result<SpectralData> {
    jacobi(m, SpectrumSource::General)
}

fn jacobi(m: &Matrix, source: SpectrumSource) -> Result<SpectralData> {
    let asym = m.max_asymmetry().ok_or_else(|| {
        Error::DimensionMismatch("eigendecomposition of a non-square matrix".into())
    })?;
    if asym > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix passed to eigendecompose".into()));
    }
    let n = m.rows();
    let mut a = m.add(&m.transpose()).scale(0.5);
    let mut v = Matrix::identity(n);
    let target = JACOBI_TOL * a.frobenius_norm();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut phi = v.column(src);
        fix_sign(&mut phi);
        for (i, x) in phi.into_iter().enumerate() {
            eigenvectors[(i, col)] = x;
        }
    }
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        source,
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// One Jacobi rotation zeroing `a[p][q]`, accumulated into `v`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();
    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Makes the (first) largest-magnitude entry positive.
fn fix_sign(phi: &mut [f64]) {
    let max = phi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(&pivot) = phi.iter().find(|x| x.abs() >= max - 1e-12) {
        if pivot < 0.0 {
            phi.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// `Δ = I - D^{-1/2} A D^{-1/2}`; needs every degree positive.
pub fn normalized_laplacian(g: &Graph) -> Result<Matrix> {
    g.require_connected()?;
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| 1.0 / (d as f64).sqrt())
        .collect();
    let mut l = Matrix::identity(g.n());
    for &(a, b) in g.edges() {
        let x = inv_sqrt[a] * inv_sqrt[b];
        l[(a, b)] = -x;
        l[(b, a)] = -x;
    }
    Ok(l)
}

/// `L = D - A`
pub fn laplacian(g: &Graph) -> Matrix {
    let mut l = g.adjacency_matrix().scale(-1.0);
    for (v, d) in g.degrees().into_iter().enumerate() {
        l[(v, v)] = d as f64;
    }
    l
}

/// Eigenpairs of the normalized Laplacian of a connected graph.
pub fn normalized_spectrum(g: &Graph) -> Result<SpectralData> {
    jacobi(
        &normalized_laplacian(g)?,
        SpectrumSource::NormalizedLaplacian,
    )
}

/// `Δ† = Σ_{ℓ≥1} λ_ℓ^{-1} φ_ℓ φ_ℓᵀ`; requires a simple zero eigenvalue.
pub fn laplacian_pseudo_inverse(s: &SpectralData) -> Result<Matrix> {
    check_simple_kernel(s)?;
    Ok(s.spectral_function(|l, lambda| if l == 0 { 0.0 } else { 1.0 / lambda }))
}

fn check_simple_kernel(s: &SpectralData) -> Result<()> {
    match s.zero_count() {
        1 => Ok(()),
        k => Err(Error::RepeatedZeroEigenvalue(k)),
    }
}

/// Commute times and effective resistances for all pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommuteTable {
    pub tau: Matrix,
    pub resistance: Matrix,
}

impl CommuteTable {
    /// CSV with header `row,col,tau,resistance`, one line per listed pair.
    pub fn to_csv(&self, pairs: &[NodePair], fmt: impl Fn(f64) -> String) -> String {
        let mut out = String::from("row,col,tau,resistance\n");
        for p in pairs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.v,
                p.u,
                fmt(self.tau[(p.v, p.u)]),
                fmt(self.resistance[(p.v, p.u)])
            ));
        }
        out
    }
}

/// `τ(v,u) = 2|E| Σ_{ℓ≥1} λ_ℓ^{-1} (φ_ℓ(v)/√d_v - φ_ℓ(u)/√d_u)²`
pub fn commute_time_spectral(g: &Graph) -> Result<CommuteTable> {
    let spec = normalized_spectrum(g)?;
    check_simple_kernel(&spec)?;
    commute_from_spectrum(g, &spec)
}

pub(crate) fn commute_from_spectrum(g: &Graph, spec: &SpectralData) -> Result<CommuteTable> {
    let n = g.n();
    let two_e = 2.0 * g.edge_count() as f64;
    let inv_sqrt: Vec<f64> = g
        .degrees()
        .iter()
        .map(|&d| 1.0 / (d as f64).sqrt())
        .collect();
    let mut tau = Matrix::zeros(n, n);
    for l in 1..n {
        let lambda = spec.eigenvalues[l];
        let y: Vec<f64> = spec
            .eigenvector(l)
            .iter()
            .zip(&inv_sqrt)
            .map(|(p, s)| p * s)
            .collect();
        for v in 0..n {
            for u in v + 1..n {
                let diff = y[v] - y[u];
                tau[(v, u)] += diff * diff / lambda;
            }
        }
    }
    for v in 0..n {
        for u in v + 1..n {
            let t = two_e * tau[(v, u)];
            tau[(v, u)] = t;
            tau[(u, v)] = t;
        }
    }
    let resistance = tau.scale(1.0 / two_e);
    Ok(CommuteTable { tau, resistance })
}

/// `R(u,v) = Γ_uu + Γ_vv - 2Γ_uv` with `Γ = (L + J/n)^{-1}`.
pub fn resistance_via_moore_penrose(g: &Graph) -> Result<Matrix> {
    g.require_connected()?;
    let n = g.n();
    let shifted = laplacian(g).add(&Matrix::from_fn(n, n, |_, _| 1.0 / n as f64));
    let gamma = shifted.inverse().map_err(|e| {
        Error::Singular(format!(
            "L + J/n is singular on a connected graph (internal inconsistency): {e}"
        ))
    })?;
    let mut r = Matrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let x = gamma[(a, a)] + gamma[(b, b)] - gamma[(a, b)] - gamma[(b, a)];
            r[(a, b)] = x;
            r[(b, a)] = x;
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub walkers: usize,
}

/// Monte-Carlo round-trip time `v -> u -> v`.
///
/// Walker `i` draws from ChaCha stream `i` of `seed`, so the estimate does not depend
/// on evaluation order.
pub fn commute_time_monte_carlo(
    g: &Graph,
    pair: NodePair,
    walkers: usize,
    seed: u64,
) -> Result<McEstimate> {
    g.require_connected()?;
    pair.check(g.n(), true)?;
    if walkers < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 walkers, got {walkers}"
        )));
    }
    if pair.v == pair.u {
        return Ok(McEstimate {
            mean: 0.0,
            std_error: 0.0,
            walkers,
        });
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..walkers {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let steps = round_trip(g, pair, &mut rng).ok_or(Error::StepCapExceeded {
            walker: i,
            cap: WALK_STEP_CAP,
        })?;
        let x = steps as f64;
        sum += x;
        sum_sq += x * x;
    }
    let w = walkers as f64;
    let mean = sum / w;
    let var = ((sum_sq - w * mean * mean) / (w - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / w).sqrt(),
        walkers,
    })
}

fn round_trip(g: &Graph, pair: NodePair, rng: &mut ChaCha8Rng) -> Option<u64> {
    let mut steps = 0u64;
    let mut at = pair.v;
    for target in [pair.u, pair.v] {
        while at != target {
            let nb = g.neighbors(at);
            at = nb[rng.gen_range(0..nb.len())];
            steps += 1;
            if steps > WALK_STEP_CAP {
                return None;
            }
        }
    }
    Some(steps)
}

/// Extremal spectral quantities used by the depth and spectral bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub lambda_1: f64,
    pub lambda_max: f64,
    /// Maximizer of `|1 - c2 λ|` over the positive spectrum.
    pub lambda_star: f64,
    /// `|1 - c2 λ*|`
    pub contraction: f64,
    /// `√(d_max / d_min)`
    pub gamma: f64,
    /// `|1 - c2 λ_1| == |1 - c2 λ_max|`; resolved toward `λ_1`.
    pub tie: bool,
}

/// Returns `(λ*, tie)`. Ties go to `lambda_1`.
pub fn select_lambda_star(lambda_1: f64, lambda_max: f64, c2: f64) -> (f64, bool) {
    let a = (1.0 - c2 * lambda_1).abs();
    let b = (1.0 - c2 * lambda_max).abs();
    let tie = (a - b).abs() <= 1e-12;
    if b > a && !tie {
        (lambda_max, false)
    } else {
        (lambda_1, tie)
    }
}

pub fn gamma(g: &Graph) -> f64 {
    (g.max_degree() as f64 / g.min_degree() as f64).sqrt()
}

/// `λ_1`, `λ_{n-1}`, `λ*` and `γ` of a connected, non-bipartite graph; `0 < c2 <= 1`.
pub fn spectral_summary(g: &Graph, c2: f64) -> Result<SpectralSummary> {
    g.require_validated()?;
    if !(c2 > 0.0 && c2 <= 1.0) {
        return Err(Error::InvalidParameter(format!("c2 = {c2} outside (0, 1]")));
    }
    let spec = normalized_spectrum(g)?;
    check_simple_kernel(&spec)?;
    Ok(summary_from_spectrum(g, &spec, c2))
}

pub(crate) fn summary_from_spectrum(g: &Graph, spec: &SpectralData, c2: f64) -> SpectralSummary {
    let lambda_1 = spec.eigenvalues[1];
    let lambda_max = *spec.eigenvalues.last().expect("n >= 2");
    let (lambda_star, tie) = select_lambda_star(lambda_1, lambda_max, c2);
    SpectralSummary {
        lambda_1,
        lambda_max,
        lambda_star,
        contraction: (1.0 - c2 * lambda_star).abs(),
        gamma: gamma(g),
        tie,
    }
}
