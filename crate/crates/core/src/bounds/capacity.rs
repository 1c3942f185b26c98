use super::{build_message_matrix, MatrixKind, MixingConstants};
use crate::graph::{Graph, NodePair};
use crate::spectral::{self, SpectralData, SpectralSummary};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Slack allowed when checking `≤ 1` premises, to absorb rounding in user constants.
const PREMISE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinWeightBound {
    pub pair: NodePair,
    pub kind: MatrixKind,
    /// Distance `r = d(v, u)`.
    pub distance: usize,
    /// Depth `m = ⌈r/2⌉` at which the bound is stated.
    pub depth: usize,
    /// `(𝖠^r)_{vu}` for the chosen kind.
    pub walk_weight: f64,
    /// Number of shortest paths `q`.
    pub path_count: u128,
    /// `(1/c2) (mix / (𝖠^r)_{vu})^{1/r}`
    pub exact: f64,
    /// `(d_min/c2) (mix/q)^{1/r}`; only a valid lower bound for normalized kinds.
    pub degree_based: Option<f64>,
}

/// Smallest weight norm `w` compatible with mixing `target_mixing` at depth `⌈r/2⌉`.
pub fn min_weight_bound(
    g: &Graph,
    pair: NodePair,
    c2: f64,
    target_mixing: f64,
    kind: MatrixKind,
) -> Result<MinWeightBound> {
    pair.check(g.n(), false)?;
    if !(target_mixing > 0.0 && target_mixing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target mixing {target_mixing} must be positive"
        )));
    }
    if !(c2 > 0.0 && c2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "c2 = {c2} must be positive"
        )));
    }
    let a = build_message_matrix(g, kind)?;
    let r = g.shortest_distance(pair)?;
    let q = g.walk_count(pair, r);
    let mut x = vec![0.0; g.n()];
    x[pair.u] = 1.0;
    for _ in 0..r {
        x = a.values.matvec(&x);
    }
    let walk_weight = x[pair.v];
    let rf = r as f64;
    let exact = (target_mixing / walk_weight).powf(1.0 / rf) / c2;
    let degree_based = match kind {
        MatrixKind::Raw => None,
        MatrixKind::Sym | MatrixKind::Rw => {
            Some(g.min_degree() as f64 / c2 * (target_mixing / q as f64).powf(1.0 / rf))
        }
    };
    Ok(MinWeightBound {
        pair,
        kind,
        distance: r,
        depth: r.div_ceil(2),
        walk_weight,
        path_count: q,
        exact,
        degree_based,
    })
}

/// Checks `max{w, ω/w + c1 γ + c2} ≤ 1` together with `c_σ ≤ 1` and `c2 > 0`.
fn check_premise(c: &MixingConstants, gamma: f64) -> Result<()> {
    c.validate()?;
    if c.w <= 0.0 {
        return Err(Error::PremiseViolation(
            "w > 0 (the premise divides omega by w)".into(),
        ));
    }
    if c.c2 <= 0.0 {
        return Err(Error::PremiseViolation("c2 > 0".into()));
    }
    if c.w > 1.0 + PREMISE_TOL {
        return Err(Error::PremiseViolation(format!("w <= 1 (w = {})", c.w)));
    }
    let lhs = c.omega / c.w + c.c1 * gamma + c.c2;
    if lhs > 1.0 + PREMISE_TOL {
        return Err(Error::PremiseViolation(format!(
            "omega/w + c1*gamma + c2 <= 1 (got {} + {}*{} + {} = {lhs})",
            c.omega / c.w,
            c.c1,
            gamma,
            c.c2
        )));
    }
    if c.c_sigma > 1.0 + PREMISE_TOL {
        return Err(Error::PremiseViolation(format!(
            "c_sigma <= 1 (c_sigma = {})",
            c.c_sigma
        )));
    }
    Ok(())
}

fn validated_spectrum(g: &Graph, c2: f64) -> Result<(SpectralData, SpectralSummary)> {
    g.require_validated()?;
    let spec = spectral::normalized_spectrum(g)?;
    if spec.zero_count() != 1 {
        return Err(Error::RepeatedZeroEigenvalue(spec.zero_count()));
    }
    let summary = spectral::summary_from_spectrum(g, &spec, c2);
    Ok((spec, summary))
}

/// Lower bound on depth, split into its commute-time and correction parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinDepthBound {
    pub pair: NodePair,
    pub tau: f64,
    /// `τ(v,u) / (4 c2)`
    pub commute_term: f64,
    /// `(|E|/√(d_v d_u)) (mix/(γμ) - (1/c2)((γ + |1-c2λ*|^{r-1})/λ_1 + 2c^(2)/μ))`
    pub correction: f64,
    /// `commute_term + correction`, not rounded.
    pub bound: f64,
    pub mu: f64,
    pub distance: usize,
    pub summary: SpectralSummary,
}

/// Depth needed to reach mixing `target_mixing` between `v` and `u` (symmetric aggregation).
pub fn min_depth_bound(
    g: &Graph,
    pair: NodePair,
    c: &MixingConstants,
    target_mixing: f64,
) -> Result<MinDepthBound> {
    pair.check(g.n(), false)?;
    if !(target_mixing >= 0.0 && target_mixing.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target mixing {target_mixing} must be >= 0"
        )));
    }
    g.require_validated()?;
    let gamma = spectral::gamma(g);
    check_premise(c, gamma)?;
    let (spec, summary) = validated_spectrum(g, c.c2)?;
    let table = spectral::commute_from_spectrum(g, &spec)?;
    let tau = table.tau[(pair.v, pair.u)];
    let r = g.shortest_distance(pair)?;
    let mu = 1.0 + 2.0 * c.c2nd * (1.0 + gamma);
    let dvdu = (g.degree(pair.v) * g.degree(pair.u)) as f64;
    let bracket = target_mixing / (gamma * mu)
        - ((gamma + summary.contraction.powi(r as i32 - 1)) / summary.lambda_1 + 2.0 * c.c2nd / mu)
            / c.c2;
    let commute_term = tau / (4.0 * c.c2);
    let correction = g.edge_count() as f64 / dvdu.sqrt() * bracket;
    Ok(MinDepthBound {
        pair,
        tau,
        commute_term,
        correction,
        bound: commute_term + correction,
        mu,
        distance: r,
        summary,
    })
}

/// Closed-form spectral upper bound on the mixing bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBound {
    pub pair: NodePair,
    pub depth: usize,
    pub kind: MatrixKind,
    /// `γ^k (m √(d_v d_u)/2|E| (1 + 2c^(2)(1+γ^s)) + (1/c2)(Z²(I-Z^{2m})(I+Z)^{-1}Δ†)_{vu})`
    pub diffusion_term: f64,
    /// `2 (c^(2)/c2) γ^k (((1+γ^s)I - Δ)(I-Z^{2m})(I+Z)^{-1}Δ†)_{vu}`
    pub nonlinear_term: f64,
    pub total: f64,
}

/// Spectral upper bound with `Z = I - c2 Δ`; `(k, s) = (1, 1)` for sym, `(4, 2)` for rw.
pub fn spectral_mixing_bound(
    g: &Graph,
    c: &MixingConstants,
    m: usize,
    pair: NodePair,
    kind: MatrixKind,
) -> Result<SpectralBound> {
    pair.check(g.n(), true)?;
    if m == 0 {
        return Err(Error::InvalidParameter("depth m must be >= 1".into()));
    }
    let (k_exp, s_exp) = match kind {
        MatrixKind::Sym => (1, 1),
        MatrixKind::Rw => (4, 2),
        MatrixKind::Raw => {
            return Err(Error::InvalidParameter(
                "the spectral bound covers sym and rw aggregation only".into(),
            ))
        }
    };
    g.require_validated()?;
    let gamma = spectral::gamma(g);
    check_premise(c, gamma)?;
    let (spec, _) = validated_spectrum(g, c.c2)?;
    let (v, u) = (pair.v, pair.u);
    let gk = gamma.powi(k_exp);
    let gs = gamma.powi(s_exp);
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    for l in 1..spec.n() {
        let lambda = spec.eigenvalues[l];
        let z = 1.0 - c.c2 * lambda;
        let common = (1.0 - z.powi(2 * m as i32)) / ((1.0 + z) * lambda);
        let phi = spec.eigenvectors[(v, l)] * spec.eigenvectors[(u, l)];
        f1 += z * z * common * phi;
        f2 += (1.0 + gs - lambda) * common * phi;
    }
    let kernel = (g.degree(v) as f64 * g.degree(u) as f64).sqrt() / (2.0 * g.edge_count() as f64);
    let diffusion_term = gk * (m as f64 * kernel * (1.0 + 2.0 * c.c2nd * (1.0 + gs)) + f1 / c.c2);
    let nonlinear_term = 2.0 * c.c2nd / c.c2 * gk * f2;
    Ok(SpectralBound {
        pair,
        depth: m,
        kind,
        diffusion_term,
        nonlinear_term,
        total: diffusion_term + nonlinear_term,
    })
}
