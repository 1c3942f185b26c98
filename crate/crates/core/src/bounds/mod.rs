//! Hessian mixing bounds, over-squashing proxies and capacity lower bounds.
//!
//! Internally every bound is evaluated with the scaled operator `T = w S
//! = ω I + w c1 diag(𝖠1) + w c2 𝖠`. Each summand of the mixing bound is homogeneous in
//! `w`, so the two forms agree exactly; `T` avoids the division by `w` and covers `w = 0`.

mod capacity;

pub use capacity::{
    min_depth_bound, min_weight_bound, spectral_mixing_bound, MinDepthBound, MinWeightBound,
    SpectralBound,
};

use crate::graph::{Graph, NodePair};
use crate::{Error, Extended, Matrix, Result, SignedExtended};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// `D^{-1/2} A D^{-1/2}`
    Sym,
    /// `D^{-1} A`
    Rw,
    /// `A`
    Raw,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 3] = [MatrixKind::Sym, MatrixKind::Rw, MatrixKind::Raw];

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Sym => "sym",
            MatrixKind::Rw => "rw",
            MatrixKind::Raw => "raw",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" => Ok(MatrixKind::Sym),
            "rw" => Ok(MatrixKind::Rw),
            "raw" => Ok(MatrixKind::Raw),
            other => Err(Error::InvalidParameter(format!(
                "unknown matrix kind `{other}`"
            ))),
        }
    }
}

/// Aggregation matrix `𝖠` supported on the adjacency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessagePassingMatrix {
    pub kind: MatrixKind,
    pub values: Matrix,
}

impl MessagePassingMatrix {
    pub fn n(&self) -> usize {
        self.values.rows()
    }
}

pub fn build_message_matrix(g: &Graph, kind: MatrixKind) -> Result<MessagePassingMatrix> {
    g.require_connected()?;
    let deg: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
    let mut values = Matrix::zeros(g.n(), g.n());
    for &(a, b) in g.edges() {
        let (ab, ba) = match kind {
            MatrixKind::Sym => {
                let x = 1.0 / (deg[a] * deg[b]).sqrt();
                (x, x)
            }
            MatrixKind::Rw => (1.0 / deg[a], 1.0 / deg[b]),
            MatrixKind::Raw => (1.0, 1.0),
        };
        values[(a, b)] = ab;
        values[(b, a)] = ba;
    }
    Ok(MessagePassingMatrix { kind, values })
}

/// Bounds `(ω, w, c1, c2, c^(2), c_σ)` on weights and derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixingConstants {
    pub omega: f64,
    pub w: f64,
    pub c1: f64,
    pub c2: f64,
    pub c2nd: f64,
    pub c_sigma: f64,
}

impl Default for MixingConstants {
    fn default() -> Self {
        MixingConstants {
            omega: 0.0,
            w: 1.0,
            c1: 0.0,
            c2: 1.0,
            c2nd: 0.0,
            c_sigma: 1.0,
        }
    }
}

impl MixingConstants {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("w", self.w),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c2nd", self.c2nd),
            ("c_sigma", self.c_sigma),
        ];
        for (name, x) in fields {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "constant {name} = {x} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// `S = (ω/w) I + c1 diag(𝖠1) + c2 𝖠`
pub fn build_s(a: &MessagePassingMatrix, c: &MixingConstants) -> Result<Matrix> {
    c.validate()?;
    if c.w == 0.0 {
        return Err(Error::DegenerateCapacity);
    }
    Ok(operator(a, c.omega / c.w, c.c1, c.c2))
}

/// `diag_scale I + c1 diag(𝖠1) + c2 𝖠`
fn operator(a: &MessagePassingMatrix, diag_scale: f64, c1: f64, c2: f64) -> Matrix {
    let rows = a.values.row_sums();
    let mut s = a.values.scale(c2);
    for (i, r) in rows.iter().enumerate() {
        s[(i, i)] += diag_scale + c1 * r;
    }
    s
}

/// `𝖰_k` of the depth-`m` bound, in terms of `S`.
pub fn build_qk(
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
    k: usize,
) -> Result<Matrix> {
    if m == 0 || k >= m {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= k < m, got k = {k}, m = {m}"
        )));
    }
    let s = build_s(a, c)?;
    let powers = s.powers(m);
    Ok(q_matrix(&a.values, &powers, m, k))
}

/// `𝖯_k + 𝖯_kᵀ + (X^ℓ)ᵀ diag(1ᵀX^k (diag(𝖠1) + 𝖠)) X^ℓ` for a power table of `X`, `ℓ = m-k-1`.
fn q_matrix(a: &Matrix, powers: &[Matrix], m: usize, k: usize) -> Matrix {
    let l = m - k - 1;
    let xl = &powers[l];
    let col = powers[k].col_sums();
    let e = degree_weighted(a, &col);
    let p = scaled_gram(xl, &col, &a.matmul(xl));
    let third = scaled_gram(xl, &e, xl);
    let q = p.add(&p.transpose()).add(&third);
    Matrix::from_fn(q.rows(), q.cols(), |i, j| {
        if i <= j {
            q[(i, j)]
        } else {
            q[(j, i)]
        }
    })
}

/// `Xᵀ diag(d) Y`
fn scaled_gram(x: &Matrix, d: &[f64], y: &Matrix) -> Matrix {
    let mut dy = y.clone();
    for (j, &dj) in d.iter().enumerate() {
        dy.row_mut(j).iter_mut().for_each(|e| *e *= dj);
    }
    x.transpose().matmul(&dy)
}

/// `cᵀ (diag(𝖠1) + 𝖠)`
fn degree_weighted(a: &Matrix, c: &[f64]) -> Vec<f64> {
    let rows = a.row_sums();
    let mut e = a.vecmat(c);
    for (j, ej) in e.iter_mut().enumerate() {
        *ej += c[j] * rows[j];
    }
    e
}

/// Cached powers of `T = w S` and related vectors for one `(𝖠, c, m)`.
struct Propagation<'a> {
    a: &'a Matrix,
    c: MixingConstants,
    m: usize,
    /// `T^0 .. T^m`
    t: Vec<Matrix>,
    /// `1ᵀ T^k` for `k = 0..m`
    col: Vec<Vec<f64>>,
}

impl<'a> Propagation<'a> {
    fn new(a: &'a MessagePassingMatrix, c: &MixingConstants, m: usize) -> Result<Self> {
        c.validate()?;
        if m == 0 {
            return Err(Error::InvalidParameter("depth m must be >= 1".into()));
        }
        let t_op = operator(a, c.omega, c.w * c.c1, c.w * c.c2);
        let t = t_op.powers(m);
        let col = t.iter().map(Matrix::col_sums).collect();
        Ok(Propagation {
            a: &a.values,
            c: *c,
            m,
            t,
            col,
        })
    }

    fn n(&self) -> usize {
        self.a.rows()
    }

    /// Coefficient `c_σ^{2m-k-1}` of summand `k`.
    fn sigma_weight(&self, k: usize) -> f64 {
        self.c.c_sigma.powi((2 * self.m - k - 1) as i32)
    }

    /// Summand `k` of the mixing bound at `(v, u)`.
    fn term(&self, k: usize, v: usize, u: usize) -> f64 {
        let n = self.n();
        let tp = &self.t[self.m - k];
        let first: f64 = (0..n)
            .map(|j| tp[(j, v)] * self.col[k][j] * tp[(j, u)])
            .sum();
        let second = if self.c.c2nd == 0.0 || self.c.w == 0.0 {
            0.0
        } else {
            self.q_entry(k, v, u)
        };
        self.sigma_weight(k) * (first + self.c.c2nd * self.c.w * second)
    }

    /// `(𝖰_k)_{vu}` built from `T`.
    fn q_entry(&self, k: usize, v: usize, u: usize) -> f64 {
        let n = self.n();
        let tl = &self.t[self.m - k - 1];
        let col = &self.col[k];
        let at_u: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| self.a[(j, i)] * tl[(i, u)]).sum())
            .collect();
        let at_v: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| self.a[(j, i)] * tl[(i, v)]).sum())
            .collect();
        let e = degree_weighted(self.a, col);
        (0..n)
            .map(|j| {
                col[j] * (tl[(j, v)] * at_u[j] + tl[(j, u)] * at_v[j])
                    + e[j] * tl[(j, v)] * tl[(j, u)]
            })
            .sum()
    }

    /// Summand `k` for every pair at once.
    fn term_matrix(&self, k: usize) -> Matrix {
        let tp = &self.t[self.m - k];
        let mut out = scaled_gram(tp, &self.col[k], tp);
        if self.c.c2nd != 0.0 && self.c.w != 0.0 {
            out = out.add(&q_matrix(self.a, &self.t, self.m, k).scale(self.c.c2nd * self.c.w));
        }
        out.scale(self.sigma_weight(k))
    }

    fn total_matrix(&self) -> Matrix {
        (0..self.m).fold(Matrix::zeros(self.n(), self.n()), |acc, k| {
            acc.add(&self.term_matrix(k))
        })
    }

    /// Per-node Hessian bounds `D_i` for the pair `(v, u)`; `Σ_i D_i` is the graph-level bound.
    fn node_bounds(&self, v: usize, u: usize) -> Vec<f64> {
        let n = self.n();
        let m = self.m;
        let cs = self.c.c_sigma;
        let mut out = vec![0.0; n];
        for k in 0..m {
            let tp = &self.t[m - k];
            let x: Vec<f64> = (0..n).map(|j| tp[(j, v)] * tp[(j, u)]).collect();
            let y = self.t[k].matvec(&x);
            let wk = cs.powi((2 * m - k - 1) as i32);
            out.iter_mut().zip(&y).for_each(|(o, yi)| *o += wk * yi);
        }
        if self.c.c2nd != 0.0 && self.c.w != 0.0 {
            let b = operator_b(self.a);
            for l in 0..m {
                let tl = &self.t[l];
                let atl = self.a.matmul(tl);
                let p: Vec<f64> = (0..n)
                    .map(|i| {
                        let cross = tl[(i, v)] * atl[(i, u)] + tl[(i, u)] * atl[(i, v)];
                        let diag: f64 = (0..n).map(|j| tl[(j, v)] * b[(i, j)] * tl[(j, u)]).sum();
                        cross + diag
                    })
                    .collect();
                let y = self.t[m - 1 - l].matvec(&p);
                let wl = self.c.c2nd * self.c.w * cs.powi((m + l) as i32);
                out.iter_mut().zip(&y).for_each(|(o, yi)| *o += wl * yi);
            }
        }
        out
    }
}

/// `diag(𝖠1) + 𝖠`
fn operator_b(a: &Matrix) -> Matrix {
    let mut b = a.clone();
    for (i, r) in a.row_sums().into_iter().enumerate() {
        b[(i, i)] += r;
    }
    b
}

/// Mixing bound at one pair, with its per-`k` breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub pair: NodePair,
    pub depth: usize,
    pub kind: MatrixKind,
    pub per_k_terms: Vec<f64>,
    pub total_bound: f64,
    pub osq_tilde: Extended,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

const COLUMN_SUM_NOTE: &str = "non-symmetric aggregation: bound uses column sums 1^T S^k; \
the spectral analysis manipulates row sums S^k 1, which differ for this kind";

fn check_dims(g: &Graph, a: &MessagePassingMatrix) -> Result<()> {
    if a.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, graph has {} nodes",
            a.n(),
            g.n()
        )));
    }
    Ok(())
}

/// `Σ_k (c_σ w)^{2m-k-1} (w (S^{m-k})ᵀ diag(1ᵀS^k) S^{m-k} + c^(2) 𝖰_k)_{vu}`
pub fn mixing_bound(
    g: &Graph,
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
    pair: NodePair,
) -> Result<BoundReport> {
    check_dims(g, a)?;
    pair.check(g.n(), true)?;
    let prop = Propagation::new(a, c, m)?;
    let per_k_terms: Vec<f64> = (0..m).map(|k| prop.term(k, pair.v, pair.u)).collect();
    let total_bound: f64 = per_k_terms.iter().sum();
    let mut notes = Vec::new();
    if a.kind == MatrixKind::Rw {
        notes.push(COLUMN_SUM_NOTE.to_string());
    }
    Ok(BoundReport {
        pair,
        depth: m,
        kind: a.kind,
        per_k_terms,
        total_bound,
        osq_tilde: Extended::recip(total_bound),
        notes,
    })
}

/// The mixing bound for every ordered pair (including `v = u`).
pub fn mixing_bound_matrix(
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
) -> Result<Matrix> {
    Ok(Propagation::new(a, c, m)?.total_matrix())
}

/// `ÕSQ = 1 / mixing bound`, infinite when the bound vanishes (e.g. under-reaching or `w = 0`).
pub fn osq_tilde(
    g: &Graph,
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
    pair: NodePair,
) -> Result<Extended> {
    Ok(mixing_bound(g, a, c, m, pair)?.osq_tilde)
}

/// Largest bound over all pairs divided by the bound at `pair`.
pub fn osq_relative(
    g: &Graph,
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
    pair: NodePair,
) -> Result<Extended> {
    check_dims(g, a)?;
    pair.check(g.n(), true)?;
    let all = mixing_bound_matrix(a, c, m)?;
    let max = all.max_abs();
    if max == 0.0 {
        return Err(Error::AllPairsZero);
    }
    let b = all[(pair.v, pair.u)];
    Ok(if b == 0.0 {
        Extended::Infinite
    } else {
        Extended::Finite(max / b)
    })
}

/// `(c_σ w)^m (S^m)`: bounds `‖∂h_v^{(m)}/∂x_u‖` at entry `(v, u)`.
pub fn jacobian_bound_matrix(
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
) -> Result<Matrix> {
    c.validate()?;
    let t = operator(a, c.omega, c.w * c.c1, c.w * c.c2);
    let tm = t.powers(m).pop().expect("at least T^0");
    Ok(tm.scale(c.c_sigma.powi(m as i32)))
}

/// `((c_σ w)^m (S^m)_{vu})^{-1}`
pub fn node_osq_first_order(
    g: &Graph,
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
    pair: NodePair,
) -> Result<Extended> {
    check_dims(g, a)?;
    pair.check(g.n(), true)?;
    Ok(Extended::recip(
        jacobian_bound_matrix(a, c, m)?[(pair.v, pair.u)],
    ))
}

/// Bounds on `‖∂²h_i^{(m)}/∂x_v∂x_u‖` for every node `i`.
pub fn node_hessian_bounds(
    g: &Graph,
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
    pair: NodePair,
) -> Result<Vec<f64>> {
    check_dims(g, a)?;
    pair.check(g.n(), true)?;
    Ok(Propagation::new(a, c, m)?.node_bounds(pair.v, pair.u))
}

/// Reciprocal of the per-node Hessian bound at node `i`.
pub fn node_osq_second_order(
    g: &Graph,
    a: &MessagePassingMatrix,
    c: &MixingConstants,
    m: usize,
    i: usize,
    pair: NodePair,
) -> Result<Extended> {
    if i >= g.n() {
        return Err(Error::NodeOutOfRange { index: i, n: g.n() });
    }
    Ok(Extended::recip(node_hessian_bounds(g, a, c, m, pair)?[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewiringScore {
    pub pair: NodePair,
    pub before: Extended,
    pub after: Extended,
    /// `after - before`
    pub delta: SignedExtended,
}

/// ÕSQ before and after a rewiring, per pair.
pub fn score_rewiring(
    before: &Graph,
    after: &Graph,
    c: &MixingConstants,
    m: usize,
    pairs: &[NodePair],
    kind: MatrixKind,
) -> Result<Vec<RewiringScore>> {
    if before.n() != after.n() {
        return Err(Error::DimensionMismatch(format!(
            "rewiring changed the node count from {} to {}",
            before.n(),
            after.n()
        )));
    }
    let a0 = build_message_matrix(before, kind)?;
    let a1 = build_message_matrix(after, kind)?;
    let b0 = mixing_bound_matrix(&a0, c, m)?;
    let b1 = mixing_bound_matrix(&a1, c, m)?;
    pairs
        .iter()
        .map(|&pair| {
            pair.check(before.n(), true)?;
            let x = Extended::recip(b0[(pair.v, pair.u)]);
            let y = Extended::recip(b1[(pair.v, pair.u)]);
            Ok(RewiringScore {
                pair,
                before: x,
                after: y,
                delta: SignedExtended::difference(y, x),
            })
        })
        .collect()
}
