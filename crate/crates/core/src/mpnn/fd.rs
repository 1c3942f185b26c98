use super::{certify_constants, spectral_norm, BoundModel, GraphFunction, MpnnModel};
use crate::bounds::{mixing_bound, MixingConstants};
use crate::graph::{Graph, NodePair};
use crate::{Error, Matrix, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Central-difference step for first derivatives.
pub const FD_STEP_FIRST: f64 = 1e-5;
/// Cross-difference step for second derivatives.
pub const FD_STEP_SECOND: f64 = 1e-3;
/// Minimum separation of the top two MAX-readout candidates.
pub const TIE_GAP: f64 = 1e-6;

/// The same closed interval `[lo, hi]` for every feature coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    pub lo: f64,
    pub hi: f64,
}

impl Default for InputBox {
    fn default() -> Self {
        InputBox { lo: 0.0, hi: 1.0 }
    }
}

impl InputBox {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParameter(format!(
                "input box [{lo}, {hi}] is not an interval"
            )));
        }
        Ok(InputBox { lo, hi })
    }

    /// Sample `index` of the nested sequence for `seed`: the center first, then alternating
    /// random corners and uniform points. Each sample depends only on `(seed, index)`.
    pub fn sample(&self, n: usize, d: usize, seed: u64, index: usize) -> Matrix {
        if index == 0 {
            let mid = 0.5 * (self.lo + self.hi);
            return Matrix::from_fn(n, d, |_, _| mid);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let corner = index % 2 == 1;
        Matrix::from_fn(n, d, |_, _| {
            if corner {
                if rng.gen_bool(0.5) {
                    self.hi
                } else {
                    self.lo
                }
            } else {
                self.lo + (self.hi - self.lo) * rng.gen::<f64>()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianBlock {
    /// `∂h_v^{(m)} / ∂x_u`, `d × d`.
    pub block: Matrix,
    pub norm: f64,
}

/// Central-difference Jacobians of every final node state with respect to `x_source`.
pub fn fd_jacobian(
    model: &MpnnModel,
    g: &Graph,
    x: &Matrix,
    source: usize,
) -> Result<Vec<JacobianBlock>> {
    let bound = model.bind(g)?;
    if source >= g.n() {
        return Err(Error::NodeOutOfRange {
            index: source,
            n: g.n(),
        });
    }
    let n = g.n();
    let d = model.width();
    let h = FD_STEP_FIRST;
    let mut blocks = vec![Matrix::zeros(d, d); n];
    for beta in 0..d {
        let mut plus = x.clone();
        plus[(source, beta)] += h;
        let mut minus = x.clone();
        minus[(source, beta)] -= h;
        let hp = bound.node_states(&plus)?;
        let hm = bound.node_states(&minus)?;
        for (v, block) in blocks.iter_mut().enumerate() {
            for alpha in 0..d {
                block[(alpha, beta)] = (hp[(v, alpha)] - hm[(v, alpha)]) / (2.0 * h);
            }
        }
    }
    blocks
        .into_iter()
        .map(|block| {
            if !block.is_finite() {
                return Err(Error::NonFinite("Jacobian finite difference".into()));
            }
            let norm = spectral_norm(&block);
            Ok(JacobianBlock { block, norm })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingFd {
    /// `∂²y / ∂x_v^α ∂x_u^β`
    pub block: Matrix,
    pub max_abs: f64,
}

/// Four-point cross difference of any [`GraphFunction`] with step `h`.
pub fn mixing_fd_with_step(
    f: &dyn GraphFunction,
    x: &Matrix,
    pair: NodePair,
    h: f64,
) -> Result<MixingFd> {
    pair.check(f.nodes(), false)?;
    f.check_smooth_at(x)?;
    let base = f.argmax_pattern(x)?;
    let d = f.width();
    let mut block = Matrix::zeros(d, d);
    for alpha in 0..d {
        for beta in 0..d {
            let eval = |sv: f64, su: f64| {
                let mut y = x.clone();
                y[(pair.v, alpha)] += sv * h;
                y[(pair.u, beta)] += su * h;
                if let (Some(b), Some(p)) = (&base, f.argmax_pattern(&y)?) {
                    if let Some(channel) = b.iter().zip(&p).position(|(a, c)| a != c) {
                        return Err(Error::ArgmaxSwitch { channel });
                    }
                }
                f.output(&y)
            };
            let value = (eval(1.0, 1.0)? - eval(1.0, -1.0)? - eval(-1.0, 1.0)? + eval(-1.0, -1.0)?)
                / (4.0 * h * h);
            if !value.is_finite() {
                return Err(Error::NonFinite("mixing finite difference".into()));
            }
            block[(alpha, beta)] = value;
        }
    }
    let max_abs = block.max_abs();
    Ok(MixingFd { block, max_abs })
}

pub fn mixing_fd(f: &dyn GraphFunction, x: &Matrix, pair: NodePair) -> Result<MixingFd> {
    mixing_fd_with_step(f, x, pair, FD_STEP_SECOND)
}

/// Cross-Hessian block of the graph output between nodes `v` and `u`.
pub fn fd_mixing(model: &MpnnModel, g: &Graph, x: &Matrix, pair: NodePair) -> Result<MixingFd> {
    mixing_fd(&model.bind(g)?, x, pair)
}

/// Operator norms of `∂²h_i^{(m)}/∂x_v∂x_u` (as `d × d²` matrices) for every node `i`.
pub fn fd_node_hessian_norms(
    model: &MpnnModel,
    g: &Graph,
    x: &Matrix,
    pair: NodePair,
) -> Result<Vec<f64>> {
    let bound = model.bind(g)?;
    pair.check(g.n(), false)?;
    let n = g.n();
    let d = model.width();
    let h = FD_STEP_SECOND;
    // hess[i] is d x d^2, column index beta * d + gamma.
    let mut hess = vec![Matrix::zeros(d, d * d); n];
    for beta in 0..d {
        for gamma in 0..d {
            let states = |sv: f64, su: f64| {
                let mut y = x.clone();
                y[(pair.v, beta)] += sv * h;
                y[(pair.u, gamma)] += su * h;
                bound.node_states(&y)
            };
            let (pp, pm, mp, mm) = (
                states(1.0, 1.0)?,
                states(1.0, -1.0)?,
                states(-1.0, 1.0)?,
                states(-1.0, -1.0)?,
            );
            for (i, hi) in hess.iter_mut().enumerate() {
                for alpha in 0..d {
                    hi[(alpha, beta * d + gamma)] =
                        (pp[(i, alpha)] - pm[(i, alpha)] - mp[(i, alpha)] + mm[(i, alpha)])
                            / (4.0 * h * h);
                }
            }
        }
    }
    Ok(hess.iter().map(spectral_norm).collect())
}

/// Largest sampled `max_abs` of the cross-Hessian over the box.
///
/// Uses the nested sample sequence of [`InputBox::sample`], so more samples never lower the result.
/// Samples at or near a MAX-readout tie are skipped; it is an error only if every sample is.
pub fn empirical_max_mixing(
    f: &dyn GraphFunction,
    pair: NodePair,
    input_box: &InputBox,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let mut best = 0.0f64;
    let mut last_tie = None;
    let mut used = 0;
    for s in 0..samples {
        let x = input_box.sample(f.nodes(), f.width(), seed, s);
        match mixing_fd(f, &x, pair) {
            Ok(fd) => {
                best = best.max(fd.max_abs);
                used += 1;
            }
            Err(e @ (Error::ReadoutTie { .. } | Error::ArgmaxSwitch { .. })) => last_tie = Some(e),
            Err(e) => return Err(e),
        }
    }
    match (used, last_tie) {
        (0, Some(e)) => Err(e),
        _ => Ok(best),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub empirical: f64,
    pub theoretical: f64,
    pub tolerance: f64,
    pub satisfied: bool,
    /// `theoretical - empirical`
    pub slack: f64,
    pub constants: MixingConstants,
}

/// Compares sampled mixing with the bound evaluated on certified constants.
pub fn verify_bound(
    model: &MpnnModel,
    g: &Graph,
    pair: NodePair,
    input_box: &InputBox,
    samples: usize,
    seed: u64,
) -> Result<VerifyOutcome> {
    let constants = certify_constants(model, Some(input_box))?.constants;
    verify_bound_with(model, g, pair, input_box, samples, seed, &constants)
}

/// As [`verify_bound`] but with caller-supplied constants (which may be wrong).
pub fn verify_bound_with(
    model: &MpnnModel,
    g: &Graph,
    pair: NodePair,
    input_box: &InputBox,
    samples: usize,
    seed: u64,
    constants: &MixingConstants,
) -> Result<VerifyOutcome> {
    let bound: BoundModel = model.bind(g)?;
    if model.depth() == 0 {
        return Err(Error::InvalidParameter(
            "verification needs at least one layer".into(),
        ));
    }
    let theoretical = mixing_bound(g, &bound.a, constants, model.depth(), pair)?.total_bound;
    let empirical = empirical_max_mixing(&bound, pair, input_box, samples, seed)?;
    let tolerance = 1e-4 * theoretical.max(1.0);
    Ok(VerifyOutcome {
        empirical,
        theoretical,
        tolerance,
        satisfied: empirical <= theoretical + tolerance,
        slack: theoretical - empirical,
        constants: *constants,
    })
}
