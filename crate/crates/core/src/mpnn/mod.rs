//! An executable MPNN: `h_v' = σ(Ω h_v + W Σ_u 𝖠_vu ψ(h_v, h_u))`, read out as `θᵀ READ(h)`.

mod certify;
mod config;
mod fd;

pub use certify::{
    certify_constants, operator_norm, spectral_norm, CertifiedConstants, LayerCertificate,
};
pub use config::{MessageFamily, ModelConfig};
pub use fd::{
    empirical_max_mixing, fd_jacobian, fd_mixing, fd_node_hessian_norms, mixing_fd,
    mixing_fd_with_step, verify_bound, verify_bound_with, InputBox, JacobianBlock, MixingFd,
    VerifyOutcome, FD_STEP_FIRST, FD_STEP_SECOND, TIE_GAP,
};

use crate::bounds::{build_message_matrix, MatrixKind, MessagePassingMatrix};
use crate::graph::Graph;
use crate::matrix::{dot, norm2};
use crate::{Error, Matrix, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// Exact form `x Φ(x)`.
    Gelu,
    Identity,
    /// Unbounded derivatives; useful for emulating exponential targets, not certifiable.
    Exp,
}

/// `sup |GELU'|`, attained at `x = √2`, rounded up.
pub const GELU_C_SIGMA: f64 = 1.13;

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Gelu => x * std_normal_cdf(x),
            Activation::Identity => x,
            Activation::Exp => x.exp(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Gelu => std_normal_cdf(x) + x * std_normal_pdf(x),
            Activation::Identity => 1.0,
            Activation::Exp => x.exp(),
        }
    }

    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Gelu => std_normal_pdf(x) * (2.0 - x * x),
            Activation::Identity => 0.0,
            Activation::Exp => x.exp(),
        }
    }

    /// `max{sup|σ'|, sup|σ''|}` over the real line, when finite.
    pub fn c_sigma(self) -> Option<f64> {
        match self {
            Activation::Tanh | Activation::Identity => Some(1.0),
            Activation::Gelu => Some(GELU_C_SIGMA),
            Activation::Exp => None,
        }
    }

    /// Bound on `|σ(x)|` over the real line, when finite.
    pub fn output_bound(self) -> Option<f64> {
        match self {
            Activation::Tanh => Some(1.0),
            _ => None,
        }
    }

    pub fn is_smooth(self) -> bool {
        true
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MessageFunction {
    /// `ψ(x, y) = C1 x + C2 y`
    Linear { c1: Matrix, c2: Matrix },
    /// `ψ(x, y) = sigmoid(G1 x + G2 y) ⊙ (U y)`
    Gated { g1: Matrix, g2: Matrix, u: Matrix },
}

impl MessageFunction {
    pub fn matrices(&self) -> Vec<&Matrix> {
        match self {
            MessageFunction::Linear { c1, c2 } => vec![c1, c2],
            MessageFunction::Gated { g1, g2, u } => vec![g1, g2, u],
        }
    }

    /// `ψ(x, y)` with `x` the receiving and `y` the sending node state.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        match self {
            MessageFunction::Linear { c1, c2 } => {
                let mut out = c1.matvec(x);
                out.iter_mut().zip(c2.matvec(y)).for_each(|(o, b)| *o += b);
                out
            }
            MessageFunction::Gated { g1, g2, u } => {
                let a = g1.matvec(x);
                let b = g2.matvec(y);
                let uy = u.matvec(y);
                a.iter()
                    .zip(&b)
                    .zip(&uy)
                    .map(|((p, q), r)| sigmoid(p + q) * r)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    Sum,
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub omega: Matrix,
    pub w: Matrix,
    pub message: MessageFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpnnModel {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub readout: Readout,
    /// Unit-norm readout vector.
    pub theta: Vec<f64>,
    pub matrix_kind: MatrixKind,
}

impl MpnnModel {
    /// Validates shapes and the unit norm of `theta`.
    pub fn new(
        layers: Vec<Layer>,
        activation: Activation,
        readout: Readout,
        theta: Vec<f64>,
        matrix_kind: MatrixKind,
    ) -> Result<Self> {
        let model = MpnnModel {
            layers,
            activation,
            readout,
            theta,
            matrix_kind,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.theta.len();
        if d == 0 {
            return Err(Error::DimensionMismatch("width must be positive".into()));
        }
        if (norm2(&self.theta) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "theta has norm {}, expected 1",
                norm2(&self.theta)
            )));
        }
        for (t, layer) in self.layers.iter().enumerate() {
            let mut all = vec![&layer.omega, &layer.w];
            all.extend(layer.message.matrices());
            if all.iter().any(|m| m.rows() != d || m.cols() != d) {
                return Err(Error::DimensionMismatch(format!(
                    "layer {t} is not {d}x{d} throughout"
                )));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.theta.len()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Binds the model to a graph, precomputing the aggregation matrix.
    pub fn bind<'a>(&'a self, g: &'a Graph) -> Result<BoundModel<'a>> {
        self.validate()?;
        let a = build_message_matrix(g, self.matrix_kind)?;
        Ok(BoundModel {
            model: self,
            graph: g,
            a,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub node_states: Matrix,
    pub graph_output: f64,
}

/// Runs the model on node features `x` (`n × d`).
pub fn forward(model: &MpnnModel, g: &Graph, x: &Matrix) -> Result<ForwardOutput> {
    model.bind(g)?.forward(x)
}

/// A model together with the graph it runs on.
pub struct BoundModel<'a> {
    pub model: &'a MpnnModel,
    pub graph: &'a Graph,
    pub a: MessagePassingMatrix,
}

impl BoundModel<'_> {
    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.rows() != self.graph.n() || x.cols() != self.model.width() {
            return Err(Error::DimensionMismatch(format!(
                "features are {}x{}, model expects {}x{}",
                x.rows(),
                x.cols(),
                self.graph.n(),
                self.model.width()
            )));
        }
        Ok(())
    }

    /// Final node states `h^{(m)}`.
    pub fn node_states(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let n = self.graph.n();
        let d = self.model.width();
        let sigma = self.model.activation;
        let mut h = x.clone();
        for layer in &self.model.layers {
            let mut next = Matrix::zeros(n, d);
            for v in 0..n {
                let hv = h.row(v);
                let mut agg = vec![0.0; d];
                for &u in self.graph.neighbors(v) {
                    let coef = self.a.values[(v, u)];
                    let msg = layer.message.eval(hv, h.row(u));
                    agg.iter_mut().zip(&msg).for_each(|(s, m)| *s += coef * m);
                }
                let self_part = layer.omega.matvec(hv);
                let nb_part = layer.w.matvec(&agg);
                for (o, (p, q)) in next
                    .row_mut(v)
                    .iter_mut()
                    .zip(self_part.iter().zip(&nb_part))
                {
                    *o = sigma.eval(p + q);
                }
            }
            h = next;
        }
        Ok(h)
    }

    /// `READ(h)` per channel.
    pub fn readout(&self, h: &Matrix) -> Vec<f64> {
        let n = h.rows();
        let d = h.cols();
        match self.model.readout {
            Readout::Sum => h.col_sums(),
            Readout::Mean => h.col_sums().into_iter().map(|s| s / n as f64).collect(),
            Readout::Max => (0..d)
                .map(|c| (0..n).map(|v| h[(v, c)]).fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardOutput> {
        let node_states = self.node_states(x)?;
        let graph_output = dot(&self.model.theta, &self.readout(&node_states));
        if !graph_output.is_finite() {
            return Err(Error::NonFinite("graph output".into()));
        }
        Ok(ForwardOutput {
            node_states,
            graph_output,
        })
    }

    /// Smallest gap between the top two node values over all channels (`∞` for one node).
    pub fn max_readout_gap(h: &Matrix) -> (usize, f64) {
        let mut worst = (0, f64::INFINITY);
        for c in 0..h.cols() {
            let mut top = [f64::NEG_INFINITY; 2];
            for v in 0..h.rows() {
                let x = h[(v, c)];
                if x > top[0] {
                    top = [x, top[0]];
                } else if x > top[1] {
                    top[1] = x;
                }
            }
            let gap = top[0] - top[1];
            if gap < worst.1 {
                worst = (c, gap);
            }
        }
        worst
    }
}

/// A scalar function of node features, the object whose mixing is measured.
pub trait GraphFunction {
    fn nodes(&self) -> usize;
    fn width(&self) -> usize;
    fn output(&self, x: &Matrix) -> Result<f64>;
    /// Errors when `x` sits at a point where second differences are meaningless.
    fn check_smooth_at(&self, _x: &Matrix) -> Result<()> {
        Ok(())
    }
    /// Per-channel argmax node of a MAX readout; `None` for smooth readouts.
    fn argmax_pattern(&self, _x: &Matrix) -> Result<Option<Vec<usize>>> {
        Ok(None)
    }
}

impl GraphFunction for BoundModel<'_> {
    fn nodes(&self) -> usize {
        self.graph.n()
    }

    fn width(&self) -> usize {
        self.model.width()
    }

    fn output(&self, x: &Matrix) -> Result<f64> {
        Ok(self.forward(x)?.graph_output)
    }

    fn check_smooth_at(&self, x: &Matrix) -> Result<()> {
        if self.model.readout != Readout::Max || self.graph.n() < 2 {
            return Ok(());
        }
        let h = self.node_states(x)?;
        let (channel, gap) = BoundModel::max_readout_gap(&h);
        if gap <= TIE_GAP {
            return Err(Error::ReadoutTie { channel, gap });
        }
        Ok(())
    }

    fn argmax_pattern(&self, x: &Matrix) -> Result<Option<Vec<usize>>> {
        if self.model.readout != Readout::Max {
            return Ok(None);
        }
        let h = self.node_states(x)?;
        let pattern = (0..h.cols())
            .map(|c| {
                (0..h.rows()).fold(0, |best, v| if h[(v, c)] > h[(best, c)] { v } else { best })
            })
            .collect();
        Ok(Some(pattern))
    }
}
