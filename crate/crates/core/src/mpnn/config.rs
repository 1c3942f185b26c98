use super::{Activation, Layer, MessageFunction, MpnnModel, Readout};
use crate::bounds::MatrixKind;
use crate::matrix::norm2;
use crate::{Error, Matrix, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageFamily {
    Linear,
    Gated,
}

/// Recipe for a randomly initialised model; the JSON model-config format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub width: usize,
    pub depth: usize,
    pub family: MessageFamily,
    pub activation: Activation,
    pub readout: Readout,
    pub matrix_kind: MatrixKind,
    /// Entries are uniform in `[-weight_scale, weight_scale]`.
    pub weight_scale: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn build(&self) -> Result<MpnnModel> {
        if self.width == 0 {
            return Err(Error::InvalidParameter("width must be positive".into()));
        }
        if !(self.weight_scale.is_finite() && self.weight_scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight scale {} is invalid",
                self.weight_scale
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let d = self.width;
        let s = self.weight_scale;
        let draw = |rng: &mut ChaCha8Rng| {
            Matrix::from_fn(
                d,
                d,
                |_, _| if s == 0.0 { 0.0 } else { rng.gen_range(-s..=s) },
            )
        };
        let layers = (0..self.depth)
            .map(|_| {
                let omega = draw(&mut rng);
                let w = draw(&mut rng);
                let message = match self.family {
                    MessageFamily::Linear => MessageFunction::Linear {
                        c1: draw(&mut rng),
                        c2: draw(&mut rng),
                    },
                    MessageFamily::Gated => MessageFunction::Gated {
                        g1: draw(&mut rng),
                        g2: draw(&mut rng),
                        u: draw(&mut rng),
                    },
                };
                Layer { omega, w, message }
            })
            .collect();
        let theta = loop {
            let t: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = norm2(&t);
            if norm > 1e-3 {
                break t.into_iter().map(|x| x / norm).collect();
            }
        };
        MpnnModel::new(
            layers,
            self.activation,
            self.readout,
            theta,
            self.matrix_kind,
        )
    }
}
