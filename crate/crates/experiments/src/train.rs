use crate::model::{GraphTensor, Network, Template};
use crate::task::{Dataset, Instance};
use crate::{ExperimentError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use squashscope::Graph;

/// Per-epoch learning-rate multiplier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine from the base rate down to zero over the run.
    Cosine,
}

impl LrSchedule {
    pub fn factor(self, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => {
                0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub depth: usize,
    pub width: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub restarts: usize,
    pub seed: u64,
    #[serde(default)]
    pub schedule: LrSchedule,
    /// Weights start uniform in `[-s, s]` with `s = init_gain / √fan-in`.
    #[serde(default = "unit_gain")]
    pub init_gain: f64,
}

fn unit_gain() -> f64 {
    1.0
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.depth > 0
            && self.width > 0
            && self.batch_size > 0
            && self.restarts > 0
            && self.learning_rate > 0.0
            && self.init_gain > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if !ok {
            return Err(ExperimentError::Config(format!(
                "invalid training config {self:?}"
            )));
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const EPS: f64 = 1e-8;

    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RestartOutcome {
    Finished {
        train_curve: Vec<f64>,
        train_mae: f64,
        test_mae: f64,
    },
    Diverged {
        epoch: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub template: Template,
    pub parameters: usize,
    pub restarts: Vec<RestartOutcome>,
    pub test_mae_mean: f64,
    pub test_mae_std: f64,
    pub train_mae_mean: f64,
    /// Test MAE divided by the mean absolute test target.
    pub rel_mae_mean: f64,
}

impl TrainReport {
    pub fn finished(&self) -> usize {
        self.restarts
            .iter()
            .filter(|r| matches!(r, RestartOutcome::Finished { .. }))
            .count()
    }
}

pub fn tensors(graphs: &[Graph], template: Template) -> Result<Vec<GraphTensor>> {
    graphs
        .iter()
        .map(|g| GraphTensor::new(g, template.kind()))
        .collect()
}

/// Restart `r` seed; independent of the other restarts and of evaluation order.
pub fn restart_seed(seed: u64, template: Template, r: usize) -> u64 {
    seed ^ (template as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (r as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

fn train_once(
    template: Template,
    tensors: &[GraphTensor],
    data: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<RestartOutcome> {
    let mean_target = data.train.iter().map(|i| i.target).sum::<f64>() / data.train.len() as f64;
    let mut net = Network::new(
        template,
        cfg.width,
        cfg.depth,
        cfg.init_gain,
        seed,
        mean_target,
    )?;
    let mut adam = Adam::new(net.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&Instance> = data.train.iter().collect();
    let mut train_curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.learning_rate * cfg.schedule.factor(epoch, cfg.epochs);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grad) = net.loss_and_grad(tensors, batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Ok(RestartOutcome::Diverged {
                    epoch,
                    message: format!("non-finite loss {loss}"),
                });
            }
            total += loss * batch.len() as f64;
            adam.step(&mut net.params, &grad, cfg, lr);
        }
        train_curve.push(total / order.len() as f64);
    }
    let train_mae = net.mae(tensors, &data.train);
    let test_mae = net.mae(tensors, &data.test);
    if !(train_mae.is_finite() && test_mae.is_finite()) {
        return Ok(RestartOutcome::Diverged {
            epoch: cfg.epochs,
            message: "non-finite final MAE".into(),
        });
    }
    Ok(RestartOutcome::Finished {
        train_curve,
        train_mae,
        test_mae,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Trains `cfg.restarts` fresh networks of one template and summarizes them.
pub fn train(
    template: Template,
    graphs: &[Graph],
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(ExperimentError::Config("dataset split is empty".into()));
    }
    let tensors = tensors(graphs, template)?;
    let restarts = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            train_once(
                template,
                &tensors,
                data,
                cfg,
                restart_seed(cfg.seed, template, r),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let pick =
        |f: fn(&RestartOutcome) -> Option<f64>| restarts.iter().filter_map(f).collect::<Vec<_>>();
    let test = pick(|r| match r {
        RestartOutcome::Finished { test_mae, .. } => Some(*test_mae),
        RestartOutcome::Diverged { .. } => None,
    });
    let train_maes = pick(|r| match r {
        RestartOutcome::Finished { train_mae, .. } => Some(*train_mae),
        RestartOutcome::Diverged { .. } => None,
    });
    let (test_mae_mean, test_mae_std) = mean_std(&test);
    let scale = Dataset::mean_abs_target(&data.test);
    Ok(TrainReport {
        template,
        parameters: Network::new(template, cfg.width, cfg.depth, 1.0, 0, 0.0)?.param_count(),
        restarts,
        test_mae_mean,
        test_mae_std,
        train_mae_mean: mean_std(&train_maes).0,
        rel_mae_mean: test_mae_mean / scale,
    })
}
