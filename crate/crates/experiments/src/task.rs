use crate::{ExperimentError, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use squashscope::spectral::commute_time_spectral;
use squashscope::{Graph, Matrix, NodePair};

/// Quantization applied to commute times before ranking, so rounding noise does not
/// reorder pairs whose τ agree analytically.
const TAU_QUANTUM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingKind {
    TanhSum,
    ExpSum,
}

impl MixingKind {
    pub fn target(self, a: f64, b: f64) -> f64 {
        match self {
            MixingKind::TanhSum => (a + b).tanh(),
            MixingKind::ExpSum => (a + b).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MixingKind::TanhSum => "tanh_sum",
            MixingKind::ExpSum => "exp_sum",
        }
    }
}

/// `sup |∂²f/∂x∂y|` of `f(x, y) = g(x + y)` over `[lo, hi]²`.
pub fn analytic_max_mixing(kind: MixingKind, lo: f64, hi: f64) -> Result<f64> {
    check_interval(lo, hi)?;
    Ok(match kind {
        MixingKind::ExpSum => (2.0 * hi).exp(),
        MixingKind::TanhSum => {
            // |tanh''(s)| = 2|tanh s| sech² s peaks at s* = asinh(1/√2); clamp into [2lo, 2hi].
            let f = |s: f64| 2.0 * s.tanh().abs() / s.cosh().powi(2);
            let peak = (0.5f64).sqrt().asinh();
            let (a, b) = (2.0 * lo, 2.0 * hi);
            let mut best = f(a).max(f(b));
            for s in [peak, -peak] {
                if a <= s && s <= b {
                    best = best.max(f(s));
                }
            }
            best
        }
    })
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ExperimentError::Config(format!(
            "input interval ({lo}, {hi}) needs lo < hi"
        )));
    }
    Ok(())
}

/// Unordered pair at rank `⌊α(P-1)⌋` of the commute-time order; ties go lexicographically.
pub fn select_pair_at_quantile(g: &Graph, alpha: f64) -> Result<NodePair> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ExperimentError::Config(format!(
            "alpha = {alpha} outside [0, 1]"
        )));
    }
    if g.n() < 2 {
        return Err(ExperimentError::Config(
            "graph needs at least two nodes".into(),
        ));
    }
    let tau = commute_time_spectral(g)?.tau;
    let mut pairs: Vec<(i64, usize, usize)> = (0..g.n())
        .flat_map(|v| (v + 1..g.n()).map(move |u| (v, u)))
        .map(|(v, u)| ((tau[(v, u)] / TAU_QUANTUM).round() as i64, v, u))
        .collect();
    pairs.sort_unstable();
    let rank = (alpha * (pairs.len() - 1) as f64).floor() as usize;
    let (_, v, u) = pairs[rank];
    Ok(NodePair::new(v, u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub mixing_kind: MixingKind,
    pub input_interval: (f64, f64),
    pub alpha: f64,
    /// Feature draws per graph; each draw is one instance on the graph's selected pair.
    pub samples_per_graph: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub graph: usize,
    pub pair: NodePair,
    /// `x_v, x_u`; every other feature is zero.
    pub values: (f64, f64),
    pub target: f64,
}

impl Instance {
    /// `n × width` features with the two values in channel 0.
    pub fn features(&self, n: usize, width: usize) -> Matrix {
        let mut x = Matrix::zeros(n, width);
        x[(self.pair.v, 0)] = self.values.0;
        x[(self.pair.u, 0)] = self.values.1;
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: TaskSpec,
    pub pairs: Vec<NodePair>,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
}

impl Dataset {
    pub fn mean_abs_target(instances: &[Instance]) -> f64 {
        instances.iter().map(|i| i.target.abs()).sum::<f64>() / instances.len() as f64
    }
}

/// Selects pairs, draws features, and splits 90/10 by a seeded shuffle.
pub fn build_dataset(spec: &TaskSpec, graphs: &[Graph]) -> Result<Dataset> {
    if graphs.is_empty() {
        return Err(ExperimentError::Config("empty graph list".into()));
    }
    if spec.samples_per_graph == 0 {
        return Err(ExperimentError::Config(
            "samples_per_graph must be positive".into(),
        ));
    }
    let (lo, hi) = spec.input_interval;
    check_interval(lo, hi)?;
    let pairs = graphs
        .iter()
        .map(|g| select_pair_at_quantile(g, spec.alpha))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut all = Vec::with_capacity(graphs.len() * spec.samples_per_graph);
    for (graph, &pair) in pairs.iter().enumerate() {
        for _ in 0..spec.samples_per_graph {
            let values = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
            all.push(Instance {
                graph,
                pair,
                values,
                target: spec.mixing_kind.target(values.0, values.1),
            });
        }
    }
    all.shuffle(&mut rng);
    let n_test = (all.len() / 10).max(1);
    let test = all.split_off(all.len() - n_test);
    Ok(Dataset {
        spec: spec.clone(),
        pairs,
        train: all,
        test,
    })
}
