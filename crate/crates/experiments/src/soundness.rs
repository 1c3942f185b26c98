//! Randomized instances for checking the derivative bounds against finite differences.

use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use squashscope::bounds::MatrixKind;
use squashscope::graph::{generate, GraphKind};
use squashscope::mpnn::{
    verify_bound, Activation, InputBox, MessageFamily, ModelConfig, Readout, VerifyOutcome,
};
use squashscope::{Graph, NodePair};

/// Small graphs from every generator family, all with at most 12 nodes.
pub fn mixed_corpus(seed: u64) -> Result<Vec<Graph>> {
    let mut kinds = vec![
        GraphKind::Path { n: 2 },
        GraphKind::Path { n: 5 },
        GraphKind::Path { n: 9 },
        GraphKind::Cycle { n: 3 },
        GraphKind::Cycle { n: 6 },
        GraphKind::Cycle { n: 11 },
        GraphKind::Complete { n: 4 },
        GraphKind::Complete { n: 7 },
        GraphKind::Tree { arity: 2, depth: 2 },
        GraphKind::Tree { arity: 3, depth: 1 },
        GraphKind::Tree { arity: 2, depth: 1 },
        GraphKind::Grid {
            width: 2,
            height: 3,
        },
        GraphKind::Grid {
            width: 3,
            height: 4,
        },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..6 {
        kinds.push(GraphKind::ErdosRenyi {
            n: rng.gen_range(4..=12),
            p: rng.gen_range(0.3..0.7),
        });
        kinds.push(GraphKind::MoleculeLike {
            n: rng.gen_range(5..=12),
            extra_cycles: rng.gen_range(1..=3),
        });
    }
    Ok(kinds
        .iter()
        .map(|k| generate(k, rng.gen()))
        .collect::<squashscope::Result<Vec<_>>>()?)
}

/// One randomized (graph, pair, model) instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub graph: usize,
    pub pair: NodePair,
    pub model: ModelConfig,
    pub sample_seed: u64,
}

/// Knobs for [`draw_trial`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpace {
    pub families: Vec<MessageFamily>,
    pub readouts: Vec<Readout>,
    pub activation: Activation,
    pub max_width: usize,
    pub max_depth: usize,
}

impl Default for TrialSpace {
    fn default() -> Self {
        TrialSpace {
            families: vec![MessageFamily::Linear, MessageFamily::Gated],
            readouts: vec![Readout::Sum, Readout::Mean],
            activation: Activation::Tanh,
            max_width: 4,
            max_depth: 4,
        }
    }
}

/// Trial `index` of the stream seeded by `seed`; independent of the other indices.
pub fn draw_trial(graphs: &[Graph], space: &TrialSpace, seed: u64, index: usize) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let graph = rng.gen_range(0..graphs.len());
    let n = graphs[graph].n();
    let v = rng.gen_range(0..n);
    let pair = NodePair::new(v, (v + rng.gen_range(1..n)) % n);
    let model = ModelConfig {
        width: rng.gen_range(1..=space.max_width),
        depth: rng.gen_range(1..=space.max_depth),
        family: space.families[rng.gen_range(0..space.families.len())],
        activation: space.activation,
        readout: space.readouts[rng.gen_range(0..space.readouts.len())],
        matrix_kind: MatrixKind::ALL[rng.gen_range(0..MatrixKind::ALL.len())],
        weight_scale: rng.gen_range(0.2..1.2),
        seed: rng.gen(),
    };
    Trial {
        index,
        graph,
        pair,
        model,
        sample_seed: rng.gen(),
    }
}

/// Features are sampled from this box, which also certifies the gated messages.
pub fn trial_box() -> InputBox {
    InputBox::new(-1.0, 1.0).expect("valid box")
}

pub fn run_trial(graphs: &[Graph], trial: &Trial, samples: usize) -> Result<VerifyOutcome> {
    let model = trial.model.build()?;
    Ok(verify_bound(
        &model,
        &graphs[trial.graph],
        trial.pair,
        &trial_box(),
        samples,
        trial.sample_seed,
    )?)
}
