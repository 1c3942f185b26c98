//! Synthetic mixing tasks, a trainable MPNN, and the ablations built on them.

pub mod ablation;
pub mod corpus;
pub mod model;
pub mod soundness;
pub mod task;
pub mod train;

pub use model::{GraphTensor, Network, Template};
pub use task::{
    analytic_max_mixing, build_dataset, select_pair_at_quantile, Dataset, Instance, MixingKind,
    TaskSpec,
};
pub use train::{restart_seed, train, LrSchedule, RestartOutcome, TrainConfig, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] squashscope::Error),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
