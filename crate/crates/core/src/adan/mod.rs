//! Anchored deep attractor network: embeddings, anchor-based attractors,
//! masks, permutation-invariant training and per-beam inference.

mod attractor;
mod model;
mod network;
mod pit;
mod train;

pub use attractor::{
    attractors, combinations, in_set_similarity, masks, permutations, presegment,
    select_attractor_set,
};
pub use model::{
    log_features, AnchorChoice, BeamSeparation, CheckpointMeta, EmbeddingModel, Gradients,
    Hyperparameters, LossEval, MaskSet, TrainingExample,
};
pub use network::Architecture;
pub use pit::{pit_loss, PitAssignment};
pub use train::{
    beam_examples, train, train_step, write_loss_csv, Optimizer, OptimizerState, StepReport,
    TrainConfig,
};
