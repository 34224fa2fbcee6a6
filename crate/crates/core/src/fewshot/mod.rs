//! Task-residual few-shot training on precomputed embeddings, with an RTD
//! term aligning each class-balanced visual batch to the adapted classifier rows.

pub mod batching;
pub mod data;
pub mod model;
pub mod optim;
pub mod run;
pub mod train;

pub use batching::{class_balanced_batches, Batch, BatchSampler};
pub use data::{gen_synthetic, BaseClassifier, EmbeddingDataset, Split, SyntheticSpec};
pub use model::{combined_loss, LossEval, TaskResidualModel};
pub use run::{evaluate_residual, run_manifest, RunInputs, RunManifest, RunReport};
pub use train::{
    evaluate, lambda_search, train, EpochMetrics, LambdaSearch, TrainConfig, TrainHistory,
};
