//! Context assembly, the two task losses and joint training of the
//! bi-encoder with its next-speaker head.

mod checkpoint;
mod config;
mod context;
mod gradcheck;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use config::RunConfig;
pub use context::{assemble_context, build_examples, encode_response, ContextConfig, TrainingExample};
pub use gradcheck::{
    check_gradients, check_gradients_with_dropout, grad_check, relative_error, structurally_zero, toy_batch, GradCheckReport, LossKind, ParamScope,
};
pub use loss::{
    character_loss, cross_entropy_with_grad, joint_loss, ranking_loss, score_candidates, softmax, ClassifierHead,
    LossBreakdown,
};
pub use model::{batch_objective, BiEncoder, LossWeights, ModelGrads};
pub use optim::{Adamax, LrSchedule};
pub use train::{
    mean_loss, metrics_tsv, train, train_with_progress, EpochMetrics, TrainData, TrainOutcome, TrainedModel, TrainingConfig,
    METRICS_HEADER,
};
