//! Representation and generation networks, pretraining and task heads,
//! with hand-written backpropagation.

pub mod adam;
pub mod checkpoint;
pub mod heads;
pub mod mlp;
pub mod model;
pub mod pretrain;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use heads::{finetune, head_loss_and_grads, predict_property, FcnnBaseline, FinetuneConfig, Head, LabelledExample, MinMaxScaler, TaskId};
pub use mlp::{Activation, Mlp};
pub use model::{LatentMode, ModelDims, OsfmModel, RecordBatch};
pub use pretrain::{
    batch_loss_and_grads, mine_hard_triplets, sample_subsets, triplet_loss, triplet_schedule, EpochLog, LossBreakdown, LossWeights,
    PretrainState, SubsetExample, TrainConfig, Trainer,
};
