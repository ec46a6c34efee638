//! Desk-scale encoder-decoder trained in the autocorrelation domain.

mod checkpoint;
mod infer;
mod linalg;
mod loss;
mod net;
mod optim;
mod params;
mod schedule;
mod spec;
mod train;

pub use checkpoint::{Checkpoint, LossTarget, PRCK_MAGIC, PRCK_VERSION};
pub use infer::{checkpoint_validation_loss, infer, validation_loss};
pub use linalg::Real;
pub use loss::{autocorr_l1_loss, LossReport};
pub use net::{backward, forward, Tape};
pub use optim::sgd_momentum_update;
pub use params::{NetParams, Tensors};
pub use schedule::{CurriculumSchedule, FullStage, HoldStage, ShrinkStage, Stage};
pub use spec::{ConvSpec, Layer, NetSpec};
pub use train::{train_curriculum, write_history_csv, EpochRecord, TrainConfig, TrainOutcome};
