//! Training of split-step equalizers: simulated datasets, phase-aligned loss,
//! exact gradients and Adam.

pub mod adam;
pub mod backprop;
pub mod dataset;
pub mod init;
pub mod loss;
pub mod params;
mod search;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use backprop::{backprop, batch_loss, prepare, prepare_items, LossOptions, ParamGrads, PreparedItem};
pub use dataset::{
    make_dataset, regenerate, simulate_frame, simulate_frames, Dataset, DatasetItem, DatasetManifest, SymbolKind,
    SystemConfig,
};
pub use init::{init_coeffs, init_lengths, segment_boundaries, segment_effective_lengths};
pub use loss::{phase_aligned_mse, phase_aligned_mse_grad, LossEval};
pub use params::{Group, ParamSpace, Parameterization};
pub use train::{train, EpochRecord, Optimizer, TrainConfig, TrainOutcome};
