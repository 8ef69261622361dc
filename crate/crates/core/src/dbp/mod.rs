//! Split-step equalizers (EDC, OSSFM, ESSFM, L-ESSFM) on overlap-save blocks,
//! model files and complexity accounting.

pub mod complexity;
pub mod edc;
pub mod engine;
pub mod equalizer;
pub mod io;
pub mod model;
pub mod transfer;

pub use complexity::{calibrate, count_rm_per_2d, Anchors, Calibration, ComplexityModel, FftCount, Structure};
pub use edc::{edc, Edc};
pub use engine::{lessfm_forward, required_overlap, BlockTape, Engine, ModelGrads};
pub use equalizer::{Equalizer, IdealDbp};
pub use io::{load_model, model_conventions_hash, model_from_str, model_to_string, save_model};
pub use model::{build_free_model, build_tied_model, tied_lengths, EqualizerKind, LEssfmModel, ModelFrame, Tying};
pub use transfer::{dispersion_memory, gvd_transfer, gvd_transfer_signed, nlpr_half_transfer, nlpr_transfer, GvdSign};
