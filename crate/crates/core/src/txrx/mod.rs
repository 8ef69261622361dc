//! Transmitter, receiver front-end and SNR metrics.

pub mod edfa;
pub mod metrics;
pub mod receiver;
pub mod symbols;
pub mod wdm;

pub use edfa::{edfa_add_noise, AmplifierSpec};
pub use metrics::{estimate_snr, mean_phase_removal, MprInfo, SnrReport};
pub use receiver::{matched_filter_and_sample, MatchedFilter};
pub use symbols::{draw_gaussian_symbols, draw_qam_symbols, ConstellationSpec, SymbolFrame, SymbolSource};
pub use wdm::{demux_channel, modulate_wdm, WdmConfig};
