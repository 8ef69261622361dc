//! Block-based DSP primitives: FFT pair, frequency grids, overlap-and-save,
//! pulse shaping and rational resampling.

pub mod block;
pub mod fft;
pub mod grid;
pub mod ols;
pub mod resample;
pub mod rrc;

pub use block::{Field, SampleBlock};
pub use fft::{fft, ifft, FftPlan, RealFftPlan};
pub use grid::{make_freq_grid, FreqGrid};
pub use ols::{overlap_save_apply, overlap_save_multi, EdgePolicy, OlsGeometry};
pub use resample::{resample_rational, RationalResampler};
pub use rrc::{rrc_impulse, rrc_spectrum, rrc_taps};
