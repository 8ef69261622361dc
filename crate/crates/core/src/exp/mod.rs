//! Config-driven experiments: equalizer matrix, training, power sweeps and
//! result files.

pub mod config;
pub mod output;
pub mod registry;
pub mod run;

pub use config::{ExperimentConfig, EqualizerSpec};
pub use output::{emit_plot_data, results_json, write_outputs, PlotData, ResultRecord, ResultsFile, RunManifest};
pub use registry::{BuildContext, Built, EqualizerStrategy, PointSpec, Registry, TrainingSummary};
pub use run::{plan, run_experiment, sweep_equalizer, EvalBank, ExperimentOutput, Plan};
