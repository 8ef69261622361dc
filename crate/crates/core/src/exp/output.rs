//! Result records and the files a run leaves behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dbp::{model_to_string, ComplexityModel};
use crate::error::{Error, Result};
use crate::exp::registry::{PointSpec, TrainingSummary};
use crate::exp::run::{argmax, is_unimodal, ExperimentOutput};
use crate::learn::DatasetManifest;

pub const RESULTS_FORMAT: &str = "lessfm-results";
pub const MANIFEST_FORMAT: &str = "lessfm-manifest";
pub const OUTPUT_VERSION: u32 = 1;

/// One equalizer point of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub label: String,
    pub kind: String,
    pub steps: Option<usize>,
    pub samples_per_symbol: f64,
    pub filter_halflen: Option<usize>,
    pub fft_size: usize,
    pub overlap: usize,
    /// Absent for methods without a finite cost.
    pub rm_per_2d: Option<f64>,
    pub conventions_hash: String,
    pub powers_dbm: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub peak_snr_db: Option<f64>,
    pub peak_power_dbm: Option<f64>,
    pub unimodal: Option<bool>,
    /// Dataset ids in the run manifest.
    pub training_data: Option<Vec<String>>,
    pub training: Option<TrainingSummary>,
    pub model_file: Option<String>,
    pub error: Option<String>,
}

impl ResultRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        point: &PointSpec,
        rm_per_2d: Option<f64>,
        conventions_hash: String,
        powers_dbm: Vec<f64>,
        snr_db: Vec<f64>,
        grid_step_db: f64,
        training_data: Option<Vec<String>>,
        training: Option<TrainingSummary>,
        model_file: Option<String>,
        error: Option<String>,
    ) -> Self {
        let peak = argmax(&snr_db);
        let unimodal = (!snr_db.is_empty()).then(|| is_unimodal(&powers_dbm, &snr_db, grid_step_db));
        ResultRecord {
            label: point.label(),
            kind: point.kind.clone(),
            steps: point.steps,
            samples_per_symbol: point.samples_per_symbol,
            filter_halflen: point.filter_halflen,
            fft_size: point.geometry.fft_size,
            overlap: point.geometry.overlap,
            rm_per_2d,
            conventions_hash,
            peak_snr_db: peak.map(|i| snr_db[i]),
            peak_power_dbm: peak.map(|i| powers_dbm[i]),
            powers_dbm,
            snr_db,
            unimodal,
            training_data,
            training,
            model_file,
            error,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

/// `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub conventions: ComplexityModel,
    pub conventions_description: String,
    pub records: Vec<ResultRecord>,
}

/// `manifest.json`: provenance and timings, kept out of the results so
/// those stay reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub eval_seed: u64,
    pub datasets: BTreeMap<String, DatasetManifest>,
    pub wall_clock_s: BTreeMap<String, f64>,
}

pub struct PlotData {
    pub csv: String,
    pub json: String,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |v| v.to_string())
}

/// CSV sorted by RM/2D (uncounted methods last) and the full records as
/// JSON.
pub fn emit_plot_data(records: &[ResultRecord]) -> Result<PlotData> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to emit".into()));
    }
    let mut order: Vec<&ResultRecord> = records.iter().collect();
    order.sort_by(|a, b| match (a.rm_per_2d, b.rm_per_2d) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.label.cmp(&b.label)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.label.cmp(&b.label),
    });
    let mut csv = String::from("kind,samples_per_symbol,steps,filter_halflen,rm_per_2d,peak_snr_db,peak_power_dbm,status\n");
    for r in order {
        let status = if r.succeeded() { "ok" } else { "failed" };
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.kind,
            r.samples_per_symbol,
            opt(&r.steps),
            opt(&r.filter_halflen),
            opt(&r.rm_per_2d),
            opt(&r.peak_snr_db),
            opt(&r.peak_power_dbm),
            status
        )
        .expect("writing to a string");
    }
    let mut json = serde_json::to_string_pretty(records)?;
    json.push('\n');
    Ok(PlotData { csv, json })
}

pub fn results_file(out: &ExperimentOutput) -> ResultsFile {
    ResultsFile {
        format: RESULTS_FORMAT.into(),
        version: OUTPUT_VERSION,
        config_hash: out.config_hash.clone(),
        seed: out.seed,
        conventions: out.plan.conventions,
        conventions_description: out.plan.conventions.describe(),
        records: out.records.clone(),
    }
}

pub fn results_json(out: &ExperimentOutput) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&results_file(out))?;
    s.push('\n');
    Ok(s)
}

/// Write results, plot data, models and the manifest under `dir`.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path, eval_seed: u64) -> Result<()> {
    let models_dir = dir.join("models");
    std::fs::create_dir_all(&models_dir)?;
    std::fs::write(dir.join("results.json"), results_json(out)?)?;
    std::fs::write(dir.join("results.csv"), emit_plot_data(&out.records)?.csv)?;
    for (label, model) in &out.models {
        std::fs::write(models_dir.join(format!("{label}.params")), model_to_string(model)?)?;
    }
    let manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        version: OUTPUT_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: out.config_hash.clone(),
        seed: out.seed,
        eval_seed,
        datasets: out.datasets.clone(),
        wall_clock_s: out.timings.clone(),
    };
    let mut s = serde_json::to_string_pretty(&manifest)?;
    s.push('\n');
    std::fs::write(dir.join("manifest.json"), s)?;
    Ok(())
}
