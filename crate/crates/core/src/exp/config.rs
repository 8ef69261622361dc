//! Experiment configuration, read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dbp::{Anchors, ComplexityModel};
use crate::dsp::OlsGeometry;
use crate::error::{Error, Result};
use crate::fiber::{FiberSpec, PropagationConfig};
use crate::learn::{SystemConfig, TrainConfig};
use crate::txrx::WdmConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Master seed every random stream is derived from.
    pub seed: u64,
    /// Concurrent experiment points; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    pub system: SystemSection,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub complexity: ComplexitySection,
    pub equalizers: Vec<EqualizerSpec>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub num_channels: usize,
    pub symbol_rate_gbd: f64,
    pub channel_spacing_ghz: f64,
    pub rolloff: f64,
    pub sim_samples_per_symbol: usize,
    pub fiber: FiberSpec,
    /// Omit for a noiseless receiver amplifier.
    #[serde(default)]
    pub noise_figure_db: Option<f64>,
    pub solver: PropagationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub min_dbm: f64,
    pub max_dbm: f64,
    pub step_db: f64,
    /// Extra points at this distance either side of the coarse peak; 0 disables.
    pub refine_step_db: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            min_dbm: -2.0,
            max_dbm: 10.0,
            step_db: 1.0,
            refine_step_db: 0.5,
        }
    }
}

impl SweepConfig {
    pub fn coarse_grid(&self) -> Vec<f64> {
        let count = ((self.max_dbm - self.min_dbm) / self.step_db + 1e-9).floor() as usize + 1;
        (0..count).map(|i| round_power(self.min_dbm + i as f64 * self.step_db)).collect()
    }
}

/// Snap to 1e-6 dB so grids built by different arithmetic compare equal.
pub fn round_power(p: f64) -> f64 {
    (p * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_frames: usize,
    pub train_frame_symbols: usize,
    /// Training frames are drawn at each of these powers and pooled.
    pub train_powers_dbm: Vec<f64>,
    pub eval_frames: usize,
    pub eval_frame_symbols: usize,
    pub qam_order: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_frames: 16,
            train_frame_symbols: 4096,
            train_powers_dbm: vec![9.0],
            eval_frames: 12,
            eval_frame_symbols: 16384,
            qam_order: 64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexitySection {
    /// Counting convention used when no calibration is given.
    pub conventions: Option<ComplexityModel>,
    /// Pick the convention that best reproduces these reference counts.
    pub calibration: Option<AnchorsConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorsConfig {
    pub fft_size: usize,
    pub overlap: usize,
    pub samples_per_symbol: f64,
    pub num_pols: usize,
    pub lessfm_steps: usize,
    pub lessfm_rm_per_2d: f64,
    pub essfm_steps: usize,
    pub essfm_rm_per_2d: f64,
}

impl AnchorsConfig {
    pub fn anchors(&self) -> Result<Anchors> {
        Ok(Anchors {
            geometry: OlsGeometry::new(self.fft_size, self.overlap)?,
            sps: self.samples_per_symbol,
            num_pols: self.num_pols,
            lessfm_steps: self.lessfm_steps,
            lessfm_rm: self.lessfm_rm_per_2d,
            essfm_steps: self.essfm_steps,
            essfm_rm: self.essfm_rm_per_2d,
        })
    }
}

/// One row of the equalizer matrix: every combination of `steps`,
/// `samples_per_symbol` and `filter_halflen` becomes a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerSpec {
    /// Registry name.
    pub kind: String,
    #[serde(default)]
    pub steps: Vec<usize>,
    pub samples_per_symbol: Vec<f64>,
    #[serde(default)]
    pub filter_halflen: Vec<usize>,
    /// Per-step-count override of `filter_halflen`, keyed by the step count.
    #[serde(default)]
    pub filter_halflen_by_steps: BTreeMap<String, usize>,
    /// Overlap-save block size; chosen from the dispersion memory when absent.
    #[serde(default)]
    pub fft_size: Option<usize>,
    #[serde(default)]
    pub overlap: Option<usize>,
    /// Starting receiver-side splits, as fractions of `L / N_s`, for the
    /// tied kinds. The best by validation loss is kept.
    #[serde(default = "default_splits")]
    pub split_fractions: Vec<f64>,
}

fn default_splits() -> Vec<f64> {
    vec![0.1, 0.5, 0.9]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative paths resolve against the directory holding the config file.
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a file; a relative output directory is anchored at the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.output.dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.output.dir = parent.join(&cfg.output.dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Short digest of the canonical JSON form, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {}", self.version));
        }
        self.system_at(1.0, 1).wdm.validate()?;
        self.system.fiber.validate()?;
        self.system.solver.validate()?;
        if self.system.sim_samples_per_symbol == 0 {
            return bad("system.sim_samples_per_symbol must be positive".into());
        }
        let s = &self.sweep;
        if !(s.step_db > 0.0) || !(s.max_dbm >= s.min_dbm) || !(s.refine_step_db >= 0.0) {
            return bad("sweep needs max_dbm >= min_dbm, step_db > 0 and refine_step_db >= 0".into());
        }
        let d = &self.data;
        if d.train_frames < 2 || d.train_frame_symbols == 0 || d.train_powers_dbm.is_empty() {
            return bad("data needs at least two training frames and one training power".into());
        }
        if d.eval_frames == 0 || d.eval_frame_symbols == 0 {
            return bad("data needs at least one evaluation frame".into());
        }
        self.train.validate()?;
        if self.complexity.conventions.is_some() && self.complexity.calibration.is_some() {
            return bad("complexity: give either conventions or calibration, not both".into());
        }
        if let Some(a) = &self.complexity.calibration {
            a.anchors()?;
        }
        if self.equalizers.is_empty() {
            return bad("at least one [[equalizers]] entry is required".into());
        }
        for (i, e) in self.equalizers.iter().enumerate() {
            if e.samples_per_symbol.is_empty() || e.samples_per_symbol.iter().any(|&n| !(n > 0.0)) {
                return bad(format!("equalizers[{i}]: samples_per_symbol must be a non-empty list of positive rates"));
            }
            for &n in &e.samples_per_symbol {
                for symbols in [d.train_frame_symbols, d.eval_frame_symbols] {
                    self.system_at(n, symbols).validate()?;
                }
            }
            if e.steps.contains(&0) {
                return bad(format!("equalizers[{i}]: step counts must be positive"));
            }
            for key in e.filter_halflen_by_steps.keys() {
                if key.parse::<usize>().is_err() {
                    return bad(format!("equalizers[{i}]: filter_halflen_by_steps key '{key}' is not a step count"));
                }
            }
            if e.split_fractions.is_empty() || e.split_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return bad(format!("equalizers[{i}]: split_fractions must lie in [0, 1]"));
            }
            match (e.fft_size, e.overlap) {
                (Some(n), Some(o)) => {
                    OlsGeometry::new(n, o)?;
                }
                (None, None) => {}
                _ => return bad(format!("equalizers[{i}]: give both fft_size and overlap or neither")),
            }
        }
        Ok(())
    }

    /// Link and data description at equalizer rate `eq_sps` with frames of
    /// `frame_symbols` symbols.
    pub fn system_at(&self, eq_sps: f64, frame_symbols: usize) -> SystemConfig {
        let s = &self.system;
        SystemConfig {
            wdm: WdmConfig {
                num_channels: s.num_channels,
                symbol_rate: s.symbol_rate_gbd * 1e9,
                channel_spacing: s.channel_spacing_ghz * 1e9,
                rolloff: s.rolloff,
                center_channel_index: s.num_channels / 2,
            },
            fiber: s.fiber.clone(),
            noise_figure_db: s.noise_figure_db,
            solver: s.solver.clone(),
            sim_sps: s.sim_samples_per_symbol,
            frame_symbols,
            eq_sps,
        }
    }

    pub fn num_pols(&self) -> usize {
        self.system.solver.mode.num_pols()
    }
}

impl EqualizerSpec {
    pub fn halflen_for(&self, steps: usize, default: usize) -> usize {
        self.filter_halflen_by_steps.get(&steps.to_string()).copied().unwrap_or(default)
    }
}
