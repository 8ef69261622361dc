//! Simulated transmission frames: WDM transmitter, fiber span, receiver
//! amplifier and demultiplexing of the centre channel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::Field;
use crate::error::{Error, Result};
use crate::fiber::{propagate, FiberSpec, PropagationConfig};
use crate::seed::{derive_seed, tag};
use crate::txrx::{
    demux_channel, draw_gaussian_symbols, draw_qam_symbols, edfa_add_noise, modulate_wdm, AmplifierSpec, SymbolFrame,
    WdmConfig,
};

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub wdm: WdmConfig,
    pub fiber: FiberSpec,
    /// Receiver amplifier noise figure; `None` disables ASE.
    pub noise_figure_db: Option<f64>,
    pub solver: PropagationConfig,
    /// Samples per symbol of the ground-truth simulation.
    pub sim_sps: usize,
    /// Symbols per periodic frame.
    pub frame_symbols: usize,
    /// Samples per symbol at the equalizer input.
    pub eq_sps: f64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.wdm.validate()?;
        self.fiber.validate()?;
        self.solver.validate()?;
        if self.frame_symbols == 0 || self.sim_sps == 0 {
            return Err(Error::Config("frame size and simulation rate must be positive".into()));
        }
        let eq_len = self.frame_symbols as f64 * self.eq_sps;
        if (eq_len - eq_len.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "{} symbols at {} samples/symbol is not a whole number of samples",
                self.frame_symbols, self.eq_sps
            )));
        }
        Ok(())
    }

    /// Receiver amplifier compensating the span loss.
    pub fn amplifier(&self) -> AmplifierSpec {
        AmplifierSpec {
            gain_db: self.fiber.span_loss_db(),
            noise_figure_db: self.noise_figure_db.unwrap_or(f64::NEG_INFINITY),
            center_wavelength: self.fiber.reference_wavelength_nm * 1e-9,
        }
    }

    pub fn eq_sample_rate(&self) -> f64 {
        self.eq_sps * self.wdm.symbol_rate
    }

    pub fn num_pols(&self) -> usize {
        self.solver.mode.num_pols()
    }

    /// Per-polarization amplitude of unit-energy symbols at `power_dbm`.
    pub fn symbol_amplitude(&self, power_dbm: f64) -> f64 {
        (1e-3 * 10f64.powf(power_dbm / 10.0) / self.num_pols() as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Gaussian,
    Qam(usize),
}

/// Received centre-channel samples and the symbols that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub rx: Field,
    pub tx: SymbolFrame,
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub system: SystemConfig,
    pub n_blocks: usize,
    pub power_dbm: f64,
    pub seed: u64,
    pub symbols: SymbolKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub items: Vec<DatasetItem>,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// One frame through the whole link.
pub fn simulate_frame(sys: &SystemConfig, power_dbm: f64, symbols: SymbolKind, seed: u64) -> Result<DatasetItem> {
    sys.validate()?;
    let pols = sys.num_pols();
    let frames = (0..sys.wdm.num_channels)
        .map(|ch| {
            let s = derive_seed(seed, &[tag("symbols"), ch as u64]);
            match symbols {
                SymbolKind::Gaussian => draw_gaussian_symbols(sys.frame_symbols, pols, sys.wdm.symbol_rate, s),
                SymbolKind::Qam(order) => draw_qam_symbols(order, sys.frame_symbols, pols, sys.wdm.symbol_rate, s),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let launched = modulate_wdm(&frames, &sys.wdm, sys.sim_sps, power_dbm)?;
    let output = propagate(&launched, &sys.fiber, &sys.solver)?;
    let amplified = edfa_add_noise(&output, &sys.amplifier(), derive_seed(seed, &[tag("ase")]));
    let centre = sys.wdm.center_channel_index;
    let passthrough = sys.wdm.num_channels == 1 && (sys.sim_sps as f64 - sys.eq_sps).abs() < 1e-12;
    let rx = if passthrough {
        amplified
    } else {
        demux_channel(&amplified, centre, &sys.wdm, sys.eq_sps)?
    };
    Ok(DatasetItem {
        rx,
        tx: frames[centre].clone(),
    })
}

/// Frames generated in parallel; frame `i` uses a seed derived from `seed`
/// and `i`, so the result does not depend on scheduling.
pub fn simulate_frames(
    sys: &SystemConfig,
    n_blocks: usize,
    power_dbm: f64,
    symbols: SymbolKind,
    seed: u64,
) -> Result<Vec<DatasetItem>> {
    (0..n_blocks)
        .into_par_iter()
        .map(|i| simulate_frame(sys, power_dbm, symbols, derive_seed(seed, &[tag("frame"), i as u64])))
        .collect()
}

/// Gaussian-symbol training frames at one launch power.
pub fn make_dataset(sys: &SystemConfig, n_blocks: usize, power_dbm: f64, seed: u64) -> Result<Dataset> {
    regenerate(&DatasetManifest {
        version: DATASET_VERSION,
        system: sys.clone(),
        n_blocks,
        power_dbm,
        seed,
        symbols: SymbolKind::Gaussian,
    })
}

pub fn regenerate(manifest: &DatasetManifest) -> Result<Dataset> {
    if manifest.version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {}", manifest.version)));
    }
    if manifest.n_blocks == 0 {
        return Err(Error::InvalidArgument("a dataset needs at least one block".into()));
    }
    let items = simulate_frames(
        &manifest.system,
        manifest.n_blocks,
        manifest.power_dbm,
        manifest.symbols,
        manifest.seed,
    )?;
    Ok(Dataset {
        items,
        manifest: manifest.clone(),
    })
}
