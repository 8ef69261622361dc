use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Complex baseband samples (power in watts is `|s|^2`) with their rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBlock {
    pub samples: Vec<C64>,
    /// Hz.
    pub sample_rate: f64,
    /// Hz, relative to the centre of the transmission grid.
    pub center_freq_offset: f64,
}

impl SampleBlock {
    pub fn new(samples: Vec<C64>, sample_rate: f64) -> Result<Self> {
        let block = SampleBlock {
            samples,
            sample_rate,
            center_freq_offset: 0.0,
        };
        block.validate()?;
        Ok(block)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidArgument("empty sample block".into()));
        }
        if !self.energy().is_finite() {
            return Err(Error::InvalidArgument("sample block has non-finite energy".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Joules: `sum |s|^2 / fs`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.sample_rate
    }

    /// Mean power in watts.
    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

/// One or two polarization tributaries sampled on a common time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub pols: Vec<Vec<C64>>,
    pub sample_rate: f64,
    pub center_freq_offset: f64,
}

impl Field {
    pub fn new(pols: Vec<Vec<C64>>, sample_rate: f64) -> Result<Self> {
        if pols.is_empty() || pols.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "a field carries one or two polarizations, got {}",
                pols.len()
            )));
        }
        let len = pols[0].len();
        if len == 0 || pols.iter().any(|p| p.len() != len) {
            return Err(Error::InvalidArgument(
                "polarizations must be non-empty and of equal length".into(),
            ));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Field {
            pols,
            sample_rate,
            center_freq_offset: 0.0,
        })
    }

    pub fn scalar(block: SampleBlock) -> Self {
        Field {
            pols: vec![block.samples],
            sample_rate: block.sample_rate,
            center_freq_offset: block.center_freq_offset,
        }
    }

    pub fn num_pols(&self) -> usize {
        self.pols.len()
    }

    pub fn len(&self) -> usize {
        self.pols[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.pols[0].is_empty()
    }

    pub fn pol_block(&self, pol: usize) -> SampleBlock {
        SampleBlock {
            samples: self.pols[pol].clone(),
            sample_rate: self.sample_rate,
            center_freq_offset: self.center_freq_offset,
        }
    }

    /// Mean total power over all polarizations, in watts.
    pub fn mean_power(&self) -> f64 {
        self.pols.iter().map(|p| mean_power(p)).sum()
    }

    /// Peak instantaneous total power, in watts.
    pub fn peak_power(&self) -> f64 {
        (0..self.len())
            .map(|i| self.pols.iter().map(|p| p[i].norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: f64) {
        for p in &mut self.pols {
            for v in p.iter_mut() {
                *v *= factor;
            }
        }
    }
}

pub fn mean_power(samples: &[C64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}
