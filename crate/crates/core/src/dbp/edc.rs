use serde::{Deserialize, Serialize};

use crate::dbp::transfer::{dispersion_memory, gvd_transfer_signed, GvdSign};
use crate::dsp::fft::FftPlan;
use crate::dsp::grid::FreqGrid;
use crate::dsp::ols::{overlap_save_multi, EdgePolicy, OlsGeometry};
use crate::dsp::Field;
use crate::error::{Error, Result};

/// Single all-pass dispersion filter applied by overlap-save.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edc {
    pub beta2_ps2_per_km: f64,
    pub length_km: f64,
    pub geometry: OlsGeometry,
}

impl Edc {
    pub fn apply(&self, rx: &Field, sign: GvdSign, edge: EdgePolicy) -> Result<Field> {
        self.geometry.validate()?;
        let required = dispersion_memory(self.beta2_ps2_per_km, self.length_km, rx.sample_rate);
        if self.geometry.overlap < required {
            return Err(Error::InsufficientOverlap {
                required,
                actual: self.geometry.overlap,
            });
        }
        let n = self.geometry.fft_size;
        let grid = FreqGrid::new(n, rx.sample_rate)?;
        let h = gvd_transfer_signed(self.length_km, &grid, self.beta2_ps2_per_km, sign);
        let plan = FftPlan::pow2(n)?;
        let out = overlap_save_multi(&rx.pols, &self.geometry, edge, |block| {
            for p in block.iter_mut() {
                plan.forward(p);
                for (v, t) in p.iter_mut().zip(&h) {
                    *v *= t;
                }
                plan.inverse(p);
            }
            Ok(())
        })?;
        let mut field = Field::new(out, rx.sample_rate)?;
        field.center_freq_offset = rx.center_freq_offset;
        Ok(field)
    }
}

/// Undo `length_km` of dispersion with circular block edges.
pub fn edc(rx: &Field, beta2_ps2_per_km: f64, length_km: f64, geometry: OlsGeometry) -> Result<Field> {
    Edc {
        beta2_ps2_per_km,
        length_km,
        geometry,
    }
    .apply(rx, GvdSign::Backward, EdgePolicy::Circular)
}
