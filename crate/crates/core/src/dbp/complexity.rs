//! Real-multiplication counts per complex symbol (RM/2D).
//!
//! Costs are counted per overlap-save block of `N` samples, divided by the
//! number of polarizations and by the `V / n` symbols each block delivers.
//! Phase rotations are counted as one complex multiply; the trigonometric
//! evaluation is assumed to come from a lookup table and costs nothing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dbp::model::{EqualizerKind, LEssfmModel};
use crate::dsp::OlsGeometry;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FftCount {
    /// `2 N log2 N`.
    Radix2,
    /// `N log2 N - 3N + 4`.
    SplitRadix,
}

impl FftCount {
    pub fn cost(self, n: usize) -> f64 {
        let nf = n as f64;
        let log = nf.log2();
        match self {
            FftCount::Radix2 => 2.0 * nf * log,
            FftCount::SplitRadix => nf * log - 3.0 * nf + 4.0,
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            FftCount::Radix2 => "2*N*log2(N)",
            FftCount::SplitRadix => "N*log2(N)-3*N+4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityModel {
    pub real_mults_per_complex_mult: u32,
    pub fft_count: FftCount,
    /// Cost of a real-input FFT relative to a complex FFT of the same size.
    pub rfft_factor: f64,
    /// Filter the common intensity once per block instead of once per polarization.
    pub share_nlpr_across_pols: bool,
}

impl Default for ComplexityModel {
    fn default() -> Self {
        ComplexityModel {
            real_mults_per_complex_mult: 4,
            fft_count: FftCount::Radix2,
            rfft_factor: 0.5,
            share_nlpr_across_pols: true,
        }
    }
}

impl ComplexityModel {
    /// Short digest of the canonical JSON form.
    pub fn conventions_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("conventions serialize");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn describe(&self) -> String {
        format!(
            "complex mult = {} RM; FFT(N) = {}; RFFT = {} x FFT; NLPR shared across pols = {}; hash {}",
            self.real_mults_per_complex_mult,
            self.fft_count.formula(),
            self.rfft_factor,
            self.share_nlpr_across_pols,
            self.conventions_hash()
        )
    }
}

/// What is being counted, independent of parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Structure {
    pub kind: EqualizerKind,
    pub num_steps: usize,
    pub num_pols: usize,
}

impl Structure {
    pub fn of_model(model: &LEssfmModel) -> Self {
        Structure {
            kind: model.kind,
            num_steps: model.num_steps,
            num_pols: model.mode.num_pols(),
        }
    }
}

/// RM/2D of `structure` on `geometry` at `sps` samples per symbol.
pub fn count_rm_per_2d(structure: &Structure, geometry: &OlsGeometry, sps: f64, conv: &ComplexityModel) -> Result<f64> {
    geometry.validate()?;
    let n = geometry.fft_size as f64;
    let pols = structure.num_pols.max(1) as f64;
    let cm = conv.real_mults_per_complex_mult as f64;
    let fft = conv.fft_count.cost(geometry.fft_size);

    let linear = pols * (2.0 * fft + n * cm);
    let per_step = match structure.kind {
        EqualizerKind::Edc => 0.0,
        kind => {
            let intensity = 2.0 * pols * n;
            let filtering = if kind == EqualizerKind::Ossfm {
                n
            } else {
                2.0 * conv.rfft_factor * fft + n / 2.0 * cm
            };
            let filter_copies = if conv.share_nlpr_across_pols { 1.0 } else { pols };
            let rotation = pols * n * cm;
            linear + intensity + filter_copies * filtering + rotation
        }
    };
    let steps = if structure.kind == EqualizerKind::Edc { 0.0 } else { structure.num_steps as f64 };
    let total = linear + steps * per_step;
    let symbols = geometry.valid() as f64 / sps;
    Ok(total / pols / symbols)
}

/// Reference points the calibration tries to reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub geometry: OlsGeometry,
    pub sps: f64,
    pub num_pols: usize,
    pub lessfm_steps: usize,
    pub lessfm_rm: f64,
    pub essfm_steps: usize,
    pub essfm_rm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub chosen: ComplexityModel,
    pub lessfm_rm: f64,
    pub essfm_rm: f64,
    pub score: f64,
    pub candidates: Vec<(ComplexityModel, f64, f64, f64)>,
}

/// Pick the convention variant whose counts best match the anchors in
/// squared log ratio.
pub fn calibrate(anchors: &Anchors) -> Result<Calibration> {
    let mut candidates = Vec::new();
    for cm in [4, 3] {
        for fft_count in [FftCount::Radix2, FftCount::SplitRadix] {
            for share in [true, false] {
                let conv = ComplexityModel {
                    real_mults_per_complex_mult: cm,
                    fft_count,
                    rfft_factor: 0.5,
                    share_nlpr_across_pols: share,
                };
                let count = |kind, steps| {
                    let s = Structure {
                        kind,
                        num_steps: steps,
                        num_pols: anchors.num_pols,
                    };
                    count_rm_per_2d(&s, &anchors.geometry, anchors.sps, &conv)
                };
                let l = count(EqualizerKind::Lessfm, anchors.lessfm_steps)?;
                let e = count(EqualizerKind::Essfm, anchors.essfm_steps)?;
                let score = (l / anchors.lessfm_rm).ln().powi(2) + (e / anchors.essfm_rm).ln().powi(2);
                candidates.push((conv, l, e, score));
            }
        }
    }
    let best = candidates
        .iter()
        .min_by(|a, b| a.3.total_cmp(&b.3))
        .copied()
        .expect("candidate list is non-empty");
    Ok(Calibration {
        chosen: best.0,
        lessfm_rm: best.1,
        essfm_rm: best.2,
        score: best.3,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> OlsGeometry {
        OlsGeometry::new(4096, 512).unwrap()
    }

    fn s(kind: EqualizerKind, num_steps: usize) -> Structure {
        Structure {
            kind,
            num_steps,
            num_pols: 2,
        }
    }

    #[test]
    fn edc_hand_count() {
        // Per polarization and block: 2 * (2 * 4096 * 12) + 4 * 4096 = 212992,
        // over 3584 / 1.125 symbols.
        let rm = count_rm_per_2d(&s(EqualizerKind::Edc, 0), &geom(), 1.125, &ComplexityModel::default()).unwrap();
        assert!((rm - 468.0 / 7.0).abs() < 1e-9, "{rm}");
    }

    #[test]
    fn per_step_increment_is_constant() {
        let conv = ComplexityModel::default();
        let c: Vec<f64> = (1..8)
            .map(|k| count_rm_per_2d(&s(EqualizerKind::Lessfm, k), &geom(), 2.0, &conv).unwrap())
            .collect();
        let d0 = c[1] - c[0];
        for w in c.windows(2) {
            assert!((w[1] - w[0] - d0).abs() < 1e-9);
        }
    }

    #[test]
    fn essfm_and_lessfm_cost_the_same() {
        let conv = ComplexityModel::default();
        let a = count_rm_per_2d(&s(EqualizerKind::Essfm, 4), &geom(), 1.125, &conv).unwrap();
        let b = count_rm_per_2d(&s(EqualizerKind::Lessfm, 4), &geom(), 1.125, &conv).unwrap();
        let o = count_rm_per_2d(&s(EqualizerKind::Ossfm, 4), &geom(), 1.125, &conv).unwrap();
        assert_eq!(a, b);
        assert!(o < a);
    }

    #[test]
    fn hash_tracks_conventions() {
        let a = ComplexityModel::default();
        let mut b = a;
        b.real_mults_per_complex_mult = 3;
        assert_ne!(a.conventions_hash(), b.conventions_hash());
        assert_eq!(a.conventions_hash(), ComplexityModel::default().conventions_hash());
        assert_eq!(a.conventions_hash().len(), 16);
    }

    #[test]
    fn calibration_prefers_cheaper_variants() {
        let cal = calibrate(&Anchors {
            geometry: geom(),
            sps: 1.125,
            num_pols: 2,
            lessfm_steps: 4,
            lessfm_rm: 172.0,
            essfm_steps: 16,
            essfm_rm: 761.0,
        })
        .unwrap();
        assert_eq!(cal.candidates.len(), 8);
        assert_eq!(cal.chosen.fft_count, FftCount::SplitRadix);
        assert!(cal.candidates.iter().all(|c| c.3 >= cal.score));
    }
}
