use serde::{Deserialize, Serialize};

use crate::dsp::OlsGeometry;
use crate::error::{Error, Result};
use crate::fiber::PolarizationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerKind {
    Edc,
    Ossfm,
    Essfm,
    Lessfm,
}

/// Which parameters move together during optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tying {
    /// One coefficient vector for every step.
    pub shared_coeffs: bool,
    /// Interior lengths fixed at `L / N_s`, only the receiver-side split moves.
    pub uniform_lengths: bool,
    /// Filter forced to a single tap.
    pub single_tap: bool,
}

impl EqualizerKind {
    pub fn name(self) -> &'static str {
        match self {
            EqualizerKind::Edc => "edc",
            EqualizerKind::Ossfm => "ossfm",
            EqualizerKind::Essfm => "essfm",
            EqualizerKind::Lessfm => "lessfm",
        }
    }

    pub fn tying(self) -> Tying {
        match self {
            EqualizerKind::Edc | EqualizerKind::Ossfm => Tying {
                shared_coeffs: true,
                uniform_lengths: true,
                single_tap: true,
            },
            EqualizerKind::Essfm => Tying {
                shared_coeffs: true,
                uniform_lengths: true,
                single_tap: false,
            },
            EqualizerKind::Lessfm => Tying {
                shared_coeffs: false,
                uniform_lengths: false,
                single_tap: false,
            },
        }
    }

    pub fn is_nonlinear(self) -> bool {
        self != EqualizerKind::Edc
    }
}

impl std::str::FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "edc" => Ok(EqualizerKind::Edc),
            "ossfm" => Ok(EqualizerKind::Ossfm),
            "essfm" => Ok(EqualizerKind::Essfm),
            "lessfm" => Ok(EqualizerKind::Lessfm),
            _ => Err(Error::UnknownEqualizer(s.to_string())),
        }
    }
}

impl std::fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of a split-step equalizer with `N_s` nonlinear steps.
///
/// `lengths_km` holds `N_s + 1` dispersion lengths, receiver side first.
/// `coeffs[i]` is the causal half of the symmetric intensity filter applied
/// after linear step `i`, in rad/W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LEssfmModel {
    pub kind: EqualizerKind,
    pub num_steps: usize,
    pub filter_halflen: usize,
    pub lengths_km: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    pub beta2_ps2_per_km: f64,
    pub geometry: OlsGeometry,
    /// Samples per symbol at the equalizer input.
    pub sps: f64,
    pub symbol_rate: f64,
    pub mode: PolarizationMode,
}

impl LEssfmModel {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.num_steps == 0 {
            return bad("a split-step model needs at least one step".into());
        }
        if self.lengths_km.len() != self.num_steps + 1 {
            return bad(format!(
                "{} steps need {} lengths, got {}",
                self.num_steps,
                self.num_steps + 1,
                self.lengths_km.len()
            ));
        }
        if self.coeffs.len() != self.num_steps {
            return bad(format!("{} steps need {} filters, got {}", self.num_steps, self.num_steps, self.coeffs.len()));
        }
        if self.coeffs.iter().any(|c| c.len() != self.filter_halflen + 1) {
            return bad(format!("every filter must have {} taps", self.filter_halflen + 1));
        }
        if 2 * self.filter_halflen + 1 > self.geometry.overlap {
            return bad(format!(
                "filter of {} taps exceeds the overlap {}",
                2 * self.filter_halflen + 1,
                self.geometry.overlap
            ));
        }
        let finite = self.lengths_km.iter().chain(self.coeffs.iter().flatten()).all(|v| v.is_finite());
        if !finite || !self.beta2_ps2_per_km.is_finite() {
            return bad("model parameters must be finite".into());
        }
        if !(self.sps > 0.0 && self.symbol_rate > 0.0) {
            return bad("sampling parameters must be positive".into());
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        self.sps * self.symbol_rate
    }

    pub fn total_length_km(&self) -> f64 {
        self.lengths_km.iter().sum()
    }

    pub fn num_params(&self) -> usize {
        self.lengths_km.len() + self.coeffs.iter().map(Vec::len).sum::<usize>()
    }

    /// Lengths then coefficients, step by step.
    pub fn flat_params(&self) -> Vec<f64> {
        self.lengths_km.iter().chain(self.coeffs.iter().flatten()).copied().collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let (lengths, rest) = flat.split_at(self.lengths_km.len());
        self.lengths_km.copy_from_slice(lengths);
        for (c, chunk) in self.coeffs.iter_mut().zip(rest.chunks(self.filter_halflen + 1)) {
            c.copy_from_slice(chunk);
        }
        Ok(())
    }
}

/// Shared settings for building split-step models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelFrame {
    pub beta2_ps2_per_km: f64,
    pub geometry: OlsGeometry,
    pub sps: f64,
    pub symbol_rate: f64,
    pub mode: PolarizationMode,
}

/// Receiver-side split `L0`, then `N_s - 1` uniform steps of `L / N_s`, then
/// `L / N_s - L0` so the lengths add up to `L`.
pub fn tied_lengths(num_steps: usize, total_km: f64, split_km: f64) -> Vec<f64> {
    let uniform = total_km / num_steps as f64;
    let mut lengths = Vec::with_capacity(num_steps + 1);
    lengths.push(split_km);
    lengths.extend(std::iter::repeat_n(uniform, num_steps - 1));
    let partial: f64 = lengths.iter().sum();
    lengths.push(total_km - partial);
    lengths
}

/// Model with one coefficient vector shared by all steps and uniform
/// interior lengths. OSSFM keeps only the first tap.
pub fn build_tied_model(
    kind: EqualizerKind,
    num_steps: usize,
    filter_halflen: usize,
    shared: &[f64],
    total_km: f64,
    split_km: f64,
    frame: &ModelFrame,
) -> Result<LEssfmModel> {
    if !matches!(kind, EqualizerKind::Ossfm | EqualizerKind::Essfm) {
        return Err(Error::InvalidArgument(format!("{kind} is not a tied split-step kind")));
    }
    if num_steps == 0 {
        return Err(Error::InvalidArgument("a split-step model needs at least one step".into()));
    }
    let halflen = if kind == EqualizerKind::Ossfm { 0 } else { filter_halflen };
    let mut coeffs = vec![0.0; halflen + 1];
    for (dst, src) in coeffs.iter_mut().zip(shared) {
        *dst = *src;
    }
    let model = LEssfmModel {
        kind,
        num_steps,
        filter_halflen: halflen,
        lengths_km: tied_lengths(num_steps, total_km, split_km),
        coeffs: vec![coeffs; num_steps],
        beta2_ps2_per_km: frame.beta2_ps2_per_km,
        geometry: frame.geometry,
        sps: frame.sps,
        symbol_rate: frame.symbol_rate,
        mode: frame.mode,
    };
    model.validate()?;
    Ok(model)
}

/// Untied model from explicit lengths and per-step filters.
pub fn build_free_model(lengths_km: Vec<f64>, coeffs: Vec<Vec<f64>>, frame: &ModelFrame) -> Result<LEssfmModel> {
    let filter_halflen = coeffs.first().map_or(0, |c| c.len().saturating_sub(1));
    let model = LEssfmModel {
        kind: EqualizerKind::Lessfm,
        num_steps: coeffs.len(),
        filter_halflen,
        lengths_km,
        coeffs,
        beta2_ps2_per_km: frame.beta2_ps2_per_km,
        geometry: frame.geometry,
        sps: frame.sps,
        symbol_rate: frame.symbol_rate,
        mode: frame.mode,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> ModelFrame {
        ModelFrame {
            beta2_ps2_per_km: -21.68,
            geometry: OlsGeometry::new(2048, 512).unwrap(),
            sps: 1.125,
            symbol_rate: 93e9,
            mode: PolarizationMode::Scalar,
        }
    }

    #[test]
    fn ossfm_drops_taps() {
        let m = build_tied_model(EqualizerKind::Ossfm, 3, 8, &[-1.0, 0.2, 0.1], 170.0, 20.0, &frame()).unwrap();
        assert_eq!(m.filter_halflen, 0);
        assert!(m.coeffs.iter().all(|c| c == &vec![-1.0]));
    }

    #[test]
    fn tied_lengths_sum_exactly() {
        let m = build_tied_model(EqualizerKind::Essfm, 4, 5, &[-1.0], 170.0, 10.0, &frame()).unwrap();
        assert_eq!(m.lengths_km, vec![10.0, 42.5, 42.5, 42.5, 32.5]);
        assert_eq!(m.total_length_km(), 170.0);
        assert!(m.coeffs.iter().all(|c| c == &m.coeffs[0]));
        assert_eq!(m.coeffs[0], vec![-1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn tied_build_is_deterministic() {
        let a = build_tied_model(EqualizerKind::Essfm, 7, 3, &[0.5, 0.25], 123.4, 3.3, &frame()).unwrap();
        let b = build_tied_model(EqualizerKind::Essfm, 7, 3, &[0.5, 0.25], 123.4, 3.3, &frame()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lessfm_is_not_tied() {
        assert!(build_tied_model(EqualizerKind::Lessfm, 2, 1, &[0.0], 10.0, 1.0, &frame()).is_err());
    }

    #[test]
    fn filter_must_fit_overlap() {
        let long = vec![vec![0.0; 300]];
        assert!(build_free_model(vec![1.0, 1.0], long, &frame()).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut m = build_free_model(vec![1.0, 2.0, 3.0], vec![vec![4.0, 5.0], vec![6.0, 7.0]], &frame()).unwrap();
        let flat = m.flat_params();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let shifted: Vec<f64> = flat.iter().map(|v| v + 1.0).collect();
        m.set_flat_params(&shifted).unwrap();
        assert_eq!(m.flat_params(), shifted);
    }

    #[test]
    fn kind_names_parse() {
        for k in [EqualizerKind::Edc, EqualizerKind::Ossfm, EqualizerKind::Essfm, EqualizerKind::Lessfm] {
            assert_eq!(k.name().parse::<EqualizerKind>().unwrap(), k);
        }
        assert_eq!("L-ESSFM".parse::<EqualizerKind>().unwrap(), EqualizerKind::Lessfm);
        assert!("magic".parse::<EqualizerKind>().is_err());
    }
}
