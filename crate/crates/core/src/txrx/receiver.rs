//! Matched filtering and symbol-time sampling as one fixed linear map.
//!
//! The map works on whole periodic frames: the frame spectrum is weighted by
//! the RRC response and a timing phase ramp, folded modulo the symbol rate
//! and inverse transformed at one sample per symbol. Its adjoint is exposed
//! so training can differentiate through it.

use std::f64::consts::PI;

use crate::dsp::fft::FftPlan;
use crate::dsp::grid::signed_bin;
use crate::dsp::rrc::rrc_spectrum;
use crate::dsp::Field;
use crate::error::{Error, Result};
use crate::txrx::symbols::SymbolFrame;
use crate::C64;

#[derive(Debug, Clone)]
pub struct MatchedFilter {
    len: usize,
    symbols: usize,
    sps: f64,
    rolloff: f64,
    scale: f64,
    timing: f64,
    /// Non-zero bins of the weighted response: (bin, folded bin, weight).
    taps: Vec<(usize, usize, C64)>,
}

impl MatchedFilter {
    /// `len` samples at `sps` samples/symbol; output is multiplied by `scale`
    /// and sampled at `k + timing` symbol periods.
    pub fn new(len: usize, sps: f64, rolloff: f64, scale: f64, timing: f64) -> Result<Self> {
        let symbols_f = len as f64 / sps;
        let symbols = symbols_f.round() as usize;
        if symbols == 0 || (symbols_f - symbols as f64).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "{len} samples is not a whole number of symbols at {sps} samples/symbol"
            )));
        }
        if !(rolloff > 0.0 && rolloff <= 1.0) {
            return Err(Error::InvalidArgument(format!("invalid roll-off {rolloff}")));
        }
        let norm = symbols as f64 / len as f64 * scale;
        let taps = (0..len)
            .filter_map(|q| {
                let bin = signed_bin(q, len);
                let f = bin as f64 / symbols as f64;
                let p = rrc_spectrum(f, rolloff);
                (p != 0.0).then(|| {
                    let folded = bin.rem_euclid(symbols as i64) as usize;
                    (q, folded, C64::from_polar(norm * p, 2.0 * PI * f * timing))
                })
            })
            .collect();
        Ok(MatchedFilter {
            len,
            symbols,
            sps,
            rolloff,
            scale,
            timing,
            taps,
        })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn input_len(&self) -> usize {
        self.len
    }

    pub fn timing(&self) -> f64 {
        self.timing
    }

    pub fn with_timing(&self, timing: f64) -> Result<Self> {
        Self::new(self.len, self.sps, self.rolloff, self.scale, timing)
    }

    fn fold(&self, spectrum: &[C64]) -> Vec<C64> {
        let mut folded = vec![C64::new(0.0, 0.0); self.symbols];
        for &(q, r, w) in &self.taps {
            folded[r] += spectrum[q] * w;
        }
        folded
    }

    /// Symbol-rate samples of one polarization.
    pub fn apply(&self, samples: &[C64]) -> Vec<C64> {
        assert_eq!(samples.len(), self.len, "matched filter length mismatch");
        let mut spec = samples.to_vec();
        FftPlan::of_len(self.len).forward(&mut spec);
        let mut y = self.fold(&spec);
        FftPlan::of_len(self.symbols).inverse(&mut y);
        y
    }

    /// Adjoint of [`MatchedFilter::apply`].
    pub fn adjoint(&self, grad: &[C64]) -> Vec<C64> {
        assert_eq!(grad.len(), self.symbols, "matched filter adjoint length mismatch");
        let mut g = grad.to_vec();
        FftPlan::of_len(self.symbols).forward(&mut g);
        let mut spec = vec![C64::new(0.0, 0.0); self.len];
        for &(q, r, w) in &self.taps {
            spec[q] += w.conj() * g[r];
        }
        FftPlan::of_len(self.len).inverse_unscaled(&mut spec);
        let s = 1.0 / self.symbols as f64;
        spec.iter_mut().for_each(|v| *v *= s);
        spec
    }

    /// Sampling phase maximizing the total decision-point energy, searched on
    /// a coarse grid over one symbol and refined twice.
    pub fn search_timing(&self, pols: &[Vec<C64>]) -> f64 {
        let base = match self.with_timing(0.0) {
            Ok(mf) => mf,
            Err(_) => return 0.0,
        };
        let spectra: Vec<Vec<C64>> = pols
            .iter()
            .map(|p| {
                let mut s = p.clone();
                FftPlan::of_len(self.len).forward(&mut s);
                s
            })
            .collect();
        let energy = |tau: f64| -> f64 {
            let mut total = 0.0;
            for spec in &spectra {
                let mut folded = vec![C64::new(0.0, 0.0); self.symbols];
                for &(q, r, w) in &base.taps {
                    let f = signed_bin(q, self.len) as f64 / self.symbols as f64;
                    folded[r] += spec[q] * w * C64::from_polar(1.0, 2.0 * PI * f * tau);
                }
                total += folded.iter().map(|v| v.norm_sqr()).sum::<f64>();
            }
            total
        };
        let mut best = 0.0;
        let mut step = 1.0 / 32.0;
        let mut candidates: Vec<f64> = (0..32).map(|i| -0.5 + i as f64 * step).collect();
        for _ in 0..3 {
            let mut best_e = f64::NEG_INFINITY;
            for &tau in &candidates {
                let e = energy(tau);
                if e > best_e {
                    best_e = e;
                    best = tau;
                }
            }
            let centre = best;
            candidates = (-8..=8).map(|i| centre + i as f64 * step / 8.0).collect();
            step /= 8.0;
        }
        best
    }
}

/// RRC matched filter followed by symbol-time sampling at the
/// energy-maximizing phase.
pub fn matched_filter_and_sample(signal: &Field, rolloff: f64, sps: f64) -> Result<SymbolFrame> {
    let mf = MatchedFilter::new(signal.len(), sps, rolloff, 1.0, 0.0)?;
    let tau = mf.search_timing(&signal.pols);
    let mf = mf.with_timing(tau)?;
    let pols = signal.pols.iter().map(|p| mf.apply(p)).collect();
    Ok(SymbolFrame::derived(pols, signal.sample_rate / sps))
}
