//! WDM transmitter and channel demultiplexer operating on periodic frames.
//!
//! A frame of `K` symbols is treated as one period of a periodic signal.
//! Pulse shaping and channel selection are done on the whole-frame spectrum,
//! with carriers rounded to the nearest frame bin so the frame stays periodic.

use serde::{Deserialize, Serialize};

use crate::dsp::fft::FftPlan;
use crate::dsp::grid::signed_bin;
use crate::dsp::ols::EdgePolicy;
use crate::dsp::resample::RationalResampler;
use crate::dsp::rrc::rrc_spectrum;
use crate::dsp::Field;
use crate::error::{Error, Result};
use crate::txrx::symbols::SymbolFrame;
use crate::C64;

/// Stopband attenuation of the demultiplexer resampler, dB.
const DEMUX_ATTENUATION_DB: f64 = 70.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdmConfig {
    pub num_channels: usize,
    /// Bd.
    pub symbol_rate: f64,
    /// Hz.
    pub channel_spacing: f64,
    pub rolloff: f64,
    pub center_channel_index: usize,
}

impl WdmConfig {
    pub fn single(symbol_rate: f64, rolloff: f64) -> Self {
        WdmConfig {
            num_channels: 1,
            symbol_rate,
            channel_spacing: symbol_rate * (1.0 + rolloff),
            rolloff,
            center_channel_index: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_channels == 0 || self.num_channels % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "channel count must be odd, got {}",
                self.num_channels
            )));
        }
        if self.center_channel_index != self.num_channels / 2 {
            return Err(Error::InvalidArgument(format!(
                "centre channel index must be {}",
                self.num_channels / 2
            )));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) || !(self.symbol_rate > 0.0) {
            return Err(Error::InvalidArgument("invalid symbol rate or roll-off".into()));
        }
        if self.channel_spacing < self.symbol_rate * (1.0 + self.rolloff) * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "channel spacing {} Hz is below the occupied bandwidth {} Hz",
                self.channel_spacing,
                self.symbol_rate * (1.0 + self.rolloff)
            )));
        }
        Ok(())
    }

    /// One-sided occupied bandwidth of a channel, Hz.
    pub fn half_band(&self) -> f64 {
        0.5 * self.symbol_rate * (1.0 + self.rolloff)
    }

    /// Carrier offset of channel `index` from the grid centre, Hz.
    pub fn carrier(&self, index: usize) -> f64 {
        (index as f64 - self.center_channel_index as f64) * self.channel_spacing
    }
}

/// Approximate `x` by a ratio of coprime integers with denominator <= 4096.
pub fn rational_approx(x: f64) -> Result<(usize, usize)> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("ratio {x} is not positive")));
    }
    for den in 1..=4096usize {
        let num = (x * den as f64).round();
        if num >= 1.0 && ((num / den as f64) - x).abs() <= 1e-12 * x {
            return Ok((num as usize, den));
        }
    }
    Err(Error::InvalidArgument(format!("ratio {x} is not a small rational")))
}

fn frame_len_at(symbols: usize, sps: f64) -> Result<usize> {
    let len = symbols as f64 * sps;
    let rounded = len.round();
    if (len - rounded).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{symbols} symbols at {sps} samples/symbol is not an integer number of samples"
        )));
    }
    Ok(rounded as usize)
}

/// RRC-shape each channel, place it on its carrier and sum.
///
/// `launch_power_dbm` is the per-channel power, split evenly over polarizations.
pub fn modulate_wdm(frames: &[SymbolFrame], cfg: &WdmConfig, sps_sim: usize, launch_power_dbm: f64) -> Result<Field> {
    cfg.validate()?;
    if frames.len() != cfg.num_channels {
        return Err(Error::InvalidArgument(format!(
            "{} symbol frames supplied for {} channels",
            frames.len(),
            cfg.num_channels
        )));
    }
    let k = frames[0].len();
    let num_pols = frames[0].num_pols();
    if k == 0 || frames.iter().any(|f| f.len() != k || f.num_pols() != num_pols) {
        return Err(Error::InvalidArgument("all channel frames must share length and polarization count".into()));
    }
    let fs = sps_sim as f64 * cfg.symbol_rate;
    let edge = cfg.carrier(0).abs().max(cfg.carrier(cfg.num_channels - 1).abs()) + cfg.half_band();
    if edge > fs / 2.0 {
        return Err(Error::Bandwidth(format!(
            "simulation rate {fs} Hz cannot hold channels extending to {edge} Hz"
        )));
    }
    let m = k * sps_sim;
    let df = cfg.symbol_rate / k as f64;
    let amplitude = (1e-3 * 10f64.powf(launch_power_dbm / 10.0) / num_pols as f64).sqrt();
    let plan_k = FftPlan::of_len(k);
    let plan_m = FftPlan::of_len(m);
    let support = (cfg.half_band() / df).ceil() as i64;

    let mut pols = vec![vec![C64::new(0.0, 0.0); m]; num_pols];
    for (ch, frame) in frames.iter().enumerate() {
        let shift = (cfg.carrier(ch) / df).round() as i64;
        for (pol, out) in pols.iter_mut().enumerate() {
            let mut spec = frame.pols[pol].clone();
            plan_k.forward(&mut spec);
            for q in -support..=support {
                let p = rrc_spectrum(q as f64 / k as f64, cfg.rolloff);
                if p == 0.0 {
                    continue;
                }
                let src = spec[q.rem_euclid(k as i64) as usize];
                let dst = (q + shift).rem_euclid(m as i64) as usize;
                out[dst] += src * (sps_sim as f64 * p * amplitude);
            }
        }
    }
    for out in &mut pols {
        plan_m.inverse(out);
    }
    Field::new(pols, fs)
}

/// Pass band kept by the demultiplexer for channel bandwidth and output rate.
pub fn demux_cutoff(cfg: &WdmConfig, fs_out: f64) -> f64 {
    let mut cut = 0.95 * fs_out / 2.0;
    if cfg.num_channels > 1 {
        cut = cut.min(cfg.channel_spacing - cfg.half_band());
    }
    cut.max(cfg.half_band())
}

/// Select channel `channel_index`, move it to DC and resample to `sps_out`.
pub fn demux_channel(signal: &Field, channel_index: usize, cfg: &WdmConfig, sps_out: f64) -> Result<Field> {
    cfg.validate()?;
    if channel_index >= cfg.num_channels {
        return Err(Error::InvalidArgument(format!("channel {channel_index} is not on the grid")));
    }
    if sps_out < 1.0 + cfg.rolloff {
        return Err(Error::Bandwidth(format!(
            "{sps_out} samples/symbol cannot carry a roll-off {} channel",
            cfg.rolloff
        )));
    }
    let fs_in = signal.sample_rate;
    let m = signal.len();
    let sps_in = fs_in / cfg.symbol_rate;
    let symbols = (m as f64 / sps_in).round() as usize;
    frame_len_at(symbols, sps_in)?;
    frame_len_at(symbols, sps_out)?;
    let (up, down) = rational_approx(sps_out / sps_in)?;
    let fs_out = fs_in * up as f64 / down as f64;

    let df = fs_in / m as f64;
    let shift = ((cfg.carrier(channel_index) - signal.center_freq_offset) / df).round() as i64;
    let cut = demux_cutoff(cfg, fs_out);
    let plan = FftPlan::of_len(m);
    let pass = cfg.half_band() / fs_in;
    let stop = (fs_in.min(fs_out) - cut) / fs_in;
    let resampler = RationalResampler::with_band(up, down, pass, stop, DEMUX_ATTENUATION_DB)?;

    let mut pols = Vec::with_capacity(signal.num_pols());
    for src in &signal.pols {
        let mut spec = src.clone();
        plan.forward(&mut spec);
        let mut selected = vec![C64::new(0.0, 0.0); m];
        for (q, dst) in selected.iter_mut().enumerate() {
            let f = signed_bin(q, m) as f64 * df;
            if f.abs() <= cut {
                *dst = spec[(q as i64 + shift).rem_euclid(m as i64) as usize];
            }
        }
        plan.inverse(&mut selected);
        pols.push(resampler.process(&selected, EdgePolicy::Circular));
    }
    let mut out = Field::new(pols, fs_out)?;
    out.center_freq_offset = cfg.carrier(channel_index);
    Ok(out)
}
