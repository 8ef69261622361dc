//! Polyphase rational resampling with a Kaiser-windowed sinc prototype.

use std::f64::consts::PI;

use crate::dsp::block::SampleBlock;
use crate::dsp::ols::EdgePolicy;
use crate::error::{Error, Result};
use crate::C64;

/// Stopband attenuation targeted by the default prototype, in dB.
pub const DEFAULT_ATTENUATION_DB: f64 = 70.0;

#[derive(Debug, Clone)]
pub struct RationalResampler {
    up: usize,
    down: usize,
    /// Prototype at `up * fs_in`, centred on index `half`.
    taps: Vec<f64>,
    half: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

impl RationalResampler {
    /// Default design: flat to 80% of the narrower Nyquist band, stopband
    /// from 120% of it.
    pub fn new(up: usize, down: usize) -> Result<Self> {
        let nyq = 0.5 * (1.0f64).min(up as f64 / down as f64);
        Self::with_band(up, down, 0.8 * nyq, 1.2 * nyq, DEFAULT_ATTENUATION_DB)
    }

    /// Design with explicit band edges given as fractions of the input rate.
    pub fn with_band(up: usize, down: usize, pass: f64, stop: f64, attenuation_db: f64) -> Result<Self> {
        if up == 0 || down == 0 {
            return Err(Error::InvalidArgument("resampling factors must be >= 1".into()));
        }
        if gcd(up, down) != 1 {
            return Err(Error::InvalidArgument(format!(
                "resampling factors {up}/{down} are not coprime"
            )));
        }
        if !(pass > 0.0 && stop > pass) {
            return Err(Error::InvalidArgument(format!(
                "invalid resampler band edges: pass {pass}, stop {stop}"
            )));
        }
        if up == 1 && down == 1 {
            return Ok(RationalResampler {
                up,
                down,
                taps: vec![1.0],
                half: 0,
            });
        }
        // Normalize to the prototype rate up * fs_in.
        let fp = up as f64;
        let cutoff = 0.5 * (pass + stop) / fp;
        let transition = 2.0 * PI * (stop - pass) / fp;
        let len = ((attenuation_db - 7.95) / (2.285 * transition)).ceil() as usize + 1;
        let half = len / 2;
        let beta = if attenuation_db > 50.0 {
            0.1102 * (attenuation_db - 8.7)
        } else {
            0.5842 * (attenuation_db - 21.0).max(0.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0).max(0.0)
        };
        let i0_beta = bessel_i0(beta);
        let taps = (0..=2 * half)
            .map(|m| {
                let d = m as f64 - half as f64;
                let x = 2.0 * cutoff * d;
                let sinc = if d == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
                let r = d / half as f64;
                let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                fp * 2.0 * cutoff * sinc * window
            })
            .collect();
        Ok(RationalResampler { up, down, taps, half })
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    /// Zero-delay resampling: output sample `j` sits at time `j / fs_out`.
    pub fn process(&self, input: &[C64], edge: EdgePolicy) -> Vec<C64> {
        if self.up == 1 && self.down == 1 {
            return input.to_vec();
        }
        let len = input.len() as i64;
        let (up, down, half) = (self.up as i64, self.down as i64, self.half as i64);
        (0..self.output_len(input.len()) as i64)
            .map(|j| {
                let centre = j * down;
                let first = (centre - half).div_euclid(up) + i64::from((centre - half).rem_euclid(up) != 0);
                let last = (centre + half).div_euclid(up);
                let mut acc = C64::new(0.0, 0.0);
                for i in first..=last {
                    let sample = if (0..len).contains(&i) {
                        input[i as usize]
                    } else {
                        match edge {
                            EdgePolicy::Zero => continue,
                            EdgePolicy::Circular => input[i.rem_euclid(len) as usize],
                        }
                    };
                    acc += sample * self.taps[(centre - i * up + half) as usize];
                }
                acc
            })
            .collect()
    }
}

/// Resample by `up/down` with the default prototype and zero-padded edges.
pub fn resample_rational(signal: &SampleBlock, up: usize, down: usize) -> Result<SampleBlock> {
    signal.validate()?;
    let rs = RationalResampler::new(up, down)?;
    Ok(SampleBlock {
        samples: rs.process(&signal.samples, EdgePolicy::Zero),
        sample_rate: signal.sample_rate * up as f64 / down as f64,
        center_freq_offset: signal.center_freq_offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<C64> {
        (0..n)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * freq * k as f64 / fs))
            .collect()
    }

    fn interior_gain_db(input_freq: f64, fs: f64, up: usize, down: usize) -> f64 {
        let x = SampleBlock::new(tone(input_freq, fs, 4000), fs).unwrap();
        let y = resample_rational(&x, up, down).unwrap();
        let n = y.len();
        let inner = &y.samples[n / 4..3 * n / 4];
        10.0 * (inner.iter().map(|v| v.norm_sqr()).sum::<f64>() / inner.len() as f64).log10()
    }

    #[test]
    fn unit_ratio_is_identity() {
        let x = SampleBlock::new(tone(0.1, 1.0, 100), 1.0).unwrap();
        let y = resample_rational(&x, 1, 1).unwrap();
        assert_eq!(x.samples, y.samples);
        assert_eq!(y.sample_rate, 1.0);
    }

    #[test]
    fn tone_preserved_up_nine_down_eight() {
        let fs = 1.0;
        let x = SampleBlock::new(tone(0.1, fs, 4000), fs).unwrap();
        let y = resample_rational(&x, 9, 8).unwrap();
        assert!((y.sample_rate - 9.0 / 8.0).abs() < 1e-15);
        let mut worst_db: f64 = 0.0;
        let mut worst_phase: f64 = 0.0;
        for j in y.len() / 4..3 * y.len() / 4 {
            let t = j as f64 / y.sample_rate;
            let expect = C64::from_polar(1.0, 2.0 * PI * 0.1 * t);
            let ratio = y.samples[j] / expect;
            worst_db = worst_db.max((20.0 * ratio.norm().log10()).abs());
            worst_phase = worst_phase.max(ratio.arg().abs());
        }
        assert!(worst_db < 0.01, "amplitude error {worst_db} dB");
        assert!(worst_phase < 2e-3, "phase error {worst_phase}");
    }

    #[test]
    fn passband_ripple_below_hundredth_db() {
        for &(up, down) in &[(9usize, 8usize), (8, 9), (9, 16), (16, 9)] {
            let nyq = 0.5 * (1.0f64).min(up as f64 / down as f64);
            for i in 0..=10 {
                let f = 0.8 * nyq * i as f64 / 10.0;
                let g = interior_gain_db(f, 1.0, up, down);
                assert!(g.abs() < 0.01, "{up}/{down} at {f}: {g} dB");
            }
        }
    }

    #[test]
    fn aliases_rejected_by_sixty_db() {
        // Downsampling 16 -> 9: content above 1.2 x output Nyquist must vanish.
        let nyq_out = 0.5 * 9.0 / 16.0;
        for &f in &[1.2 * nyq_out, 1.5 * nyq_out, 0.49] {
            let g = interior_gain_db(f, 1.0, 9, 16);
            assert!(g < -60.0, "tone at {f} leaks {g} dB");
        }
    }

    #[test]
    fn round_trip_band_limited() {
        let fs = 1.0;
        let n = 3000;
        let freqs = [0.013, -0.07, 0.21, -0.3, 0.35];
        let x: Vec<C64> = (0..n)
            .map(|k| {
                freqs
                    .iter()
                    .enumerate()
                    .map(|(i, f)| C64::from_polar(1.0 / (1.0 + i as f64), 2.0 * PI * f * k as f64 / fs + i as f64))
                    .sum()
            })
            .collect();
        let block = SampleBlock::new(x.clone(), fs).unwrap();
        let up = resample_rational(&block, 9, 8).unwrap();
        let back = resample_rational(&up, 8, 9).unwrap();
        let (num, den) = (n / 4..3 * n / 4).fold((0.0, 0.0), |(a, b), k| {
            (a + (back.samples[k] - x[k]).norm_sqr(), b + x[k].norm_sqr())
        });
        assert!((num / den).sqrt() < 1e-3, "relative error {}", (num / den).sqrt());
    }

    #[test]
    fn rejects_non_coprime() {
        assert!(RationalResampler::new(4, 2).is_err());
        assert!(RationalResampler::new(0, 2).is_err());
    }
}
