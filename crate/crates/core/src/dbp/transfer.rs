use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dsp::fft::FftPlan;
use crate::dsp::grid::FreqGrid;
use crate::error::{Error, Result};
use crate::C64;

/// Which way a dispersion filter runs relative to the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GvdSign {
    /// `exp(-j 2 pi^2 beta2 f^2 L)`: undoes `L` km of channel dispersion.
    #[default]
    Backward,
    /// Conjugate response, emulating the channel.
    Forward,
}

impl GvdSign {
    pub fn sign(self) -> f64 {
        match self {
            GvdSign::Backward => -1.0,
            GvdSign::Forward => 1.0,
        }
    }
}

/// `2 pi^2 beta2 f_k^2` per bin in rad/km, with beta2 given in ps^2/km.
pub fn gvd_phase_rate(grid: &FreqGrid, beta2_ps2_per_km: f64) -> Vec<f64> {
    let beta2 = beta2_ps2_per_km * 1e-24;
    grid.freqs().iter().map(|f| 2.0 * PI * PI * beta2 * f * f).collect()
}

/// Backward GVD transfer `exp(-j 2 pi^2 beta2 f_k^2 L)` for `L` km.
pub fn gvd_transfer(length_km: f64, grid: &FreqGrid, beta2_ps2_per_km: f64) -> Vec<C64> {
    gvd_transfer_signed(length_km, grid, beta2_ps2_per_km, GvdSign::Backward)
}

pub fn gvd_transfer_signed(length_km: f64, grid: &FreqGrid, beta2_ps2_per_km: f64, sign: GvdSign) -> Vec<C64> {
    gvd_phase_rate(grid, beta2_ps2_per_km)
        .into_iter()
        .map(|rate| {
            let phase = (sign.sign() * rate * length_km).rem_euclid(2.0 * PI);
            C64::new(phase.cos(), phase.sin())
        })
        .collect()
}

/// Samples of delay spread produced by `length_km` of dispersion across the
/// full band at `sample_rate`, rounded up to an even count.
pub fn dispersion_memory(beta2_ps2_per_km: f64, length_km: f64, sample_rate: f64) -> usize {
    let spread = 2.0 * PI * (beta2_ps2_per_km * 1e-24).abs() * length_km.abs() * sample_rate * sample_rate;
    let samples = spread.ceil() as usize;
    samples + samples % 2
}

fn check_filter(c: &[f64], n: usize) -> Result<()> {
    if c.is_empty() {
        return Err(Error::InvalidArgument("filter needs at least one coefficient".into()));
    }
    if 2 * (c.len() - 1) + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "symmetric filter of {} taps does not fit a {n}-point block",
            2 * c.len() - 1
        )));
    }
    Ok(())
}

/// Circular symmetric impulse response `h[0] = c[0]`, `h[+-k] = c[k]`.
pub fn symmetric_response(c: &[f64], n: usize) -> Result<Vec<f64>> {
    check_filter(c, n)?;
    let mut h = vec![0.0; n];
    h[0] = c[0];
    for (k, &v) in c.iter().enumerate().skip(1) {
        h[k] = v;
        h[n - k] = v;
    }
    Ok(h)
}

/// Real transfer of the symmetric NLPR filter over all `n` bins.
pub fn nlpr_transfer(c: &[f64], n: usize) -> Result<Vec<f64>> {
    let h = symmetric_response(c, n)?;
    let mut buf: Vec<C64> = h.iter().map(|&v| C64::new(v, 0.0)).collect();
    FftPlan::pow2(n)?.forward(&mut buf);
    Ok(buf.into_iter().map(|v| v.re).collect())
}

/// Non-redundant half (`n/2 + 1` bins) of [`nlpr_transfer`], evaluated as
/// the cosine series of the causal half.
pub fn nlpr_half_transfer(c: &[f64], n: usize) -> Result<Vec<f64>> {
    check_filter(c, n)?;
    Ok((0..=n / 2)
        .map(|k| {
            c.iter().enumerate().fold(0.0, |acc, (m, &v)| {
                let w = if m == 0 { 1.0 } else { 2.0 };
                acc + w * v * (2.0 * PI * (k * m % n) as f64 / n as f64).cos()
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_length_is_identity() {
        let grid = FreqGrid::new(64, 104.625e9).unwrap();
        for h in gvd_transfer(0.0, &grid, -21.68) {
            assert_eq!(h, C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn lengths_compose_and_stay_unit_modulus() {
        let grid = FreqGrid::new(256, 186e9).unwrap();
        let a = gvd_transfer(37.5, &grid, -21.68);
        let b = gvd_transfer(12.25, &grid, -21.68);
        let ab = gvd_transfer(49.75, &grid, -21.68);
        for k in 0..256 {
            assert!((a[k] * b[k] - ab[k]).norm() < 1e-12);
            assert!((a[k].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_at_fifty_ghz() {
        // -2 pi^2 beta2 f^2 L with beta2 = -21.68 ps^2/km, f = 50 GHz, L = 170 km.
        let phase = -2.0 * PI * PI * (-21.68e-24) * (50e9f64).powi(2) * 170.0;
        assert!((phase - 181.9).abs() < 0.05, "{phase}");
        let grid = FreqGrid::new(8, 400e9).unwrap();
        assert_eq!(grid.freqs()[1], 50e9);
        let h = gvd_transfer(170.0, &grid, -21.68);
        let expect = C64::from_polar(1.0, phase);
        assert!((h[1] - expect).norm() < 1e-9);
    }

    #[test]
    fn delta_filter_is_flat() {
        for v in nlpr_transfer(&[1.0, 0.0, 0.0], 16).unwrap() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_delay_pair_is_cosine() {
        let h = nlpr_transfer(&[0.0, 0.5], 8).unwrap();
        for (k, v) in h.iter().enumerate() {
            assert!((v - (2.0 * PI * k as f64 / 8.0).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_brute_force_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = 256;
        // Explicit symmetric sequence over k = -8..=8 and a direct DFT.
        let fast = nlpr_transfer(&c, n).unwrap();
        let half = nlpr_half_transfer(&c, n).unwrap();
        for bin in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in -8i64..=8 {
                let v = c[k.unsigned_abs() as usize];
                acc += C64::from_polar(v, -2.0 * PI * (bin as i64 * k) as f64 / n as f64);
            }
            assert!(acc.im.abs() < 1e-12);
            assert!((acc.re - fast[bin]).abs() < 1e-12);
            if bin <= n / 2 {
                assert!((acc.re - half[bin]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oversized_filter_rejected() {
        assert!(nlpr_transfer(&[0.0; 9], 16).is_err());
        assert!(nlpr_transfer(&[0.0; 8], 16).is_ok());
    }

    #[test]
    fn memory_of_full_span() {
        let m = dispersion_memory(-21.68, 170.0, 104.625e9);
        assert!((250..=260).contains(&m), "{m}");
        assert_eq!(m % 2, 0);
    }
}
