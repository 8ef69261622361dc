use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::Field;
use crate::seed;
use crate::C64;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Lumped amplifier with ASE noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplifierSpec {
    /// Power gain, dB.
    pub gain_db: f64,
    /// dB. `-inf` disables noise.
    pub noise_figure_db: f64,
    /// m.
    pub center_wavelength: f64,
}

impl AmplifierSpec {
    pub fn noiseless(gain_db: f64) -> Self {
        AmplifierSpec {
            gain_db,
            noise_figure_db: f64::NEG_INFINITY,
            center_wavelength: 1550e-9,
        }
    }

    pub fn noise_enabled(&self) -> bool {
        self.noise_figure_db > f64::NEG_INFINITY
    }

    /// Noise figures below the 3 dB quantum limit are allowed but unphysical.
    pub fn below_quantum_limit(&self) -> bool {
        self.noise_enabled() && self.noise_figure_db < 10.0 * 2f64.log10()
    }

    pub fn gain_linear(&self) -> f64 {
        10f64.powf(self.gain_db / 10.0)
    }

    pub fn photon_energy(&self) -> f64 {
        PLANCK * SPEED_OF_LIGHT / self.center_wavelength
    }

    /// One-sided ASE power spectral density per polarization, W/Hz:
    /// `(h nu / 2) (G F - 1)`.
    pub fn ase_psd(&self) -> f64 {
        if !self.noise_enabled() {
            return 0.0;
        }
        let f = 10f64.powf(self.noise_figure_db / 10.0);
        (0.5 * self.photon_energy() * (self.gain_linear() * f - 1.0)).max(0.0)
    }
}

/// Amplify by the power gain and add circular white Gaussian noise of
/// variance `ase_psd * fs` per complex sample on every polarization.
pub fn edfa_add_noise(signal: &Field, amp: &AmplifierSpec, seed: u64) -> Field {
    let mut out = signal.clone();
    out.scale(amp.gain_linear().sqrt());
    let variance = amp.ase_psd() * signal.sample_rate;
    if variance > 0.0 {
        let sigma = (variance / 2.0).sqrt();
        let mut rng = seed::rng(seed);
        for pol in &mut out.pols {
            for v in pol.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *v += C64::new(re * sigma, im * sigma);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amp(gain_db: f64, nf_db: f64) -> AmplifierSpec {
        AmplifierSpec {
            gain_db,
            noise_figure_db: nf_db,
            center_wavelength: 1550e-9,
        }
    }

    #[test]
    fn quantum_limit_at_high_gain() {
        let a = amp(40.0, 10.0 * 2f64.log10());
        let hv = a.photon_energy();
        let ratio = a.ase_psd() / (a.gain_linear() * hv);
        assert!((ratio - 1.0).abs() < 1e-4);
    }

    #[test]
    fn unity_gain_three_db() {
        let a = amp(0.0, 3.0);
        let expect = 0.5 * (10f64.powf(0.3) - 1.0);
        assert!((a.ase_psd() / a.photon_energy() - expect).abs() < 1e-12);
        assert!((expect - 0.498).abs() < 1e-3);
    }

    #[test]
    fn measured_noise_variance() {
        let n = 1_000_000;
        let fs = 100e9;
        let zero = Field::new(vec![vec![C64::new(0.0, 0.0); n]], fs).unwrap();
        let a = amp(20.0, 4.5);
        let noisy = edfa_add_noise(&zero, &a, 17);
        let var = noisy.pols[0].iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        let expect = a.ase_psd() * fs;
        assert!((var / expect - 1.0).abs() < 0.01, "ratio {}", var / expect);
    }

    #[test]
    fn noiseless_mode_is_pure_gain() {
        let x = Field::new(vec![vec![C64::new(1.0, -2.0), C64::new(0.5, 0.25)]], 1.0).unwrap();
        let y = edfa_add_noise(&x, &AmplifierSpec::noiseless(20.0), 3);
        for (a, b) in x.pols[0].iter().zip(&y.pols[0]) {
            assert_eq!(*b, a * 10.0);
        }
    }

    #[test]
    fn reproducible_with_seed() {
        let x = Field::new(vec![vec![C64::new(1.0, 0.0); 64]; 2], 1e9).unwrap();
        let a = amp(30.0, 4.5);
        assert_eq!(edfa_add_noise(&x, &a, 5), edfa_add_noise(&x, &a, 5));
        assert!(!a.below_quantum_limit());
        assert!(amp(10.0, 2.0).below_quantum_limit());
    }
}
