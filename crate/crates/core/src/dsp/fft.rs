//! FFT engine shared by every block-based stage.
//!
//! Forward transforms are unnormalized and inverse transforms carry the
//! `1/N` factor, so the adjoint of the forward FFT is `N` times the inverse.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::C64;

/// Cached forward/inverse complex plans of one length.
pub struct FftPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("len", &self.len).finish()
    }
}

fn complex_cache() -> &'static Mutex<HashMap<usize, Arc<FftPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<FftPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl FftPlan {
    /// Plan of any positive length. Lengths that are not powers of two are
    /// only used for whole-block operations on periodic simulation frames.
    pub fn of_len(len: usize) -> Arc<FftPlan> {
        assert!(len > 0, "FFT length must be positive");
        let mut cache = complex_cache().lock().expect("fft cache poisoned");
        cache
            .entry(len)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(FftPlan {
                    len,
                    forward: planner.plan_fft_forward(len),
                    inverse: planner.plan_fft_inverse(len),
                })
            })
            .clone()
    }

    /// Power-of-two plan, as required by the overlap-save engine.
    pub fn pow2(len: usize) -> Result<Arc<FftPlan>> {
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::NotPowerOfTwo(len));
        }
        Ok(Self::of_len(len))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place unnormalized forward transform.
    pub fn forward(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.forward.process(buf);
    }

    /// In-place inverse transform including the `1/N` factor.
    pub fn inverse(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// In-place inverse transform without normalization.
    pub fn inverse_unscaled(&self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inverse.process(buf);
    }
}

/// Real-input transform pair used for filtering intensity signals.
pub struct RealFftPlan {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for RealFftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealFftPlan").field("len", &self.len).finish()
    }
}

fn real_cache() -> &'static Mutex<HashMap<usize, Arc<RealFftPlan>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<RealFftPlan>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl RealFftPlan {
    pub fn pow2(len: usize) -> Result<Arc<RealFftPlan>> {
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::NotPowerOfTwo(len));
        }
        let mut cache = real_cache().lock().expect("rfft cache poisoned");
        Ok(cache
            .entry(len)
            .or_insert_with(|| {
                let mut planner = RealFftPlanner::new();
                Arc::new(RealFftPlan {
                    len,
                    forward: planner.plan_fft_forward(len),
                    inverse: planner.plan_fft_inverse(len),
                })
            })
            .clone())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of non-redundant bins, `N/2 + 1`.
    pub fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Unnormalized forward RFFT. `input` is used as scratch.
    pub fn forward(&self, input: &mut [f64], spectrum: &mut [C64]) {
        self.forward
            .process(input, spectrum)
            .expect("rfft length mismatch");
    }

    /// Inverse RFFT including the `1/N` factor. `spectrum` is used as scratch.
    pub fn inverse(&self, spectrum: &mut [C64], output: &mut [f64]) {
        // DC and Nyquist bins must be real for the c2r transform.
        spectrum[0].im = 0.0;
        let last = spectrum.len() - 1;
        spectrum[last].im = 0.0;
        self.inverse
            .process(spectrum, output)
            .expect("irfft length mismatch");
        let scale = 1.0 / self.len as f64;
        for v in output.iter_mut() {
            *v *= scale;
        }
    }
}

/// Forward FFT of a power-of-two length block.
pub fn fft(block: &[C64]) -> Result<Vec<C64>> {
    let plan = FftPlan::pow2(block.len())?;
    let mut out = block.to_vec();
    plan.forward(&mut out);
    Ok(out)
}

/// Inverse FFT (scaled by `1/N`) of a power-of-two length block.
pub fn ifft(spectrum: &[C64]) -> Result<Vec<C64>> {
    let plan = FftPlan::pow2(spectrum.len())?;
    let mut out = spectrum.to_vec();
    plan.inverse(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn impulse_gives_flat_spectrum() {
        let mut x = vec![C64::new(0.0, 0.0); 16];
        x[0] = C64::new(1.0, 0.0);
        for v in fft(&x).unwrap() {
            assert_eq!(v, C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn constant_gives_dc_only() {
        let x = vec![C64::new(1.0, 0.0); 8];
        let spec = fft(&x).unwrap();
        assert!((spec[0] - C64::new(8.0, 0.0)).norm() < 1e-15);
        for v in &spec[1..] {
            assert!(v.norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_1024() {
        let x = random_block(1024, 7);
        let back = ifft(&fft(&x).unwrap()).unwrap();
        let err = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "max error {err}");
    }

    #[test]
    fn round_trip_and_parseval_all_sizes() {
        for log2 in 3..=18 {
            let n = 1usize << log2;
            let x = random_block(n, log2 as u64);
            let spec = fft(&x).unwrap();
            let e_time: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let e_freq: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
            assert!(((e_time - e_freq) / e_time).abs() < 1e-12, "parseval at {n}");
            let back = ifft(&spec).unwrap();
            let num: f64 = x.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum();
            assert!((num / e_time).sqrt() < 1e-12, "round trip at {n}");
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let x = vec![C64::new(0.0, 0.0); 12];
        assert!(matches!(fft(&x), Err(Error::NotPowerOfTwo(12))));
        assert!(matches!(ifft(&x), Err(Error::NotPowerOfTwo(12))));
    }

    #[test]
    fn real_transform_matches_complex() {
        let n = 64;
        let x: Vec<f64> = random_block(n, 3).iter().map(|c| c.re).collect();
        let plan = RealFftPlan::pow2(n).unwrap();
        let mut scratch = x.clone();
        let mut spec = vec![C64::new(0.0, 0.0); plan.bins()];
        plan.forward(&mut scratch, &mut spec);
        let full = fft(&x.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>()).unwrap();
        for k in 0..plan.bins() {
            assert!((spec[k] - full[k]).norm() < 1e-12);
        }
        let mut back = vec![0.0; n];
        plan.inverse(&mut spec, &mut back);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
