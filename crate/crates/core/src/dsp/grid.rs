use crate::error::{Error, Result};

/// Per-bin frequencies of an `N`-point FFT in FFT order: bin 0 is DC and
/// the upper half holds the negative frequencies (Nyquist bin negative).
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    freqs: Vec<f64>,
    sample_rate: f64,
}

impl FreqGrid {
    /// Grid for a power-of-two FFT size.
    pub fn new(n: usize, sample_rate: f64) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        Self::any_len(n, sample_rate)
    }

    /// Grid for an arbitrary positive length (whole-frame spectra).
    pub fn any_len(n: usize, sample_rate: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("empty frequency grid".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let df = sample_rate / n as f64;
        let freqs = (0..n).map(|k| signed_bin(k, n) as f64 * df).collect();
        Ok(FreqGrid { freqs, sample_rate })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn spacing(&self) -> f64 {
        self.sample_rate / self.freqs.len() as f64
    }
}

/// `make_freq_grid` for power-of-two sizes.
pub fn make_freq_grid(n: usize, sample_rate: f64) -> Result<FreqGrid> {
    FreqGrid::new(n, sample_rate)
}

/// Signed bin index of FFT bin `k` out of `n` (`k - n` for the upper half).
pub fn signed_bin(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}
