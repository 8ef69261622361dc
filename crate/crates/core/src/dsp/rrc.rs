//! Root-raised-cosine pulse in time and frequency.
//!
//! Time is in symbol periods and frequency in units of the symbol rate, so
//! the continuous pulse has unit energy and its spectrum is 1 at DC.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

fn check_rolloff(rolloff: f64) -> Result<()> {
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "roll-off must lie in (0, 1], got {rolloff}"
        )));
    }
    Ok(())
}

/// Unit-energy RRC impulse response at `t` symbol periods.
pub fn rrc_impulse(t: f64, rolloff: f64) -> f64 {
    let b = rolloff;
    if t == 0.0 {
        return 1.0 - b + 4.0 * b / PI;
    }
    let singular = 1.0 / (4.0 * b);
    if ((t.abs() - singular) / singular).abs() < 1e-9 {
        let arg = PI / (4.0 * b);
        return b * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos();
    let den = PI * t * (1.0 - (4.0 * b * t).powi(2));
    num / den
}

/// RRC amplitude spectrum at `f` (units of the symbol rate), 1 in the flat band.
pub fn rrc_spectrum(f: f64, rolloff: f64) -> f64 {
    let a = f.abs();
    let lo = (1.0 - rolloff) / 2.0;
    let hi = (1.0 + rolloff) / 2.0;
    if a <= lo {
        1.0
    } else if a < hi {
        (0.5 * (1.0 + (PI / rolloff * (a - lo)).cos())).sqrt()
    } else {
        0.0
    }
}

/// Odd-length RRC taps spanning `span` symbols at `sps` samples per symbol,
/// centred on `t = 0` and normalized to unit energy.
pub fn rrc_taps(rolloff: f64, span: usize, sps: usize) -> Result<Vec<f64>> {
    check_rolloff(rolloff)?;
    if span == 0 || sps == 0 {
        return Err(Error::InvalidArgument("span and sps must be positive".into()));
    }
    let half = (span * sps) / 2;
    let mut taps: Vec<f64> = (0..=2 * half)
        .map(|k| rrc_impulse((k as f64 - half as f64) / sps as f64, rolloff))
        .collect();
    let norm = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    for h in &mut taps {
        *h /= norm;
    }
    Ok(taps)
}
