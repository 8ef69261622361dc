//! Mean phase removal and effective SNR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txrx::symbols::SymbolFrame;
use crate::C64;

/// Estimates above this are flagged as saturated.
pub const SNR_FLOOR_DB: f64 = 80.0;
/// Reported value when the residual error vanishes numerically.
pub const SNR_CEILING_DB: f64 = 200.0;
/// Fewer usable symbols than this raises a warning flag.
pub const MIN_SYMBOLS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MprInfo {
    /// Removed phase per polarization, rad.
    pub phase: Vec<f64>,
    /// Optimal real scale of the reference per polarization.
    pub scale: Vec<f64>,
    /// Polarizations whose cross-correlation vanished.
    pub degenerate: Vec<bool>,
}

/// Rotate each polarization of `y` by `-arg(sum conj(x) y)`.
pub fn mean_phase_removal(y: &SymbolFrame, x: &SymbolFrame) -> Result<(SymbolFrame, MprInfo)> {
    check_shapes(y, x)?;
    let mut out = y.clone();
    let mut info = MprInfo {
        phase: Vec::new(),
        scale: Vec::new(),
        degenerate: Vec::new(),
    };
    for (yp, xp) in out.pols.iter_mut().zip(&x.pols) {
        let corr: C64 = xp.iter().zip(yp.iter()).map(|(a, b)| a.conj() * b).sum();
        let energy: f64 = xp.iter().map(|a| a.norm_sqr()).sum();
        let degenerate = corr.norm() == 0.0;
        let theta = if degenerate { 0.0 } else { corr.arg() };
        let rot = C64::from_polar(1.0, -theta);
        yp.iter_mut().for_each(|v| *v *= rot);
        info.phase.push(theta);
        info.scale.push(if energy > 0.0 { corr.norm() / energy } else { 0.0 });
        info.degenerate.push(degenerate);
    }
    Ok((out, info))
}

fn check_shapes(y: &SymbolFrame, x: &SymbolFrame) -> Result<()> {
    if y.num_pols() != x.num_pols() || y.pols.iter().zip(&x.pols).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::InvalidArgument("symbol frames differ in shape".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub snr_db: f64,
    /// MPR only, no amplitude scaling.
    pub snr_db_unscaled: f64,
    pub num_symbols_used: usize,
    pub excluded_edge_symbols: usize,
    pub per_polarization_db: Vec<f64>,
    pub saturated: bool,
    pub low_symbol_count: bool,
}

fn to_db(signal: f64, noise: f64) -> f64 {
    if noise <= 0.0 || signal / noise > 10f64.powf(SNR_CEILING_DB / 10.0) {
        SNR_CEILING_DB
    } else {
        10.0 * (signal / noise).log10()
    }
}

/// SNR after mean phase removal and optimal real scaling of the reference,
/// over symbols `[edge, len - edge)` of every polarization.
pub fn estimate_snr(y: &SymbolFrame, x: &SymbolFrame, edge: usize) -> Result<SnrReport> {
    check_shapes(y, x)?;
    let len = x.len();
    if 2 * edge >= len {
        return Err(Error::InvalidArgument(format!(
            "edge exclusion {edge} leaves no symbols out of {len}"
        )));
    }
    let range = edge..len - edge;
    let (mut sig_total, mut noise_total) = (0.0, 0.0);
    let (mut sig_raw, mut noise_raw) = (0.0, 0.0);
    let mut per_pol = Vec::with_capacity(x.num_pols());
    for (yp, xp) in y.pols.iter().zip(&x.pols) {
        let (yp, xp) = (&yp[range.clone()], &xp[range.clone()]);
        let corr: C64 = xp.iter().zip(yp).map(|(a, b)| a.conj() * b).sum();
        let ex: f64 = xp.iter().map(|a| a.norm_sqr()).sum();
        let ey: f64 = yp.iter().map(|b| b.norm_sqr()).sum();
        // With a = |corr| / ex: signal a^2 ex, residual ey - a^2 ex.
        let signal = corr.norm_sqr() / ex;
        let noise = (ey - signal).max(0.0);
        per_pol.push(to_db(signal, noise));
        sig_total += signal;
        noise_total += noise;
        // MPR only: residual |y e^{-j theta} - x|^2.
        sig_raw += ex;
        noise_raw += (ey + ex - 2.0 * corr.norm()).max(0.0);
    }
    let snr_db = to_db(sig_total, noise_total);
    let used = range.len();
    Ok(SnrReport {
        snr_db,
        snr_db_unscaled: to_db(sig_raw, noise_raw),
        num_symbols_used: used * x.num_pols(),
        excluded_edge_symbols: 2 * edge * x.num_pols(),
        per_polarization_db: per_pol,
        saturated: snr_db > SNR_FLOOR_DB,
        low_symbol_count: used < MIN_SYMBOLS,
    })
}
