//! Fine-step symmetric split-step solver for the scalar NLSE and the
//! Manakov equation.
//!
//! The frequency convention is `u(t) = sum U(f) exp(+j 2 pi f t)`, so one
//! linear step of length `h` multiplies by `exp((j 2 pi^2 beta2 f^2 - alpha/2) h)`.

use serde::{Deserialize, Serialize};

use crate::dsp::fft::FftPlan;
use crate::dsp::grid::FreqGrid;
use crate::dsp::Field;
use crate::error::{Error, Result};
use crate::fiber::spec::FiberSpec;
use crate::C64;

/// Largest accepted per-step nonlinear phase, rad.
pub const MAX_STEP_PHASE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationMode {
    #[default]
    Scalar,
    Manakov,
}

impl PolarizationMode {
    pub fn num_pols(self) -> usize {
        match self {
            PolarizationMode::Scalar => 1,
            PolarizationMode::Manakov => 2,
        }
    }

    /// Nonlinear coefficient scaling (8/9 for Manakov).
    pub fn kerr_factor(self) -> f64 {
        match self {
            PolarizationMode::Scalar => 1.0,
            PolarizationMode::Manakov => 8.0 / 9.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    /// Upper bound on any step, km.
    pub max_step_km: f64,
    /// Nonlinear phase budget per step at the peak power, rad.
    pub max_phase_rad: f64,
    pub mode: PolarizationMode,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            max_step_km: 1.0,
            max_phase_rad: 2e-3,
            mode: PolarizationMode::Scalar,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_step_km > 0.0 && self.max_phase_rad > 0.0) {
            return Err(Error::InvalidArgument("step bounds must be positive".into()));
        }
        if self.max_phase_rad > MAX_STEP_PHASE {
            return Err(Error::StepTooLarge {
                phase: self.max_phase_rad,
                limit: MAX_STEP_PHASE,
            });
        }
        Ok(())
    }
}

/// Step lengths (km, from the fiber input) keeping the nonlinear phase at
/// `peak_power` below the budget; steps grow as the signal decays.
pub fn plan_steps(fiber: &FiberSpec, peak_power: f64, cfg: &PropagationConfig) -> Result<Vec<f64>> {
    fiber.validate()?;
    cfg.validate()?;
    let alpha = fiber.alpha_per_km();
    let gamma = fiber.gamma_per_w_km * cfg.mode.kerr_factor();
    let total = fiber.length_km;
    let mut steps = Vec::new();
    let mut z = 0.0;
    while total - z > 1e-12 * total {
        let local = gamma * peak_power * (-alpha * z).exp();
        let mut h = if local > 0.0 { cfg.max_phase_rad / local } else { f64::INFINITY };
        h = h.min(cfg.max_step_km).min(total - z);
        steps.push(h);
        z += h;
    }
    Ok(steps)
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Forward,
    Inverse,
}

fn split_step(field: &Field, fiber: &FiberSpec, mode: PolarizationMode, steps: &[f64], dir: Direction) -> Result<Field> {
    let pols: Vec<Vec<C64>> = field.pols.iter().take(mode.num_pols()).cloned().collect();
    if pols.len() != mode.num_pols() {
        return Err(Error::InvalidArgument(format!(
            "{:?} propagation needs {} polarizations, got {}",
            mode,
            mode.num_pols(),
            field.num_pols()
        )));
    }
    let n = field.len();
    let grid = FreqGrid::any_len(n, field.sample_rate)?;
    let plan = FftPlan::of_len(n);
    let sign = if dir == Direction::Forward { 1.0 } else { -1.0 };
    let beta2 = fiber.beta2_s2_per_km();
    let half_alpha = fiber.alpha_per_km() / 2.0;
    let gamma = fiber.gamma_per_w_km * mode.kerr_factor() * sign;
    let disp: Vec<f64> = grid
        .freqs()
        .iter()
        .map(|f| 2.0 * std::f64::consts::PI.powi(2) * beta2 * f * f)
        .collect();
    let linear = |spec: &mut [C64], h: f64| {
        let gain = (-half_alpha * h * sign).exp();
        for (v, d) in spec.iter_mut().zip(&disp) {
            *v *= C64::from_polar(gain, d * h * sign);
        }
    };

    let ordered: Vec<f64> = match dir {
        Direction::Forward => steps.to_vec(),
        Direction::Inverse => steps.iter().rev().copied().collect(),
    };
    let mut spectra = pols;
    for s in &mut spectra {
        plan.forward(s);
    }
    let mut pending = ordered.first().copied().unwrap_or(0.0) / 2.0;
    for (k, &h) in ordered.iter().enumerate() {
        for s in &mut spectra {
            linear(s, pending);
            plan.inverse(s);
        }
        for i in 0..n {
            let power: f64 = spectra.iter().map(|s| s[i].norm_sqr()).sum();
            let rot = C64::from_polar(1.0, gamma * power * h);
            for s in &mut spectra {
                s[i] *= rot;
            }
        }
        for s in &mut spectra {
            plan.forward(s);
        }
        pending = h / 2.0 + ordered.get(k + 1).copied().unwrap_or(0.0) / 2.0;
    }
    for s in &mut spectra {
        linear(s, pending);
        plan.inverse(s);
    }
    let mut out = Field::new(spectra, field.sample_rate)?;
    out.center_freq_offset = field.center_freq_offset;
    Ok(out)
}

/// Propagate through the span with steps planned from the input peak power.
pub fn propagate(field: &Field, fiber: &FiberSpec, cfg: &PropagationConfig) -> Result<Field> {
    let steps = plan_steps(fiber, field.peak_power(), cfg)?;
    propagate_with_steps(field, fiber, cfg.mode, &steps)
}

pub fn propagate_with_steps(field: &Field, fiber: &FiberSpec, mode: PolarizationMode, steps: &[f64]) -> Result<Field> {
    fiber.validate()?;
    split_step(field, fiber, mode, steps, Direction::Forward)
}

/// Exact inverse of [`propagate_with_steps`] for the same step list:
/// negated dispersion and Kerr phase, gain in place of loss, steps reversed.
pub fn back_propagate(field: &Field, fiber: &FiberSpec, mode: PolarizationMode, steps: &[f64]) -> Result<Field> {
    fiber.validate()?;
    split_step(field, fiber, mode, steps, Direction::Inverse)
}

/// Scale so the mean total power equals `num_channels` times the per-channel
/// target. Frames are periodic, so every sample counts as interior.
pub fn set_launch_power(field: &Field, power_dbm_per_channel: f64, num_channels: usize) -> Result<Field> {
    let measured = field.mean_power();
    if !(measured > 0.0) {
        return Err(Error::InvalidArgument("cannot set the power of a zero-power signal".into()));
    }
    let target = 1e-3 * 10f64.powf(power_dbm_per_channel / 10.0) * num_channels as f64;
    let mut out = field.clone();
    out.scale((target / measured).sqrt());
    Ok(out)
}

/// Relative power adjustment in dB.
pub fn adjust_power_db(field: &Field, delta_db: f64) -> Field {
    let mut out = field.clone();
    out.scale(10f64.powf(delta_db / 20.0));
    out
}
