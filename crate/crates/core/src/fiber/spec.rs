use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in nm/ps.
const C_NM_PER_PS: f64 = 2.997_924_58e5;

/// Single-mode fiber span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub dispersion_ps_per_nm_km: f64,
    pub gamma_per_w_km: f64,
    pub reference_wavelength_nm: f64,
    /// Overrides the value derived from the dispersion parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2_ps2_per_km: Option<f64>,
}

impl FiberSpec {
    /// Standard SMF: 0.2 dB/km, 17 ps/nm/km, 1.27 /W/km at 1550 nm.
    pub fn smf(length_km: f64) -> Self {
        FiberSpec {
            length_km,
            attenuation_db_per_km: 0.2,
            dispersion_ps_per_nm_km: 17.0,
            gamma_per_w_km: 1.27,
            reference_wavelength_nm: 1550.0,
            beta2_ps2_per_km: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km > 0.0) {
            return Err(Error::InvalidArgument(format!("fiber length must be positive, got {}", self.length_km)));
        }
        if !(self.attenuation_db_per_km >= 0.0) || !(self.gamma_per_w_km >= 0.0) {
            return Err(Error::InvalidArgument("attenuation and gamma must be non-negative".into()));
        }
        if !(self.reference_wavelength_nm > 0.0) {
            return Err(Error::InvalidArgument("reference wavelength must be positive".into()));
        }
        Ok(())
    }

    pub fn beta2_ps2_per_km(&self) -> f64 {
        self.beta2_ps2_per_km
            .unwrap_or_else(|| beta2_from_dispersion(self.dispersion_ps_per_nm_km, self.reference_wavelength_nm))
    }

    /// beta2 in s^2/km.
    pub fn beta2_s2_per_km(&self) -> f64 {
        self.beta2_ps2_per_km() * 1e-24
    }

    /// Power attenuation coefficient, 1/km.
    pub fn alpha_per_km(&self) -> f64 {
        attenuation_np(self.attenuation_db_per_km).0
    }

    /// Total span loss in dB.
    pub fn span_loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km
    }

    /// `(1 - exp(-alpha L)) / alpha`, km.
    pub fn effective_length_km(&self) -> f64 {
        effective_length(self.alpha_per_km(), self.length_km)
    }
}

/// `beta2 = -D lambda^2 / (2 pi c)`, ps^2/km from ps/(nm km) and nm.
pub fn beta2_from_dispersion(dispersion_ps_per_nm_km: f64, wavelength_nm: f64) -> f64 {
    -dispersion_ps_per_nm_km * wavelength_nm * wavelength_nm / (2.0 * std::f64::consts::PI * C_NM_PER_PS)
}

/// Power (1/km) and field (1/km) attenuation coefficients from dB/km.
pub fn attenuation_np(alpha_db_per_km: f64) -> (f64, f64) {
    let alpha = alpha_db_per_km / (10.0 * std::f64::consts::LOG10_E);
    (alpha, alpha / 2.0)
}

pub fn effective_length(alpha_per_km: f64, length_km: f64) -> f64 {
    if alpha_per_km == 0.0 {
        length_km
    } else {
        -(-alpha_per_km * length_km).exp_m1() / alpha_per_km
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta2_of_standard_fiber() {
        // Plug-in: -17 * 1550^2 / (2 pi * 299792.458 nm/ps).
        let expect = -17.0 * 1550.0f64.powi(2) / (2.0 * std::f64::consts::PI * 299_792.458);
        let b2 = beta2_from_dispersion(17.0, 1550.0);
        assert!((b2 - expect).abs() < 1e-12);
        assert!((b2 + 21.68).abs() < 0.01, "{b2}");
        assert_eq!(beta2_from_dispersion(0.0, 1550.0), 0.0);
        assert!(beta2_from_dispersion(3.0, 1310.0) < 0.0);
    }

    #[test]
    fn attenuation_conversion() {
        let (a, half) = attenuation_np(0.2);
        assert!((a - 0.2 / 4.342_944_819).abs() < 1e-9);
        assert!((a - 0.046052).abs() < 1e-6);
        assert_eq!(half, a / 2.0);
        assert_eq!(attenuation_np(0.0), (0.0, 0.0));
        let loss_db = 10.0 * (-a * 170.0f64).exp().log10();
        assert!((loss_db + 34.0).abs() < 1e-9);
    }

    #[test]
    fn effective_length_of_span() {
        let f = FiberSpec::smf(170.0);
        assert!((f.effective_length_km() - 21.70).abs() < 0.01);
        assert_eq!(effective_length(0.0, 12.0), 12.0);
    }

    #[test]
    fn override_takes_precedence() {
        let mut f = FiberSpec::smf(10.0);
        f.beta2_ps2_per_km = Some(-1.0);
        assert_eq!(f.beta2_ps2_per_km(), -1.0);
        f.length_km = 0.0;
        assert!(f.validate().is_err());
    }
}
