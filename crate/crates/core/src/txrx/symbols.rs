use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::C64;

/// Square QAM constellation with unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationSpec {
    pub order: usize,
    pub points: Vec<C64>,
}

impl ConstellationSpec {
    pub fn qam(order: usize) -> Result<Self> {
        let side = match order {
            4 => 2,
            16 => 4,
            64 => 8,
            256 => 16,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unsupported QAM order {order}; expected 4, 16, 64 or 256"
                )))
            }
        };
        let norm = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let level = |i: usize| (2.0 * i as f64 - (side as f64 - 1.0)) / norm;
        let points = (0..side)
            .flat_map(|i| (0..side).map(move |q| C64::new(level(i), level(q))))
            .collect();
        Ok(ConstellationSpec { order, points })
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

/// Where the symbols of a frame came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SymbolSource {
    Qam { order: usize },
    Gaussian,
    Derived,
}

/// Per-polarization symbol sequences with unit average energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolFrame {
    pub pols: Vec<Vec<C64>>,
    /// Bd.
    pub symbol_rate: f64,
    pub seed: u64,
    pub source: SymbolSource,
}

impl SymbolFrame {
    pub fn num_pols(&self) -> usize {
        self.pols.len()
    }

    pub fn len(&self) -> usize {
        self.pols.first().map_or(0, |p| p.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn derived(pols: Vec<Vec<C64>>, symbol_rate: f64) -> Self {
        SymbolFrame {
            pols,
            symbol_rate,
            seed: 0,
            source: SymbolSource::Derived,
        }
    }
}

/// I.i.d. uniform QAM symbols on `num_pols` polarizations.
pub fn draw_qam_symbols(order: usize, n: usize, num_pols: usize, symbol_rate: f64, seed: u64) -> Result<SymbolFrame> {
    let constellation = ConstellationSpec::qam(order)?;
    let mut rng = seed::rng(seed);
    let pols = (0..num_pols.max(1))
        .map(|_| {
            (0..n)
                .map(|_| constellation.points[rng.random_range(0..order)])
                .collect()
        })
        .collect();
    Ok(SymbolFrame {
        pols,
        symbol_rate,
        seed,
        source: SymbolSource::Qam { order },
    })
}

/// Circularly-symmetric complex Gaussian symbols of unit variance.
pub fn draw_gaussian_symbols(n: usize, num_pols: usize, symbol_rate: f64, seed: u64) -> Result<SymbolFrame> {
    if n == 0 {
        return Err(Error::InvalidArgument("symbol count must be positive".into()));
    }
    let mut rng = seed::rng(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let pols = (0..num_pols.max(1))
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    C64::new(re * s, im * s)
                })
                .collect()
        })
        .collect();
    Ok(SymbolFrame {
        pols,
        symbol_rate,
        seed,
        source: SymbolSource::Gaussian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_points() {
        let c = ConstellationSpec::qam(4).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for p in &c.points {
            assert!((p.re.abs() - s).abs() < 1e-15 && (p.im.abs() - s).abs() < 1e-15);
        }
        assert_eq!(c.points.len(), 4);
    }

    #[test]
    fn qam64_levels_and_energy() {
        let c = ConstellationSpec::qam(64).unwrap();
        // Independent average: levels {1,3,5,7}^2 averaged per quadrature, times two.
        let per_quadrature = (1.0 + 9.0 + 25.0 + 49.0) / 4.0;
        let raw_energy = 2.0 * per_quadrature;
        assert_eq!(raw_energy, 42.0);
        assert!((c.mean_energy() - 1.0).abs() < 1e-12);
        let mut levels: Vec<f64> = c.points.iter().map(|p| (p.re * 42f64.sqrt()).round()).collect();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        assert_eq!(levels, vec![-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]);
        let frame = draw_qam_symbols(64, 100_000, 1, 1.0, 11).unwrap();
        let e = frame.pols[0].iter().map(|p| p.norm_sqr()).sum::<f64>() / 1e5;
        assert!((e - 1.0).abs() < 0.02, "energy {e}");
    }

    #[test]
    fn unsupported_order() {
        assert!(draw_qam_symbols(32, 10, 1, 1.0, 0).is_err());
    }

    #[test]
    fn seeded_draws_repeat() {
        assert_eq!(draw_qam_symbols(16, 500, 2, 1.0, 5).unwrap(), draw_qam_symbols(16, 500, 2, 1.0, 5).unwrap());
        assert_eq!(draw_gaussian_symbols(500, 2, 1.0, 5).unwrap(), draw_gaussian_symbols(500, 2, 1.0, 5).unwrap());
        assert_ne!(draw_gaussian_symbols(500, 1, 1.0, 5).unwrap(), draw_gaussian_symbols(500, 1, 1.0, 6).unwrap());
    }

    #[test]
    fn gaussian_moments() {
        let n = 100_000;
        let f = draw_gaussian_symbols(n, 1, 1.0, 3).unwrap();
        let x = &f.pols[0];
        let mean: C64 = x.iter().sum::<C64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / n as f64;
        let m4 = x.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / n as f64;
        assert!(mean.norm() < 0.02);
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
        assert!((m4 - 2.0).abs() < 0.05, "fourth moment {m4}");
    }
}
