//! Phase-aligned mean squared error: the MSE minimized over one global phase
//! per polarization, `mean|y|^2 + mean|x|^2 - 2 |mean(conj(x) y)|`.

use crate::error::Result;
use crate::txrx::SymbolFrame;
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    /// Mean over polarizations.
    pub loss: f64,
    /// Gradient with respect to every symbol of `y`, zero outside the range.
    pub grad: Vec<Vec<C64>>,
    /// A polarization had zero cross-correlation; its phase term got a zero
    /// subgradient.
    pub degenerate: bool,
}

/// Loss and gradient over symbols `range` of every polarization.
pub fn phase_aligned_mse_grad(y: &[Vec<C64>], x: &[Vec<C64>], range: std::ops::Range<usize>) -> LossEval {
    let pols = y.len().max(1) as f64;
    let k = range.len() as f64;
    let mut loss = 0.0;
    let mut degenerate = false;
    let mut grad = Vec::with_capacity(y.len());
    for (yp, xp) in y.iter().zip(x) {
        let (ys, xs) = (&yp[range.clone()], &xp[range.clone()]);
        let corr: C64 = xs.iter().zip(ys).map(|(a, b)| a.conj() * b).sum::<C64>() / k;
        let ey: f64 = ys.iter().map(|v| v.norm_sqr()).sum::<f64>() / k;
        let ex: f64 = xs.iter().map(|v| v.norm_sqr()).sum::<f64>() / k;
        loss += ey + ex - 2.0 * corr.norm();
        let phase = if corr.norm() > 0.0 {
            corr / corr.norm()
        } else {
            degenerate = true;
            C64::new(0.0, 0.0)
        };
        let mut g = vec![C64::new(0.0, 0.0); yp.len()];
        let w = 2.0 / (k * pols);
        for ((gi, yi), xi) in g[range.clone()].iter_mut().zip(ys).zip(xs) {
            *gi = (yi - phase * xi) * w;
        }
        grad.push(g);
    }
    LossEval {
        loss: loss / pols,
        grad,
        degenerate,
    }
}

/// Loss over whole frames.
pub fn phase_aligned_mse(y: &SymbolFrame, x: &SymbolFrame) -> Result<f64> {
    if y.num_pols() != x.num_pols() || y.len() != x.len() {
        return Err(crate::Error::InvalidArgument("symbol frames differ in shape".into()));
    }
    Ok(phase_aligned_mse_grad(&y.pols, &x.pols, 0..x.len()).loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txrx::{draw_gaussian_symbols, draw_qam_symbols};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn perfect_and_rotated_match() {
        let x = draw_qam_symbols(16, 500, 2, 1.0, 3).unwrap();
        assert!(phase_aligned_mse(&x, &x).unwrap().abs() < 1e-12);
        let mut y = x.clone();
        let r = C64::from_polar(1.0, 2.1);
        y.pols.iter_mut().flatten().for_each(|v| *v *= r);
        assert!(phase_aligned_mse(&y, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn additive_noise_gives_its_variance() {
        let x = draw_gaussian_symbols(200_000, 1, 1.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma2 = 0.3;
        let nd = Normal::new(0.0, (sigma2 / 2.0f64).sqrt()).unwrap();
        let mut y = x.clone();
        y.pols[0].iter_mut().for_each(|v| *v += C64::new(nd.sample(&mut rng), nd.sample(&mut rng)));
        let l = phase_aligned_mse(&y, &x).unwrap();
        assert!((l - sigma2).abs() < 0.01 * sigma2, "{l}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = draw_gaussian_symbols(64, 2, 1.0, 6).unwrap();
        let mut y = draw_gaussian_symbols(64, 2, 1.0, 7).unwrap();
        y.pols.iter_mut().zip(&x.pols).for_each(|(a, b)| a.iter_mut().zip(b).for_each(|(u, v)| *u += 2.0 * v));
        let ev = phase_aligned_mse_grad(&y.pols, &x.pols, 4..60);
        let h = 1e-6;
        for (p, k) in [(0, 10), (1, 33), (0, 59)] {
            for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut yp = y.pols.clone();
                yp[p][k] += dir * h;
                let up = phase_aligned_mse_grad(&yp, &x.pols, 4..60).loss;
                yp[p][k] -= dir * (2.0 * h);
                let dn = phase_aligned_mse_grad(&yp, &x.pols, 4..60).loss;
                let fd = (up - dn) / (2.0 * h);
                let an = (ev.grad[p][k].conj() * dir).re;
                assert!((fd - an).abs() < 1e-7 * an.abs().max(1e-3), "{fd} vs {an}");
            }
        }
        assert_eq!(ev.grad[0][2], C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_correlation_is_flagged() {
        let x = vec![vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]];
        let y = vec![vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]];
        let ev = phase_aligned_mse_grad(&y, &x, 0..2);
        assert!(ev.degenerate);
        assert!((ev.loss - 2.0).abs() < 1e-15);
    }
}
