//! Block-level split-step evaluation and its reverse-mode adjoint.

use std::sync::Arc;

use crate::dbp::model::LEssfmModel;
use crate::dbp::transfer::{dispersion_memory, gvd_phase_rate, gvd_transfer_signed, nlpr_half_transfer, GvdSign};
use crate::dsp::fft::{FftPlan, RealFftPlan};
use crate::dsp::grid::FreqGrid;
use crate::dsp::ols::{EdgePolicy, OlsGeometry};
use crate::dsp::Field;
use crate::error::{Error, Result};
use crate::C64;

/// Intermediate values of one block needed by the adjoint.
#[derive(Debug, Clone)]
pub struct BlockTape {
    /// Spectra right after each dispersion multiply, `[step][pol]`.
    spectra: Vec<Vec<Vec<C64>>>,
    /// Time-domain field entering each rotation, `[step - 1][pol]`.
    fields: Vec<Vec<Vec<C64>>>,
    intensity: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
}

/// Parameter gradients shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub lengths: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

impl ModelGrads {
    pub fn zeros(model: &LEssfmModel) -> Self {
        ModelGrads {
            lengths: vec![0.0; model.lengths_km.len()],
            coeffs: vec![vec![0.0; model.filter_halflen + 1]; model.num_steps],
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads) {
        for (a, b) in self.lengths.iter_mut().zip(&other.lengths) {
            *a += b;
        }
        for (ca, cb) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for (a, b) in ca.iter_mut().zip(cb) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.lengths.iter_mut().chain(self.coeffs.iter_mut().flatten()).for_each(|v| *v *= s);
    }

    pub fn flat(&self) -> Vec<f64> {
        self.lengths.iter().chain(self.coeffs.iter().flatten()).copied().collect()
    }
}

/// Precomputed transfers for evaluating one model on `N`-point blocks.
pub struct Engine {
    n: usize,
    num_pols: usize,
    geometry: OlsGeometry,
    sample_rate: f64,
    fft: Arc<FftPlan>,
    rfft: Arc<RealFftPlan>,
    gvd: Vec<Vec<C64>>,
    nlpr: Vec<Vec<f64>>,
    /// d(phase)/d(length) per bin, signed.
    phase_rate: Vec<f64>,
    halflen: usize,
    frozen_intensity: bool,
}

/// Overlap needed by a model: dispersion spread over the summed lengths
/// plus the two filter tails.
pub fn required_overlap(model: &LEssfmModel) -> usize {
    let total: f64 = model.lengths_km.iter().map(|l| l.abs()).sum();
    dispersion_memory(model.beta2_ps2_per_km, total, model.sample_rate()) + 2 * model.filter_halflen
}

impl Engine {
    pub fn new(model: &LEssfmModel, sign: GvdSign) -> Result<Self> {
        model.validate()?;
        let required = required_overlap(model);
        if model.geometry.overlap < required {
            return Err(Error::InsufficientOverlap {
                required,
                actual: model.geometry.overlap,
            });
        }
        let n = model.geometry.fft_size;
        let grid = FreqGrid::new(n, model.sample_rate())?;
        let gvd = model
            .lengths_km
            .iter()
            .map(|&l| gvd_transfer_signed(l, &grid, model.beta2_ps2_per_km, sign))
            .collect();
        let nlpr = model.coeffs.iter().map(|c| nlpr_half_transfer(c, n)).collect::<Result<_>>()?;
        let phase_rate = gvd_phase_rate(&grid, model.beta2_ps2_per_km)
            .into_iter()
            .map(|r| r * sign.sign())
            .collect();
        Ok(Engine {
            n,
            num_pols: model.mode.num_pols(),
            geometry: model.geometry,
            sample_rate: model.sample_rate(),
            fft: FftPlan::pow2(n)?,
            rfft: RealFftPlan::pow2(n)?,
            gvd,
            nlpr,
            phase_rate,
            halflen: model.filter_halflen,
            frozen_intensity: false,
        })
    }

    /// Drop the intensity path from the adjoint, treating each rotation phase
    /// as a constant. Gradients become approximate.
    pub fn with_frozen_intensity(mut self, frozen: bool) -> Self {
        self.frozen_intensity = frozen;
        self
    }

    pub fn geometry(&self) -> OlsGeometry {
        self.geometry
    }

    fn num_steps(&self) -> usize {
        self.nlpr.len()
    }

    /// Circular convolution of a real block with a symmetric filter given by
    /// its half spectrum.
    fn filter_real(&self, x: &[f64], half: &[f64], out: &mut [f64]) {
        let mut input = x.to_vec();
        let mut spec = vec![C64::new(0.0, 0.0); self.rfft.bins()];
        self.rfft.forward(&mut input, &mut spec);
        for (s, h) in spec.iter_mut().zip(half) {
            *s *= h;
        }
        self.rfft.inverse(&mut spec, out);
    }

    /// Transform one block in place. Input and output are time-domain.
    pub fn run_block(&self, pols: &mut [Vec<C64>], mut tape: Option<&mut BlockTape>) {
        let n = self.n;
        for p in pols.iter_mut() {
            self.fft.forward(p);
            mul_assign(p, &self.gvd[0]);
        }
        if let Some(t) = tape.as_deref_mut() {
            t.spectra.push(pols.to_vec());
        }
        let mut intensity = vec![0.0; n];
        let mut theta = vec![0.0; n];
        for step in 1..=self.num_steps() {
            for p in pols.iter_mut() {
                self.fft.inverse(p);
            }
            intensity.iter_mut().for_each(|v| *v = 0.0);
            for p in pols.iter() {
                for (acc, v) in intensity.iter_mut().zip(p) {
                    *acc += v.norm_sqr();
                }
            }
            self.filter_real(&intensity, &self.nlpr[step - 1], &mut theta);
            if let Some(t) = tape.as_deref_mut() {
                t.fields.push(pols.to_vec());
                t.intensity.push(intensity.clone());
                t.theta.push(theta.clone());
            }
            for p in pols.iter_mut() {
                for (v, th) in p.iter_mut().zip(&theta) {
                    *v *= C64::new(th.cos(), th.sin());
                }
                self.fft.forward(p);
                mul_assign(p, &self.gvd[step]);
            }
            if let Some(t) = tape.as_deref_mut() {
                t.spectra.push(pols.to_vec());
            }
        }
        for p in pols.iter_mut() {
            self.fft.inverse(p);
        }
    }

    /// Accumulate parameter gradients of one block given the gradient with
    /// respect to its time-domain output. `grad` is consumed as workspace.
    pub fn block_adjoint(&self, tape: &BlockTape, grad: &mut [Vec<C64>], acc: &mut ModelGrads) -> Result<()> {
        let n = self.n;
        let inv_n = 1.0 / n as f64;
        let bins = self.rfft.bins();
        for g in grad.iter_mut() {
            self.fft.forward(g);
            g.iter_mut().for_each(|v| *v *= inv_n);
        }
        let mut g_theta = vec![0.0; n];
        let mut g_int = vec![0.0; n];
        let mut corr = vec![0.0; n];
        let mut spec_g = vec![C64::new(0.0, 0.0); bins];
        let mut spec_i = vec![C64::new(0.0, 0.0); bins];
        let mut work_c = vec![C64::new(0.0, 0.0); bins];
        for step in (1..=self.num_steps()).rev() {
            acc.lengths[step] += self.length_grad(grad, &tape.spectra[step]);
            for g in grad.iter_mut() {
                for (v, h) in g.iter_mut().zip(&self.gvd[step]) {
                    *v *= h.conj();
                }
                self.fft.inverse_unscaled(g);
            }
            let theta = &tape.theta[step - 1];
            let fields = &tape.fields[step - 1];
            g_theta.iter_mut().for_each(|v| *v = 0.0);
            for (g, v) in grad.iter_mut().zip(fields) {
                for k in 0..n {
                    let rot = C64::new(theta[k].cos(), theta[k].sin());
                    let w = v[k] * rot;
                    g_theta[k] += (g[k] * w.conj()).im;
                    g[k] *= rot.conj();
                }
            }
            let mut scratch = g_theta.clone();
            self.rfft.forward(&mut scratch, &mut spec_g);
            let mut scratch = tape.intensity[step - 1].clone();
            self.rfft.forward(&mut scratch, &mut spec_i);
            for k in 0..bins {
                work_c[k] = spec_g[k] * spec_i[k].conj();
            }
            self.rfft.inverse(&mut work_c, &mut corr);
            let dc = &mut acc.coeffs[step - 1];
            dc[0] += corr[0];
            for m in 1..=self.halflen {
                dc[m] += corr[m] + corr[n - m];
            }
            for k in 0..bins {
                work_c[k] = spec_g[k] * self.nlpr[step - 1][k];
            }
            self.rfft.inverse(&mut work_c, &mut g_int);
            for (g, v) in grad.iter_mut().zip(fields) {
                if !self.frozen_intensity {
                    for k in 0..n {
                        g[k] += v[k] * (2.0 * g_int[k]);
                    }
                }
                self.fft.forward(g);
                g.iter_mut().for_each(|x| *x *= inv_n);
            }
            if !acc.coeffs[step - 1].iter().all(|v| v.is_finite()) || !acc.lengths[step].is_finite() {
                return Err(Error::NonFiniteGradient { layer: step });
            }
        }
        acc.lengths[0] += self.length_grad(grad, &tape.spectra[0]);
        if !acc.lengths[0].is_finite() {
            return Err(Error::NonFiniteGradient { layer: 0 });
        }
        Ok(())
    }

    fn length_grad(&self, grad: &[Vec<C64>], spectra: &[Vec<C64>]) -> f64 {
        let mut total = 0.0;
        for (g, u) in grad.iter().zip(spectra) {
            for k in 0..self.n {
                total -= self.phase_rate[k] * (g[k].conj() * u[k]).im;
            }
        }
        total
    }

    fn check_input(&self, pols: &[Vec<C64>], sample_rate: f64) -> Result<()> {
        if pols.len() != self.num_pols {
            return Err(Error::InvalidArgument(format!(
                "equalizer expects {} polarizations, got {}",
                self.num_pols,
                pols.len()
            )));
        }
        if ((sample_rate - self.sample_rate) / self.sample_rate).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "input sampled at {sample_rate} Hz, model expects {} Hz",
                self.sample_rate
            )));
        }
        Ok(())
    }

    /// Equalize a whole stream.
    pub fn run(&self, rx: &Field, edge: EdgePolicy) -> Result<Field> {
        self.check_input(&rx.pols, rx.sample_rate)?;
        let out = crate::dsp::overlap_save_multi(&rx.pols, &self.geometry, edge, |block| {
            self.run_block(block, None);
            Ok(())
        })?;
        let mut field = Field::new(out, rx.sample_rate)?;
        field.center_freq_offset = rx.center_freq_offset;
        Ok(field)
    }

    /// Equalize a stream and keep every block's tape.
    pub fn run_taped(&self, rx: &Field, edge: EdgePolicy) -> Result<(Vec<Vec<C64>>, Vec<BlockTape>)> {
        self.check_input(&rx.pols, rx.sample_rate)?;
        let mut tapes = Vec::new();
        let out = crate::dsp::overlap_save_multi(&rx.pols, &self.geometry, edge, |block| {
            let mut tape = BlockTape {
                spectra: Vec::with_capacity(self.num_steps() + 1),
                fields: Vec::with_capacity(self.num_steps()),
                intensity: Vec::with_capacity(self.num_steps()),
                theta: Vec::with_capacity(self.num_steps()),
            };
            self.run_block(block, Some(&mut tape));
            tapes.push(tape);
            Ok(())
        })?;
        Ok((out, tapes))
    }

    /// Parameter gradients given the gradient with respect to the stream
    /// output of [`Engine::run_taped`].
    pub fn adjoint(&self, tapes: &[BlockTape], grad_out: &[Vec<C64>], acc: &mut ModelGrads) -> Result<()> {
        let len = grad_out.first().map_or(0, Vec::len);
        let mut work = vec![vec![C64::new(0.0, 0.0); self.n]; grad_out.len()];
        for (block, tape) in tapes.iter().enumerate() {
            let (range, offset) = self.geometry.kept_range(block, len);
            for (w, g) in work.iter_mut().zip(grad_out) {
                w.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
                w[offset..offset + range.len()].copy_from_slice(&g[range.clone()]);
            }
            self.block_adjoint(tape, &mut work, acc)?;
        }
        Ok(())
    }
}

fn mul_assign(a: &mut [C64], b: &[C64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x *= y;
    }
}

/// Run a split-step model over a stream with circular edges.
pub fn lessfm_forward(model: &LEssfmModel, rx: &Field, sign: GvdSign) -> Result<Field> {
    Engine::new(model, sign)?.run(rx, EdgePolicy::Circular)
}
