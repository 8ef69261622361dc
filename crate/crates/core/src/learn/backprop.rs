//! Loss evaluation and exact reverse-mode gradients over a batch of frames.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbp::{Engine, GvdSign, LEssfmModel, ModelGrads};
use crate::dsp::ols::EdgePolicy;
use crate::error::{Error, Result};
use crate::learn::dataset::{Dataset, DatasetItem};
use crate::learn::loss::phase_aligned_mse_grad;
use crate::txrx::MatchedFilter;
use crate::C64;

/// A frame with its fixed receiver map attached.
#[derive(Debug, Clone)]
pub struct PreparedItem {
    pub item: DatasetItem,
    pub mf: MatchedFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossOptions {
    /// Symbols dropped at each frame end before the loss.
    pub edge_symbols: usize,
    /// Treat the rotation phase as independent of the field (faster,
    /// approximate gradients).
    pub frozen_intensity: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        LossOptions {
            edge_symbols: 0,
            frozen_intensity: false,
        }
    }
}

/// Attach matched filters scaling received symbols back to unit energy.
pub fn prepare(dataset: &Dataset) -> Result<Vec<PreparedItem>> {
    let sys = &dataset.manifest.system;
    let scale = 1.0 / sys.symbol_amplitude(dataset.manifest.power_dbm);
    prepare_items(&dataset.items, sys.eq_sps, sys.wdm.rolloff, scale)
}

pub fn prepare_items(items: &[DatasetItem], sps: f64, rolloff: f64, scale: f64) -> Result<Vec<PreparedItem>> {
    items
        .iter()
        .map(|item| {
            Ok(PreparedItem {
                mf: MatchedFilter::new(item.rx.len(), sps, rolloff, scale, 0.0)?,
                item: item.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub lengths: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    pub loss: f64,
}

impl ParamGrads {
    pub fn flat(&self) -> Vec<f64> {
        self.lengths.iter().chain(self.coeffs.iter().flatten()).copied().collect()
    }

    pub fn as_model_grads(&self) -> ModelGrads {
        ModelGrads {
            lengths: self.lengths.clone(),
            coeffs: self.coeffs.clone(),
        }
    }
}

fn symbol_range(len: usize, edge: usize) -> Result<std::ops::Range<usize>> {
    if 2 * edge >= len {
        return Err(Error::InvalidArgument(format!("edge {edge} leaves no symbols out of {len}")));
    }
    Ok(edge..len - edge)
}

/// Equalized symbols of one frame.
pub fn equalized_symbols(engine: &Engine, p: &PreparedItem) -> Result<Vec<Vec<C64>>> {
    let out = engine.run(&p.item.rx, EdgePolicy::Circular)?;
    Ok(out.pols.iter().map(|s| p.mf.apply(s)).collect())
}

fn item_loss(engine: &Engine, p: &PreparedItem, opts: &LossOptions) -> Result<f64> {
    let y = equalized_symbols(engine, p)?;
    let range = symbol_range(p.item.tx.len(), opts.edge_symbols)?;
    Ok(phase_aligned_mse_grad(&y, &p.item.tx.pols, range).loss)
}

fn item_grad(engine: &Engine, model: &LEssfmModel, p: &PreparedItem, opts: &LossOptions) -> Result<(f64, ModelGrads)> {
    let (out, tapes) = engine.run_taped(&p.item.rx, EdgePolicy::Circular)?;
    let y: Vec<Vec<C64>> = out.iter().map(|s| p.mf.apply(s)).collect();
    let range = symbol_range(p.item.tx.len(), opts.edge_symbols)?;
    let ev = phase_aligned_mse_grad(&y, &p.item.tx.pols, range);
    let g_out: Vec<Vec<C64>> = ev.grad.iter().map(|g| p.mf.adjoint(g)).collect();
    let mut grads = ModelGrads::zeros(model);
    engine.adjoint(&tapes, &g_out, &mut grads)?;
    Ok((ev.loss, grads))
}

fn engine_for(model: &LEssfmModel, opts: &LossOptions) -> Result<Engine> {
    Ok(Engine::new(model, GvdSign::Backward)?.with_frozen_intensity(opts.frozen_intensity))
}

/// Mean loss over `items`.
pub fn batch_loss(model: &LEssfmModel, items: &[&PreparedItem], opts: &LossOptions) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let engine = engine_for(model, opts)?;
    let losses = items
        .par_iter()
        .map(|p| item_loss(&engine, p, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / items.len() as f64)
}

/// Mean loss over `items` and its gradient with respect to every length and
/// coefficient. Per-item results are summed in item order.
pub fn backprop(model: &LEssfmModel, items: &[&PreparedItem], opts: &LossOptions) -> Result<ParamGrads> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let engine = engine_for(model, opts)?;
    let parts = items
        .par_iter()
        .map(|p| item_grad(&engine, model, p, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut total = ModelGrads::zeros(model);
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_assign(g);
    }
    let inv = 1.0 / items.len() as f64;
    total.scale(inv);
    Ok(ParamGrads {
        lengths: total.lengths,
        coeffs: total.coeffs,
        loss: loss * inv,
    })
}
