use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dbp::LEssfmModel;
use crate::error::{Error, Result};
use crate::learn::adam::{adam_step, AdamState};
use crate::learn::backprop::{backprop, batch_loss, LossOptions, PreparedItem};
use crate::learn::params::{Group, ParamSpace};
use crate::learn::search::{train_lbfgs, train_nelder_mead};
use crate::seed::{derive_seed, rng, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Minibatch Adam with per-group step sizes.
    Adam,
    /// Full-batch L-BFGS over the training frames, restarted from its best
    /// point when the line search fails; `epochs` caps the iteration count.
    Lbfgs {
        memory: usize,
        /// Variable scale for lengths, km.
        length_scale_km: f64,
        /// Variable scale for coefficients, rad/W.
        coeff_scale: f64,
    },
    /// Derivative-free simplex search over the training frames; the scales
    /// set the initial simplex edges and `epochs` caps the iteration count.
    NelderMead { length_scale_km: f64, coeff_scale: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Lbfgs {
            memory: 10,
            length_scale_km: 10.0,
            coeff_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    /// Adam step size for lengths, km.
    pub lr_length_km: f64,
    /// Adam step size for filter coefficients, rad/W.
    pub lr_coeff: f64,
    /// Multiplicative learning-rate decay applied after every epoch.
    pub lr_decay: f64,
    /// Adam only; L-BFGS uses every training frame per iteration.
    pub batch_size: usize,
    /// Epochs for Adam, iterations for L-BFGS.
    pub epochs: usize,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Rescale the gradient to at most this Euclidean norm.
    pub clip_norm: Option<f64>,
    pub validation_fraction: f64,
    pub loss: LossOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::default(),
            lr_length_km: 0.2,
            lr_coeff: 0.05,
            lr_decay: 1.0,
            batch_size: 4,
            epochs: 300,
            seed: 1,
            patience: Some(30),
            clip_norm: None,
            validation_fraction: 0.25,
            loss: LossOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_length_km >= 0.0 && self.lr_coeff >= 0.0 && self.lr_decay > 0.0) {
            return Err(Error::Config("learning rates must be non-negative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation fraction must lie in [0, 1)".into()));
        }
        match self.optimizer {
            Optimizer::Adam => {}
            Optimizer::Lbfgs {
                memory,
                length_scale_km,
                coeff_scale,
            } => {
                if memory == 0 || !(length_scale_km > 0.0 && coeff_scale > 0.0) {
                    return Err(Error::Config("L-BFGS needs a positive memory and positive scales".into()));
                }
            }
            Optimizer::NelderMead {
                length_scale_km,
                coeff_scale,
            } => {
                if !(length_scale_km > 0.0 && coeff_scale > 0.0) {
                    return Err(Error::Config("simplex scales must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: LEssfmModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub initial_val_loss: f64,
    pub stopped_early: bool,
}

/// Epochs in a row above the divergence threshold before aborting.
const DIVERGENCE_EPOCHS: usize = 3;
const DIVERGENCE_FACTOR: f64 = 10.0;

fn split<'a>(items: &'a [PreparedItem], cfg: &TrainConfig) -> Result<(Vec<&'a PreparedItem>, Vec<&'a PreparedItem>)> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut rng(derive_seed(cfg.seed, &[tag("split")])));
    let n_val = (cfg.validation_fraction * items.len() as f64).round() as usize;
    if cfg.validation_fraction > 0.0 && (n_val == 0 || n_val >= items.len()) {
        return Err(Error::InvalidArgument(format!(
            "cannot hold out {} of {} frames for validation",
            cfg.validation_fraction,
            items.len()
        )));
    }
    let (val, train) = order.split_at(n_val);
    let train: Vec<&PreparedItem> = train.iter().map(|&i| &items[i]).collect();
    let val = if val.is_empty() { train.clone() } else { val.iter().map(|&i| &items[i]).collect() };
    Ok((train, val))
}

fn group_values(model: &LEssfmModel, space: &ParamSpace, length: f64, coeff: f64) -> Vec<f64> {
    space
        .groups(model)
        .iter()
        .map(|g| match g {
            Group::Length => length,
            Group::Coeff => coeff,
        })
        .collect()
}

/// Fit the free entries of `space`; returns the parameters with the lowest
/// validation loss seen, including the starting point.
pub fn train(model: &LEssfmModel, space: &ParamSpace, items: &[PreparedItem], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train_set, val_set) = split(items, cfg)?;
    match cfg.optimizer {
        Optimizer::Adam => train_adam(model, space, &train_set, &val_set, cfg),
        Optimizer::Lbfgs {
            memory,
            length_scale_km,
            coeff_scale,
        } => {
            let scales = group_values(model, space, length_scale_km, coeff_scale);
            train_lbfgs(model, space, &train_set, &val_set, cfg, memory, scales)
        }
        Optimizer::NelderMead {
            length_scale_km,
            coeff_scale,
        } => {
            let scales = group_values(model, space, length_scale_km, coeff_scale);
            train_nelder_mead(model, space, &train_set, &val_set, cfg, scales)
        }
    }
}

fn train_adam(
    model: &LEssfmModel,
    space: &ParamSpace,
    train_set: &[&PreparedItem],
    val_set: &[&PreparedItem],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut theta = space.encode(model);
    let base_lrs = group_values(model, space, cfg.lr_length_km, cfg.lr_coeff);
    let mut state = AdamState::new(theta.len());

    let initial_val = batch_loss(model, val_set, &cfg.loss)?;
    let initial_train = batch_loss(model, train_set, &cfg.loss)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: initial_train,
        val_loss: initial_val,
    }];
    let mut best = (0, initial_val, theta.clone());
    let mut bad_epochs = 0;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng(derive_seed(cfg.seed, &[tag("epoch"), epoch as u64])));
        let decay = cfg.lr_decay.powi(epoch as i32 - 1);
        let lrs: Vec<f64> = base_lrs.iter().map(|l| l * decay).collect();
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PreparedItem> = chunk.iter().map(|&i| train_set[i]).collect();
            let current = space.decode(&theta, model)?;
            let grads = backprop(&current, &batch, &cfg.loss)?;
            let mut g = space.pull_back(&grads);
            if let Some(limit) = cfg.clip_norm {
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > limit {
                    g.iter_mut().for_each(|v| *v *= limit / norm);
                }
            }
            adam_step(&mut theta, &g, &mut state, &lrs)?;
            loss_sum += grads.loss;
            batches += 1;
        }
        let val = batch_loss(&space.decode(&theta, model)?, val_set, &cfg.loss)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_loss: val,
        });
        if !val.is_finite() || val > DIVERGENCE_FACTOR * initial_val {
            bad_epochs += 1;
            if bad_epochs >= DIVERGENCE_EPOCHS {
                return Err(Error::Diverged {
                    epoch,
                    loss: val,
                    initial: initial_val,
                });
            }
        } else {
            bad_epochs = 0;
        }
        if val < best.1 {
            best = (epoch, val, theta.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if cfg.patience.is_some_and(|p| since_best >= p) {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        model: space.decode(&best.2, model)?,
        history,
        best_epoch: best.0,
        best_val_loss: best.1,
        initial_val_loss: initial_val,
        stopped_early,
    })
}
