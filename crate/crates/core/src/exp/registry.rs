//! Equalizer strategies selectable by name.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dbp::{
    build_free_model, build_tied_model, Edc, Equalizer, EqualizerKind, IdealDbp, ModelFrame, Structure,
};
use crate::dsp::OlsGeometry;
use crate::error::{Error, Result};
use crate::learn::{
    init_coeffs, init_lengths, segment_effective_lengths, train, ParamSpace, Parameterization, PreparedItem,
    SystemConfig, TrainConfig, TrainOutcome,
};

/// One cell of the equalizer matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub kind: String,
    pub steps: Option<usize>,
    pub samples_per_symbol: f64,
    pub filter_halflen: Option<usize>,
    pub geometry: OlsGeometry,
    pub split_fractions: Vec<f64>,
}

impl PointSpec {
    /// File-name-safe identifier.
    pub fn label(&self) -> String {
        let mut s = format!("{}_n{}", self.kind, self.samples_per_symbol);
        if let Some(ns) = self.steps {
            s.push_str(&format!("_ns{ns}"));
        }
        if let Some(nc) = self.filter_halflen {
            s.push_str(&format!("_nc{nc}"));
        }
        s
    }
}

/// Everything a strategy may need to build its equalizer.
pub struct BuildContext<'a> {
    /// Link description at the point's equalizer rate.
    pub system: &'a SystemConfig,
    pub point: &'a PointSpec,
    pub train: &'a TrainConfig,
    /// Prepared training frames; present for trainable strategies.
    pub data: Option<&'a [PreparedItem]>,
}

impl BuildContext<'_> {
    fn frame(&self) -> ModelFrame {
        ModelFrame {
            beta2_ps2_per_km: self.system.fiber.beta2_ps2_per_km(),
            geometry: self.point.geometry,
            sps: self.point.samples_per_symbol,
            symbol_rate: self.system.wdm.symbol_rate,
            mode: self.system.solver.mode,
        }
    }

    fn steps(&self) -> Result<usize> {
        self.point
            .steps
            .ok_or_else(|| Error::Config(format!("{} needs a step count", self.point.kind)))
    }

    fn data(&self) -> Result<&[PreparedItem]> {
        self.data
            .ok_or_else(|| Error::InvalidArgument(format!("{} needs training data", self.point.kind)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Independent starts tried; the best is kept.
    pub starts: usize,
}

impl TrainingSummary {
    fn from_outcome(o: &TrainOutcome, starts: usize) -> Self {
        TrainingSummary {
            initial_val_loss: o.initial_val_loss,
            best_val_loss: o.best_val_loss,
            best_epoch: o.best_epoch,
            epochs_run: o.history.len(),
            stopped_early: o.stopped_early,
            starts,
        }
    }
}

pub struct Built {
    pub equalizer: Box<dyn Equalizer>,
    pub training: Option<TrainingSummary>,
}

pub trait EqualizerStrategy: Send + Sync {
    fn name(&self) -> &str;
    /// Whether `build` consumes training data.
    fn trainable(&self) -> bool;
    /// Whether points are indexed by a step count.
    fn uses_steps(&self) -> bool;
    /// Whether points are indexed by a filter half-length.
    fn uses_filter(&self) -> bool;
    /// Counting structure, if the method has a finite cost.
    fn structure(&self, steps: Option<usize>, num_pols: usize) -> Option<Structure>;
    fn build(&self, ctx: &BuildContext) -> Result<Built>;
}

struct EdcStrategy;

impl EqualizerStrategy for EdcStrategy {
    fn name(&self) -> &str {
        "edc"
    }
    fn trainable(&self) -> bool {
        false
    }
    fn uses_steps(&self) -> bool {
        false
    }
    fn uses_filter(&self) -> bool {
        false
    }
    fn structure(&self, _: Option<usize>, num_pols: usize) -> Option<Structure> {
        Some(Structure {
            kind: EqualizerKind::Edc,
            num_steps: 0,
            num_pols,
        })
    }
    fn build(&self, ctx: &BuildContext) -> Result<Built> {
        Ok(Built {
            equalizer: Box::new(Edc {
                beta2_ps2_per_km: ctx.system.fiber.beta2_ps2_per_km(),
                length_km: ctx.system.fiber.length_km,
                geometry: ctx.point.geometry,
            }),
            training: None,
        })
    }
}

/// OSSFM and ESSFM: one shared filter and uniform interior steps, trained
/// from several receiver-side splits.
struct TiedStrategy(EqualizerKind);

impl EqualizerStrategy for TiedStrategy {
    fn name(&self) -> &str {
        self.0.name()
    }
    fn trainable(&self) -> bool {
        true
    }
    fn uses_steps(&self) -> bool {
        true
    }
    fn uses_filter(&self) -> bool {
        self.0 == EqualizerKind::Essfm
    }
    fn structure(&self, steps: Option<usize>, num_pols: usize) -> Option<Structure> {
        Some(Structure {
            kind: self.0,
            num_steps: steps?,
            num_pols,
        })
    }
    fn build(&self, ctx: &BuildContext) -> Result<Built> {
        let ns = ctx.steps()?;
        let data = ctx.data()?;
        let fiber = &ctx.system.fiber;
        let leff = segment_effective_lengths(fiber.length_km, fiber.alpha_per_km(), ns);
        let c0 = -fiber.gamma_per_w_km * leff[0];
        let halflen = ctx.point.filter_halflen.unwrap_or(0);
        let frame = ctx.frame();
        let mut best: Option<TrainOutcome> = None;
        for frac in &ctx.point.split_fractions {
            let split = frac * fiber.length_km / ns as f64;
            let model = build_tied_model(self.0, ns, halflen, &[c0], fiber.length_km, split, &frame)?;
            let space = ParamSpace::new(Parameterization::Tied, &model);
            let out = train(&model, &space, data, ctx.train)?;
            if best.as_ref().is_none_or(|b| out.best_val_loss < b.best_val_loss) {
                best = Some(out);
            }
        }
        let best = best.ok_or_else(|| Error::Config("no initial split given".into()))?;
        Ok(Built {
            training: Some(TrainingSummary::from_outcome(&best, ctx.point.split_fractions.len())),
            equalizer: Box::new(best.model),
        })
    }
}

/// Every length and every filter trained jointly from the standard start.
struct LessfmStrategy;

impl EqualizerStrategy for LessfmStrategy {
    fn name(&self) -> &str {
        "lessfm"
    }
    fn trainable(&self) -> bool {
        true
    }
    fn uses_steps(&self) -> bool {
        true
    }
    fn uses_filter(&self) -> bool {
        true
    }
    fn structure(&self, steps: Option<usize>, num_pols: usize) -> Option<Structure> {
        Some(Structure {
            kind: EqualizerKind::Lessfm,
            num_steps: steps?,
            num_pols,
        })
    }
    fn build(&self, ctx: &BuildContext) -> Result<Built> {
        let ns = ctx.steps()?;
        let fiber = &ctx.system.fiber;
        let alpha = fiber.alpha_per_km();
        let coeffs = init_coeffs(
            ctx.point.filter_halflen.unwrap_or(0),
            fiber.gamma_per_w_km,
            &segment_effective_lengths(fiber.length_km, alpha, ns),
        );
        let model = build_free_model(init_lengths(fiber.length_km, alpha, ns), coeffs, &ctx.frame())?;
        let space = ParamSpace::new(Parameterization::Free, &model);
        let out = train(&model, &space, ctx.data()?, ctx.train)?;
        Ok(Built {
            training: Some(TrainingSummary::from_outcome(&out, 1)),
            equalizer: Box::new(out.model),
        })
    }
}

/// Fine-step inverse of the link; a reference without a finite cost.
struct IdealDbpStrategy;

impl EqualizerStrategy for IdealDbpStrategy {
    fn name(&self) -> &str {
        "ideal-dbp"
    }
    fn trainable(&self) -> bool {
        false
    }
    fn uses_steps(&self) -> bool {
        false
    }
    fn uses_filter(&self) -> bool {
        false
    }
    fn structure(&self, _: Option<usize>, _: usize) -> Option<Structure> {
        None
    }
    fn build(&self, ctx: &BuildContext) -> Result<Built> {
        Ok(Built {
            equalizer: Box::new(IdealDbp {
                fiber: ctx.system.fiber.clone(),
                solver: ctx.system.solver.clone(),
                amplifier_gain_db: ctx.system.amplifier().gain_db,
            }),
            training: None,
        })
    }
}

pub struct Registry {
    strategies: BTreeMap<String, Box<dyn EqualizerStrategy>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(EdcStrategy));
        r.register(Box::new(TiedStrategy(EqualizerKind::Ossfm)));
        r.register(Box::new(TiedStrategy(EqualizerKind::Essfm)));
        r.register(Box::new(LessfmStrategy));
        r.register(Box::new(IdealDbpStrategy));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            strategies: BTreeMap::new(),
        }
    }

    /// Adds or replaces the strategy under its name.
    pub fn register(&mut self, strategy: Box<dyn EqualizerStrategy>) {
        self.strategies.insert(strategy.name().to_string(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn EqualizerStrategy> {
        self.strategies
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownEqualizer(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.strategies.keys().map(String::as_str).collect()
    }
}
