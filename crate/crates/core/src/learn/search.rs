//! Full-batch optimizers driven through `argmin`: L-BFGS with restarts and a
//! derivative-free Nelder-Mead simplex.

use std::sync::{Arc, Mutex};

use argmin::core::observers::{Observe, ObserverMode};
use argmin::core::{CostFunction, Executor, Gradient, IterState, Solver, State, KV};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::neldermead::NelderMead;
use argmin::solver::quasinewton::LBFGS;

use crate::dbp::LEssfmModel;
use crate::error::{Error, Result};
use crate::learn::backprop::{backprop, batch_loss, LossOptions, PreparedItem};
use crate::learn::params::ParamSpace;
use crate::learn::train::{EpochRecord, TrainConfig, TrainOutcome};

/// Cost reported for trial points the equalizer cannot evaluate; far above
/// any loss of a normalized frame, so line searches back away from them.
const INFEASIBLE_COST: f64 = 1e3;

/// Training objective in scaled coordinates `z = theta / scale`.
#[derive(Clone)]
struct Objective<'a> {
    model: &'a LEssfmModel,
    space: &'a ParamSpace,
    items: &'a [&'a PreparedItem],
    scales: &'a [f64],
    loss: &'a LossOptions,
}

impl Objective<'_> {
    fn decode(&self, z: &[f64]) -> Result<LEssfmModel> {
        let theta: Vec<f64> = z.iter().zip(self.scales).map(|(v, s)| v * s).collect();
        self.space.decode(&theta, self.model)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, z: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        match batch_loss(&self.decode(z)?, self.items, self.loss) {
            Ok(loss) if loss.is_finite() => Ok(loss),
            Ok(_) | Err(Error::InsufficientOverlap { .. }) | Err(Error::NonFiniteGradient { .. }) => Ok(INFEASIBLE_COST),
            Err(e) => Err(e.into()),
        }
    }
}

impl Gradient for Objective<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, z: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let grads = match backprop(&self.decode(z)?, self.items, self.loss) {
            Ok(g) if g.loss.is_finite() => g,
            Ok(_) | Err(Error::InsufficientOverlap { .. }) | Err(Error::NonFiniteGradient { .. }) => {
                return Ok(vec![0.0; z.len()]);
            }
            Err(e) => return Err(e.into()),
        };
        Ok(self.space.pull_back(&grads).iter().zip(self.scales).map(|(g, s)| g * s).collect())
    }
}

/// Per-iteration validation and best-point bookkeeping.
struct Tracker {
    template: LEssfmModel,
    space: ParamSpace,
    val_set: Vec<PreparedItem>,
    scales: Vec<f64>,
    loss: LossOptions,
    history: Vec<EpochRecord>,
    best: (usize, f64, Vec<f64>),
    error: Option<Error>,
    /// Iterations completed by earlier restarts.
    offset: usize,
    patience: Option<usize>,
    exhausted: bool,
}

impl Tracker {
    fn val_loss(&self, z: &[f64]) -> Result<f64> {
        let theta: Vec<f64> = z.iter().zip(&self.scales).map(|(v, s)| v * s).collect();
        let model = self.space.decode(&theta, &self.template)?;
        let refs: Vec<&PreparedItem> = self.val_set.iter().collect();
        batch_loss(&model, &refs, &self.loss)
    }
}

#[derive(Clone)]
struct SharedTracker(Arc<Mutex<Tracker>>);

type SearchState<G> = IterState<Vec<f64>, G, (), (), (), f64>;

impl<G> Observe<SearchState<G>> for SharedTracker
where
    SearchState<G>: State<Param = Vec<f64>, Float = f64>,
{
    fn observe_iter(&mut self, state: &SearchState<G>, _kv: &KV) -> std::result::Result<(), argmin::core::Error> {
        let mut t = self.0.lock().expect("tracker lock");
        let Some(z) = state.get_param() else {
            return Ok(());
        };
        let val = match t.val_loss(z) {
            Ok(v) => v,
            Err(e) => {
                t.error = Some(e);
                return Err(argmin::core::Error::msg("validation failed"));
            }
        };
        let epoch = t.offset + state.get_iter() as usize + 1;
        t.history.push(EpochRecord {
            epoch,
            train_loss: state.get_cost(),
            val_loss: val,
        });
        if val < t.best.1 {
            t.best = (epoch, val, z.clone());
        }
        if t.patience.is_some_and(|p| epoch - t.best.0 >= p) {
            t.exhausted = true;
            return Err(argmin::core::Error::msg("validation patience exhausted"));
        }
        Ok(())
    }
}

impl SharedTracker {
    fn new(
        model: &LEssfmModel,
        space: &ParamSpace,
        val_set: &[&PreparedItem],
        scales: &[f64],
        cfg: &TrainConfig,
        initial: EpochRecord,
        z0: &[f64],
    ) -> Self {
        SharedTracker(Arc::new(Mutex::new(Tracker {
            template: model.clone(),
            space: space.clone(),
            val_set: val_set.iter().map(|&i| i.clone()).collect(),
            scales: scales.to_vec(),
            loss: cfg.loss.clone(),
            best: (0, initial.val_loss, z0.to_vec()),
            history: vec![initial],
            error: None,
            offset: 0,
            patience: cfg.patience,
            exhausted: false,
        })))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Tracker> {
        self.0.lock().expect("tracker lock")
    }

    fn finish(&self, model: &LEssfmModel, space: &ParamSpace, stopped_early: bool) -> Result<TrainOutcome> {
        let mut t = self.lock();
        let (best_epoch, best_val, z) = t.best.clone();
        let theta: Vec<f64> = z.iter().zip(&t.scales).map(|(v, s)| v * s).collect();
        let initial_val_loss = t.history[0].val_loss;
        Ok(TrainOutcome {
            model: space.decode(&theta, model)?,
            history: std::mem::take(&mut t.history),
            best_epoch,
            best_val_loss: best_val,
            initial_val_loss,
            stopped_early,
        })
    }
}

/// Outcome of one solver run that did not end in a hard error.
enum RunEnd {
    /// Validation patience ran out.
    Patience,
    Finished { iters: u64, best_cost: f64, best_param: Option<Vec<f64>> },
}

fn run_solver<'a, S, G>(
    objective: Objective<'a>,
    solver: S,
    start: Vec<f64>,
    max_iters: u64,
    tracker: &SharedTracker,
) -> Result<RunEnd>
where
    S: Solver<Objective<'a>, SearchState<G>>,
    SearchState<G>: State<Param = Vec<f64>, Float = f64>,
    G: 'static,
{
    let run = Executor::new(objective, solver)
        .configure(|state| state.param(start).max_iters(max_iters))
        .add_observer(tracker.clone(), ObserverMode::Always)
        .run();
    {
        let mut t = tracker.lock();
        if let Some(e) = t.error.take() {
            return Err(e);
        }
        if t.exhausted {
            return Ok(RunEnd::Patience);
        }
    }
    let res = run.map_err(|e| match e.downcast::<Error>() {
        Ok(own) => own,
        Err(other) => Error::Optimizer(other.to_string()),
    })?;
    let state = res.state();
    Ok(RunEnd::Finished {
        iters: state.get_iter(),
        best_cost: state.get_best_cost(),
        best_param: state.get_best_param().cloned(),
    })
}

fn initial_record(model: &LEssfmModel, train_set: &[&PreparedItem], val_set: &[&PreparedItem], cfg: &TrainConfig) -> Result<EpochRecord> {
    Ok(EpochRecord {
        epoch: 0,
        train_loss: batch_loss(model, train_set, &cfg.loss)?,
        val_loss: batch_loss(model, val_set, &cfg.loss)?,
    })
}

pub(crate) fn train_lbfgs(
    model: &LEssfmModel,
    space: &ParamSpace,
    train_set: &[&PreparedItem],
    val_set: &[&PreparedItem],
    cfg: &TrainConfig,
    memory: usize,
    scales: Vec<f64>,
) -> Result<TrainOutcome> {
    let z0: Vec<f64> = space.encode(model).iter().zip(&scales).map(|(v, s)| v / s).collect();
    let initial = initial_record(model, train_set, val_set, cfg)?;
    let tracker = SharedTracker::new(model, space, val_set, &scales, cfg, initial, &z0);
    let objective = Objective {
        model,
        space,
        items: train_set,
        scales: &scales,
        loss: &cfg.loss,
    };
    // A run that ends before the iteration cap (typically a line search that
    // lost its descent direction) restarts from its best point with an empty
    // curvature memory, as long as it still made progress.
    let cap = cfg.epochs as u64;
    let mut start = z0;
    let mut done = 0u64;
    let mut stopped_early = false;
    while done < cap {
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), memory)
            .with_tolerance_grad(0.0)
            .and_then(|s| s.with_tolerance_cost(0.0))
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        tracker.lock().offset = done as usize;
        let start_cost = objective.cost(&start).unwrap_or(f64::INFINITY);
        match run_solver(objective.clone(), solver, start.clone(), cap - done, &tracker)? {
            RunEnd::Patience => {
                stopped_early = true;
                break;
            }
            RunEnd::Finished {
                iters,
                best_cost,
                best_param,
            } => {
                done += iters.max(1);
                match best_param {
                    Some(p) if best_cost < start_cost && done < cap => start = p,
                    _ => {
                        stopped_early = done < cap;
                        break;
                    }
                }
            }
        }
    }
    tracker.finish(model, space, stopped_early)
}

pub(crate) fn train_nelder_mead(
    model: &LEssfmModel,
    space: &ParamSpace,
    train_set: &[&PreparedItem],
    val_set: &[&PreparedItem],
    cfg: &TrainConfig,
    scales: Vec<f64>,
) -> Result<TrainOutcome> {
    let z0: Vec<f64> = space.encode(model).iter().zip(&scales).map(|(v, s)| v / s).collect();
    let initial = initial_record(model, train_set, val_set, cfg)?;
    let tracker = SharedTracker::new(model, space, val_set, &scales, cfg, initial, &z0);
    let objective = Objective {
        model,
        space,
        items: train_set,
        scales: &scales,
        loss: &cfg.loss,
    };
    // Frozen entries stay out of the simplex so they never move.
    let mut simplex = vec![z0.clone()];
    for (i, &frozen) in space.frozen.iter().enumerate() {
        if !frozen {
            let mut v = z0.clone();
            v[i] += 1.0;
            simplex.push(v);
        }
    }
    if simplex.len() == 1 {
        return tracker.finish(model, space, false);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(0.0)
        .map_err(|e| Error::Optimizer(e.to_string()))?;
    let stopped_early = match run_solver(objective, solver, z0, cfg.epochs as u64, &tracker)? {
        RunEnd::Patience => true,
        RunEnd::Finished { iters, .. } => iters < cfg.epochs as u64,
    };
    tracker.finish(model, space, stopped_early)
}
