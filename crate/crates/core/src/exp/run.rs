//! Experiment planning, training and launch-power sweeps.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbp::{calibrate, count_rm_per_2d, dispersion_memory, Calibration, ComplexityModel, Equalizer, LEssfmModel};
use crate::dsp::OlsGeometry;
use crate::error::{Error, Result};
use crate::exp::config::{round_power, ExperimentConfig};
use crate::exp::output::ResultRecord;
use crate::exp::registry::{BuildContext, PointSpec, Registry, TrainingSummary};
use crate::learn::dataset::DATASET_VERSION;
use crate::learn::{
    prepare, regenerate, simulate_frames, DatasetItem, DatasetManifest, PreparedItem, SymbolKind, TrainConfig,
};
use crate::seed::{derive_seed, tag};
use crate::txrx::{estimate_snr, MatchedFilter, SymbolFrame};

/// Smallest overlap and block size picked automatically.
const MIN_AUTO_OVERLAP: usize = 64;
const MIN_AUTO_FFT: usize = 1024;

fn key(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

/// Everything fixed before any simulation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub points: Vec<PointSpec>,
    pub conventions: ComplexityModel,
    pub calibration: Option<Calibration>,
    pub coarse_powers_dbm: Vec<f64>,
    pub rm_per_2d: Vec<Option<f64>>,
}

fn auto_geometry(cfg: &ExperimentConfig, sps: f64, halflen: usize) -> Result<OlsGeometry> {
    let fiber = &cfg.system.fiber;
    let rate = sps * cfg.system.symbol_rate_gbd * 1e9;
    let memory = dispersion_memory(fiber.beta2_ps2_per_km(), fiber.length_km, rate) + 2 * halflen;
    let overlap = (2 * memory).next_power_of_two().max(MIN_AUTO_OVERLAP);
    OlsGeometry::new((4 * overlap).max(MIN_AUTO_FFT), overlap)
}

pub fn conventions(cfg: &ExperimentConfig) -> Result<(ComplexityModel, Option<Calibration>)> {
    match (&cfg.complexity.conventions, &cfg.complexity.calibration) {
        (_, Some(anchors)) => {
            let cal = calibrate(&anchors.anchors()?)?;
            Ok((cal.chosen, Some(cal)))
        }
        (Some(conv), None) => Ok((*conv, None)),
        (None, None) => Ok((ComplexityModel::default(), None)),
    }
}

/// Expand the equalizer matrix into points and count their cost.
pub fn plan(cfg: &ExperimentConfig, registry: &Registry) -> Result<Plan> {
    cfg.validate()?;
    let (conv, calibration) = conventions(cfg)?;
    let mut points = Vec::new();
    for spec in &cfg.equalizers {
        let strategy = registry.get(&spec.kind)?;
        let steps: Vec<Option<usize>> = if strategy.uses_steps() {
            if spec.steps.is_empty() {
                return Err(Error::Config(format!("{} needs a non-empty steps list", spec.kind)));
            }
            spec.steps.iter().map(|&s| Some(s)).collect()
        } else if spec.steps.is_empty() {
            vec![None]
        } else {
            return Err(Error::Config(format!("{} takes no step counts", spec.kind)));
        };
        if strategy.uses_filter() && spec.filter_halflen.is_empty() {
            return Err(Error::Config(format!("{} needs a non-empty filter_halflen list", spec.kind)));
        }
        if !strategy.uses_filter() && (!spec.filter_halflen.is_empty() || !spec.filter_halflen_by_steps.is_empty()) {
            return Err(Error::Config(format!("{} takes no filter length", spec.kind)));
        }
        let halflens: Vec<Option<usize>> = if strategy.uses_filter() {
            spec.filter_halflen.iter().map(|&h| Some(h)).collect()
        } else {
            vec![None]
        };
        for &n in &spec.samples_per_symbol {
            for &ns in &steps {
                for &h in &halflens {
                    let h = h.map(|h| ns.map_or(h, |ns| spec.halflen_for(ns, h)));
                    let geometry = match (spec.fft_size, spec.overlap) {
                        (Some(f), Some(o)) => OlsGeometry::new(f, o)?,
                        _ => auto_geometry(cfg, n, h.unwrap_or(0))?,
                    };
                    points.push(PointSpec {
                        kind: spec.kind.clone(),
                        steps: ns,
                        samples_per_symbol: n,
                        filter_halflen: h,
                        geometry,
                        split_fractions: spec.split_fractions.clone(),
                    });
                }
            }
        }
    }
    let mut labels = BTreeSet::new();
    for p in &points {
        if !labels.insert(p.label()) {
            return Err(Error::Config(format!("point {} appears twice", p.label())));
        }
    }
    let rm_per_2d = points
        .iter()
        .map(|p| {
            let strategy = registry.get(&p.kind)?;
            strategy
                .structure(p.steps, cfg.num_pols())
                .map(|s| count_rm_per_2d(&s, &p.geometry, p.samples_per_symbol, &conv))
                .transpose()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Plan {
        points,
        conventions: conv,
        calibration,
        coarse_powers_dbm: cfg.sweep.coarse_grid(),
        rm_per_2d,
    })
}

/// Training frames for equalizers running at `sps` samples per symbol.
/// The seeds do not depend on `sps`, so every rate sees the same
/// transmissions.
pub fn training_manifests(cfg: &ExperimentConfig, sps: f64) -> Vec<DatasetManifest> {
    cfg.data
        .train_powers_dbm
        .iter()
        .map(|&p| DatasetManifest {
            version: DATASET_VERSION,
            system: cfg.system_at(sps, cfg.data.train_frame_symbols),
            n_blocks: cfg.data.train_frames,
            power_dbm: p,
            seed: derive_seed(cfg.seed, &[tag("train"), key(p) as u64]),
            symbols: SymbolKind::Gaussian,
        })
        .collect()
}

pub fn dataset_id(m: &DatasetManifest) -> String {
    format!("train_n{}_p{}", m.system.eq_sps, m.power_dbm)
}

pub fn training_data(cfg: &ExperimentConfig, sps: f64) -> Result<Vec<PreparedItem>> {
    let mut items = Vec::new();
    for m in training_manifests(cfg, sps) {
        items.extend(prepare(&regenerate(&m)?)?);
    }
    Ok(items)
}

/// Optimizer settings for a run; the split seed mixes in the master seed.
pub fn fit_config(cfg: &ExperimentConfig) -> TrainConfig {
    let mut t = cfg.train.clone();
    t.seed = derive_seed(cfg.seed, &[tag("fit"), cfg.train.seed]);
    t
}

/// Fresh 64-QAM frames per (rate, power), simulated on demand in batches.
pub struct EvalBank<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    sets: BTreeMap<(i64, i64), Vec<DatasetItem>>,
}

impl<'a> EvalBank<'a> {
    pub fn new(cfg: &'a ExperimentConfig, seed: u64) -> Self {
        EvalBank {
            cfg,
            seed,
            sets: BTreeMap::new(),
        }
    }

    /// Seed of the evaluation stream used by a run with master seed `master`.
    pub fn run_seed(master: u64) -> u64 {
        derive_seed(master, &[tag("eval")])
    }

    pub fn ensure(&mut self, wanted: &[(f64, f64)]) -> Result<()> {
        for &(n, p) in wanted {
            if self.sets.contains_key(&(key(n), key(p))) {
                continue;
            }
            let sys = self.cfg.system_at(n, self.cfg.data.eval_frame_symbols);
            let seed = derive_seed(self.seed, &[key(p) as u64]);
            let items = simulate_frames(&sys, self.cfg.data.eval_frames, p, SymbolKind::Qam(self.cfg.data.qam_order), seed)?;
            self.sets.insert((key(n), key(p)), items);
        }
        Ok(())
    }

    /// Effective SNR of `eq` on all frames at one power, pooled before
    /// estimation.
    pub fn snr_db(&self, eq: &dyn Equalizer, n: f64, p: f64) -> Result<f64> {
        let items = self
            .sets
            .get(&(key(n), key(p)))
            .ok_or_else(|| Error::InvalidArgument(format!("no evaluation frames at n={n}, {p} dBm")))?;
        let sys = self.cfg.system_at(n, self.cfg.data.eval_frame_symbols);
        let scale = 1.0 / sys.symbol_amplitude(p);
        let outs = items
            .par_iter()
            .map(|item| {
                let out = eq.equalize(&item.rx)?;
                let mf = MatchedFilter::new(out.len(), n, sys.wdm.rolloff, scale, 0.0)?;
                Ok(out.pols.iter().map(|s| mf.apply(s)).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let pols = sys.num_pols();
        let mut y = vec![Vec::new(); pols];
        let mut x = vec![Vec::new(); pols];
        for (out, item) in outs.into_iter().zip(items) {
            for (k, s) in out.into_iter().enumerate() {
                y[k].extend(s);
                x[k].extend_from_slice(&item.tx.pols[k]);
            }
        }
        let rate = sys.wdm.symbol_rate;
        Ok(estimate_snr(&SymbolFrame::derived(y, rate), &SymbolFrame::derived(x, rate), 0)?.snr_db)
    }
}

/// Powers to add around the coarse peak.
pub fn refinement(cfg: &ExperimentConfig, powers: &[f64], snr: &[f64]) -> Vec<f64> {
    let r = cfg.sweep.refine_step_db;
    let Some(i) = argmax(snr) else { return Vec::new() };
    if r <= 0.0 {
        return Vec::new();
    }
    [powers[i] - r, powers[i] + r]
        .into_iter()
        .map(round_power)
        .filter(|p| *p >= cfg.sweep.min_dbm - 1e-9 && *p <= cfg.sweep.max_dbm + 1e-9)
        .filter(|p| !powers.iter().any(|q| key(*q) == key(*p)))
        .collect()
}

pub fn argmax(v: &[f64]) -> Option<usize> {
    (0..v.len()).filter(|&i| v[i].is_finite()).max_by(|&a, &b| v[a].total_cmp(&v[b]))
}

/// A single local maximum, up to strict local maxima within `tol_db` of
/// the global peak's power.
pub fn is_unimodal(powers: &[f64], snr: &[f64], tol_db: f64) -> bool {
    let Some(best) = argmax(snr) else { return false };
    (0..snr.len()).all(|i| {
        let left = i == 0 || snr[i] > snr[i - 1];
        let right = i + 1 == snr.len() || snr[i] > snr[i + 1];
        !(left && right) || (powers[i] - powers[best]).abs() <= tol_db + 1e-9
    })
}

/// Sweep one equalizer over the coarse grid and its refinement.
pub fn sweep_equalizer(bank: &mut EvalBank, eq: &dyn Equalizer, n: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let cfg = bank.cfg;
    let mut powers = cfg.sweep.coarse_grid();
    bank.ensure(&powers.iter().map(|&p| (n, p)).collect::<Vec<_>>())?;
    let mut snr = powers.iter().map(|&p| bank.snr_db(eq, n, p)).collect::<Result<Vec<_>>>()?;
    let extra = refinement(cfg, &powers, &snr);
    bank.ensure(&extra.iter().map(|&p| (n, p)).collect::<Vec<_>>())?;
    for p in extra {
        snr.push(bank.snr_db(eq, n, p)?);
        powers.push(p);
    }
    Ok(sort_by_power(powers, snr))
}

fn sort_by_power(powers: Vec<f64>, snr: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = powers.into_iter().zip(snr).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

pub struct ExperimentOutput {
    pub config_hash: String,
    pub seed: u64,
    pub plan: Plan,
    pub records: Vec<ResultRecord>,
    pub models: BTreeMap<String, LEssfmModel>,
    pub datasets: BTreeMap<String, DatasetManifest>,
    /// Wall-clock seconds per point label, plus "total".
    pub timings: BTreeMap<String, f64>,
}

struct PointState {
    equalizer: Option<Box<dyn Equalizer>>,
    training: Option<TrainingSummary>,
    powers: Vec<f64>,
    snr: Vec<f64>,
    error: Option<String>,
    seconds: f64,
}

/// Train every point, sweep launch power and collect one record per point.
/// A failing point is recorded with its error; the others continue.
pub fn run_experiment(cfg: &ExperimentConfig, registry: &Registry) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let plan = plan(cfg, registry)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| run_in_pool(cfg, registry, plan, start))
}

fn run_in_pool(cfg: &ExperimentConfig, registry: &Registry, plan: Plan, start: Instant) -> Result<ExperimentOutput> {
    let fit = fit_config(cfg);
    let rates: BTreeSet<i64> = plan
        .points
        .iter()
        .filter(|p| registry.get(&p.kind).is_ok_and(|s| s.trainable()))
        .map(|p| key(p.samples_per_symbol))
        .collect();
    let mut datasets = BTreeMap::new();
    let mut train_sets: BTreeMap<i64, std::result::Result<Vec<PreparedItem>, String>> = BTreeMap::new();
    for &nk in &rates {
        let n = nk as f64 / 1e6;
        for m in training_manifests(cfg, n) {
            datasets.insert(dataset_id(&m), m);
        }
        train_sets.insert(nk, training_data(cfg, n).map_err(|e| e.to_string()));
    }

    let mut bank = EvalBank::new(cfg, EvalBank::run_seed(cfg.seed));
    let coarse = plan.coarse_powers_dbm.clone();
    let point_rates: BTreeSet<i64> = plan.points.iter().map(|p| key(p.samples_per_symbol)).collect();
    let wanted: Vec<(f64, f64)> = point_rates
        .iter()
        .flat_map(|&nk| coarse.iter().map(move |&p| (nk as f64 / 1e6, p)))
        .collect();
    bank.ensure(&wanted)?;

    let mut states: Vec<PointState> = plan
        .points
        .par_iter()
        .map(|point| {
            let t = Instant::now();
            let mut state = PointState {
                equalizer: None,
                training: None,
                powers: coarse.clone(),
                snr: Vec::new(),
                error: None,
                seconds: 0.0,
            };
            let result = (|| -> Result<()> {
                let strategy = registry.get(&point.kind)?;
                let data = if strategy.trainable() {
                    match &train_sets[&key(point.samples_per_symbol)] {
                        Ok(items) => Some(items.as_slice()),
                        Err(e) => return Err(Error::InvalidArgument(format!("training data: {e}"))),
                    }
                } else {
                    None
                };
                let system = cfg.system_at(point.samples_per_symbol, cfg.data.eval_frame_symbols);
                let built = strategy.build(&BuildContext {
                    system: &system,
                    point,
                    train: &fit,
                    data,
                })?;
                state.snr = coarse
                    .iter()
                    .map(|&p| bank.snr_db(built.equalizer.as_ref(), point.samples_per_symbol, p))
                    .collect::<Result<_>>()?;
                state.training = built.training;
                state.equalizer = Some(built.equalizer);
                Ok(())
            })();
            if let Err(e) = result {
                state.error = Some(e.to_string());
                state.snr.clear();
                state.powers.clear();
            }
            state.seconds = t.elapsed().as_secs_f64();
            state
        })
        .collect();

    let extra: Vec<Vec<f64>> = states.iter().map(|s| refinement(cfg, &s.powers, &s.snr)).collect();
    let wanted: Vec<(f64, f64)> = plan
        .points
        .iter()
        .zip(&extra)
        .flat_map(|(pt, ps)| ps.iter().map(move |&p| (pt.samples_per_symbol, p)))
        .collect();
    bank.ensure(&wanted)?;
    states.par_iter_mut().zip(plan.points.par_iter()).zip(extra.par_iter()).for_each(|((state, point), ps)| {
        let Some(eq) = state.equalizer.as_deref() else { return };
        let t = Instant::now();
        let mut powers = std::mem::take(&mut state.powers);
        let mut snr = std::mem::take(&mut state.snr);
        for &p in ps {
            match bank.snr_db(eq, point.samples_per_symbol, p) {
                Ok(v) => {
                    powers.push(p);
                    snr.push(v);
                }
                Err(e) => {
                    state.error = Some(e.to_string());
                    break;
                }
            }
        }
        let (powers, snr) = sort_by_power(powers, snr);
        state.powers = powers;
        state.snr = snr;
        state.seconds += t.elapsed().as_secs_f64();
    });

    let conv_hash = plan.conventions.conventions_hash();
    let mut records = Vec::new();
    let mut models = BTreeMap::new();
    let mut timings = BTreeMap::new();
    for ((point, state), rm) in plan.points.iter().zip(&states).zip(&plan.rm_per_2d) {
        let label = point.label();
        let model = state.equalizer.as_ref().and_then(|e| e.model()).filter(|_| state.error.is_none());
        let model_file = model.map(|m| {
            models.insert(label.clone(), m.clone());
            format!("models/{label}.params")
        });
        let training_data = registry
            .get(&point.kind)
            .is_ok_and(|s| s.trainable())
            .then(|| training_manifests(cfg, point.samples_per_symbol).iter().map(dataset_id).collect());
        timings.insert(label.clone(), state.seconds);
        records.push(ResultRecord::new(
            point,
            *rm,
            conv_hash.clone(),
            state.powers.clone(),
            state.snr.clone(),
            cfg.sweep.step_db,
            training_data,
            state.training.clone(),
            model_file,
            state.error.clone(),
        ));
    }
    timings.insert("total".into(), start.elapsed().as_secs_f64());
    Ok(ExperimentOutput {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        plan,
        records,
        models,
        datasets,
        timings,
    })
}
