use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use lessfm_core::dbp::load_model;
use lessfm_core::exp::run::{dataset_id, fit_config, training_data, training_manifests};
use lessfm_core::exp::{
    plan, run_experiment, sweep_equalizer, write_outputs, BuildContext, EvalBank, ExperimentConfig, PointSpec, Plan,
    Registry,
};
use lessfm_core::learn::{regenerate, DatasetManifest};
use lessfm_core::seed::{derive_seed, tag};
use lessfm_core::Error;

#[derive(Parser)]
#[command(name = "lessfm", version, about = "Learned split-step backpropagation experiments")]
struct Cli {
    /// Replace the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Validate the config and print the plan without simulating or writing.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and sweep every point of the equalizer matrix.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a single point and save its model.
    Train {
        config: PathBuf,
        #[arg(long)]
        kind: String,
        #[arg(long)]
        steps: usize,
        /// Samples per symbol (default: the first listed for the kind).
        #[arg(long)]
        sps: Option<f64>,
        /// Filter half-length (default: the first listed for the kind).
        #[arg(long)]
        halflen: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep launch power for a saved model on fresh frames.
    Eval {
        model: PathBuf,
        config: PathBuf,
        /// Seed of the evaluation frames (default: derived from the master seed,
        /// distinct from the one used by `run`).
        #[arg(long)]
        eval_seed: Option<u64>,
    },
    /// Print the RM/2D table of the equalizer matrix.
    Complexity { config: PathBuf },
    /// Generate the training frames and write them to disk.
    Dataset {
        config: PathBuf,
        #[arg(long)]
        sps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    kind: &'static str,
    message: String,
    code: u8,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Config(_) | Error::UnknownEqualizer(_) => "config",
            Error::Io(_) => "io",
            Error::Format(_) | Error::Json(_) => "format",
            _ => "runtime",
        };
        Failure {
            kind,
            message: e.to_string(),
            code: if kind == "config" { 2 } else { 1 },
        }
    }
}

fn report(f: &Failure) -> ExitCode {
    let doc = json!({ "status": "error", "kind": f.kind, "message": f.message });
    eprintln!("{doc}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return report(&Failure {
                kind: "usage",
                message: e.kind().to_string(),
                code: 2,
            });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn print_json(v: &Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let registry = Registry::default();
    match &cli.command {
        Command::Run { config, out } => {
            let cfg = load(config, cli.seed)?;
            let plan = plan(&cfg, &registry)?;
            if cli.dry_run {
                print_plan(&cfg, &plan);
                return Ok(());
            }
            let dir = out.clone().unwrap_or_else(|| cfg.output.dir.clone());
            let output = run_experiment(&cfg, &registry)?;
            write_outputs(&output, &dir, EvalBank::run_seed(cfg.seed))?;
            println!("{}", plan.conventions.describe());
            println!("{:<36} {:>10} {:>10} {:>8}", "point", "RM/2D", "peak dB", "at dBm");
            for r in &output.records {
                match &r.error {
                    None => println!(
                        "{:<36} {:>10} {:>10.3} {:>8}",
                        r.label,
                        r.rm_per_2d.map_or("-".into(), |v| format!("{v:.1}")),
                        r.peak_snr_db.unwrap_or(f64::NAN),
                        r.peak_power_dbm.map_or("-".into(), |v| v.to_string())
                    ),
                    Some(e) => println!("{:<36} failed: {e}", r.label),
                }
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Train {
            config,
            kind,
            steps,
            sps,
            halflen,
            out,
        } => {
            let cfg = load(config, cli.seed)?;
            let point = single_point(&cfg, &registry, kind, *steps, *sps, *halflen)?;
            let strategy = registry.get(&point.kind)?;
            if !strategy.trainable() {
                return Err(Error::Config(format!("{kind} has nothing to train")).into());
            }
            if cli.dry_run {
                print_json(&json!({ "status": "dry-run", "point": point }));
                return Ok(());
            }
            let data = training_data(&cfg, point.samples_per_symbol)?;
            let system = cfg.system_at(point.samples_per_symbol, cfg.data.eval_frame_symbols);
            let built = strategy.build(&BuildContext {
                system: &system,
                point: &point,
                train: &fit_config(&cfg),
                data: Some(&data),
            })?;
            let model = built
                .equalizer
                .model()
                .ok_or_else(|| Error::Config(format!("{kind} produced no model")))?;
            let dir = out.clone().unwrap_or_else(|| cfg.output.dir.clone()).join("models");
            std::fs::create_dir_all(&dir).map_err(Error::from)?;
            let path = dir.join(format!("{}.params", point.label()));
            lessfm_core::dbp::save_model(model, &path)?;
            print_json(&json!({ "status": "ok", "model": path, "training": built.training }));
            Ok(())
        }
        Command::Eval {
            model,
            config,
            eval_seed,
        } => {
            let cfg = load(config, cli.seed)?;
            let m = load_model(model)?;
            let sys = cfg.system_at(m.sps, cfg.data.eval_frame_symbols);
            if m.beta2_ps2_per_km != sys.fiber.beta2_ps2_per_km()
                || m.symbol_rate != sys.wdm.symbol_rate
                || m.mode != sys.solver.mode
            {
                return Err(Error::Config(format!(
                    "model ({} ps^2/km, {} Bd, {:?}) does not match the configured link",
                    m.beta2_ps2_per_km, m.symbol_rate, m.mode
                ))
                .into());
            }
            let seed = eval_seed.unwrap_or_else(|| derive_seed(cfg.seed, &[tag("re-evaluation")]));
            if cli.dry_run {
                print_json(&json!({ "status": "dry-run", "model": model, "eval_seed": seed, "powers_dbm": cfg.sweep.coarse_grid() }));
                return Ok(());
            }
            let mut bank = EvalBank::new(&cfg, seed);
            let (powers, snr) = sweep_equalizer(&mut bank, &m, m.sps)?;
            let best = lessfm_core::exp::run::argmax(&snr);
            print_json(&json!({
                "status": "ok",
                "model": model,
                "eval_seed": seed,
                "powers_dbm": powers,
                "snr_db": snr,
                "peak_snr_db": best.map(|i| snr[i]),
                "peak_power_dbm": best.map(|i| powers[i]),
            }));
            Ok(())
        }
        Command::Complexity { config } => {
            let cfg = load(config, cli.seed)?;
            let plan = plan(&cfg, &registry)?;
            print_complexity(&plan);
            Ok(())
        }
        Command::Dataset { config, sps, out } => {
            let cfg = load(config, cli.seed)?;
            let n = match sps {
                Some(n) => *n,
                None => cfg
                    .equalizers
                    .iter()
                    .flat_map(|e| e.samples_per_symbol.first())
                    .copied()
                    .next()
                    .ok_or_else(|| Error::Config("no samples_per_symbol in the config".into()))?,
            };
            let manifests = training_manifests(&cfg, n);
            if cli.dry_run {
                print_json(&json!({ "status": "dry-run", "datasets": manifests }));
                return Ok(());
            }
            let dir = out.clone().unwrap_or_else(|| cfg.output.dir.clone()).join("datasets");
            std::fs::create_dir_all(&dir).map_err(Error::from)?;
            let mut written = Vec::new();
            for m in &manifests {
                written.push(write_dataset(m, &dir)?);
            }
            print_json(&json!({ "status": "ok", "files": written }));
            Ok(())
        }
    }
}

/// Point for `train`: kind and step count from the command line, the rest
/// from the first matching equalizer entry.
fn single_point(
    cfg: &ExperimentConfig,
    registry: &Registry,
    kind: &str,
    steps: usize,
    sps: Option<f64>,
    halflen: Option<usize>,
) -> Result<PointSpec, Failure> {
    let strategy = registry.get(kind)?;
    let spec = cfg
        .equalizers
        .iter()
        .find(|e| e.kind == kind)
        .ok_or_else(|| Error::Config(format!("the config has no [[equalizers]] entry of kind {kind}")))?;
    let mut one = spec.clone();
    one.steps = vec![steps];
    one.samples_per_symbol = vec![sps.unwrap_or(spec.samples_per_symbol[0])];
    if strategy.uses_filter() {
        let h = halflen.or(spec.filter_halflen.first().copied()).unwrap_or(0);
        one.filter_halflen = vec![h];
        one.filter_halflen_by_steps.clear();
        if halflen.is_none() {
            one.filter_halflen = vec![spec.halflen_for(steps, h)];
        }
    }
    let mut single = cfg.clone();
    single.equalizers = vec![one];
    Ok(plan(&single, registry)?.points.remove(0))
}

fn dash<T: ToString>(v: Option<T>) -> String {
    v.map_or("-".into(), |v| v.to_string())
}

fn print_plan(cfg: &ExperimentConfig, plan: &Plan) {
    println!("config hash {}  master seed {}", cfg.hash(), cfg.seed);
    println!("coarse powers (dBm): {:?}", plan.coarse_powers_dbm);
    println!(
        "training: {} frames x {} symbols at {:?} dBm; evaluation: {} frames x {} symbols per power",
        cfg.data.train_frames,
        cfg.data.train_frame_symbols,
        cfg.data.train_powers_dbm,
        cfg.data.eval_frames,
        cfg.data.eval_frame_symbols
    );
    print_complexity(plan);
    println!("output directory {}", cfg.output.dir.display());
}

fn print_complexity(plan: &Plan) {
    println!("conventions: {}", plan.conventions.describe());
    if let Some(cal) = &plan.calibration {
        println!(
            "calibrated: anchors reproduced as L-ESSFM {:.1} and ESSFM {:.1} RM/2D (score {:.4})",
            cal.lessfm_rm, cal.essfm_rm, cal.score
        );
    }
    println!(
        "{:<10} {:>6} {:>6} {:>8} {:>6} {:>7} {:>10}",
        "kind", "n", "N_s", "halflen", "N", "O", "RM/2D"
    );
    for (p, rm) in plan.points.iter().zip(&plan.rm_per_2d) {
        println!(
            "{:<10} {:>6} {:>6} {:>8} {:>6} {:>7} {:>10}",
            p.kind,
            p.samples_per_symbol,
            dash(p.steps),
            dash(p.filter_halflen),
            dash(rm.map(|_| p.geometry.fft_size)),
            dash(rm.map(|_| p.geometry.overlap)),
            rm.map_or("-".into(), |v| format!("{v:.1}"))
        );
    }
}

/// `<id>.json` holds the manifest; `<id>.bin` the frames as little-endian
/// f64 pairs, each frame's received polarizations then its symbols.
fn write_dataset(m: &DatasetManifest, dir: &Path) -> Result<Value, Failure> {
    let ds = regenerate(m)?;
    let id = dataset_id(m);
    let json_path = dir.join(format!("{id}.json"));
    let bin_path = dir.join(format!("{id}.bin"));
    let first = &ds.items[0];
    let header = json!({
        "format": "lessfm-dataset",
        "version": 1,
        "manifest": m,
        "frames": ds.items.len(),
        "pols": first.rx.pols.len(),
        "rx_samples": first.rx.pols[0].len(),
        "rx_sample_rate_hz": first.rx.sample_rate,
        "symbols": first.tx.pols[0].len(),
    });
    std::fs::write(&json_path, serde_json::to_string_pretty(&header).map_err(Error::from)? + "\n")
        .map_err(Error::from)?;
    let mut bytes = Vec::new();
    for item in &ds.items {
        for p in item.rx.pols.iter().chain(&item.tx.pols) {
            for v in p {
                bytes.extend_from_slice(&v.re.to_le_bytes());
                bytes.extend_from_slice(&v.im.to_le_bytes());
            }
        }
    }
    std::fs::write(&bin_path, bytes).map_err(Error::from)?;
    Ok(json!({ "manifest": json_path, "data": bin_path }))
}
