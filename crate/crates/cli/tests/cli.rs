use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const LINK: &str = r#"
seed = 3
workers = 1

[system]
num_channels = 1
symbol_rate_gbd = 93.0
channel_spacing_ghz = 100.0
rolloff = 0.05
sim_samples_per_symbol = 3
noise_figure_db = 4.5

[system.fiber]
length_km = 40.0
attenuation_db_per_km = 0.2
dispersion_ps_per_nm_km = 17.0
gamma_per_w_km = 1.27
reference_wavelength_nm = 1550.0

[system.solver]
max_step_km = 1.0
max_phase_rad = 0.01
mode = "scalar"

[sweep]
min_dbm = 0.0
max_dbm = 4.0
step_db = 1.0
refine_step_db = 0.5

[data]
train_frames = 4
train_frame_symbols = 1024
train_powers_dbm = [2.0]
eval_frames = 12
eval_frame_symbols = 16384

[[equalizers]]
kind = "lessfm"
steps = [1]
samples_per_symbol = [2.0]
filter_halflen = [2]

[output]
dir = "out"
"#;

fn lessfm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lessfm")).args(args).output().unwrap()
}

fn desk() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/desk.toml")
        .to_string_lossy()
        .into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("link.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn error_report(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("no JSON error report in {stderr}"))
}

#[test]
fn complexity_table_lists_every_method() {
    let out = lessfm(&["complexity", &desk()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("conventions:") && text.contains("hash "));
    for kind in ["edc", "ossfm", "essfm", "lessfm"] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind} row missing:\n{text}");
    }
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), LINK);
    let cfg = cfg.to_str().unwrap();
    for args in [
        vec!["--dry-run", "run", cfg],
        vec!["--dry-run", "train", cfg, "--kind", "lessfm", "--steps", "2"],
        vec!["--dry-run", "dataset", cfg],
    ] {
        let out = lessfm(&args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1, "only the config itself");
}

#[test]
fn bad_input_gives_usage_error() {
    let out = lessfm(&["run", &desk(), "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_report(&out)["kind"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &LINK.replace("length_km", "length_m"));
    let out = lessfm(&["complexity", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = error_report(&out);
    assert_eq!(report["kind"], "config");
    assert!(report["message"].as_str().unwrap().contains("length_m"));

    let out = lessfm(&["complexity", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_report(&out)["kind"], "io");

    let out = lessfm(&["train", &desk(), "--kind", "edc", "--steps", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_changes_the_plan_hash_input() {
    let a = lessfm(&["--dry-run", "run", &desk()]);
    let b = lessfm(&["--dry-run", "--seed", "99", "run", &desk()]);
    let a = String::from_utf8(a.stdout).unwrap();
    let b = String::from_utf8(b.stdout).unwrap();
    assert!(a.contains("master seed 1") && b.contains("master seed 99"));
}

#[test]
fn saved_model_reproduces_recorded_peak() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), LINK);
    let cfg = cfg.to_str().unwrap();
    let out = lessfm(&["run", cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/results.json")).unwrap()).unwrap();
    let record = &results["records"][0];
    let recorded = record["peak_snr_db"].as_f64().unwrap();
    let model = dir.path().join("out").join(record["model_file"].as_str().unwrap());
    assert!(dir.path().join("out/manifest.json").exists());
    assert!(dir.path().join("out/results.csv").exists());

    let out = lessfm(&["eval", model.to_str().unwrap(), cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_ne!(eval["eval_seed"].as_u64(), results["seed"].as_u64());
    let again = eval["peak_snr_db"].as_f64().unwrap();
    assert!((again - recorded).abs() <= 0.05, "run {recorded} dB, eval {again} dB");
}

#[test]
fn train_and_dataset_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &LINK.replace("eval_frames = 12", "eval_frames = 1"));
    let cfg = cfg.to_str().unwrap();
    let out = lessfm(&["train", cfg, "--kind", "lessfm", "--steps", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let model = PathBuf::from(report["model"].as_str().unwrap());
    let m = lessfm_core::dbp::load_model(&model).unwrap();
    assert_eq!(m.num_steps, 2);

    let out = lessfm(&["dataset", cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/datasets/train_n2_p2.json")).unwrap())
            .unwrap();
    let bytes = std::fs::metadata(dir.path().join("out/datasets/train_n2_p2.bin")).unwrap().len();
    let per_frame = (header["rx_samples"].as_u64().unwrap() + header["symbols"].as_u64().unwrap()) * 16;
    assert_eq!(bytes, header["frames"].as_u64().unwrap() * per_frame);
}
