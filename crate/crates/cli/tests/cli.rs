//! Exit codes and file behavior of the `vsi` binary.
//!
//! 0 success, 2 config error, 3 ingestion error, 4 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vsi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vsi"))
}

fn bundled_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/pin_diode.toml")
}

/// A small copy of the bundled config for fast runs.
fn small_config(dir: &Path) -> PathBuf {
    let text = fs::read_to_string(bundled_config()).unwrap();
    let text = text.replace(
        "voltages_v = [\n    0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0,\n    11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0, 20.0,\n    21.0, 22.0, 23.0, 24.0, 25.0, 26.0, 27.0, 28.0, 29.0, 30.0,\n]",
        "voltages_v = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 9.0, 14.0, 21.0, 30.0]",
    );
    let text = text.replace("duration_s = 120.0", "duration_s = 10.0");
    let text = text.replace("mw_step_mhz = 0.1", "mw_step_mhz = 0.25");
    assert!(text.contains("voltages_v = [0.0, 1.0"), "replacement failed");
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("process exited with a code")
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = vsi().output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_succeeds_on_the_bundled_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = vsi()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.csv").exists());
    assert!(out_dir.join("field_v00.csv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("punch_through"), "{stdout}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vsi()
        .args(["simulate", "--config", "/nonexistent.toml", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_config_value_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.toml");
    let text = fs::read_to_string(bundled_config())
        .unwrap()
        .replace("position_um = 1.61", "position_um = 99.0");
    fs::write(&cfg_path, text).unwrap();
    let out = vsi()
        .args(["simulate", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("position_um"), "{stderr}");
}

#[test]
fn synth_then_invert_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    let out = vsi()
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("truth.toml").exists());

    let report_dir = tmp.path().join("report");
    let out = vsi()
        .args(["invert", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&report_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report_dir.join("report.toml").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("doping"), "{stdout}");
    assert!(stdout.contains("contained = Some(true)"), "{stdout}");
}

#[test]
fn corrupt_dataset_is_an_ingestion_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    let status = vsi()
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    fs::write(data.join("stark_e0.csv"), "wrong,columns\n1,2\n").unwrap();
    let out = vsi()
        .args(["invert", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(tmp.path().join("report"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stark_e0.csv"), "{stderr}");
}

#[test]
fn degenerate_dataset_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    fs::create_dir_all(&data).unwrap();
    // Schema-valid but unfittable: a single repeated field value.
    for i in 0..2 {
        fs::write(
            data.join(format!("stark_e{i}.csv")),
            "voltage_v,delta_f_ghz\n1.0,0.5\n1.0,0.5\n1.0,0.5\n1.0,0.5\n",
        )
        .unwrap();
    }
    let out = vsi()
        .args(["invert", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(tmp.path().join("report"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 4);
}

#[test]
fn sensitivity_subcommand_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let data = tmp.path().join("data");
    let status = vsi()
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    let out_dir = tmp.path().join("sens");
    let out = vsi()
        .args(["sensitivity", "--config"])
        .arg(&cfg)
        .arg("--data")
        .arg(data.join("timeseries.csv"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("sensitivity.toml").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("kV/m"));
}

#[test]
fn odmr_subcommand_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("odmr");
    let out = vsi()
        .args(["odmr", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("odmr_summary.csv").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("peak ="), "{stdout}");
}

#[test]
fn seed_precedence_flag_over_env_over_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());

    let truth_seed = |dir: &Path| -> String {
        let text = fs::read_to_string(dir.join("truth.toml")).unwrap();
        text.lines()
            .find(|l| l.starts_with("seed"))
            .unwrap()
            .to_string()
    };

    // Config seed (7).
    let d1 = tmp.path().join("d1");
    assert!(vsi()
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&d1)
        .status()
        .unwrap()
        .success());
    assert_eq!(truth_seed(&d1), "seed = 7");

    // VSI_SEED beats the config.
    let d2 = tmp.path().join("d2");
    assert!(vsi()
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&d2)
        .env("VSI_SEED", "101")
        .status()
        .unwrap()
        .success());
    assert_eq!(truth_seed(&d2), "seed = 101");

    // The flag beats VSI_SEED.
    let d3 = tmp.path().join("d3");
    assert!(vsi()
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&d3)
        .arg("--seed")
        .arg("202")
        .env("VSI_SEED", "101")
        .status()
        .unwrap()
        .success());
    assert_eq!(truth_seed(&d3), "seed = 202");

    // Garbage VSI_SEED is a config error.
    let out = vsi()
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("d4"))
        .env("VSI_SEED", "not-a-seed")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert!(vsi()
            .args(["synth", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir)
            .env("VSI_THREADS", if dir == &a { "1" } else { "4" })
            .status()
            .unwrap()
            .success());
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let bytes_a = fs::read(a.join(&name)).unwrap();
        let bytes_b = fs::read(b.join(&name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name:?} differs across runs");
    }
}
