//! `vsi` — simulate a sensor-instrumented pin-diode, generate synthetic
//! datasets, and invert measured data back to device parameters.
//!
//! Exit codes: 0 success, 2 configuration error, 3 ingestion error,
//! 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vsi_core::config::ExperimentConfig;
use vsi_core::{pipeline, Error};

#[derive(Parser)]
#[command(
    name = "vsi",
    about = "Electrometry with vacancy sensors in a 4H-SiC pin-diode",
    version,
    after_help = "Environment: VSI_SEED overrides the config seed (the --seed flag wins over both); VSI_THREADS caps worker threads."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Field, band, and carrier profiles per voltage.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Synthetic datasets with shot noise, plus the truth sidecar.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every inference on a dataset directory and write report.toml.
    Invert {
        #[arg(long)]
        config: PathBuf,
        /// Directory holding stark_e*.csv (and optionally cv.csv,
        /// timeseries.csv, truth.toml).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Microwave spectra over the bias sweep with a peak-center summary.
    Odmr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sensitivity of a recorded count time series.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        /// Time-series CSV (t_s, counts).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => 2,
        Error::Ingestion { .. } => 3,
        Error::InvalidInput(_)
        | Error::Domain(_)
        | Error::DegenerateData(_)
        | Error::NoOnsetDetected
        | Error::OutOfRange(_)
        | Error::FitFailed { .. } => 4,
        Error::Io(_) => 1,
    }
}

/// Seed precedence: --seed flag, then VSI_SEED, then the config value.
fn apply_seed(cfg: &mut ExperimentConfig, flag: Option<u64>) -> Result<(), Error> {
    if let Ok(raw) = std::env::var("VSI_SEED") {
        let env_seed: u64 = raw
            .parse()
            .map_err(|_| Error::config("VSI_SEED", format!("not a seed: {raw:?}")))?;
        cfg.seed = env_seed;
    }
    if let Some(seed) = flag {
        cfg.seed = seed;
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Simulate { config, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply_seed(&mut cfg, seed)?;
            let run = pipeline::run_simulate(&cfg, &out)?;
            if let Some(warning) = &run.warning {
                eprintln!("warning: {warning}");
            }
            for row in &run.rows {
                println!(
                    "V = {:>6.2} V  x_n = {:.4} um  punch_through = {}",
                    row.voltage_v, row.x_n_um, row.punch_through
                );
            }
            println!(
                "simulate: {} files in {} (V_bi = {:.4} V)",
                run.files.len(),
                out.display(),
                run.v_bi_v
            );
            Ok(())
        }
        Command::Synth { config, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply_seed(&mut cfg, seed)?;
            let run = pipeline::run_synth(&cfg, &out)?;
            println!(
                "synth: {} files in {} (seed {})",
                run.files.len(),
                out.display(),
                run.seed
            );
            Ok(())
        }
        Command::Invert {
            config,
            data,
            out,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply_seed(&mut cfg, seed)?;
            let report = pipeline::run_invert(&cfg, &data, &out)?;
            for emitter in &report.emitters {
                let fit = &emitter.stark_fitted;
                println!(
                    "emitter {:.2} um: |d| = {:.3} +- {:.3} GHz/(MV/m), alpha = {:.4} +- {:.4}",
                    emitter.position_um,
                    fit.d_abs_ghz_per_mv_per_m,
                    fit.sigma_d,
                    fit.alpha_ghz_per_mv_per_m2,
                    fit.sigma_alpha
                );
                match (&emitter.threshold.v_threshold_v, &emitter.threshold.note) {
                    (Some(v), _) => println!(
                        "  onset {:.2} +- {:.2} V",
                        v,
                        emitter.threshold.sigma_v.unwrap_or(0.0)
                    ),
                    (None, Some(note)) => println!("  onset: {note}"),
                    (None, None) => {}
                }
            }
            if let Some(doping) = &report.doping {
                println!(
                    "doping: [{:.2e}, {:.2e}, {:.2e}] cm^-3 from emitter at {:.2} um",
                    doping.n_d_low_cm3,
                    doping.n_d_mid_cm3,
                    doping.n_d_high_cm3,
                    doping.emitter_position_um
                );
            }
            if let Some(s) = &report.sensitivity {
                println!(
                    "sensitivity: {:.2} +- {:.2} kV/m/sqrt(Hz) over {} bins",
                    s.eta_kv_per_m_sqrt_hz, s.sigma_eta, s.bins
                );
            }
            if let Some(t) = &report.truth_comparison {
                println!(
                    "truth: N_D = {:.2e} cm^-3, contained = {:?}",
                    t.n_d_truth_cm3, t.n_d_in_interval
                );
            }
            println!("invert: report written to {}", out.join("report.toml").display());
            Ok(())
        }
        Command::Odmr { config, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            apply_seed(&mut cfg, seed)?;
            let run = pipeline::run_odmr(&cfg, &out)?;
            for row in &run.rows {
                println!(
                    "V = {:>6.2} V  e_local = {:>8.4} MV/m  peak = {:.3} MHz",
                    row.voltage_v, row.e_local_mv_per_m, row.peak_mhz
                );
            }
            println!(
                "odmr: {} files in {} (emitter at {:.2} um)",
                run.files.len(),
                out.display(),
                run.emitter_position_um
            );
            Ok(())
        }
        Command::Sensitivity { config, data, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let est = pipeline::run_sensitivity(&cfg, &data, &out)?;
            println!(
                "sensitivity: {:.3} +- {:.3} kV/m/sqrt(Hz) over {} bins",
                est.eta_kv_per_m_sqrt_hz, est.sigma_eta, est.bins
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe, like other line-oriented tools.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
