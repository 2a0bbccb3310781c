//! End-to-end runs behind the command-line tool: simulate the device,
//! generate synthetic datasets, invert measured or synthetic data back to
//! device parameters, and sweep microwave spectra.
//!
//! Every artifact is written atomically. Work that fans out per voltage
//! derives an independent seed per item, so results do not depend on the
//! thread count (`VSI_THREADS`).

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::device::{self, BiasPoint};
use crate::error::{Error, Result};
use crate::inversion::{
    cv_doping, detect_threshold, doping_uncertainty, fit_lorentzian, fit_stark, reconstruct_field,
    sensitivity, stark_params_from_fit, CountTimeSeries, CvCurve, SensitivityEstimate,
};
use crate::io;
use crate::synth;

/// Worker threads for per-voltage fan-out. `VSI_THREADS` overrides the
/// machine default.
pub fn thread_count() -> Result<usize> {
    match std::env::var("VSI_THREADS") {
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                Error::config("VSI_THREADS", format!("not a thread count: {raw:?}"))
            })?;
            if n == 0 {
                return Err(Error::config("VSI_THREADS", "must be at least 1"));
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Order-preserving parallel map over `items` on `threads` workers.
pub fn map_parallel<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let mut results: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for (c, out_chunk) in results.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in out_chunk.iter_mut().enumerate() {
                    let idx = c * chunk + j;
                    *slot = Some(f(idx, &items[idx]));
                }
            });
        }
    });
    results.into_iter().map(Option::unwrap).collect()
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoltageSummary {
    pub voltage_v: f64,
    pub x_n_um: f64,
    pub punch_through: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateRun {
    pub v_bi_v: f64,
    pub rows: Vec<VoltageSummary>,
    pub files: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Field, band, and carrier profiles per voltage, plus a sweep summary.
pub fn run_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SimulateRun> {
    let stack = cfg.device()?;
    let voltages = &cfg.experiment.voltages_v;
    if voltages.is_empty() {
        return Ok(SimulateRun {
            v_bi_v: device::builtin_voltage(&stack),
            rows: Vec::new(),
            files: Vec::new(),
            warning: Some("empty voltage list: nothing to simulate".into()),
        });
    }
    let threads = thread_count()?;
    let per_voltage = map_parallel(voltages, threads, |k, &v| -> Result<_> {
        let bias = BiasPoint::new(v);
        let field = device::field_profile(&stack, bias)?;
        let bands = device::band_diagram(&stack, bias)?;
        let carriers = device::carrier_profile(&stack, bias)?;

        let field_path = out_dir.join(format!("field_v{k:02}.csv"));
        io::write_columns_csv(
            &field_path,
            &["position_um", "e_macro_mv_per_m", "e_local_mv_per_m"],
            &[
                &field.positions_um,
                &field.e_macro_mv_per_m,
                &field.e_local_mv_per_m,
            ],
        )?;
        let band_path = out_dir.join(format!("band_v{k:02}.csv"));
        io::write_columns_csv(
            &band_path,
            &["position_um", "valence_ev", "conduction_ev"],
            &[&bands.positions_um, &bands.valence_ev, &bands.conduction_ev],
        )?;
        let carrier_path = out_dir.join(format!("carrier_v{k:02}.csv"));
        io::write_columns_csv(
            &carrier_path,
            &["position_um", "n_cm3"],
            &[&carriers.positions_um, &carriers.n_cm3],
        )?;
        Ok((
            VoltageSummary {
                voltage_v: v,
                x_n_um: field.depletion_edge_um,
                punch_through: field.punch_through,
            },
            field.v_bi_v,
            vec![field_path, band_path, carrier_path],
        ))
    });

    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut v_bi = device::builtin_voltage(&stack);
    for item in per_voltage {
        let (row, vb, mut paths) = item?;
        rows.push(row);
        v_bi = vb;
        files.append(&mut paths);
    }

    let summary_path = out_dir.join("summary.csv");
    let mut text = String::from("voltage_v,x_n_um,punch_through,v_bi_v\n");
    for row in &rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            row.voltage_v, row.x_n_um, row.punch_through, v_bi
        ));
    }
    io::atomic_write(&summary_path, text.as_bytes())?;
    files.push(summary_path);

    Ok(SimulateRun {
        v_bi_v: v_bi,
        rows,
        files,
        warning: None,
    })
}

// ---------------------------------------------------------------------------
// synth

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthRun {
    pub seed: u64,
    pub files: Vec<PathBuf>,
}

/// Generate every synthetic dataset plus the truth sidecar and a
/// declarative plot list.
pub fn run_synth(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SynthRun> {
    let stack = cfg.device()?;
    let mut files = Vec::new();
    let mut plots = String::new();

    for (i, _) in cfg.experiment.emitters.iter().enumerate() {
        let (points, scans) = synth::stark_dataset(cfg, &stack, i)?;
        let stark_path = out_dir.join(format!("stark_e{i}.csv"));
        let pairs: Vec<(f64, f64)> = points
            .iter()
            .map(|p| (p.voltage_v, p.delta_f_ghz))
            .collect();
        io::write_xy_csv(&stark_path, "voltage_v", "delta_f_ghz", &pairs)?;
        plots.push_str(&plot_entry(
            &format!("stark_e{i}.csv"),
            "voltage_v",
            "delta_f_ghz",
            "scatter",
            &format!(
                "A1 shift vs bias, emitter at {} um",
                cfg.experiment.emitters[i].position_um
            ),
        ));
        files.push(stark_path);
        for (k, scan) in scans.iter().enumerate() {
            let path = out_dir.join(format!("ple_e{i}_v{k:02}.csv"));
            io::write_xy_csv(&path, "frequency_ghz", "counts_per_s", &scan.samples)?;
            files.push(path);
        }
    }

    let threads = thread_count()?;
    let odmr_sets = map_parallel(&cfg.experiment.voltages_v, threads, |_, &v| {
        synth::odmr_dataset(cfg, &stack, v)
    });
    for (k, set) in odmr_sets.into_iter().enumerate() {
        let path = out_dir.join(format!("odmr_v{k:02}.csv"));
        io::write_xy_csv(&path, "frequency_mhz", "population", &set?)?;
        files.push(path);
    }

    let cv = synth::cv_dataset(cfg, &stack)?;
    let cv_path = out_dir.join("cv.csv");
    io::write_xy_csv(&cv_path, "voltage_v", "capacitance_f", &cv)?;
    plots.push_str(&plot_entry(
        "cv.csv",
        "voltage_v",
        "capacitance_f",
        "line",
        "capacitance vs bias",
    ));
    files.push(cv_path);

    let series = synth::timeseries_dataset(cfg);
    let ts_path = out_dir.join("timeseries.csv");
    let samples: Vec<(f64, f64)> = series
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (i as f64 / series.sample_rate_hz, c))
        .collect();
    io::write_xy_csv(&ts_path, "t_s", "counts", &samples)?;
    plots.push_str(&plot_entry(
        "timeseries.csv",
        "t_s",
        "counts",
        "line",
        "counts at the working point",
    ));
    files.push(ts_path);

    let truth = synth::truth_sidecar(cfg, &stack);
    let truth_path = out_dir.join("truth.toml");
    let truth_text = toml::to_string_pretty(&truth)
        .map_err(|e| Error::config("truth sidecar", e.to_string()))?;
    io::atomic_write(&truth_path, truth_text.as_bytes())?;
    files.push(truth_path);

    let plots_path = out_dir.join("plots.toml");
    io::atomic_write(&plots_path, plots.as_bytes())?;
    files.push(plots_path);

    Ok(SynthRun {
        seed: cfg.seed,
        files,
    })
}

fn plot_entry(file: &str, x: &str, y: &str, kind: &str, title: &str) -> String {
    format!("[[plot]]\nfile = {file:?}\nx = {x:?}\ny = {y:?}\nkind = {kind:?}\ntitle = {title:?}\n\n")
}

// ---------------------------------------------------------------------------
// invert

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub inputs: ReportInputs,
    pub emitters: Vec<EmitterReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doping: Option<DopingReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth_comparison: Option<TruthComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportInputs {
    /// Doping assumed by the field simulation that converts voltages into
    /// local fields (cm^-3).
    pub assumed_n_d_cm3: f64,
    pub v_bi_v: f64,
    pub noise_sigma_ghz: f64,
    pub bootstrap_resamples: usize,
    pub threshold_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmitterReport {
    pub position_um: f64,
    pub sigma_x_um: f64,
    /// Fitted Stark parameters (provenance: fitted).
    pub stark_fitted: StarkFitReport,
    pub threshold: ThresholdReport,
    pub rows: Vec<FieldRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StarkFitReport {
    pub d_ghz_per_mv_per_m: f64,
    /// |d|, the conventionally quoted magnitude.
    pub d_abs_ghz_per_mv_per_m: f64,
    pub sigma_d: f64,
    pub alpha_ghz_per_mv_per_m2: f64,
    pub sigma_alpha: f64,
    pub f0_ghz: f64,
    pub sigma_f0: f64,
    pub residual_sse: f64,
    pub n_points: usize,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub detected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_threshold_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_ghz_per_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRow {
    /// Bias (V); absent when the dataset is keyed by field instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voltage_v: Option<f64>,
    /// Measured shift (provenance: measured/synthetic data).
    pub delta_f_ghz: f64,
    /// Field from the device simulation (provenance: simulated).
    pub e_local_mv_per_m_simulated: f64,
    /// Field recovered from the shift (provenance: fitted).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_local_mv_per_m_reconstructed: Option<f64>,
    pub reconstruction_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DopingReport {
    pub emitter_position_um: f64,
    pub sigma_x_um: f64,
    pub v_threshold_v: f64,
    pub sigma_v: f64,
    pub v_bi_v: f64,
    pub n_d_low_cm3: f64,
    pub n_d_mid_cm3: f64,
    pub n_d_high_cm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub eta_kv_per_m_sqrt_hz: f64,
    pub sigma_eta: f64,
    pub bins: usize,
    pub gradient_counts_per_ghz: f64,
    pub d_ghz_per_mv_per_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub n_points: usize,
    pub flagged_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_n_d_cm3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthComparison {
    pub n_d_truth_cm3: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_d_in_interval: Option<bool>,
    pub emitters: Vec<EmitterTruthComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmitterTruthComparison {
    pub position_um: f64,
    pub d_truth_ghz_per_mv_per_m: f64,
    pub d_error_ghz_per_mv_per_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub onset_truth_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_error_v: Option<f64>,
}

/// Run every inference on a dataset directory and write `report.toml`.
pub fn run_invert(cfg: &ExperimentConfig, data_dir: &Path, out_dir: &Path) -> Result<PipelineReport> {
    let stack = cfg.device()?;
    let v_bi = device::builtin_voltage(&stack);
    let threshold_seed = synth::derive_seed(cfg.seed, "threshold");

    let mut emitters = Vec::new();
    let mut doping: Option<DopingReport> = None;
    for (i, emitter) in cfg.experiment.emitters.iter().enumerate() {
        let path = data_dir.join(format!("stark_e{i}.csv"));
        let (x_label, data) =
            io::read_xy_csv(&path, &["voltage_v", "e_local_mv_per_m"], "delta_f_ghz")?;
        let voltage_keyed = x_label == "voltage_v";

        // (field, shift) pairs for the Stark fit; keep voltages for the
        // onset scan when present.
        let mut field_shift = Vec::with_capacity(data.len());
        for &(x, df) in &data {
            let e = if voltage_keyed {
                device::local_field_at_um(&stack, BiasPoint::new(x), emitter.position_um)?
            } else {
                x
            };
            field_shift.push((e, df));
        }
        let fit = fit_stark(&field_shift, None)?;
        let fitted = stark_params_from_fit(&fit)?;

        let rows: Vec<FieldRow> = data
            .iter()
            .zip(&field_shift)
            .map(|(&(x, df), &(e_sim, _))| {
                let rec = reconstruct_field(df, &fitted).ok();
                FieldRow {
                    voltage_v: voltage_keyed.then_some(x),
                    delta_f_ghz: df,
                    e_local_mv_per_m_simulated: e_sim,
                    e_local_mv_per_m_reconstructed: rec.map(|r| r.e_local_mv_per_m),
                    reconstruction_flagged: rec.is_some_and(|r| r.flagged),
                }
            })
            .collect();

        let scan_min_v = data
            .iter()
            .map(|p| p.0)
            .fold(f64::INFINITY, f64::min);
        let threshold = if voltage_keyed {
            match detect_threshold(&data, cfg.experiment.noise_sigma_ghz, threshold_seed) {
                // A breakpoint at the lowest scanned voltage means the
                // shift was already moving when the scan began: the onset
                // precedes the scan and no in-range threshold exists.
                Ok(est) if est.v_threshold_v <= scan_min_v => ThresholdReport {
                    detected: false,
                    v_threshold_v: None,
                    sigma_v: None,
                    slope_ghz_per_v: Some(est.slope_ghz_per_v),
                    note: Some("onset precedes the scanned range".into()),
                },
                Ok(est) => {
                    if doping.is_none() {
                        let interval = doping_uncertainty(
                            est.v_threshold_v,
                            est.sigma_v,
                            emitter.position_um,
                            emitter.sigma_um,
                            v_bi,
                            &stack.material,
                        )?;
                        doping = Some(DopingReport {
                            emitter_position_um: emitter.position_um,
                            sigma_x_um: emitter.sigma_um,
                            v_threshold_v: est.v_threshold_v,
                            sigma_v: est.sigma_v,
                            v_bi_v: v_bi,
                            n_d_low_cm3: interval.low_cm3,
                            n_d_mid_cm3: interval.mid_cm3,
                            n_d_high_cm3: interval.high_cm3,
                        });
                    }
                    ThresholdReport {
                        detected: true,
                        v_threshold_v: Some(est.v_threshold_v),
                        sigma_v: Some(est.sigma_v),
                        slope_ghz_per_v: Some(est.slope_ghz_per_v),
                        note: None,
                    }
                }
                Err(Error::NoOnsetDetected) => ThresholdReport {
                    detected: false,
                    v_threshold_v: None,
                    sigma_v: None,
                    slope_ghz_per_v: None,
                    note: Some("no onset in the scanned range".into()),
                },
                Err(e) => return Err(e),
            }
        } else {
            ThresholdReport {
                detected: false,
                v_threshold_v: None,
                sigma_v: None,
                slope_ghz_per_v: None,
                note: Some("dataset keyed by field; onset detection needs voltages".into()),
            }
        };

        emitters.push(EmitterReport {
            position_um: emitter.position_um,
            sigma_x_um: emitter.sigma_um,
            stark_fitted: StarkFitReport {
                d_ghz_per_mv_per_m: fitted.d_ghz_per_mv_per_m,
                d_abs_ghz_per_mv_per_m: fitted.d_ghz_per_mv_per_m.abs(),
                sigma_d: fitted.sigma_d,
                alpha_ghz_per_mv_per_m2: fitted.alpha_ghz_per_mv_per_m2,
                sigma_alpha: fitted.sigma_alpha,
                f0_ghz: fitted.f0_ghz,
                sigma_f0: fitted.sigma_f0,
                residual_sse: fit.residual_sse,
                n_points: data.len(),
                covariance: fit.covariance.clone(),
            },
            threshold,
            rows,
        });
    }

    let sensitivity_report = {
        let ts_path = data_dir.join("timeseries.csv");
        if ts_path.exists() {
            let (_, samples) = io::read_xy_csv(&ts_path, &["t_s"], "counts")?;
            if samples.len() < 2 {
                return Err(Error::ingestion(
                    ts_path.display().to_string(),
                    2,
                    "t_s",
                    "need at least 2 samples".to_string(),
                ));
            }
            let dt = samples[1].0 - samples[0].0;
            if !(dt > 0.0) {
                return Err(Error::ingestion(
                    ts_path.display().to_string(),
                    3,
                    "t_s",
                    "time stamps must increase".to_string(),
                ));
            }
            let series =
                CountTimeSeries::new(samples.iter().map(|s| s.1).collect(), 1.0 / dt);
            let est = sensitivity(
                &series,
                cfg.sensitivity.gradient_counts_per_ghz,
                cfg.sensitivity.d_ghz_per_mv_per_m,
            )?;
            Some(SensitivityReport {
                eta_kv_per_m_sqrt_hz: est.eta_kv_per_m_sqrt_hz,
                sigma_eta: est.sigma_eta,
                bins: est.bins,
                gradient_counts_per_ghz: cfg.sensitivity.gradient_counts_per_ghz,
                d_ghz_per_mv_per_m: cfg.sensitivity.d_ghz_per_mv_per_m,
            })
        } else {
            None
        }
    };

    let cv_report = {
        let cv_path = data_dir.join("cv.csv");
        if cv_path.exists() {
            let (_, samples) = io::read_xy_csv(&cv_path, &["voltage_v"], "capacitance_f")?;
            let curve = CvCurve {
                samples,
                contact_area_cm2: cfg.cv.area_cm2,
            };
            let points = cv_doping(&curve, &stack.material)?;
            let mut densities: Vec<f64> = points.iter().filter_map(|p| p.n_d_cm3).collect();
            densities.sort_by(f64::total_cmp);
            let unflagged: Vec<(f64, f64)> = points
                .iter()
                .filter_map(|p| p.n_d_cm3.map(|n| (p.voltage_v, n)))
                .collect();
            io::write_xy_csv(&out_dir.join("cv_doping.csv"), "voltage_v", "n_d_cm3", &unflagged)?;
            Some(CvReport {
                n_points: points.len(),
                flagged_points: points.len() - densities.len(),
                median_n_d_cm3: (!densities.is_empty())
                    .then(|| densities[densities.len() / 2]),
            })
        } else {
            None
        }
    };

    let truth_comparison = {
        let truth_path = data_dir.join("truth.toml");
        if truth_path.exists() {
            let text = std::fs::read_to_string(&truth_path)?;
            let truth: synth::TruthSidecar = toml::from_str(&text)
                .map_err(|e| Error::config(truth_path.display().to_string(), e.to_string()))?;
            let n_d_in_interval = doping
                .as_ref()
                .map(|d| d.n_d_low_cm3 <= truth.n_d_cm3 && truth.n_d_cm3 <= d.n_d_high_cm3);
            let per_emitter = truth
                .emitters
                .iter()
                .zip(&emitters)
                .map(|(t, e)| EmitterTruthComparison {
                    position_um: t.position_um,
                    d_truth_ghz_per_mv_per_m: t.stark.d_ghz_per_mv_per_m,
                    d_error_ghz_per_mv_per_m: e.stark_fitted.d_ghz_per_mv_per_m
                        - t.stark.d_ghz_per_mv_per_m,
                    onset_truth_v: t.onset_v,
                    threshold_error_v: match (t.onset_v, e.threshold.v_threshold_v) {
                        (Some(truth_v), Some(est_v)) => Some(est_v - truth_v),
                        _ => None,
                    },
                })
                .collect();
            Some(TruthComparison {
                n_d_truth_cm3: truth.n_d_cm3,
                n_d_in_interval,
                emitters: per_emitter,
            })
        } else {
            None
        }
    };

    let report = PipelineReport {
        seed: cfg.seed,
        inputs: ReportInputs {
            assumed_n_d_cm3: stack.donor_concentration_cm3(),
            v_bi_v: v_bi,
            noise_sigma_ghz: cfg.experiment.noise_sigma_ghz,
            bootstrap_resamples: crate::inversion::BOOTSTRAP_RESAMPLES,
            threshold_seed,
        },
        emitters,
        doping,
        sensitivity: sensitivity_report,
        cv: cv_report,
        truth_comparison,
    };
    let text = toml::to_string_pretty(&report)
        .map_err(|e| Error::config("report", e.to_string()))?;
    io::atomic_write(&out_dir.join("report.toml"), text.as_bytes())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// odmr

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdmrSweepRow {
    pub voltage_v: f64,
    pub e_local_mv_per_m: f64,
    pub peak_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdmrRun {
    pub emitter_position_um: f64,
    pub rows: Vec<OdmrSweepRow>,
    pub files: Vec<PathBuf>,
}

/// Microwave spectra over the bias sweep, with a fitted peak-center
/// summary table.
pub fn run_odmr(cfg: &ExperimentConfig, out_dir: &Path) -> Result<OdmrRun> {
    let stack = cfg.device()?;
    let emitter = &cfg.experiment.emitters[cfg.odmr.emitter_index];
    let grid = cfg.odmr.mw_grid_mhz();
    let spin = cfg.sensor.spin.model();
    let threads = thread_count()?;

    let per_voltage = map_parallel(&cfg.experiment.voltages_v, threads, |k, &v| -> Result<_> {
        let e_local = device::local_field_at_um(&stack, BiasPoint::new(v), emitter.position_um)?;
        let spectrum = crate::sensor::odmr_spectrum(
            crate::constants::mv_per_m_to_v_per_m(e_local),
            &spin,
            cfg.odmr.rabi_mhz,
            cfg.odmr.duration_us,
            &grid,
        )?;
        let points: Vec<(f64, f64)> = spectrum
            .mw_frequencies_mhz
            .iter()
            .cloned()
            .zip(spectrum.transfer_population.iter().cloned())
            .collect();
        let path = out_dir.join(format!("odmr_v{k:02}.csv"));
        io::write_xy_csv(&path, "frequency_mhz", "population", &points)?;
        let fit = fit_lorentzian(&points, None)?;
        Ok((
            OdmrSweepRow {
                voltage_v: v,
                e_local_mv_per_m: e_local,
                peak_mhz: fit.value("center").expect("line fit reports a center"),
            },
            path,
        ))
    });

    let mut rows = Vec::new();
    let mut files = Vec::new();
    for item in per_voltage {
        let (row, path) = item?;
        rows.push(row);
        files.push(path);
    }
    let summary_path = out_dir.join("odmr_summary.csv");
    io::write_columns_csv(
        &summary_path,
        &["voltage_v", "e_local_mv_per_m", "peak_mhz"],
        &[
            &rows.iter().map(|r| r.voltage_v).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.e_local_mv_per_m).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.peak_mhz).collect::<Vec<_>>(),
        ],
    )?;
    files.push(summary_path);
    Ok(OdmrRun {
        emitter_position_um: emitter.position_um,
        rows,
        files,
    })
}

// ---------------------------------------------------------------------------
// sensitivity

/// Estimate the sensitivity of a recorded count time series and write
/// `sensitivity.toml`.
pub fn run_sensitivity(
    cfg: &ExperimentConfig,
    data_path: &Path,
    out_dir: &Path,
) -> Result<SensitivityEstimate> {
    let (_, samples) = io::read_xy_csv(data_path, &["t_s"], "counts")?;
    if samples.len() < 2 {
        return Err(Error::ingestion(
            data_path.display().to_string(),
            2,
            "t_s",
            "need at least 2 samples".to_string(),
        ));
    }
    let dt = samples[1].0 - samples[0].0;
    if !(dt > 0.0) {
        return Err(Error::ingestion(
            data_path.display().to_string(),
            3,
            "t_s",
            "time stamps must increase".to_string(),
        ));
    }
    let series = CountTimeSeries::new(samples.iter().map(|s| s.1).collect(), 1.0 / dt);
    let est = sensitivity(
        &series,
        cfg.sensitivity.gradient_counts_per_ghz,
        cfg.sensitivity.d_ghz_per_mv_per_m,
    )?;
    let report = SensitivityReport {
        eta_kv_per_m_sqrt_hz: est.eta_kv_per_m_sqrt_hz,
        sigma_eta: est.sigma_eta,
        bins: est.bins,
        gradient_counts_per_ghz: cfg.sensitivity.gradient_counts_per_ghz,
        d_ghz_per_mv_per_m: cfg.sensitivity.d_ghz_per_mv_per_m,
    };
    let text = toml::to_string_pretty(&report)
        .map_err(|e| Error::config("sensitivity report", e.to_string()))?;
    io::atomic_write(&out_dir.join("sensitivity.toml"), text.as_bytes())?;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_preserves_order_and_matches_serial() {
        let items: Vec<u64> = (0..23).collect();
        let serial = map_parallel(&items, 1, |i, &x| (i as u64) * 100 + x * x);
        for threads in [2, 3, 8, 64] {
            let parallel = map_parallel(&items, threads, |i, &x| (i as u64) * 100 + x * x);
            assert_eq!(serial, parallel);
        }
        let empty: Vec<u64> = Vec::new();
        assert!(map_parallel(&empty, 4, |_, &x| x).is_empty());
    }

    #[test]
    fn thread_count_env_override() {
        // Serialized with other env tests by cargo's per-test threads being
        // irrelevant here: set, check, restore.
        std::env::set_var("VSI_THREADS", "3");
        assert_eq!(thread_count().unwrap(), 3);
        std::env::set_var("VSI_THREADS", "zero");
        assert!(thread_count().is_err());
        std::env::remove_var("VSI_THREADS");
        assert!(thread_count().unwrap() >= 1);
    }
}
