//! Synthetic experiments: forward-model datasets with shot noise,
//! bit-reproducible for a given seed.
//!
//! Every dataset draws from its own generator, seeded from the master seed
//! and a stream name, so datasets are independent of each other and of the
//! order (or thread) in which they are produced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::constants::{mv_per_m_to_v_per_m, ELEMENTARY_CHARGE};
use crate::device::{self, BiasPoint, DeviceStack};
use crate::error::{Error, Result};
use crate::inversion::{fit_lorentzian, sensitivity as estimate_sensitivity, CountTimeSeries, FitResult, SensitivityEstimate};
use crate::sensor::{linewidth_response, odmr_spectrum, ple_spectrum, stark_shift, PleModel};

/// Derive an independent stream seed from the master seed and a label.
/// Kept within 63 bits so seeds echoed in reports serialize everywhere.
pub fn derive_seed(master: u64, stream: &str) -> u64 {
    // FNV-1a over the label, mixed with the master seed.
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in stream.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (hash ^ master.wrapping_mul(0x9e37_79b9_7f4a_7c15)) & (u64::MAX >> 1)
}

/// One synthetic Stark data point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarkPoint {
    pub voltage_v: f64,
    pub delta_f_ghz: f64,
}

/// A synthetic resonant-excitation scan at one bias point.
#[derive(Debug, Clone, PartialEq)]
pub struct PleScan {
    pub voltage_v: f64,
    /// (frequency GHz, counts/s) samples.
    pub samples: Vec<(f64, f64)>,
    /// Line center of the generating model (GHz).
    pub model_center_ghz: f64,
}

/// Scan grid around a predicted center.
fn scan_frequencies(cfg: &ExperimentConfig, center_ghz: f64) -> Vec<f64> {
    let lo = center_ghz - cfg.ple_scan.below_center_ghz;
    let hi = center_ghz + cfg.ple_scan.above_center_ghz;
    let n = ((hi - lo) / cfg.ple_scan.step_ghz).round() as usize + 1;
    (0..n).map(|i| lo + i as f64 * cfg.ple_scan.step_ghz).collect()
}

/// Simulate one PLE scan; Poisson counting noise over the configured dwell
/// when `rng` is given.
pub fn synth_ple_scan(
    model: &PleModel,
    freqs_ghz: &[f64],
    dwell_s: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Vec<(f64, f64)>> {
    let rates = ple_spectrum(model, freqs_ghz)?;
    match rng {
        None => Ok(freqs_ghz.iter().cloned().zip(rates).collect()),
        Some(rng) => {
            if !(dwell_s > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "dwell must be positive for a counting measurement, got {dwell_s}"
                )));
            }
            Ok(freqs_ghz
                .iter()
                .zip(rates)
                .map(|(&f, rate)| {
                    let lambda = (rate * dwell_s).max(1e-12);
                    let counts = Poisson::new(lambda).unwrap().sample(rng);
                    (f, counts / dwell_s)
                })
                .collect())
        }
    }
}

/// Locate the lower-frequency line of the doublet and fit it.
///
/// Candidate peaks are samples above 60% of the background-subtracted
/// maximum; candidates closer than half the doublet detuning merge into one
/// cluster, and the lowest-frequency cluster is taken as the A1 line. The
/// returned fit runs on a +-0.45 GHz window around that cluster's maximum.
pub fn extract_a1_center(scan: &[(f64, f64)], detuning_ghz: f64) -> Result<FitResult> {
    if scan.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "scan too short for line extraction: {} points",
            scan.len()
        )));
    }
    let min_y = scan.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_y = scan.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let threshold = min_y + 0.6 * (max_y - min_y);
    let gap = 0.5 * detuning_ghz;

    let mut clusters: Vec<(f64, f64)> = Vec::new(); // (frequency of max, value)
    let mut last_f = f64::NEG_INFINITY;
    for &(f, y) in scan {
        if y < threshold {
            continue;
        }
        match clusters.last_mut() {
            Some(peak) if f - last_f <= gap => {
                if y > peak.1 {
                    *peak = (f, y);
                }
            }
            _ => clusters.push((f, y)),
        }
        last_f = f;
    }
    let (a1_freq, _) = *clusters
        .first()
        .ok_or_else(|| Error::DegenerateData("no peak rises above the background".into()))?;

    let window: Vec<(f64, f64)> = scan
        .iter()
        .cloned()
        .filter(|(f, _)| (f - a1_freq).abs() <= 0.45)
        .collect();
    fit_lorentzian(&window, None)
}

/// Synthetic shift-vs-voltage dataset for one emitter.
///
/// With noise enabled each point comes from generating a full PLE scan and
/// refitting its A1 line, so the shift noise is the center-fit jitter of a
/// counting measurement. Without noise the shifts equal the forward model
/// exactly. Returns the points and the scans they came from.
pub fn stark_dataset(
    cfg: &ExperimentConfig,
    stack: &DeviceStack,
    emitter_index: usize,
) -> Result<(Vec<StarkPoint>, Vec<PleScan>)> {
    let emitter = cfg
        .experiment
        .emitters
        .get(emitter_index)
        .ok_or_else(|| Error::InvalidInput(format!("no emitter with index {emitter_index}")))?;
    let mut rng = cfg.noise.enabled.then(|| {
        ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("stark/{emitter_index}")))
    });

    let mut points = Vec::with_capacity(cfg.experiment.voltages_v.len());
    let mut scans = Vec::with_capacity(cfg.experiment.voltages_v.len());
    for &v in &cfg.experiment.voltages_v {
        let bias = BiasPoint::new(v);
        let e_local = device::local_field_at_um(stack, bias, emitter.position_um)?;
        let center = stark_shift(e_local, &emitter.stark);
        let n_local = device::electron_density_at_um(stack, bias, emitter.position_um)?;
        let fwhm = linewidth_response(n_local, &cfg.sensor.linewidth)?;
        let model = cfg.sensor.ple.model(center, fwhm);
        let freqs = scan_frequencies(cfg, center);
        let samples = synth_ple_scan(&model, &freqs, cfg.noise.ple_dwell_s, rng.as_mut())?;
        let delta_f = match rng {
            Some(_) => extract_a1_center(&samples, cfg.sensor.ple.a1_a2_detuning_ghz)?
                .value("center")
                .expect("line fit always reports a center"),
            None => center,
        };
        points.push(StarkPoint {
            voltage_v: v,
            delta_f_ghz: delta_f,
        });
        scans.push(PleScan {
            voltage_v: v,
            samples,
            model_center_ghz: center,
        });
    }
    Ok((points, scans))
}

/// Synthetic microwave spectrum at one bias point for the configured
/// ODMR emitter. Shot noise resamples each population from the configured
/// number of readout shots.
pub fn odmr_dataset(
    cfg: &ExperimentConfig,
    stack: &DeviceStack,
    voltage_v: f64,
) -> Result<Vec<(f64, f64)>> {
    let emitter = &cfg.experiment.emitters[cfg.odmr.emitter_index];
    let e_local_mv =
        device::local_field_at_um(stack, BiasPoint::new(voltage_v), emitter.position_um)?;
    let spectrum = odmr_spectrum(
        mv_per_m_to_v_per_m(e_local_mv),
        &cfg.sensor.spin.model(),
        cfg.odmr.rabi_mhz,
        cfg.odmr.duration_us,
        &cfg.odmr.mw_grid_mhz(),
    )?;
    let points: Vec<(f64, f64)> = spectrum
        .mw_frequencies_mhz
        .iter()
        .cloned()
        .zip(spectrum.transfer_population.iter().cloned())
        .collect();
    if !cfg.noise.enabled {
        return Ok(points);
    }
    let shots = cfg.noise.odmr_shots.max(1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        &format!("odmr/{voltage_v}"),
    ));
    Ok(points
        .into_iter()
        .map(|(f, p)| {
            let lambda = (p * shots).max(1e-12);
            let counts = Poisson::new(lambda).unwrap().sample(&mut rng);
            (f, counts / shots)
        })
        .collect())
}

/// Depletion capacitance of the one-sided CV test structure (F).
pub fn cv_capacitance_f(
    n_d_cm3: f64,
    area_cm2: f64,
    v_bi_v: f64,
    voltage_v: f64,
    material: &crate::device::MaterialParams,
) -> Result<f64> {
    let net = v_bi_v - voltage_v;
    if !(net > 0.0) {
        return Err(Error::Domain(format!(
            "CV model needs V below the contact built-in voltage; got {voltage_v} V"
        )));
    }
    let area_m2 = area_cm2 * 1e-4;
    let n_m3 = n_d_cm3 * 1e6;
    Ok(area_m2
        * (ELEMENTARY_CHARGE * material.permittivity_f_per_m() * n_m3 / (2.0 * net)).sqrt())
}

/// Synthetic CV curve of the device's intrinsic-layer doping.
pub fn cv_dataset(cfg: &ExperimentConfig, stack: &DeviceStack) -> Result<Vec<(f64, f64)>> {
    let n_d = stack.donor_concentration_cm3();
    let mut rng = cfg
        .noise
        .enabled
        .then(|| ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "cv")));
    let noise = Normal::new(0.0, cfg.noise.cv_sigma_rel.max(0.0)).unwrap();
    cfg.cv
        .voltages()
        .into_iter()
        .map(|v| {
            let c = cv_capacitance_f(n_d, cfg.cv.area_cm2, cfg.cv.schottky_v_bi_v, v, &stack.material)?;
            let c = match rng.as_mut() {
                Some(rng) if cfg.noise.cv_sigma_rel > 0.0 => c * (1.0 + noise.sample(rng)),
                _ => c,
            };
            Ok((v, c))
        })
        .collect()
}

/// Synthetic photon-count time series at the working point.
pub fn timeseries_dataset(cfg: &ExperimentConfig) -> CountTimeSeries {
    let ts = &cfg.timeseries;
    let n = (ts.duration_s * ts.sample_rate_hz).round() as usize;
    let lambda = ts.rate_counts_per_s / ts.sample_rate_hz;
    let counts = if cfg.noise.enabled {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "timeseries"));
        let dist = Poisson::new(lambda.max(1e-12)).unwrap();
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    } else {
        vec![lambda; n]
    };
    CountTimeSeries::new(counts, ts.sample_rate_hz)
}

/// Sensitivity of the bundled time-series scenario; the Monte Carlo check
/// behind the sensitivity pipeline.
pub fn bundled_sensitivity(cfg: &ExperimentConfig) -> Result<SensitivityEstimate> {
    let series = timeseries_dataset(cfg);
    estimate_sensitivity(
        &series,
        cfg.sensitivity.gradient_counts_per_ghz,
        cfg.sensitivity.d_ghz_per_mv_per_m,
    )
}

/// Generating parameters written next to every synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub seed: u64,
    /// Donor concentration of the intrinsic layer (cm^-3).
    pub n_d_cm3: f64,
    /// Built-in voltage of the generating device (V).
    pub v_bi_v: f64,
    pub emitters: Vec<TruthEmitter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEmitter {
    pub position_um: f64,
    /// Voltage at which the depletion edge reaches this emitter; absent if
    /// the emitter is depleted already at the lowest scanned voltage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub onset_v: Option<f64>,
    pub stark: crate::sensor::StarkParams,
}

/// Assemble the truth sidecar for the configured experiment.
pub fn truth_sidecar(cfg: &ExperimentConfig, stack: &DeviceStack) -> TruthSidecar {
    let v_bi = device::builtin_voltage(stack);
    let n_d = stack.donor_concentration_cm3();
    let scan_min = cfg
        .experiment
        .voltages_v
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let emitters = cfg
        .experiment
        .emitters
        .iter()
        .map(|e| {
            // x_n(V) = x  <=>  V = q N_D x^2 / (2 eps) - V_bi
            let x_m = crate::constants::um_to_m(e.position_um);
            let onset = ELEMENTARY_CHARGE * (n_d * 1e6) * x_m * x_m
                / (2.0 * stack.material.permittivity_f_per_m())
                - v_bi;
            TruthEmitter {
                position_um: e.position_um,
                onset_v: (onset > scan_min).then_some(onset),
                stark: e.stark,
            }
        })
        .collect();
    TruthSidecar {
        seed: cfg.seed,
        n_d_cm3: n_d,
        v_bi_v: v_bi,
        emitters,
    }
}
