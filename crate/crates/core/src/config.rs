//! Experiment configuration: one TOML file drives every subcommand.
//!
//! Keys carry explicit units in their names. Anything not set falls back
//! to the bundled reference values in [`crate::presets`]; see
//! `docs/config_schema.md` for the full key list.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceStack, LayerSpec, MaterialParams};
use crate::error::{Error, Result};
use crate::presets;
use crate::sensor::{LinewidthModel, PleModel, SpinModel, StarkParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every synthetic dataset derives its own stream from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub device: DeviceConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sensor: SensorSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub odmr: OdmrSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub timeseries: TimeSeriesSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub ple_scan: PleScanSection,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub material: MaterialParams,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Reverse-bias sweep (V).
    pub voltages_v: Vec<f64>,
    /// Allowed bias range [min, max] (V).
    pub bias_limits_v: [f64; 2],
    /// Per-point shift noise scale (GHz) assumed by the onset detector.
    pub noise_sigma_ghz: f64,
    pub emitters: Vec<EmitterConfig>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            voltages_v: (0..=30).map(f64::from).collect(),
            bias_limits_v: [-3.5, 60.0],
            noise_sigma_ghz: 0.01,
            emitters: vec![
                EmitterConfig {
                    position_um: presets::INNER_EMITTER_UM,
                    sigma_um: presets::EMITTER_SIGMA_UM,
                    stark: presets::stark_inner_emitter(),
                },
                EmitterConfig {
                    position_um: presets::OUTER_EMITTER_UM,
                    sigma_um: presets::EMITTER_SIGMA_UM,
                    stark: presets::stark_outer_emitter(),
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    /// Distance from the p⁺⁺/intrinsic interface (um).
    pub position_um: f64,
    /// 1-sigma position uncertainty (um).
    pub sigma_um: f64,
    pub stark: StarkParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub spin: SpinConfig,
    pub ple: PleConfig,
    pub linewidth: LinewidthModel,
}

impl Default for SensorSection {
    fn default() -> Self {
        SensorSection {
            spin: SpinConfig::default(),
            ple: PleConfig::default(),
            linewidth: presets::linewidth_model(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    /// Half the zero-field splitting (MHz).
    pub d_mhz: f64,
    /// Measured shift of the spin transition per axial field (Hz per V/m).
    pub peak_shift_gradient_hz_per_v_per_m: f64,
    /// Direct Hamiltonian coupling override (Hz per V/m). When set it wins
    /// over the gradient interpretation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dz_hz_per_v_per_m: Option<f64>,
}

impl Default for SpinConfig {
    fn default() -> Self {
        SpinConfig {
            d_mhz: 35.0,
            peak_shift_gradient_hz_per_v_per_m: -0.07,
            dz_hz_per_v_per_m: None,
        }
    }
}

impl SpinConfig {
    pub fn model(&self) -> SpinModel {
        match self.dz_hz_per_v_per_m {
            Some(dz) => SpinModel {
                d_mhz: self.d_mhz,
                dz_hz_per_v_per_m: dz,
            },
            None => SpinModel::from_peak_shift_gradient(
                self.d_mhz,
                self.peak_shift_gradient_hz_per_v_per_m,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PleConfig {
    pub a1_a2_detuning_ghz: f64,
    pub amplitude_counts_per_s: f64,
    pub background_counts_per_s: f64,
    /// Fixed linewidth override (MHz); without it the linewidth model
    /// supplies the width from the local charge density.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fwhm_mhz: Option<f64>,
}

impl Default for PleConfig {
    fn default() -> Self {
        let model = PleModel::default();
        PleConfig {
            a1_a2_detuning_ghz: model.a1_a2_detuning_ghz,
            amplitude_counts_per_s: model.amplitude_counts_per_s,
            background_counts_per_s: model.background_counts_per_s,
            fwhm_mhz: None,
        }
    }
}

impl PleConfig {
    /// PLE model at a given line center and width.
    pub fn model(&self, a1_center_ghz: f64, fwhm_mhz: f64) -> PleModel {
        PleModel {
            a1_center_ghz,
            a1_a2_detuning_ghz: self.a1_a2_detuning_ghz,
            fwhm_mhz: self.fwhm_mhz.unwrap_or(fwhm_mhz),
            amplitude_counts_per_s: self.amplitude_counts_per_s,
            background_counts_per_s: self.background_counts_per_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Master switch; off means every dataset equals the forward model.
    pub enabled: bool,
    /// Dwell per PLE scan point (s); sets the Poisson counting window.
    pub ple_dwell_s: f64,
    /// Readout shots per ODMR frequency point.
    pub odmr_shots: u64,
    /// Relative Gaussian noise on synthetic capacitance values.
    pub cv_sigma_rel: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            enabled: true,
            ple_dwell_s: 0.05,
            odmr_shots: 20_000,
            cv_sigma_rel: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdmrSection {
    pub mw_start_mhz: f64,
    pub mw_stop_mhz: f64,
    pub mw_step_mhz: f64,
    pub rabi_mhz: f64,
    /// Drive duration (us). The default is the pi-pulse for the default
    /// Rabi rate.
    pub duration_us: f64,
    /// Index into `experiment.emitters` of the probed emitter.
    pub emitter_index: usize,
}

impl Default for OdmrSection {
    fn default() -> Self {
        OdmrSection {
            mw_start_mhz: 60.0,
            mw_stop_mhz: 80.0,
            mw_step_mhz: 0.1,
            rabi_mhz: 0.5,
            duration_us: 1.1547,
            emitter_index: 1,
        }
    }
}

impl OdmrSection {
    pub fn mw_grid_mhz(&self) -> Vec<f64> {
        let n = ((self.mw_stop_mhz - self.mw_start_mhz) / self.mw_step_mhz).round() as usize + 1;
        (0..n)
            .map(|i| self.mw_start_mhz + i as f64 * self.mw_step_mhz)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    /// Schottky contact area (cm^2).
    pub area_cm2: f64,
    /// Built-in voltage of the CV test contact (V).
    pub schottky_v_bi_v: f64,
    pub v_start: f64,
    pub v_stop: f64,
    pub v_step: f64,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection {
            area_cm2: 9e-4, // (300 um)^2
            schottky_v_bi_v: 1.0,
            v_start: -3.0,
            v_stop: 0.4,
            v_step: 0.05,
        }
    }
}

impl CvSection {
    pub fn voltages(&self) -> Vec<f64> {
        let n = ((self.v_stop - self.v_start) / self.v_step).round() as usize + 1;
        (0..n).map(|i| self.v_start + i as f64 * self.v_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSeriesSection {
    pub rate_counts_per_s: f64,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
}

impl Default for TimeSeriesSection {
    fn default() -> Self {
        TimeSeriesSection {
            rate_counts_per_s: 1e4,
            sample_rate_hz: 100.0,
            duration_s: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    /// Scan gradient at the working point (counts/s per GHz).
    pub gradient_counts_per_ghz: f64,
    /// Linear Stark coefficient used for the conversion (GHz per MV/m).
    pub d_ghz_per_mv_per_m: f64,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        SensitivitySection {
            gradient_counts_per_ghz: 1.29e4,
            d_ghz_per_mv_per_m: presets::stark_outer_emitter().d_ghz_per_mv_per_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PleScanSection {
    /// Scan extent below the predicted line center (GHz).
    pub below_center_ghz: f64,
    /// Scan extent above the predicted line center (GHz).
    pub above_center_ghz: f64,
    pub step_ghz: f64,
}

impl Default for PleScanSection {
    fn default() -> Self {
        PleScanSection {
            below_center_ghz: 1.2,
            above_center_ghz: 2.0,
            step_ghz: 0.02,
        }
    }
}

impl Default for ExperimentConfig {
    /// The bundled reference experiment.
    fn default() -> Self {
        let stack = presets::pin_diode();
        ExperimentConfig {
            seed: default_seed(),
            device: DeviceConfig {
                material: stack.material.clone(),
                layers: stack.layers().to_vec(),
            },
            experiment: ExperimentSection::default(),
            sensor: SensorSection::default(),
            noise: NoiseSection::default(),
            odmr: OdmrSection::default(),
            cv: CvSection::default(),
            timeseries: TimeSeriesSection::default(),
            sensitivity: SensitivitySection::default(),
            ple_scan: PleScanSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse and validate a TOML configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(path.display().to_string(), format!("cannot read file: {e}"))
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        cfg.validate()
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Ok(cfg)
    }

    /// Cross-field validation. Field-level invariants live on the domain
    /// types; this enforces the experiment-level ones.
    pub fn validate(&self) -> Result<()> {
        let stack = self.device()?;
        let width = stack.intrinsic_width_um();
        for (i, emitter) in self.experiment.emitters.iter().enumerate() {
            if !(emitter.position_um > 0.0 && emitter.position_um < width) {
                return Err(Error::config(
                    format!("experiment.emitters[{i}].position_um"),
                    format!(
                        "emitter at {} um lies outside the intrinsic layer (0, {width})",
                        emitter.position_um
                    ),
                ));
            }
            if !(emitter.sigma_um >= 0.0) {
                return Err(Error::config(
                    format!("experiment.emitters[{i}].sigma_um"),
                    "position uncertainty must be nonnegative".to_string(),
                ));
            }
            emitter.stark.validate()?;
        }
        let [lo, hi] = self.experiment.bias_limits_v;
        if !(lo < hi) {
            return Err(Error::config(
                "experiment.bias_limits_v",
                format!("limits must satisfy min < max, got [{lo}, {hi}]"),
            ));
        }
        for (i, v) in self.experiment.voltages_v.iter().enumerate() {
            if !(lo..=hi).contains(v) {
                return Err(Error::config(
                    format!("experiment.voltages_v[{i}]"),
                    format!("voltage {v} V outside the bias limits [{lo}, {hi}]"),
                ));
            }
        }
        if !(self.experiment.noise_sigma_ghz >= 0.0) {
            return Err(Error::config(
                "experiment.noise_sigma_ghz",
                "noise sigma must be nonnegative".to_string(),
            ));
        }
        if self.odmr.emitter_index >= self.experiment.emitters.len() {
            return Err(Error::config(
                "odmr.emitter_index",
                format!(
                    "index {} out of range for {} emitters",
                    self.odmr.emitter_index,
                    self.experiment.emitters.len()
                ),
            ));
        }
        if !(self.odmr.mw_step_mhz > 0.0) || !(self.odmr.mw_stop_mhz > self.odmr.mw_start_mhz) {
            return Err(Error::config(
                "odmr",
                "microwave grid must have positive step and stop > start".to_string(),
            ));
        }
        if !(self.ple_scan.step_ghz > 0.0) {
            return Err(Error::config(
                "ple_scan.step_ghz",
                "scan step must be positive".to_string(),
            ));
        }
        self.sensor.linewidth.validate()?;
        self.sensor.spin.model().validate()?;
        Ok(())
    }

    /// Build the validated device stack.
    pub fn device(&self) -> Result<DeviceStack> {
        DeviceStack::new(self.device.layers.clone(), self.device.material.clone())
    }
}
