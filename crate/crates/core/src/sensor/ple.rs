//! Resonant-excitation spectrum of the optical doublet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-line spectral model: the A1 resonance plus its A2 partner at a fixed
/// detuning, both with the same width and amplitude, on a flat background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PleModel {
    /// A1 line center (GHz) on the scan axis.
    pub a1_center_ghz: f64,
    /// A2 - A1 detuning (GHz).
    pub a1_a2_detuning_ghz: f64,
    /// Full width at half maximum of each line (MHz).
    pub fwhm_mhz: f64,
    /// Peak amplitude above background (counts/s).
    pub amplitude_counts_per_s: f64,
    /// Flat background (counts/s).
    pub background_counts_per_s: f64,
}

impl Default for PleModel {
    fn default() -> Self {
        PleModel {
            a1_center_ghz: 0.0,
            a1_a2_detuning_ghz: 1.0,
            fwhm_mhz: 80.0,
            amplitude_counts_per_s: 5_000.0,
            background_counts_per_s: 200.0,
        }
    }
}

impl PleModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_mhz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "fwhm_mhz must be positive, got {}",
                self.fwhm_mhz
            )));
        }
        if !(self.amplitude_counts_per_s >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "amplitude must be nonnegative, got {}",
                self.amplitude_counts_per_s
            )));
        }
        if !(self.background_counts_per_s >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "background must be nonnegative, got {}",
                self.background_counts_per_s
            )));
        }
        Ok(())
    }
}

/// Peak-normalized Lorentzian: 1 at the center, 1/2 at `center ± fwhm/2`.
pub(crate) fn lorentzian_peak(f: f64, center: f64, fwhm: f64) -> f64 {
    let h = fwhm / 2.0;
    h * h / ((f - center) * (f - center) + h * h)
}

/// Count rate (counts/s) at each scan frequency (GHz).
pub fn ple_spectrum(model: &PleModel, freqs_ghz: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    let fwhm_ghz = model.fwhm_mhz * 1e-3;
    let a2_center = model.a1_center_ghz + model.a1_a2_detuning_ghz;
    Ok(freqs_ghz
        .iter()
        .map(|&f| {
            model.background_counts_per_s
                + model.amplitude_counts_per_s
                    * (lorentzian_peak(f, model.a1_center_ghz, fwhm_ghz)
                        + lorentzian_peak(f, a2_center, fwhm_ghz))
        })
        .collect())
}
