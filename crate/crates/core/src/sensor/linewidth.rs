//! Phenomenological optical linewidth vs local free-charge density.
//!
//! The measured endpoints pin a depleted plateau near 80 MHz and an
//! undepleted value near 205 MHz at the reference doping; in between the
//! model interpolates with a logistic in log10(n). The crossover density
//! and steepness are calibration knobs, not measured quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinewidthModel {
    /// Linewidth with the charge environment depleted (MHz).
    pub gamma_depleted_mhz: f64,
    /// Linewidth in the undepleted environment (MHz).
    pub gamma_undepleted_mhz: f64,
    /// Hard lower bound: the lifetime limit (MHz).
    pub gamma_floor_mhz: f64,
    /// Crossover density (cm^-3).
    pub n_half_cm3: f64,
    /// Logistic steepness in decades of density.
    pub steepness: f64,
}

impl Default for LinewidthModel {
    fn default() -> Self {
        LinewidthModel {
            gamma_depleted_mhz: 80.0,
            gamma_undepleted_mhz: 205.2,
            gamma_floor_mhz: 14.0,
            n_half_cm3: 1e12,
            steepness: 1.0,
        }
    }
}

impl LinewidthModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_floor_mhz <= self.gamma_depleted_mhz
            && self.gamma_depleted_mhz <= self.gamma_undepleted_mhz)
        {
            return Err(Error::InvalidInput(format!(
                "linewidths must satisfy floor <= depleted <= undepleted, got {} / {} / {}",
                self.gamma_floor_mhz, self.gamma_depleted_mhz, self.gamma_undepleted_mhz
            )));
        }
        if !(self.n_half_cm3 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "n_half_cm3 must be positive, got {}",
                self.n_half_cm3
            )));
        }
        if !(self.steepness > 0.0) {
            return Err(Error::InvalidInput(format!(
                "steepness must be positive, got {}",
                self.steepness
            )));
        }
        Ok(())
    }
}

/// FWHM (MHz) at a local free-electron density (cm^-3).
///
/// Monotone nondecreasing in `n_local_cm3`; tends to `gamma_depleted` as
/// n -> 0 and `gamma_undepleted` as n -> inf; never below `gamma_floor`.
pub fn linewidth_response(n_local_cm3: f64, model: &LinewidthModel) -> Result<f64> {
    model.validate()?;
    if !(n_local_cm3 >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "density must be nonnegative, got {n_local_cm3}"
        )));
    }
    // Logistic in log10(n): weight = n^(1/s) / (n^(1/s) + n_half^(1/s)).
    let weight = if n_local_cm3 == 0.0 {
        0.0
    } else {
        let p = 1.0 / model.steepness;
        1.0 / (1.0 + (model.n_half_cm3 / n_local_cm3).powf(p))
    };
    let gamma = model.gamma_depleted_mhz
        + (model.gamma_undepleted_mhz - model.gamma_depleted_mhz) * weight;
    Ok(gamma.max(model.gamma_floor_mhz))
}
