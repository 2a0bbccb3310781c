//! Quadratic Stark response of the optical resonance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dipole moment, polarizability, and frequency offset of one emitter, with
/// their 1-sigma uncertainties.
///
/// `d` and `alpha` are stored signed as fitted; user-facing reports print
/// |d|. `f0` is an opaque offset tied to the frequency reference of the
/// measurement and carries no physics of its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkParams {
    /// Linear Stark coefficient (GHz per MV/m), signed.
    pub d_ghz_per_mv_per_m: f64,
    /// Quadratic Stark coefficient (GHz per (MV/m)^2), signed.
    pub alpha_ghz_per_mv_per_m2: f64,
    /// Frequency offset (GHz).
    pub f0_ghz: f64,
    /// 1-sigma uncertainty of `d`.
    #[serde(default)]
    pub sigma_d: f64,
    /// 1-sigma uncertainty of `alpha`.
    #[serde(default)]
    pub sigma_alpha: f64,
    /// 1-sigma uncertainty of `f0`.
    #[serde(default)]
    pub sigma_f0: f64,
}

impl StarkParams {
    pub fn new(d: f64, alpha: f64, f0: f64) -> Self {
        StarkParams {
            d_ghz_per_mv_per_m: d,
            alpha_ghz_per_mv_per_m2: alpha,
            f0_ghz: f0,
            sigma_d: 0.0,
            sigma_alpha: 0.0,
            sigma_f0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, sigma) in [
            ("sigma_d", self.sigma_d),
            ("sigma_alpha", self.sigma_alpha),
            ("sigma_f0", self.sigma_f0),
        ] {
            if !(sigma >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be nonnegative, got {sigma}"
                )));
            }
        }
        Ok(())
    }
}

/// Resonance shift (GHz) at a local field:
/// `delta_f = -d E - (alpha/2) E^2 + f0`.
pub fn stark_shift(e_local_mv_per_m: f64, params: &StarkParams) -> f64 {
    let e = e_local_mv_per_m;
    -params.d_ghz_per_mv_per_m * e - 0.5 * params.alpha_ghz_per_mv_per_m2 * e * e + params.f0_ghz
}
