//! Bundled reference device and sensor parameters.
//!
//! These mirror `configs/pin_diode.toml` and are the values the test suite
//! and the example configs are calibrated against: a 4H-SiC pin-diode with a
//! 4.1 um low-doped layer and two vacancy sensors inside it.

use crate::device::{DeviceStack, DopantType, LayerRole, LayerSpec, MaterialParams};
use crate::sensor::{LinewidthModel, PleModel, SpinModel, StarkParams};

/// Emitter nearest the p⁺⁺ contact (um). Inside the depletion zone already
/// at zero bias.
pub const INNER_EMITTER_UM: f64 = 1.61;

/// Emitter deeper in the intrinsic layer (um). Depletes only above the
/// onset voltage.
pub const OUTER_EMITTER_UM: f64 = 2.71;

/// 1-sigma emitter position uncertainty (um) from the confocal resolution.
pub const EMITTER_SIGMA_UM: f64 = 0.25;

/// Reference 4H-SiC pin-diode stack.
pub fn pin_diode() -> DeviceStack {
    DeviceStack::new(
        vec![
            LayerSpec {
                role: LayerRole::PContact,
                dopant_type: DopantType::Acceptor,
                concentration_cm3: 2e19,
                thickness_um: 2.0,
            },
            LayerSpec {
                role: LayerRole::IntrinsicN,
                dopant_type: DopantType::Donor,
                concentration_cm3: 9e14,
                thickness_um: 4.1,
            },
            LayerSpec {
                role: LayerRole::NBuffer,
                dopant_type: DopantType::Donor,
                concentration_cm3: 1e18,
                thickness_um: 1.0,
            },
        ],
        MaterialParams::default(),
    )
    .expect("reference stack satisfies its own invariants")
}

/// Stark response of the inner emitter (fitted at the reference doping).
pub fn stark_inner_emitter() -> StarkParams {
    StarkParams {
        d_ghz_per_mv_per_m: -4.21,
        alpha_ghz_per_mv_per_m2: -0.09,
        f0_ghz: -7.73,
        sigma_d: 0.15,
        sigma_alpha: 0.01,
        sigma_f0: 0.96,
    }
}

/// Stark response of the outer emitter (fitted at the reference doping).
pub fn stark_outer_emitter() -> StarkParams {
    StarkParams {
        d_ghz_per_mv_per_m: -5.60,
        alpha_ghz_per_mv_per_m2: -0.03,
        f0_ghz: -0.67,
        sigma_d: 0.13,
        sigma_alpha: 0.01,
        sigma_f0: 0.42,
    }
}

/// Ground-state spin model: 2D = 70 MHz, peak-shift gradient -0.07 Hz/(V/m).
pub fn spin_model() -> SpinModel {
    SpinModel::default()
}

/// PLE doublet defaults: 1 GHz A1/A2 detuning.
pub fn ple_model() -> PleModel {
    PleModel::default()
}

/// Linewidth-vs-charge-density calibration at the reference doping.
pub fn linewidth_model() -> LinewidthModel {
    LinewidthModel::default()
}
