//! Physical constants and unit conversions.
//!
//! Public interfaces carry their units in field and argument names
//! (um, MV/m, GHz, V, cm^-3); everything inside an operation is SI.
//! All conversions live here so no module invents its own factors.

/// Elementary charge (C), CODATA 2018 exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// Vacuum permittivity (F/m), CODATA 2018.
pub const VACUUM_PERMITTIVITY: f64 = 8.8541878128e-12;

/// Boltzmann constant (J/K), CODATA 2018 exact.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Thermal voltage kT/q (V) at the given temperature.
pub fn thermal_voltage_v(temperature_k: f64) -> f64 {
    BOLTZMANN * temperature_k / ELEMENTARY_CHARGE
}

pub fn um_to_m(x_um: f64) -> f64 {
    x_um * 1e-6
}

pub fn m_to_um(x_m: f64) -> f64 {
    x_m * 1e6
}

pub fn per_cm3_to_per_m3(n_cm3: f64) -> f64 {
    n_cm3 * 1e6
}

pub fn per_m3_to_per_cm3(n_m3: f64) -> f64 {
    n_m3 * 1e-6
}

pub fn v_per_m_to_mv_per_m(e: f64) -> f64 {
    e * 1e-6
}

pub fn mv_per_m_to_v_per_m(e: f64) -> f64 {
    e * 1e6
}

pub fn ghz_to_mhz(f: f64) -> f64 {
    f * 1e3
}

pub fn mhz_to_ghz(f: f64) -> f64 {
    f * 1e-3
}

pub fn mv_per_m_to_kv_per_m(e: f64) -> f64 {
    e * 1e3
}
