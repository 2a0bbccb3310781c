//! 1D electrostatics of a p⁺⁺ / low-doped n / n⁺⁺ junction in the depletion
//! approximation.
//!
//! Abrupt junctions, fully ionized dopants, zero free carriers inside the
//! space-charge region. The depletion edge grows from the p⁺⁺/intrinsic
//! interface into the low-doped layer as `sqrt(V + V_bi)`; positions are
//! measured in um from that interface. Fields are reported as nonnegative
//! magnitudes along the device axis (the geometry pins E parallel to the
//! c-axis, so the vector sign carries no information).

use serde::{Deserialize, Serialize};

use crate::constants::{
    self, m_to_um, per_cm3_to_per_m3, um_to_m, v_per_m_to_mv_per_m, ELEMENTARY_CHARGE,
    VACUUM_PERMITTIVITY,
};
use crate::error::{Error, Result};

/// Number of grid points used by the profile operations unless a caller
/// asks for a specific resolution.
pub const DEFAULT_GRID_POINTS: usize = 2000;

/// Host-material constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Relative permittivity (dimensionless).
    pub eps_r: f64,
    /// Intrinsic carrier concentration (cm^-3).
    pub n_i_cm3: f64,
    /// Lattice temperature (K).
    pub temperature_k: f64,
    /// Electron drift saturation velocity (cm/s).
    pub v_e_cm_s: f64,
    /// Bandgap (eV); only offsets the conduction band edge.
    #[serde(default = "default_bandgap_ev")]
    pub bandgap_ev: f64,
}

fn default_bandgap_ev() -> f64 {
    3.26
}

impl Default for MaterialParams {
    /// 4H-SiC at 300 K.
    fn default() -> Self {
        MaterialParams {
            eps_r: 9.66,
            n_i_cm3: 8.2e-9,
            temperature_k: 300.0,
            v_e_cm_s: 1e7,
            bandgap_ev: 3.26,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "eps_r must be >= 1, got {}",
                self.eps_r
            )));
        }
        if !(self.n_i_cm3 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "n_i_cm3 must be positive, got {}",
                self.n_i_cm3
            )));
        }
        if !(self.temperature_k > 0.0) {
            return Err(Error::InvalidInput(format!(
                "temperature_k must be positive, got {}",
                self.temperature_k
            )));
        }
        if !(self.v_e_cm_s > 0.0) {
            return Err(Error::InvalidInput(format!(
                "v_e_cm_s must be positive, got {}",
                self.v_e_cm_s
            )));
        }
        if !(self.bandgap_ev > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bandgap_ev must be positive, got {}",
                self.bandgap_ev
            )));
        }
        Ok(())
    }

    /// kT/q (V).
    pub fn thermal_voltage_v(&self) -> f64 {
        constants::thermal_voltage_v(self.temperature_k)
    }

    /// Absolute permittivity eps_0 * eps_r (F/m).
    pub fn permittivity_f_per_m(&self) -> f64 {
        VACUUM_PERMITTIVITY * self.eps_r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRole {
    PContact,
    IntrinsicN,
    NBuffer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopantType {
    Donor,
    Acceptor,
}

/// One doped layer of the stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub role: LayerRole,
    pub dopant_type: DopantType,
    /// Dopant concentration (cm^-3).
    pub concentration_cm3: f64,
    /// Layer thickness (um).
    pub thickness_um: f64,
}

/// Ordered pin-diode stack: p_contact -> intrinsic_n -> n_buffer.
///
/// Construction enforces the layer ordering, dopant types, and the
/// `N_A >> N_D` condition the one-sided depletion formula relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceStack {
    layers: Vec<LayerSpec>,
    pub material: MaterialParams,
}

/// Minimum acceptor/donor concentration ratio for the one-sided junction
/// reduction to hold.
pub const MIN_ACCEPTOR_DONOR_RATIO: f64 = 1e3;

impl DeviceStack {
    pub fn new(layers: Vec<LayerSpec>, material: MaterialParams) -> Result<Self> {
        material.validate()?;
        let expected = [LayerRole::PContact, LayerRole::IntrinsicN, LayerRole::NBuffer];
        if layers.len() != expected.len() {
            return Err(Error::InvalidInput(format!(
                "expected 3 layers (p_contact, intrinsic_n, n_buffer), got {}",
                layers.len()
            )));
        }
        for (layer, want) in layers.iter().zip(expected) {
            if layer.role != want {
                return Err(Error::InvalidInput(format!(
                    "layer order must be p_contact, intrinsic_n, n_buffer; found {:?} where {:?} was expected",
                    layer.role, want
                )));
            }
            if !(layer.concentration_cm3 > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "layer {:?}: concentration must be positive, got {}",
                    layer.role, layer.concentration_cm3
                )));
            }
            if !(layer.thickness_um > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "layer {:?}: thickness must be positive, got {}",
                    layer.role, layer.thickness_um
                )));
            }
            let want_dopant = match layer.role {
                LayerRole::PContact => DopantType::Acceptor,
                LayerRole::IntrinsicN | LayerRole::NBuffer => DopantType::Donor,
            };
            if layer.dopant_type != want_dopant {
                return Err(Error::InvalidInput(format!(
                    "layer {:?} must be {:?}-doped",
                    layer.role, want_dopant
                )));
            }
        }
        let ratio = layers[0].concentration_cm3 / layers[1].concentration_cm3;
        if ratio < MIN_ACCEPTOR_DONOR_RATIO {
            return Err(Error::InvalidInput(format!(
                "p_contact/intrinsic concentration ratio {ratio:.3e} below {MIN_ACCEPTOR_DONOR_RATIO:.0e}; the one-sided depletion model does not apply"
            )));
        }
        Ok(DeviceStack { layers, material })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Acceptor concentration of the p⁺⁺ contact (cm^-3).
    pub fn acceptor_concentration_cm3(&self) -> f64 {
        self.layers[0].concentration_cm3
    }

    /// Donor concentration of the low-doped ("intrinsic") layer (cm^-3).
    pub fn donor_concentration_cm3(&self) -> f64 {
        self.layers[1].concentration_cm3
    }

    /// Width of the low-doped layer (um).
    pub fn intrinsic_width_um(&self) -> f64 {
        self.layers[1].thickness_um
    }
}

/// Operating point of the diode. Positive values are reverse bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub reverse_voltage_v: f64,
}

impl BiasPoint {
    pub fn new(reverse_voltage_v: f64) -> Self {
        BiasPoint { reverse_voltage_v }
    }
}

/// Macroscopic and local electric field across the intrinsic layer at one
/// bias point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    /// Positions (um) from the p⁺⁺/intrinsic interface.
    pub positions_um: Vec<f64>,
    /// Macroscopic field magnitude (MV/m) at each position.
    pub e_macro_mv_per_m: Vec<f64>,
    /// Local field at a point defect, `(2 + eps_r)/3` times the macroscopic
    /// field (MV/m).
    pub e_local_mv_per_m: Vec<f64>,
    /// Depletion edge (um). Exceeds the intrinsic width under punch-through.
    pub depletion_edge_um: f64,
    pub punch_through: bool,
    /// Built-in voltage (V) used for this profile.
    pub v_bi_v: f64,
}

/// Valence and conduction band edges across the intrinsic layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BandDiagram {
    pub positions_um: Vec<f64>,
    pub valence_ev: Vec<f64>,
    pub conduction_ev: Vec<f64>,
}

/// Free-electron concentration across the intrinsic layer at one bias point.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierProfile {
    pub positions_um: Vec<f64>,
    pub n_cm3: Vec<f64>,
    pub depletion_edge_um: f64,
    pub punch_through: bool,
}

/// Built-in voltage (V) of the junction: `(kT/q) * ln(N_A * N_D / n_i^2)`.
pub fn builtin_voltage(stack: &DeviceStack) -> f64 {
    let n_a = stack.acceptor_concentration_cm3();
    let n_d = stack.donor_concentration_cm3();
    let n_i = stack.material.n_i_cm3;
    stack.material.thermal_voltage_v() * (n_a * n_d / (n_i * n_i)).ln()
}

/// Depletion width (um) into the low-doped side:
/// `x_n(V) = sqrt(2 eps_0 eps_r (V_bi + V) / (q N_D))`.
///
/// Fails when `V + V_bi < 0` (junction driven past flat band).
pub fn depletion_width_um(
    reverse_voltage_v: f64,
    n_d_cm3: f64,
    v_bi_v: f64,
    material: &MaterialParams,
) -> Result<f64> {
    if !(n_d_cm3 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "donor concentration must be positive, got {n_d_cm3}"
        )));
    }
    let net_v = reverse_voltage_v + v_bi_v;
    if net_v < 0.0 {
        return Err(Error::Domain(format!(
            "V + V_bi = {net_v:.6} V is negative: junction forward-flooded"
        )));
    }
    let n_d_m3 = per_cm3_to_per_m3(n_d_cm3);
    let x_m = (2.0 * material.permittivity_f_per_m() * net_v / (ELEMENTARY_CHARGE * n_d_m3)).sqrt();
    Ok(m_to_um(x_m))
}

/// Local field at a point defect from the macroscopic field:
/// `E_local = (2 + eps_r)/3 * E_macro`.
pub fn lorentz_local_field(e_macro_mv_per_m: f64, eps_r: f64) -> f64 {
    (2.0 + eps_r) / 3.0 * e_macro_mv_per_m
}

/// Charge density slope `q N_D / (eps_0 eps_r)` in V/m per m of depth.
fn field_slope_v_per_m2(stack: &DeviceStack) -> f64 {
    ELEMENTARY_CHARGE * per_cm3_to_per_m3(stack.donor_concentration_cm3())
        / stack.material.permittivity_f_per_m()
}

fn depletion_state(stack: &DeviceStack, bias: BiasPoint) -> Result<(f64, f64, bool)> {
    let v_bi = builtin_voltage(stack);
    let x_n_um = depletion_width_um(
        bias.reverse_voltage_v,
        stack.donor_concentration_cm3(),
        v_bi,
        &stack.material,
    )?;
    let punch_through = x_n_um >= stack.intrinsic_width_um();
    Ok((v_bi, x_n_um, punch_through))
}

/// Shape of the macroscopic field at a bias point: `E(x) = max(0, e0 - s x)`.
struct FieldShape {
    v_bi_v: f64,
    x_n_um: f64,
    punch_through: bool,
    e0_v_per_m: f64,
    slope_v_per_m2: f64,
}

impl FieldShape {
    fn new(stack: &DeviceStack, bias: BiasPoint) -> Result<Self> {
        let (v_bi, x_n_um, punch_through) = depletion_state(stack, bias)?;
        let width_m = um_to_m(stack.intrinsic_width_um());
        let slope = field_slope_v_per_m2(stack);
        let e0_v_per_m = if punch_through {
            (bias.reverse_voltage_v + v_bi) / width_m + slope * width_m / 2.0
        } else {
            slope * um_to_m(x_n_um)
        };
        Ok(FieldShape {
            v_bi_v: v_bi,
            x_n_um,
            punch_through,
            e0_v_per_m,
            slope_v_per_m2: slope,
        })
    }

    fn e_macro_mv_per_m_at(&self, x_um: f64) -> f64 {
        v_per_m_to_mv_per_m((self.e0_v_per_m - self.slope_v_per_m2 * um_to_m(x_um)).max(0.0))
    }
}

/// Field profile over the intrinsic layer on the default grid.
pub fn field_profile(stack: &DeviceStack, bias: BiasPoint) -> Result<FieldProfile> {
    field_profile_with_grid(stack, bias, DEFAULT_GRID_POINTS)
}

/// Field profile over the intrinsic layer on a uniform grid of `n_points`.
///
/// Below punch-through the profile is triangular: `E(0) = q N_D x_n / eps`,
/// falling linearly to zero at `x_n`. At punch-through the slope is kept and
/// the offset is chosen so the integral over the layer equals `V + V_bi`
/// (depletion penetration into the n⁺⁺ buffer is neglected).
pub fn field_profile_with_grid(
    stack: &DeviceStack,
    bias: BiasPoint,
    n_points: usize,
) -> Result<FieldProfile> {
    if n_points < 2 {
        return Err(Error::InvalidInput(format!(
            "grid needs at least 2 points, got {n_points}"
        )));
    }
    let shape = FieldShape::new(stack, bias)?;
    let n = n_points;
    let mut positions_um = Vec::with_capacity(n);
    let mut e_macro = Vec::with_capacity(n);
    let mut e_local = Vec::with_capacity(n);
    let lorentz = (2.0 + stack.material.eps_r) / 3.0;
    for i in 0..n {
        let x_um = stack.intrinsic_width_um() * i as f64 / (n - 1) as f64;
        let e_mv = shape.e_macro_mv_per_m_at(x_um);
        positions_um.push(x_um);
        e_macro.push(e_mv);
        e_local.push(lorentz * e_mv);
    }

    Ok(FieldProfile {
        positions_um,
        e_macro_mv_per_m: e_macro,
        e_local_mv_per_m: e_local,
        depletion_edge_um: shape.x_n_um,
        punch_through: shape.punch_through,
        v_bi_v: shape.v_bi_v,
    })
}

/// Band edges obtained by integrating the macroscopic field from the p-side
/// reference (`grad eps_V = q E`).
pub fn band_diagram(stack: &DeviceStack, bias: BiasPoint) -> Result<BandDiagram> {
    band_diagram_with_grid(stack, bias, DEFAULT_GRID_POINTS)
}

pub fn band_diagram_with_grid(
    stack: &DeviceStack,
    bias: BiasPoint,
    n_points: usize,
) -> Result<BandDiagram> {
    let profile = field_profile_with_grid(stack, bias, n_points)?;
    let n = profile.positions_um.len();
    let mut valence = Vec::with_capacity(n);
    let mut conduction = Vec::with_capacity(n);
    // Cumulative trapezoid of E (V/m) over x (m) gives the band shift in eV.
    let mut acc_ev = 0.0;
    valence.push(0.0);
    conduction.push(stack.material.bandgap_ev);
    for i in 1..n {
        let dx_m = um_to_m(profile.positions_um[i] - profile.positions_um[i - 1]);
        let e_avg = constants::mv_per_m_to_v_per_m(
            0.5 * (profile.e_macro_mv_per_m[i] + profile.e_macro_mv_per_m[i - 1]),
        );
        acc_ev += e_avg * dx_m;
        valence.push(acc_ev);
        conduction.push(acc_ev + stack.material.bandgap_ev);
    }
    Ok(BandDiagram {
        positions_um: profile.positions_um,
        valence_ev: valence,
        conduction_ev: conduction,
    })
}

/// Step model of the free-electron concentration: zero inside the depleted
/// region `[0, x_n)`, `N_D` beyond it. Punch-through empties the whole layer.
pub fn carrier_profile(stack: &DeviceStack, bias: BiasPoint) -> Result<CarrierProfile> {
    carrier_profile_with_grid(stack, bias, DEFAULT_GRID_POINTS)
}

pub fn carrier_profile_with_grid(
    stack: &DeviceStack,
    bias: BiasPoint,
    n_points: usize,
) -> Result<CarrierProfile> {
    if n_points < 2 {
        return Err(Error::InvalidInput(format!(
            "grid needs at least 2 points, got {n_points}"
        )));
    }
    let (_, x_n_um, punch_through) = depletion_state(stack, bias)?;
    let n_d = stack.donor_concentration_cm3();
    let n = n_points;
    let mut positions_um = Vec::with_capacity(n);
    let mut n_cm3 = Vec::with_capacity(n);
    for i in 0..n {
        let x_um = stack.intrinsic_width_um() * i as f64 / (n - 1) as f64;
        positions_um.push(x_um);
        n_cm3.push(electron_concentration_at(x_um, x_n_um, punch_through, n_d));
    }
    Ok(CarrierProfile {
        positions_um,
        n_cm3,
        depletion_edge_um: x_n_um,
        punch_through,
    })
}

/// Electron concentration (cm^-3) at one position given the depletion state.
pub fn electron_concentration_at(
    x_um: f64,
    depletion_edge_um: f64,
    punch_through: bool,
    n_d_cm3: f64,
) -> f64 {
    if punch_through || x_um < depletion_edge_um {
        0.0
    } else {
        n_d_cm3
    }
}

/// Electron concentration sustained by a drift current density:
/// `n_e = j / (q v_e)`, in cm^-3 for j in A/cm^2 and v_e in cm/s.
pub fn electron_density_from_current(j_a_per_cm2: f64, v_e_cm_s: f64) -> Result<f64> {
    if !(v_e_cm_s > 0.0) {
        return Err(Error::Domain(format!(
            "drift velocity must be positive, got {v_e_cm_s}"
        )));
    }
    if j_a_per_cm2 < 0.0 {
        return Err(Error::Domain(format!(
            "current density must be nonnegative, got {j_a_per_cm2}"
        )));
    }
    Ok(j_a_per_cm2 / (ELEMENTARY_CHARGE * v_e_cm_s))
}

/// Trapezoid integral of the macroscopic field over the layer (V).
/// Equals `V + V_bi` for a consistent profile.
pub fn integrate_field_v(profile: &FieldProfile) -> f64 {
    let mut acc = 0.0;
    for i in 1..profile.positions_um.len() {
        let dx_m = um_to_m(profile.positions_um[i] - profile.positions_um[i - 1]);
        let e_avg = constants::mv_per_m_to_v_per_m(
            0.5 * (profile.e_macro_mv_per_m[i] + profile.e_macro_mv_per_m[i - 1]),
        );
        acc += e_avg * dx_m;
    }
    acc
}

/// Macroscopic field magnitude (MV/m) at a single position, without
/// building a grid.
pub fn field_at_um(stack: &DeviceStack, bias: BiasPoint, x_um: f64) -> Result<f64> {
    Ok(FieldShape::new(stack, bias)?.e_macro_mv_per_m_at(x_um))
}

/// Local field magnitude (MV/m) at a single position.
pub fn local_field_at_um(stack: &DeviceStack, bias: BiasPoint, x_um: f64) -> Result<f64> {
    Ok(lorentz_local_field(
        field_at_um(stack, bias, x_um)?,
        stack.material.eps_r,
    ))
}

/// Free-electron concentration (cm^-3) at a single position.
pub fn electron_density_at_um(stack: &DeviceStack, bias: BiasPoint, x_um: f64) -> Result<f64> {
    let (_, x_n_um, punch_through) = depletion_state(stack, bias)?;
    Ok(electron_concentration_at(
        x_um,
        x_n_um,
        punch_through,
        stack.donor_concentration_cm3(),
    ))
}
