//! Doping extraction from the depletion-onset voltage and from
//! capacitance-voltage curves.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::constants::{per_m3_to_per_cm3, um_to_m, ELEMENTARY_CHARGE};
use crate::device::MaterialParams;
use crate::error::{Error, Result};

/// Donor concentration (cm^-3) from the voltage at which the depletion
/// edge reaches a known position:
/// `N_D = (2 eps_0 eps_r / q) (V + V_bi) / x^2`.
pub fn extract_doping(
    v_threshold_v: f64,
    x_um: f64,
    v_bi_v: f64,
    material: &MaterialParams,
) -> Result<f64> {
    if !(x_um > 0.0) {
        return Err(Error::Domain(format!(
            "position must be positive, got {x_um} um"
        )));
    }
    let net_v = v_threshold_v + v_bi_v;
    if !(net_v > 0.0) {
        return Err(Error::Domain(format!(
            "V + V_bi = {net_v:.6} V must be positive"
        )));
    }
    let x_m = um_to_m(x_um);
    let n_m3 = 2.0 * material.permittivity_f_per_m() / ELEMENTARY_CHARGE * net_v / (x_m * x_m);
    Ok(per_m3_to_per_cm3(n_m3))
}

/// Doping interval from worst-case corner evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DopingInterval {
    pub low_cm3: f64,
    pub mid_cm3: f64,
    pub high_cm3: f64,
}

/// Interval endpoints from the corners `(V - sigma_V, x + sigma_x)` and
/// `(V + sigma_V, x - sigma_x)`; the midpoint is the direct evaluation.
pub fn doping_uncertainty(
    v_threshold_v: f64,
    sigma_v: f64,
    x_um: f64,
    sigma_x_um: f64,
    v_bi_v: f64,
    material: &MaterialParams,
) -> Result<DopingInterval> {
    if !(sigma_v >= 0.0) || !(sigma_x_um >= 0.0) {
        return Err(Error::InvalidInput(
            "uncertainties must be nonnegative".into(),
        ));
    }
    Ok(DopingInterval {
        low_cm3: extract_doping(v_threshold_v - sigma_v, x_um + sigma_x_um, v_bi_v, material)?,
        mid_cm3: extract_doping(v_threshold_v, x_um, v_bi_v, material)?,
        high_cm3: extract_doping(v_threshold_v + sigma_v, x_um - sigma_x_um, v_bi_v, material)?,
    })
}

/// A measured capacitance-voltage curve. Voltages follow the diode
/// convention: positive forward, negative reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct CvCurve {
    /// (voltage V, capacitance F) samples.
    pub samples: Vec<(f64, f64)>,
    /// Contact area (cm^2).
    pub contact_area_cm2: f64,
}

impl CvCurve {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 5 {
            return Err(Error::InvalidInput(format!(
                "need at least 5 CV samples for derivative estimation, got {}",
                self.samples.len()
            )));
        }
        if !(self.contact_area_cm2 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "contact area must be positive, got {}",
                self.contact_area_cm2
            )));
        }
        if let Some((v, c)) = self.samples.iter().find(|(_, c)| !(*c > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "capacitance must be positive, got {c} F at {v} V"
            )));
        }
        Ok(())
    }
}

/// Doping at one interior voltage point. `n_d_cm3` is `None` where the
/// derivative of 1/C^2 was nonnegative (forward-bias region or flat data),
/// which would give a nonpositive or unbounded concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvDopingPoint {
    pub voltage_v: f64,
    pub n_d_cm3: Option<f64>,
    /// d(1/C^2)/dV at this point (F^-2 per V).
    pub slope_per_f2_v: f64,
}

/// Local least-squares slope of `y` vs `x` at the window center using a
/// polynomial of the given degree.
fn windowed_slope(x: &[f64], y: &[f64], center: usize, half: usize, degree: usize) -> f64 {
    let lo = center - half;
    let hi = center + half;
    let n = hi - lo + 1;
    let p = degree + 1;
    let x0 = x[center];
    let mut design = DMatrix::zeros(n, p);
    let mut rhs = DVector::zeros(n);
    for (row, i) in (lo..=hi).enumerate() {
        let t = x[i] - x0;
        let mut pow = 1.0;
        for col in 0..p {
            design[(row, col)] = pow;
            pow *= t;
        }
        rhs[row] = y[i];
    }
    let svd = design.svd(true, true);
    let coeffs = svd
        .solve(&rhs, 1e-12)
        .expect("windowed polynomial solve cannot fail for distinct abscissae");
    coeffs[1]
}

/// Doping profile from a CV curve. The depletion capacitance obeys
/// `d(1/C^2)/dV = -2 / (q eps_0 eps_r A^2 N_D)`, so
/// `N_D = -2 / (q eps_0 eps_r A^2 * d(1/C^2)/dV)`.
///
/// The derivative is a local least-squares quadratic over 5-point windows;
/// a value is produced for each voltage with a full window.
pub fn cv_doping(curve: &CvCurve, material: &MaterialParams) -> Result<Vec<CvDopingPoint>> {
    cv_doping_windowed(curve, material, 5, 2)
}

/// `cv_doping` with an explicit window width (odd, >= 3) and polynomial
/// degree (1 or 2).
pub fn cv_doping_windowed(
    curve: &CvCurve,
    material: &MaterialParams,
    window: usize,
    degree: usize,
) -> Result<Vec<CvDopingPoint>> {
    curve.validate()?;
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "window must be odd and >= 3, got {window}"
        )));
    }
    if !(1..=2).contains(&degree) {
        return Err(Error::InvalidInput(format!(
            "degree must be 1 or 2, got {degree}"
        )));
    }
    if curve.samples.len() < window {
        return Err(Error::InvalidInput(format!(
            "need at least {window} samples for a {window}-point window, got {}",
            curve.samples.len()
        )));
    }
    let mut samples = curve.samples.clone();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let voltages: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let inv_c2: Vec<f64> = samples.iter().map(|s| 1.0 / (s.1 * s.1)).collect();

    let area_m2 = curve.contact_area_cm2 * 1e-4;
    let prefactor = -2.0
        / (ELEMENTARY_CHARGE * material.permittivity_f_per_m() * area_m2 * area_m2);

    let half = window / 2;
    // Slopes below this magnitude are indistinguishable from round-off on
    // the 1/C^2 values and would blow up to unbounded concentrations.
    let span = (voltages[voltages.len() - 1] - voltages[0]).abs().max(1e-300);
    let inv_c2_scale = inv_c2.iter().cloned().fold(0.0, f64::max);
    let slope_floor = 1e-9 * inv_c2_scale / span;
    let mut out = Vec::new();
    for i in half..voltages.len() - half {
        let slope = windowed_slope(&voltages, &inv_c2, i, half, degree);
        // Reverse bias makes 1/C^2 fall with V, so a physical point needs
        // a strictly negative slope.
        let n_d = if slope < -slope_floor {
            Some(per_m3_to_per_cm3(prefactor / slope))
        } else {
            None
        };
        out.push(CvDopingPoint {
            voltage_v: voltages[i],
            n_d_cm3: n_d,
            slope_per_f2_v: slope,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    /// One-sided junction capacitance per the depletion model.
    fn schottky_capacitance_f(v: f64, n_d_cm3: f64, area_cm2: f64, v_bi: f64) -> f64 {
        let m = MaterialParams::default();
        let n_m3 = n_d_cm3 * 1e6;
        let area_m2 = area_cm2 * 1e-4;
        area_m2
            * (ELEMENTARY_CHARGE * m.permittivity_f_per_m() * n_m3 / (2.0 * (v_bi - v))).sqrt()
    }

    fn synthetic_curve(n_d_cm3: f64, voltages: &[f64]) -> CvCurve {
        let area = 9e-4; // (300 um)^2 in cm^2
        CvCurve {
            samples: voltages
                .iter()
                .map(|&v| (v, schottky_capacitance_f(v, n_d_cm3, area, 1.0)))
                .collect(),
            contact_area_cm2: area,
        }
    }

    #[test]
    fn extract_doping_at_measured_onset() {
        let m = MaterialParams::default();
        let n = extract_doping(2.6, 2.71, 2.95, &m).unwrap();
        assert!(rel_err(n, 8.1e14) < 0.01, "n = {n:.4e}");
        assert!((n - 8.0687e14).abs() < 1e11);
    }

    #[test]
    fn extract_doping_at_low_corner() {
        let m = MaterialParams::default();
        let n = extract_doping(2.2, 2.96, 2.95, &m).unwrap();
        // Direct evaluation gives 6.276e14; the published rounding of this
        // corner is 7e14.
        assert!((n - 6.2758e14).abs() < 1e11, "n = {n:.4e}");
        assert!((n - 7e14).abs() <= 1e14);
    }

    #[test]
    fn quadrupling_position_divides_by_sixteen() {
        let m = MaterialParams::default();
        let n1 = extract_doping(2.6, 1.2, 2.95, &m).unwrap();
        let n2 = extract_doping(2.6, 4.8, 2.95, &m).unwrap();
        assert!(rel_err(n2, n1 / 16.0) < 1e-12);
    }

    #[test]
    fn nonpositive_position_is_domain_error() {
        let m = MaterialParams::default();
        assert!(matches!(
            extract_doping(2.6, 0.0, 2.95, &m),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn interval_brackets_published_band() {
        let m = MaterialParams::default();
        let interval = doping_uncertainty(2.6, 0.4, 2.71, 0.25, 2.95, &m).unwrap();
        assert!((interval.low_cm3 - 7e14).abs() <= 1e14, "low = {:.3e}", interval.low_cm3);
        assert!((interval.high_cm3 - 11e14).abs() <= 1e14, "high = {:.3e}", interval.high_cm3);
        assert!(interval.low_cm3 < interval.mid_cm3 && interval.mid_cm3 < interval.high_cm3);
    }

    #[test]
    fn zero_uncertainty_degenerates_to_point() {
        let m = MaterialParams::default();
        let interval = doping_uncertainty(2.6, 0.0, 2.71, 0.0, 2.95, &m).unwrap();
        assert_eq!(interval.low_cm3, interval.mid_cm3);
        assert_eq!(interval.high_cm3, interval.mid_cm3);
    }

    #[test]
    fn round_trip_with_depletion_width() {
        let m = MaterialParams::default();
        for (v, n_d) in [(0.0, 9e14), (10.0, 2e14), (3.3, 5e15)] {
            let x = crate::device::depletion_width_um(v, n_d, 2.95, &m).unwrap();
            let n = extract_doping(v, x, 2.95, &m).unwrap();
            assert!(rel_err(n, n_d) < 1e-10, "{n} vs {n_d}");
        }
    }

    #[test]
    fn cv_recovers_constant_doping_within_two_percent() {
        let voltages: Vec<f64> = (0..70).map(|i| -3.0 + 0.05 * i as f64).collect();
        let curve = synthetic_curve(8.7e14, &voltages);
        let m = MaterialParams::default();
        let points = cv_doping(&curve, &m).unwrap();
        assert!(!points.is_empty());
        for p in &points {
            let n = p.n_d_cm3.expect("reverse branch must yield a density");
            assert!(rel_err(n, 8.7e14) < 0.02, "{:.4e} at {} V", n, p.voltage_v);
        }
    }

    #[test]
    fn flat_capacitance_is_flagged() {
        let samples: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, 1e-10)).collect();
        let curve = CvCurve {
            samples,
            contact_area_cm2: 9e-4,
        };
        let m = MaterialParams::default();
        let points = cv_doping(&curve, &m).unwrap();
        assert!(points.iter().all(|p| p.n_d_cm3.is_none()));
    }

    #[test]
    fn doubling_area_quarters_the_doping() {
        let voltages: Vec<f64> = (0..40).map(|i| -2.0 + 0.05 * i as f64).collect();
        let curve = synthetic_curve(8.7e14, &voltages);
        let doubled = CvCurve {
            samples: curve.samples.clone(),
            contact_area_cm2: 2.0 * curve.contact_area_cm2,
        };
        let m = MaterialParams::default();
        let a = cv_doping(&curve, &m).unwrap();
        let b = cv_doping(&doubled, &m).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            let (na, nb) = (pa.n_d_cm3.unwrap(), pb.n_d_cm3.unwrap());
            assert!(rel_err(nb, na / 4.0) < 1e-12);
        }
    }

    #[test]
    fn derivative_error_shrinks_with_grid_refinement() {
        // A smoothly varying profile so the windowed quadratic has real
        // discretization error.
        let m = MaterialParams::default();
        let area = 9e-4;
        let profile = |v: f64| 8.7e14 * (1.0 + 0.3 * (0.8 * v).tanh());
        let make = |step: f64| -> CvCurve {
            let n = (3.0 / step) as usize;
            // 1/C^2 from the integral of 2 (V_bi - v) d(...) — build C by
            // integrating the local relation d(1/C^2)/dV = -2/(q eps A^2 N(V)).
            let mut v = -3.0;
            let mut inv_c2 =
                2.0 * (1.0 - v) / (ELEMENTARY_CHARGE * m.permittivity_f_per_m() * (area * 1e-4_f64).powi(2) * profile(v) * 1e6);
            let mut samples = Vec::new();
            let area_m2: f64 = area * 1e-4;
            for _ in 0..=n {
                samples.push((v, (1.0 / inv_c2).sqrt()));
                let slope = -2.0
                    / (ELEMENTARY_CHARGE * m.permittivity_f_per_m() * area_m2 * area_m2 * profile(v) * 1e6);
                inv_c2 += slope * step; // 1/C^2 falls as V rises
                v += step;
            }
            CvCurve {
                samples,
                contact_area_cm2: area,
            }
        };
        let err_of = |curve: &CvCurve| -> f64 {
            cv_doping(curve, &m)
                .unwrap()
                .iter()
                .filter_map(|p| p.n_d_cm3.map(|n| rel_err(n, profile(p.voltage_v))))
                .fold(0.0, f64::max)
        };
        let coarse = err_of(&make(0.2));
        let fine = err_of(&make(0.05));
        assert!(
            fine <= coarse,
            "refinement did not help: {fine} vs {coarse}"
        );
    }

    #[test]
    fn too_few_samples_rejected() {
        let curve = CvCurve {
            samples: vec![(0.0, 1e-10); 4],
            contact_area_cm2: 9e-4,
        };
        assert!(cv_doping(&curve, &MaterialParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn interval_contains_midpoint(
            v in 0.5..5.0f64,
            sv in 0.0..0.5f64,
            x in 1.0..4.0f64,
            sx in 0.0..0.3f64,
        ) {
            let m = MaterialParams::default();
            let i = doping_uncertainty(v, sv, x, sx, 2.95, &m).unwrap();
            prop_assert!(i.low_cm3 <= i.mid_cm3 && i.mid_cm3 <= i.high_cm3);
        }

        #[test]
        fn doping_round_trip_is_exact(
            v in 0.0..40.0f64,
            n_d in 5e13..1e16f64,
        ) {
            let m = MaterialParams::default();
            let x = crate::device::depletion_width_um(v, n_d, 2.95, &m).unwrap();
            let n = extract_doping(v, x, 2.95, &m).unwrap();
            prop_assert!((n - n_d).abs() <= 1e-10 * n_d);
        }
    }
}
