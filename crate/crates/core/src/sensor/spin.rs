//! Spin-3/2 ground state: Stark-shifted zero-field splitting and the
//! microwave response it produces.
//!
//! The ground-state Hamiltonian is `H = (D + d_z E_z) S_z^2`, diagonal in
//! the S_z basis ordered |+3/2>, |+1/2>, |-1/2>, |-3/2>. A transverse drive
//! `Omega S_x cos(2 pi f t)` probes the |±1/2> -> |±3/2> transitions; per
//! microwave frequency the rotating-wave approximation leaves a static 4x4
//! Hamiltonian that is evolved by piecewise-constant propagators.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// S_z eigenvalues along the diagonal.
const SPIN_PROJECTIONS: [f64; 4] = [1.5, 0.5, -0.5, -1.5];

/// Ground-state spin parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinModel {
    /// Half the zero-field splitting (MHz); the |±1/2> -> |±3/2> transition
    /// sits at 2 D.
    pub d_mhz: f64,
    /// Axial Stark coupling of the Hamiltonian (Hz per V/m). The transition
    /// frequency shifts by 2 d_z E_z, so a measured peak-shift gradient g
    /// corresponds to d_z = g / 2.
    pub dz_hz_per_v_per_m: f64,
}

impl Default for SpinModel {
    fn default() -> Self {
        // 2D = 70 MHz; measured peak-shift gradient -0.07 Hz/(V/m).
        SpinModel::from_peak_shift_gradient(35.0, -0.07)
    }
}

impl SpinModel {
    /// Build from the directly measured quantity: the gradient of the
    /// transition frequency with respect to the axial field.
    pub fn from_peak_shift_gradient(d_mhz: f64, gradient_hz_per_v_per_m: f64) -> Self {
        SpinModel {
            d_mhz,
            dz_hz_per_v_per_m: gradient_hz_per_v_per_m / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_mhz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "zero-field splitting parameter D must be positive, got {}",
                self.d_mhz
            )));
        }
        Ok(())
    }

    /// Stark-shifted splitting parameter `D + d_z E_z` in MHz.
    pub fn shifted_d_mhz(&self, e_z_v_per_m: f64) -> f64 {
        self.d_mhz + self.dz_hz_per_v_per_m * e_z_v_per_m * 1e-6
    }

    /// |±1/2> -> |±3/2> transition frequency (MHz) at an axial field.
    pub fn transition_mhz(&self, e_z_v_per_m: f64) -> f64 {
        2.0 * self.shifted_d_mhz(e_z_v_per_m)
    }
}

/// `H = (D + d_z E_z) S_z^2` in Hz, diagonal in the S_z basis.
pub fn ground_state_hamiltonian(e_z_v_per_m: f64, model: &SpinModel) -> Matrix4<f64> {
    let a_hz = model.shifted_d_mhz(e_z_v_per_m) * 1e6;
    Matrix4::from_diagonal(&Vector4::from_iterator(
        SPIN_PROJECTIONS.iter().map(|m| a_hz * m * m),
    ))
}

/// Microwave sweep result: expectation of the |±3/2> projector after the
/// drive, per frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrSpectrum {
    pub mw_frequencies_mhz: Vec<f64>,
    pub transfer_population: Vec<f64>,
}

impl OdmrSpectrum {
    /// Frequency of the maximum transfer (MHz).
    pub fn peak_frequency_mhz(&self) -> Option<f64> {
        self.mw_frequencies_mhz
            .iter()
            .zip(&self.transfer_population)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(f, _)| *f)
    }
}

/// Trace and Hermiticity tolerance for the evolved density matrix.
const EVOLUTION_TOLERANCE: f64 = 1e-9;

/// Steps per inverse of the largest energy scale in the propagator.
const STEPS_PER_ENERGY: f64 = 50.0;

/// Simulate a pulsed microwave sweep.
///
/// The initial state is the fully mixed |±1/2> pair; readout is the |±3/2>
/// projector. For each microwave frequency the rotating-frame Hamiltonian
/// (diagonal detunings plus the sqrt(3)/4 Omega couplings on the
/// 3/2 <-> 1/2 and -1/2 <-> -3/2 pairs) is evolved for `duration_us` in
/// piecewise-constant steps, with the density-matrix trace checked at every
/// step. Evolution is unitary: no decoherence channels, so the simulated
/// line reflects Rabi broadening only.
pub fn odmr_spectrum(
    e_z_v_per_m: f64,
    model: &SpinModel,
    rabi_mhz: f64,
    duration_us: f64,
    mw_frequencies_mhz: &[f64],
) -> Result<OdmrSpectrum> {
    model.validate()?;
    if !(rabi_mhz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "rabi_mhz must be positive, got {rabi_mhz}"
        )));
    }
    if !(duration_us > 0.0) {
        return Err(Error::InvalidInput(format!(
            "duration_us must be positive, got {duration_us}"
        )));
    }
    if mw_frequencies_mhz.is_empty() {
        return Err(Error::InvalidInput(
            "microwave frequency list is empty".into(),
        ));
    }

    let a_mhz = model.shifted_d_mhz(e_z_v_per_m);
    let coupling = 3f64.sqrt() * rabi_mhz / 4.0;

    let transfer = mw_frequencies_mhz
        .iter()
        .map(|&f| evolve_transfer(a_mhz, coupling, f, duration_us))
        .collect();

    Ok(OdmrSpectrum {
        mw_frequencies_mhz: mw_frequencies_mhz.to_vec(),
        transfer_population: transfer,
    })
}

/// Rotating-frame Hamiltonian (MHz) at one drive frequency.
fn rotating_frame_hamiltonian(a_mhz: f64, coupling_mhz: f64, f_mhz: f64) -> Matrix4<f64> {
    let mut h = Matrix4::zeros();
    h[(0, 0)] = 2.25 * a_mhz - f_mhz;
    h[(1, 1)] = 0.25 * a_mhz;
    h[(2, 2)] = 0.25 * a_mhz;
    h[(3, 3)] = 2.25 * a_mhz - f_mhz;
    // The 1/2 <-> -1/2 matrix element of S_x oscillates at +-f in this frame
    // and is dropped; only the spin-conserving-readout pairs stay.
    h[(0, 1)] = coupling_mhz;
    h[(1, 0)] = coupling_mhz;
    h[(2, 3)] = coupling_mhz;
    h[(3, 2)] = coupling_mhz;
    h
}

fn evolve_transfer(a_mhz: f64, coupling_mhz: f64, f_mhz: f64, duration_us: f64) -> f64 {
    let h = rotating_frame_hamiltonian(a_mhz, coupling_mhz, f_mhz);
    assert!(
        (h - h.transpose()).norm() <= EVOLUTION_TOLERANCE,
        "rotating-frame Hamiltonian must be Hermitian"
    );

    let energy_scale = h.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-12);
    let max_step_us = 1.0 / (STEPS_PER_ENERGY * energy_scale);
    let steps = (duration_us / max_step_us).ceil().max(1.0) as usize;
    let dt_us = duration_us / steps as f64;

    // H is real symmetric: exponentiate through its eigendecomposition.
    let eig = h.symmetric_eigen();
    let mut propagator: Matrix4<Complex64> = Matrix4::zeros();
    for k in 0..4 {
        let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * eig.eigenvalues[k] * dt_us);
        for i in 0..4 {
            for j in 0..4 {
                propagator[(i, j)] +=
                    Complex64::new(eig.eigenvectors[(i, k)] * eig.eigenvectors[(j, k)], 0.0) * phase;
            }
        }
    }
    let propagator_dag = propagator.adjoint();

    // rho_init = (|+1/2><+1/2| + |-1/2><-1/2|) / 2
    let mut rho: Matrix4<Complex64> = Matrix4::zeros();
    rho[(1, 1)] = Complex64::new(0.5, 0.0);
    rho[(2, 2)] = Complex64::new(0.5, 0.0);

    for _ in 0..steps {
        rho = propagator * rho * propagator_dag;
        let trace = (rho[(0, 0)] + rho[(1, 1)] + rho[(2, 2)] + rho[(3, 3)]).re;
        assert!(
            (trace - 1.0).abs() <= EVOLUTION_TOLERANCE,
            "density-matrix trace drifted to {trace}"
        );
        assert!(
            (rho - rho.adjoint()).norm() <= EVOLUTION_TOLERANCE,
            "density matrix lost Hermiticity"
        );
    }

    let transfer = (rho[(0, 0)] + rho[(3, 3)]).re;
    assert!(
        (-EVOLUTION_TOLERANCE..=1.0 + EVOLUTION_TOLERANCE).contains(&transfer),
        "transfer population {transfer} outside [0, 1]"
    );
    transfer.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn mw_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let n = ((stop - start) / step).round() as usize + 1;
        (0..n).map(|i| start + i as f64 * step).collect()
    }

    #[test]
    fn bare_hamiltonian_is_zfs_diagonal() {
        let model = SpinModel::default();
        let h = ground_state_hamiltonian(0.0, &model);
        let d_hz = 35.0e6;
        let expected = [2.25 * d_hz, 0.25 * d_hz, 0.25 * d_hz, 2.25 * d_hz];
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    assert!((h[(i, j)] - expected[i]).abs() < 1e-3);
                } else {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn transition_frequency_examples() {
        let model = SpinModel::default();
        assert!((model.transition_mhz(0.0) - 70.0).abs() < 1e-12);
        // d_z E_z = +1 MHz moves the transition to 72 MHz.
        let e_z = 1e6 / model.dz_hz_per_v_per_m;
        assert!((model.transition_mhz(e_z) - 72.0).abs() < 1e-9);
    }

    #[test]
    fn zero_field_peak_at_70_mhz() {
        let model = SpinModel::default();
        let grid = mw_grid(60.0, 80.0, 0.1);
        let spectrum = odmr_spectrum(0.0, &model, 0.5, 1.1547, &grid).unwrap();
        let peak = spectrum.peak_frequency_mhz().unwrap();
        assert!((peak - 70.0).abs() <= 0.05 + 1e-12, "peak at {peak}");
        assert!(spectrum
            .transfer_population
            .iter()
            .all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn spectrum_symmetric_about_transition_at_zero_field() {
        let model = SpinModel::default();
        // Grid symmetric about 70 MHz.
        let grid = mw_grid(65.0, 75.0, 0.05);
        let spectrum = odmr_spectrum(0.0, &model, 0.5, 1.1547, &grid).unwrap();
        let n = grid.len();
        for i in 0..n / 2 {
            let a = spectrum.transfer_population[i];
            let b = spectrum.transfer_population[n - 1 - i];
            assert!((a - b).abs() < 1e-9, "asymmetry at offset {i}: {a} vs {b}");
        }
    }

    #[test]
    fn no_drive_means_no_transfer() {
        let model = SpinModel::default();
        let grid = mw_grid(68.0, 72.0, 0.5);
        // Smallest representable drive as the rabi -> 0 limit.
        let spectrum = odmr_spectrum(0.0, &model, 1e-6, 1.0, &grid).unwrap();
        assert!(spectrum.transfer_population.iter().all(|&p| p < 1e-10));
    }

    /// Number of contiguous runs of samples at or above half maximum.
    fn peak_count(populations: &[f64]) -> usize {
        let max = populations.iter().cloned().fold(0.0, f64::max);
        let mut runs = 0;
        let mut inside = false;
        for &p in populations {
            let above = p >= max / 2.0;
            if above && !inside {
                runs += 1;
            }
            inside = above;
        }
        runs
    }

    #[test]
    fn fitted_peak_tracks_transition_across_sweep() {
        let model = SpinModel::default();
        let grid = mw_grid(60.0, 80.0, 0.1);
        // d_z E_z / D from -0.035 to 0.035 in steps of 5e-3.
        for k in 0..15 {
            let ratio = -0.035 + 5e-3 * k as f64;
            let e_z = ratio * model.d_mhz * 1e6 / model.dz_hz_per_v_per_m;
            let spectrum = odmr_spectrum(e_z, &model, 0.5, 1.1547, &grid).unwrap();
            // Both drive branches are degenerate: one peak, no splitting.
            assert_eq!(peak_count(&spectrum.transfer_population), 1, "ratio {ratio}");
            let data: Vec<(f64, f64)> = spectrum
                .mw_frequencies_mhz
                .iter()
                .cloned()
                .zip(spectrum.transfer_population.iter().cloned())
                .collect();
            let fit = crate::inversion::fit_lorentzian(&data, None).unwrap();
            let center = fit.value("center").unwrap();
            let expected = model.transition_mhz(e_z);
            assert!(
                (center - expected).abs() <= 0.05,
                "ratio {ratio}: center {center} vs {expected}"
            );
        }
    }

    #[test]
    fn propagation_matches_closed_form_rabi_formula() {
        // Independent oracle: each degenerate branch is a driven two-level
        // system, so the transfer is
        //   (g^2 / W^2) sin^2(2 pi W t),  W = sqrt(g^2 + (delta/2)^2),
        // with g = sqrt(3) Omega / 4 and delta = 2(D + d_z E_z) - f.
        let model = SpinModel::default();
        for (e_z, rabi, duration) in [
            (0.0, 0.5, 1.1547),
            (1.3e7, 0.8, 0.73),
            (-2.7e7, 0.25, 2.4),
            (3.2e7, 1.7, 0.4),
        ] {
            let grid = mw_grid(62.0, 78.0, 0.4);
            let spectrum = odmr_spectrum(e_z, &model, rabi, duration, &grid).unwrap();
            let g = 3f64.sqrt() * rabi / 4.0;
            for (f, p) in grid.iter().zip(&spectrum.transfer_population) {
                let delta = model.transition_mhz(e_z) - f;
                let w = (g * g + delta * delta / 4.0).sqrt();
                let expected =
                    (g * g / (w * w)) * (2.0 * std::f64::consts::PI * w * duration).sin().powi(2);
                assert!(
                    (p - expected).abs() <= 1e-8,
                    "E_z {e_z}, f {f}: {p} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let model = SpinModel::default();
        assert!(odmr_spectrum(0.0, &model, 0.0, 1.0, &[70.0]).is_err());
        assert!(odmr_spectrum(0.0, &model, 0.5, 0.0, &[70.0]).is_err());
        assert!(odmr_spectrum(0.0, &model, 0.5, 1.0, &[]).is_err());
        assert!(SpinModel { d_mhz: 0.0, dz_hz_per_v_per_m: 0.0 }.validate().is_err());
    }

    /// Eigenvalues of a Hermitian 4x4 via its real 8x8 embedding
    /// [[Re, -Im], [Im, Re]] (each eigenvalue appears twice).
    fn hermitian_eigenvalues(m: &Matrix4<Complex64>) -> Vec<f64> {
        let mut real = DMatrix::<f64>::zeros(8, 8);
        for i in 0..4 {
            for j in 0..4 {
                real[(i, j)] = m[(i, j)].re;
                real[(i + 4, j + 4)] = m[(i, j)].re;
                real[(i, j + 4)] = -m[(i, j)].im;
                real[(i + 4, j)] = m[(i, j)].im;
            }
        }
        real.symmetric_eigen().eigenvalues.iter().cloned().collect()
    }

    #[test]
    fn evolved_state_stays_positive() {
        // Re-run the propagation loop with an independent positivity check
        // at every sampled step.
        let model = SpinModel::default();
        let a_mhz = model.shifted_d_mhz(2e7);
        let coupling = 3f64.sqrt() * 0.5 / 4.0;
        for f in [66.0, 70.0, 70.7, 74.0] {
            let h = rotating_frame_hamiltonian(a_mhz, coupling, f);
            let eig = h.symmetric_eigen();
            let dt = 0.002;
            let mut u: Matrix4<Complex64> = Matrix4::zeros();
            for k in 0..4 {
                let phase =
                    Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * eig.eigenvalues[k] * dt);
                for i in 0..4 {
                    for j in 0..4 {
                        u[(i, j)] += Complex64::new(
                            eig.eigenvectors[(i, k)] * eig.eigenvectors[(j, k)],
                            0.0,
                        ) * phase;
                    }
                }
            }
            let udag = u.adjoint();
            let mut rho: Matrix4<Complex64> = Matrix4::zeros();
            rho[(1, 1)] = Complex64::new(0.5, 0.0);
            rho[(2, 2)] = Complex64::new(0.5, 0.0);
            for _ in 0..600 {
                rho = u * rho * udag;
                let trace = (rho[(0, 0)] + rho[(1, 1)] + rho[(2, 2)] + rho[(3, 3)]).re;
                assert!((trace - 1.0).abs() <= 1e-9);
                for lambda in hermitian_eigenvalues(&rho) {
                    assert!(lambda >= -1e-9, "negative population {lambda}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn hamiltonian_is_diagonal_with_known_eigenvalues(
            e_z in -4e7..4e7f64,
            d in 10.0..60.0f64,
            dz in -0.1..0.1f64,
        ) {
            let model = SpinModel { d_mhz: d, dz_hz_per_v_per_m: dz };
            let h = ground_state_hamiltonian(e_z, &model);
            let a = model.shifted_d_mhz(e_z) * 1e6;
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        prop_assert_eq!(h[(i, j)], 0.0);
                    }
                }
            }
            let want = [2.25 * a, 0.25 * a, 0.25 * a, 2.25 * a];
            for (i, w) in want.iter().enumerate() {
                prop_assert!((h[(i, i)] - w).abs() <= 1e-9 * w.abs().max(1.0));
            }
        }

        #[test]
        fn transfer_stays_in_unit_interval(
            e_z in -4e7..4e7f64,
            rabi in 0.05..2.0f64,
            duration in 0.1..3.0f64,
        ) {
            let model = SpinModel::default();
            let grid = [66.0, 69.0, 70.0, 71.0, 74.0];
            let s = odmr_spectrum(e_z, &model, rabi, duration, &grid).unwrap();
            for p in s.transfer_population {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }
}
