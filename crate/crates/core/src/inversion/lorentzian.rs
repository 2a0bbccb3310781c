//! Single-Lorentzian line fitting by damped Gauss-Newton.
//!
//! Model: `y = background + amplitude * (w/2)^2 / ((x - center)^2 + (w/2)^2)`
//! with parameters (center, fwhm, amplitude, background). The normal
//! equations are damped with an adaptive factor: x2 on a rejected step,
//! /3 on an accepted one. Initialization comes from the tallest sample and
//! its half-maximum crossings, which also serves as the tie-break between
//! multiple peaks.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::inversion::fit::FitResult;

const MAX_ITERATIONS: usize = 200;
const DAMPING_UP: f64 = 2.0;
const DAMPING_DOWN: f64 = 3.0;

fn model(x: f64, p: &Vector4<f64>) -> f64 {
    let (center, fwhm, amplitude, background) = (p[0], p[1], p[2], p[3]);
    let h = fwhm / 2.0;
    background + amplitude * h * h / ((x - center) * (x - center) + h * h)
}

fn jacobian_row(x: f64, p: &Vector4<f64>) -> Vector4<f64> {
    let (center, fwhm, amplitude, _) = (p[0], p[1], p[2], p[3]);
    let h = fwhm / 2.0;
    let dx = x - center;
    let denom = dx * dx + h * h;
    let denom2 = denom * denom;
    Vector4::new(
        amplitude * h * h * 2.0 * dx / denom2,
        amplitude * h * dx * dx / denom2, // d/d(fwhm) = d/dh * 1/2
        h * h / denom,
        1.0,
    )
}

fn initial_guess(data: &[(f64, f64)]) -> Result<Vector4<f64>> {
    let n = data.len();
    let (min_y, max_y) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, (_, y)| {
        (acc.0.min(*y), acc.1.max(*y))
    });
    let amplitude = max_y - min_y;
    let scale = max_y.abs().max(min_y.abs()).max(1e-300);
    if amplitude <= 1e-9 * scale {
        return Err(Error::FitFailed {
            iterations: 0,
            residual_sse: 0.0,
            reason: "data has no peak above the background".into(),
        });
    }
    let peak_idx = data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();
    let center = data[peak_idx].0;
    let half = min_y + amplitude / 2.0;
    // Nearest half-maximum crossings on each side of the peak.
    let mut left = data[0].0;
    for i in (0..peak_idx).rev() {
        if data[i].1 < half {
            left = data[i].0;
            break;
        }
    }
    let mut right = data[n - 1].0;
    for point in data.iter().skip(peak_idx + 1) {
        if point.1 < half {
            right = point.0;
            break;
        }
    }
    let span = (data[n - 1].0 - data[0].0).abs();
    let fwhm = (right - left).abs().max(span / (n as f64)).max(1e-12 * span.max(1.0));
    Ok(Vector4::new(center, fwhm, amplitude, min_y))
}

/// Fit one Lorentzian to a `(x, y)` scan.
///
/// `point_sigmas` weights the residuals by `1/sigma_i` when given. The
/// returned parameters are named `center`, `fwhm`, `amplitude`,
/// `background`, in the units of the input.
pub fn fit_lorentzian(data: &[(f64, f64)], point_sigmas: Option<&[f64]>) -> Result<FitResult> {
    let n = data.len();
    if n < 8 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 points for a 4-parameter line fit, got {n}"
        )));
    }
    if let Some(sigmas) = point_sigmas {
        if sigmas.len() != n {
            return Err(Error::InvalidInput(format!(
                "point_sigmas length {} does not match data length {n}",
                sigmas.len()
            )));
        }
        if sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidInput(
                "point sigmas must all be positive".into(),
            ));
        }
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let weights: Vec<f64> = match point_sigmas {
        Some(s) => {
            // Keep sigmas aligned with the sorted abscissae.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| data[i].0.total_cmp(&data[j].0));
            order.iter().map(|&i| 1.0 / s[i]).collect()
        }
        None => vec![1.0; n],
    };

    let mut params = initial_guess(&sorted)?;
    let span = sorted[n - 1].0 - sorted[0].0;
    if span <= params[1] {
        return Err(Error::InvalidInput(format!(
            "scan span {span} does not exceed the estimated width {}",
            params[1]
        )));
    }

    let sse_of = |p: &Vector4<f64>| -> f64 {
        sorted
            .iter()
            .zip(&weights)
            .map(|((x, y), w)| {
                let r = (y - model(*x, p)) * w;
                r * r
            })
            .sum()
    };

    let initial_sse = sse_of(&params);
    let mut sse = initial_sse;
    let mut damping = 1e-3;
    let mut converged = false;
    let mut slow_steps = 0;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        for ((x, y), w) in sorted.iter().zip(&weights) {
            let j = jacobian_row(*x, &params) * *w;
            let r = (y - model(*x, &params)) * w;
            jtj += j * j.transpose();
            jtr += j * r;
        }

        let mut stepped = false;
        while damping < 1e12 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[(i, i)] += damping * jtj[(i, i)].max(1e-30);
            }
            if let Some(inv) = damped.try_inverse() {
                let delta = inv * jtr;
                let mut trial = params + delta;
                trial[1] = trial[1].abs(); // the model is even in the width
                let trial_sse = sse_of(&trial);
                if trial_sse.is_finite() && trial_sse <= sse {
                    let sse_drop = sse - trial_sse;
                    let step_scale = (0..4)
                        .map(|i| (delta[i] / params[i].abs().max(1e-12)).abs())
                        .fold(0.0, f64::max);
                    params = trial;
                    sse = trial_sse;
                    damping = (damping / DAMPING_DOWN).max(1e-12);
                    stepped = true;
                    if sse_drop <= 1e-9 * (sse + 1e-300) || step_scale <= 1e-9 {
                        converged = true;
                    } else if sse_drop <= 1e-6 * (sse + 1e-300) {
                        // A residual floor reached through a shallow valley
                        // shows up as a run of barely-improving steps.
                        slow_steps += 1;
                        converged = slow_steps >= 5;
                    } else {
                        slow_steps = 0;
                    }
                    break;
                }
            }
            damping *= DAMPING_UP;
        }
        if converged {
            break;
        }
        if !stepped {
            // Damping exhausted without an acceptable step. Having already
            // descended from the initial residual this is a stall at the
            // minimum; stalling immediately means the model cannot follow
            // the data at all.
            if sse < initial_sse {
                converged = true;
                break;
            }
            return Err(Error::FitFailed {
                iterations,
                residual_sse: sse,
                reason: "no damped step reduced the residual".into(),
            });
        }
    }
    if !converged {
        return Err(Error::FitFailed {
            iterations,
            residual_sse: sse,
            reason: format!("no convergence within {MAX_ITERATIONS} iterations"),
        });
    }

    // Covariance from the undamped normal equations at the solution.
    let mut jtj = Matrix4::<f64>::zeros();
    for ((x, _), w) in sorted.iter().zip(&weights) {
        let j = jacobian_row(*x, &params) * *w;
        jtj += j * j.transpose();
    }
    let xtx_inv = jtj.try_inverse().ok_or(Error::FitFailed {
        iterations,
        residual_sse: sse,
        reason: "singular normal equations at the solution".into(),
    })?;
    let covariance = match point_sigmas {
        Some(_) => xtx_inv,
        None => {
            let dof = (n - 4).max(1) as f64;
            xtx_inv * (sse / dof)
        }
    };
    Ok(FitResult::from_solution(
        &["center", "fwhm", "amplitude", "background"],
        nalgebra::DVector::from_iterator(4, params.iter().cloned()),
        nalgebra::DMatrix::from_fn(4, 4, |i, j| covariance[(i, j)]),
        sse,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn lorentzian(x: f64, center: f64, fwhm: f64, amplitude: f64, background: f64) -> f64 {
        let h = fwhm / 2.0;
        background + amplitude * h * h / ((x - center) * (x - center) + h * h)
    }

    fn grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn noiseless_line_recovered_to_1e6() {
        let (center, fwhm, amplitude, background) = (916.3, 71.5, 4000.0, 150.0);
        let data: Vec<(f64, f64)> = grid(center - 300.0, center + 300.0, 121)
            .into_iter()
            .map(|x| (x, lorentzian(x, center, fwhm, amplitude, background)))
            .collect();
        let fit = fit_lorentzian(&data, None).unwrap();
        for (name, want) in [
            ("center", center),
            ("fwhm", fwhm),
            ("amplitude", amplitude),
            ("background", background),
        ] {
            let got = fit.value(name).unwrap();
            assert!(
                (got - want).abs() <= 1e-6 * want.abs(),
                "{name}: {got} vs {want}"
            );
        }
        for i in 0..4 {
            assert!(fit.covariance[i][i] >= 0.0);
            for j in 0..4 {
                assert_eq!(fit.covariance[i][j], fit.covariance[j][i]);
            }
        }
    }

    #[test]
    fn flat_data_fails() {
        let data: Vec<(f64, f64)> = grid(0.0, 10.0, 40).into_iter().map(|x| (x, 5.0)).collect();
        assert!(matches!(
            fit_lorentzian(&data, None),
            Err(Error::FitFailed { .. })
        ));
    }

    #[test]
    fn too_few_points_rejected() {
        let data = vec![(0.0, 1.0); 5];
        assert!(matches!(
            fit_lorentzian(&data, None),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn poisson_noise_width_within_five_percent() {
        // Peak SNR 20 -> 400 expected counts at the peak.
        let (center, fwhm, peak, background) = (0.0, 71.5, 400.0, 16.0);
        let xs = grid(center - 250.0, center + 250.0, 1201);
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let data: Vec<(f64, f64)> = xs
                .iter()
                .map(|&x| {
                    let lambda = lorentzian(x, center, fwhm, peak - background, background);
                    let draw = Poisson::new(lambda).unwrap().sample(&mut rng);
                    (x, draw)
                })
                .collect();
            let fit = fit_lorentzian(&data, None).unwrap();
            let got = fit.value("fwhm").unwrap();
            assert!(
                (got - fwhm).abs() / fwhm < 0.05,
                "seed {seed}: fwhm {got} vs {fwhm}"
            );
        }
    }

    #[test]
    fn tallest_peak_wins_on_multimodal_data() {
        let xs = grid(-10.0, 10.0, 201);
        let data: Vec<(f64, f64)> = xs
            .iter()
            .map(|&x| {
                (
                    x,
                    lorentzian(x, -4.0, 1.0, 100.0, 0.0) + lorentzian(x, 5.0, 1.0, 260.0, 0.0),
                )
            })
            .collect();
        let fit = fit_lorentzian(&data, None).unwrap();
        assert!((fit.value("center").unwrap() - 5.0).abs() < 0.1);
    }

    #[test]
    fn weighted_fit_runs() {
        let data: Vec<(f64, f64)> = grid(-40.0, 40.0, 81)
            .into_iter()
            .map(|x| (x, lorentzian(x, 3.0, 12.0, 50.0, 2.0)))
            .collect();
        let sigmas = vec![0.5; data.len()];
        let fit = fit_lorentzian(&data, Some(&sigmas)).unwrap();
        assert!((fit.value("center").unwrap() - 3.0).abs() < 1e-6);
    }
}
