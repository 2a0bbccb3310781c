//! Linear least squares on the quadratic Stark model, plus the result type
//! shared by every fitter in this module.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sensor::StarkParams;

/// Parameter estimates with their uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Parameter names, in the same order as `values`.
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// 1-sigma uncertainties, `sigmas[i] = sqrt(covariance[i][i])`.
    pub sigmas: Vec<f64>,
    /// Symmetric covariance matrix, row-major.
    pub covariance: Vec<Vec<f64>>,
    /// Sum of squared residuals at the solution.
    pub residual_sse: f64,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.sigmas[i])
    }

    pub(crate) fn from_solution(
        names: &[&str],
        values: DVector<f64>,
        covariance: DMatrix<f64>,
        residual_sse: f64,
    ) -> Self {
        let p = names.len();
        // Symmetrize against round-off before taking diagonals.
        let cov = (&covariance + covariance.transpose()) * 0.5;
        let sigmas = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
        FitResult {
            names: names.iter().map(|s| s.to_string()).collect(),
            values: values.iter().cloned().collect(),
            sigmas,
            covariance: (0..p)
                .map(|i| (0..p).map(|j| cov[(i, j)]).collect())
                .collect(),
            residual_sse,
        }
    }
}

/// Solve a weighted linear least-squares problem through the QR
/// factorization of the design matrix. Returns the solution and
/// `(X^T X)^{-1}` (of the weighted design).
fn weighted_ols(
    design: DMatrix<f64>,
    rhs: DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = design.ncols();
    let qr = design.qr();
    let r = qr.r();
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..p {
        if r[(i, i)].abs() <= 1e-12 * scale.max(1e-300) {
            return Err(Error::DegenerateData(
                "design matrix is rank-deficient".into(),
            ));
        }
    }
    let qty = qr.q().transpose() * rhs;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::DegenerateData("design matrix is rank-deficient".into()))?;
    // (X^T X)^{-1} = R^{-1} R^{-T}
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::DegenerateData("design matrix is rank-deficient".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok((beta, xtx_inv))
}

/// Fit the Stark model `delta_f = -d E - (alpha/2) E^2 + f0` to
/// `(e_local_mv_per_m, delta_f_ghz)` pairs by ordinary least squares on
/// the basis `(-E, -E^2/2, 1)`.
///
/// `point_sigmas`, when given, weights each point by `1/sigma_i`; the
/// covariance is then reported in absolute terms. Without weights the
/// covariance is scaled by the residual variance `SSE / (n - 3)`.
pub fn fit_stark(data: &[(f64, f64)], point_sigmas: Option<&[f64]>) -> Result<FitResult> {
    let n = data.len();
    if n < 3 {
        return Err(Error::DegenerateData(format!(
            "need at least 3 points to fit 3 parameters, got {n}"
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
    let mut fields: Vec<f64> = data.iter().map(|(e, _)| *e).collect();
    fields.sort_by(f64::total_cmp);
    let span = fields[n - 1] - fields[0];
    let mut distinct = 1;
    for i in 1..n {
        if fields[i] - fields[i - 1] > 1e-12 * span.max(1.0) {
            distinct += 1;
        }
    }
    if distinct < 3 {
        return Err(Error::DegenerateData(format!(
            "need at least 3 distinct field values, got {distinct}"
        )));
    }

    let mut design = DMatrix::zeros(n, 3);
    let mut rhs = DVector::zeros(n);
    for (i, (e, df)) in data.iter().enumerate() {
        let w = point_sigmas.map_or(1.0, |s| 1.0 / s[i]);
        design[(i, 0)] = -e * w;
        design[(i, 1)] = -e * e / 2.0 * w;
        design[(i, 2)] = w;
        rhs[i] = df * w;
    }
    let (beta, xtx_inv) = weighted_ols(design, rhs)?;

    let mut sse = 0.0;
    for (e, df) in data {
        let model = -beta[0] * e - beta[1] * e * e / 2.0 + beta[2];
        sse += (df - model) * (df - model);
    }
    let covariance = match point_sigmas {
        Some(_) => xtx_inv,
        None => {
            let dof = (n - 3).max(1) as f64;
            xtx_inv * (sse / dof)
        }
    };
    Ok(FitResult::from_solution(
        &["d", "alpha", "f0"],
        beta,
        covariance,
        sse,
    ))
}

/// View a Stark fit as sensor parameters.
pub fn stark_params_from_fit(fit: &FitResult) -> Result<StarkParams> {
    let get = |name: &str| {
        fit.value(name)
            .ok_or_else(|| Error::InvalidInput(format!("fit has no parameter named {name}")))
    };
    Ok(StarkParams {
        d_ghz_per_mv_per_m: get("d")?,
        alpha_ghz_per_mv_per_m2: get("alpha")?,
        f0_ghz: get("f0")?,
        sigma_d: fit.sigma("d").unwrap_or(0.0),
        sigma_alpha: fit.sigma("alpha").unwrap_or(0.0),
        sigma_f0: fit.sigma("f0").unwrap_or(0.0),
    })
}
