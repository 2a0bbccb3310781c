//! Invert the quadratic Stark model: recover the local field from a
//! measured resonance shift.

use crate::error::{Error, Result};
use crate::sensor::StarkParams;

/// A recovered field value. `flagged` marks solutions where both quadratic
/// roots were negative although a nonnegative magnitude was expected; the
/// branch root is still returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldReconstruction {
    pub e_local_mv_per_m: f64,
    pub flagged: bool,
}

/// Solve `-d E - (alpha/2) E^2 + f0 = delta_f` for E (MV/m).
///
/// With `alpha = 0` the inversion is the exact linear one,
/// `E = (f0 - delta_f)/d`. Otherwise the root continuously connected to
/// that linear-regime solution is returned: of the two quadratic roots,
/// the one closer to `(f0 - delta_f)/d`.
pub fn reconstruct_field(
    delta_f_ghz: f64,
    params: &StarkParams,
) -> Result<FieldReconstruction> {
    let d = params.d_ghz_per_mv_per_m;
    let alpha = params.alpha_ghz_per_mv_per_m2;
    let c = delta_f_ghz - params.f0_ghz;
    if d == 0.0 && alpha == 0.0 {
        return Err(Error::OutOfRange(
            "both Stark coefficients are zero; the shift carries no field information".into(),
        ));
    }

    // (alpha/2) E^2 + d E + c = 0
    if alpha == 0.0 {
        return Ok(FieldReconstruction {
            e_local_mv_per_m: -c / d,
            flagged: false,
        });
    }

    let a = alpha / 2.0;
    let discriminant = d * d - 4.0 * a * c;
    if discriminant < 0.0 {
        return Err(Error::OutOfRange(format!(
            "no real field produces a shift of {delta_f_ghz} GHz with these parameters (discriminant {discriminant:.3e})"
        )));
    }
    // Numerically stable pair: q = -(d + sign(d) sqrt(disc)) / 2.
    let sqrt_disc = discriminant.sqrt();
    let q = -(d + d.signum() * sqrt_disc) / 2.0;
    let (r1, r2) = if q == 0.0 {
        (0.0, -d / a)
    } else {
        (q / a, c / q)
    };

    let linear_root = if d != 0.0 { -c / d } else { r1 };
    let root = if (r1 - linear_root).abs() <= (r2 - linear_root).abs() {
        r1
    } else {
        r2
    };
    let flagged = r1 < 0.0 && r2 < 0.0;
    Ok(FieldReconstruction {
        e_local_mv_per_m: root,
        flagged,
    })
}
