//! Electrometry with silicon-vacancy sensors embedded in a 4H-SiC
//! pin-diode.
//!
//! Three layers make up the crate:
//!
//! * [`device`] — 1D depletion-approximation electrostatics of the diode:
//!   built-in voltage, depletion widths, field/band/carrier profiles, and
//!   the local-field correction at a point defect.
//! * [`sensor`] — the vacancy's response: Stark-shifted optical lines,
//!   the spin-3/2 ground-state Hamiltonian with simulated microwave
//!   spectra, and a linewidth model for the charge environment.
//! * [`inversion`] — the analyses that run the other way: Stark-parameter
//!   fits, field reconstruction, onset detection, doping extraction with
//!   uncertainty, capacitance-voltage profiling, line fits, and
//!   sensitivity estimation.
//!
//! [`config`], [`io`], [`synth`], and [`pipeline`] wrap those layers into
//! reproducible file-based experiments driven by the `vsi` command-line
//! tool.

// Numeric guards are written as `!(x > 0.0)` so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod device;
pub mod error;
pub mod inversion;
pub mod io;
pub mod pipeline;
pub mod presets;
pub mod sensor;
pub mod synth;

pub use error::{Error, Result};
