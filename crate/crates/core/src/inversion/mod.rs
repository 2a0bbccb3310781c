//! Inference procedures: Stark-parameter fitting, field reconstruction,
//! onset detection, doping extraction with uncertainty, capacitance-voltage
//! analysis, line fitting, and sensitivity estimation.
//!
//! Everything here is deterministic given explicit seeds; the Monte Carlo
//! pieces (bootstrap resampling) take the seed as an argument and echo it
//! in their output.

mod doping;
mod fit;
mod lorentzian;
mod reconstruct;
mod sensitivity;
mod threshold;

pub use doping::{cv_doping, cv_doping_windowed, doping_uncertainty, extract_doping, CvCurve, CvDopingPoint, DopingInterval};
pub use fit::{fit_stark, stark_params_from_fit, FitResult};
pub use lorentzian::fit_lorentzian;
pub use reconstruct::{reconstruct_field, FieldReconstruction};
pub use sensitivity::{sensitivity, CountTimeSeries, SensitivityEstimate};
pub use threshold::{detect_threshold, ThresholdEstimate, BOOTSTRAP_RESAMPLES, DEFAULT_BOOTSTRAP_SEED};
