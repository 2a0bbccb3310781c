//! Field sensitivity from a photon-count time series recorded at the
//! steepest point of a resonance.
//!
//! Count fluctuations convert to field fluctuations through the local scan
//! gradient and the linear Stark coefficient:
//! `dE = dcts / (|gradient| * |d|)`. The sensitivity is the mean of the
//! standard deviations of those field fluctuations over whole 1-second
//! intervals.

use serde::Serialize;

use crate::constants::mv_per_m_to_kv_per_m;
use crate::error::{Error, Result};

/// Photon counts per sample bin at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTimeSeries {
    /// Counts in each sample bin.
    pub counts: Vec<f64>,
    /// Sampling rate (Hz).
    pub sample_rate_hz: f64,
    /// Total duration (s).
    pub duration_s: f64,
}

impl CountTimeSeries {
    pub fn new(counts: Vec<f64>, sample_rate_hz: f64) -> Self {
        let duration_s = counts.len() as f64 / sample_rate_hz;
        CountTimeSeries {
            counts,
            sample_rate_hz,
            duration_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if self.counts.iter().any(|c| *c < 0.0) {
            return Err(Error::InvalidInput("counts must be nonnegative".into()));
        }
        let expected = self.duration_s * self.sample_rate_hz;
        if (expected - self.counts.len() as f64).abs() > 1.0 {
            return Err(Error::InvalidInput(format!(
                "duration * rate = {expected:.1} bins does not match {} samples",
                self.counts.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityEstimate {
    /// Mean per-second field noise (kV/m per sqrt(Hz)).
    pub eta_kv_per_m_sqrt_hz: f64,
    /// Standard error of the mean over the 1-second bins.
    pub sigma_eta: f64,
    /// Number of whole 1-second bins used.
    pub bins: usize,
}

/// Sensitivity of a count time series given the scan gradient
/// (counts/s per GHz) and the linear Stark coefficient (GHz per MV/m).
///
/// The counts are detrended by their mean; the result is invariant under a
/// constant count offset and scales exactly as `1/(|gradient| * |d|)`.
pub fn sensitivity(
    series: &CountTimeSeries,
    gradient_counts_per_ghz: f64,
    d_ghz_per_mv_per_m: f64,
) -> Result<SensitivityEstimate> {
    series.validate()?;
    if gradient_counts_per_ghz == 0.0 {
        return Err(Error::Domain("scan gradient must be nonzero".into()));
    }
    if d_ghz_per_mv_per_m == 0.0 {
        return Err(Error::Domain("Stark coefficient d must be nonzero".into()));
    }
    if series.duration_s < 2.0 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 s of data, got {:.3} s",
            series.duration_s
        )));
    }
    let samples_per_bin = series.sample_rate_hz.round() as usize;
    if samples_per_bin < 2 {
        return Err(Error::InvalidInput(format!(
            "sample rate {} Hz leaves fewer than 2 samples per 1-second bin",
            series.sample_rate_hz
        )));
    }
    let bins = series.counts.len() / samples_per_bin;
    if bins < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 whole 1-second bins, got {bins}"
        )));
    }

    let mean = series.counts.iter().sum::<f64>() / series.counts.len() as f64;
    let conversion = series.sample_rate_hz
        / (gradient_counts_per_ghz.abs() * d_ghz_per_mv_per_m.abs()); // counts -> MV/m

    let mut bin_stds = Vec::with_capacity(bins);
    for b in 0..bins {
        let chunk = &series.counts[b * samples_per_bin..(b + 1) * samples_per_bin];
        let bin_mean: f64 =
            chunk.iter().map(|c| (c - mean) * conversion).sum::<f64>() / chunk.len() as f64;
        let var: f64 = chunk
            .iter()
            .map(|c| {
                let v = (c - mean) * conversion - bin_mean;
                v * v
            })
            .sum::<f64>()
            / (chunk.len() - 1) as f64;
        bin_stds.push(var.sqrt());
    }
    let eta_mv = bin_stds.iter().sum::<f64>() / bins as f64;
    let spread = (bin_stds
        .iter()
        .map(|s| (s - eta_mv) * (s - eta_mv))
        .sum::<f64>()
        / (bins - 1) as f64)
        .sqrt();
    Ok(SensitivityEstimate {
        eta_kv_per_m_sqrt_hz: mv_per_m_to_kv_per_m(eta_mv),
        sigma_eta: mv_per_m_to_kv_per_m(spread / (bins as f64).sqrt()),
        bins,
    })
}
