//! Channel metrics: RMS delay spread, amplitude-only frequency response,
//! coherence bandwidth and per-cluster peak-to-average ratio.
//!
//! Taps carry no phase, so frequency-domain results are an amplitude-only
//! approximation.

use std::f64::consts::PI;

use crate::channel::{ChannelRealization, Cluster};
use crate::error::{Error, Result};
use crate::taps::TapSeries;

pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.9;
pub const DEFAULT_RESPONSE_POINTS: usize = 1024;

/// Power-weighted standard deviation of the tap delays, seconds.
pub fn rms_delay_spread(taps: &TapSeries) -> f64 {
    let total: f64 = taps.taps().iter().map(|t| t.amplitude * t.amplitude).sum();
    // Relative to the first tap so large absolute delays keep precision.
    let origin = taps.taps()[0].delay;
    let mean = taps
        .taps()
        .iter()
        .map(|t| t.amplitude * t.amplitude * (t.delay - origin))
        .sum::<f64>()
        / total;
    let var = taps
        .taps()
        .iter()
        .map(|t| t.amplitude * t.amplitude * (t.delay - origin - mean).powi(2))
        .sum::<f64>()
        / total;
    var.max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    /// Hz, ascending and evenly spaced from 0.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Hz.
    pub reference_band: f64,
}

impl FrequencyResponse {
    pub fn spacing(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// Standard deviation of the magnitudes divided by their mean.
    pub fn normalized_std(&self) -> f64 {
        let n = self.magnitudes.len() as f64;
        let mean = self.magnitudes.iter().sum::<f64>() / n;
        let var = self.magnitudes.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
        if mean > 0.0 {
            var.sqrt() / mean
        } else {
            0.0
        }
    }
}

/// `|H(f)| = |Σ a_j exp(-i 2π f τ_j)|` on `n_points` frequencies spanning
/// `[0, bandwidth]`.
pub fn frequency_response(taps: &TapSeries, bandwidth: f64, n_points: usize) -> Result<FrequencyResponse> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidInput(format!("bandwidth {bandwidth} must be positive")));
    }
    if n_points < 2 {
        return Err(Error::InvalidInput("frequency response needs at least 2 points".into()));
    }
    let step = bandwidth / (n_points - 1) as f64;
    let frequencies: Vec<f64> = (0..n_points).map(|i| i as f64 * step).collect();
    let origin = taps.taps()[0].delay;
    let magnitudes = frequencies
        .iter()
        .map(|&f| {
            let (re, im) = taps.taps().iter().fold((0.0, 0.0), |(re, im), t| {
                let phase = -2.0 * PI * f * (t.delay - origin);
                (re + t.amplitude * phase.cos(), im + t.amplitude * phase.sin())
            });
            re.hypot(im)
        })
        .collect();
    Ok(FrequencyResponse {
        frequencies,
        magnitudes,
        reference_band: bandwidth,
    })
}

/// Smallest frequency lag at which the normalized magnitude correlation
///
/// ```text
/// ρ(m) = Σ_i |H_i| |H_{i+m}| / sqrt(Σ_i |H_i|² · Σ_i |H_{i+m}|²)
/// ```
///
/// falls below `threshold`; the reference band when it never does.
pub fn coherence_bandwidth(fr: &FrequencyResponse, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!("correlation threshold {threshold} outside (0, 1)")));
    }
    let h = &fr.magnitudes;
    let n = h.len();
    if n < 2 || fr.frequencies.len() != n {
        return Err(Error::InvalidInput("malformed frequency response".into()));
    }
    for lag in 1..n {
        let (mut cross, mut a, mut b) = (0.0, 0.0, 0.0);
        for i in 0..n - lag {
            cross += h[i] * h[i + lag];
            a += h[i] * h[i];
            b += h[i + lag] * h[i + lag];
        }
        let denom = (a * b).sqrt();
        let rho = if denom > 0.0 { cross / denom } else { 1.0 };
        if rho < threshold {
            return Ok(lag as f64 * fr.spacing());
        }
    }
    Ok(fr.reference_band)
}

/// Per cluster, the largest path amplitude over the mean path amplitude.
pub fn peak_to_average(r: &ChannelRealization) -> Vec<f64> {
    cluster_peak_to_average(r.clusters())
}

pub fn cluster_peak_to_average(clusters: &[Cluster]) -> Vec<f64> {
    clusters
        .iter()
        .map(|c| {
            let peak = c.paths().iter().map(|p| p.alpha).fold(0.0, f64::max);
            let mean = c.paths().iter().map(|p| p.alpha).sum::<f64>() / c.paths().len() as f64;
            (peak / mean).max(1.0)
        })
        .collect()
}
