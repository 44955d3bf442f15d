//! Tap series: the (delay, amplitude) view of one channel capture.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    /// Seconds.
    pub delay: f64,
    /// Linear amplitude.
    pub amplitude: f64,
}

/// Where a capture came from. One access point sweeps 32 beam patterns per
/// beacon burst, so `beam_id` is in `0..32`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureMeta {
    pub location: String,
    pub beam_id: u8,
    pub scenario: String,
    pub beamwidth_deg: f64,
    pub capture_index: u64,
}

pub const BEAM_PATTERNS: u8 = 32;

impl Default for CaptureMeta {
    fn default() -> Self {
        Self {
            location: String::new(),
            beam_id: 0,
            scenario: String::new(),
            beamwidth_deg: 0.0,
            capture_index: 0,
        }
    }
}

/// Non-empty taps with strictly increasing non-negative delays and positive
/// amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSeries {
    taps: Vec<Tap>,
    pub meta: CaptureMeta,
}

impl TapSeries {
    pub fn new(taps: Vec<Tap>, meta: CaptureMeta) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptySeries);
        }
        if meta.beam_id >= BEAM_PATTERNS {
            return Err(Error::InvalidInput(format!(
                "beam id {} outside 0..{BEAM_PATTERNS}",
                meta.beam_id
            )));
        }
        for (i, tap) in taps.iter().enumerate() {
            if !(tap.delay.is_finite() && tap.delay >= 0.0) {
                return Err(Error::InvalidInput(format!("tap {i}: bad delay {}", tap.delay)));
            }
            if !(tap.amplitude.is_finite() && tap.amplitude > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "tap {i}: amplitude {} is not positive",
                    tap.amplitude
                )));
            }
            if i > 0 && tap.delay <= taps[i - 1].delay {
                return Err(Error::InvalidInput(format!(
                    "tap {i}: delays must be strictly increasing"
                )));
            }
        }
        Ok(Self { taps, meta })
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.taps.iter().map(|t| t.amplitude).fold(0.0, f64::max)
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|t| t.amplitude * t.amplitude).sum()
    }
}
