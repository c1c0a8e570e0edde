//! Synthetic force traces with closed-form ground truth, for exercising the
//! measurement pipeline without hardware.

use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigproc::TimeSeries;

/// Periodic thrust made of a half-sine spike at the start of each actuation
/// period followed by a shallow half-sine trough.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeTrain {
    /// Actuation frequency [Hz].
    pub freq: f64,
    /// Spike height [N].
    pub peak: f64,
    /// Spike duration as a fraction of the period.
    pub spike_frac: f64,
    /// Trough depth [N], positive.
    pub trough: f64,
    /// Trough duration as a fraction of the period.
    pub trough_frac: f64,
}

impl SpikeTrain {
    /// 0.48 mN spike of 80 ms and an 8 uN trough of 400 ms at 1 Hz.
    pub fn reference() -> Self {
        Self {
            freq: 1.0,
            peak: 0.48e-3,
            spike_frac: 0.08,
            trough: 8e-6,
            trough_frac: 0.4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.freq > 0.0) || !self.freq.is_finite() {
            return Err(Error::param(
                "spike train frequency",
                format!("must be positive, got {}", self.freq),
            ));
        }
        if !(self.peak > 0.0) || !(self.trough >= 0.0) {
            return Err(Error::param(
                "spike train",
                "peak must be positive and trough non-negative",
            ));
        }
        if !(self.spike_frac > 0.0) || !(self.trough_frac >= 0.0) || self.spike_frac + self.trough_frac > 1.0 {
            return Err(Error::param(
                "spike train",
                "spike and trough must fit inside one period",
            ));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        let phase = (t * self.freq).rem_euclid(1.0);
        if phase < self.spike_frac {
            self.peak * (PI * phase / self.spike_frac).sin()
        } else if phase < self.spike_frac + self.trough_frac {
            -self.trough * (PI * (phase - self.spike_frac) / self.trough_frac).sin()
        } else {
            0.0
        }
    }

    /// Exact cycle mean: each half-sine lobe integrates to `2 A T / pi`.
    pub fn cycle_mean(&self) -> f64 {
        2.0 / PI * (self.peak * self.spike_frac - self.trough * self.trough_frac)
    }
}

/// Measurement-like trace: spike train + slow sinusoidal drift + white noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFixture {
    pub train: SpikeTrain,
    /// Record length [s].
    pub duration: f64,
    pub rate: f64,
    /// Drift amplitude [N].
    pub drift_amplitude: f64,
    /// Drift frequency [Hz].
    pub drift_freq: f64,
    /// Noise standard deviation [N].
    pub noise_sd: f64,
}

impl TraceFixture {
    /// 5.5 s at 5 kHz; drift of 10x the spike height at 0.005 Hz; noise SD of
    /// 5% of the spike height.
    pub fn reference(train: SpikeTrain) -> Self {
        Self {
            train,
            duration: 5.5,
            rate: 5000.0,
            drift_amplitude: 10.0 * train.peak,
            drift_freq: 0.005,
            noise_sd: 0.05 * train.peak,
        }
    }

    pub fn samples(&self) -> usize {
        (self.duration * self.rate).round() as usize
    }

    /// The noiseless, drift-free force.
    pub fn clean(&self) -> Result<TimeSeries> {
        self.train.validate()?;
        TimeSeries::from_fn(self.rate, 0.0, self.samples(), |t| self.train.value(t))
    }

    /// Force record [N]. The drift phase and the noise are drawn from `seed`.
    pub fn generate(&self, seed: u64) -> Result<TimeSeries> {
        self.train.validate()?;
        let mut rng = StdRng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise_sd).map_err(|e| Error::param("noise_sd", e.to_string()))?;
        let drift_phase = rng.random_range(0.0..2.0 * PI);
        TimeSeries::from_fn(self.rate, 0.0, self.samples(), |t| {
            self.train.value(t)
                + self.drift_amplitude * (2.0 * PI * self.drift_freq * t + drift_phase).sin()
                + noise.sample(&mut rng)
        })
    }
}
