use crate::error::{Error, Result};

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    rate: f64,
    start: f64,
    samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(rate: f64, start: f64, samples: Vec<f64>) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::param("sample rate", format!("must be positive, got {rate}")));
        }
        if !start.is_finite() {
            return Err(Error::param("start time", "must be finite"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("samples", format!("non-finite value at index {i}")));
        }
        Ok(Self { rate, start, samples })
    }

    /// Samples `f(t)` at `t_i = start + i / rate`.
    pub fn from_fn<F: FnMut(f64) -> f64>(rate: f64, start: f64, len: usize, mut f: F) -> Result<Self> {
        let samples = (0..len).map(|i| f(start + i as f64 / rate)).collect();
        Self::new(rate, start, samples)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 / self.rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            rate: self.rate,
            start: self.start,
            samples,
        }
    }
}
