use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Hann,
    /// Untapered support. Used by the drift stage, where the sinc is flat over
    /// the support and the window alone sets the response: its nulls fall on
    /// every multiple of `rate / taps`.
    Rectangular,
}

impl Window {
    fn coeff(self, n: usize, order: usize) -> f64 {
        match self {
            Window::Hann => 0.5 - 0.5 * (2.0 * PI * n as f64 / order as f64).cos(),
            Window::Rectangular => 1.0,
        }
    }
}

/// Windowed-sinc low-pass specification. `order` is the polynomial order, so
/// the filter has `order + 1` taps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirSpec {
    pub order: usize,
    /// Cutoff frequency [Hz].
    pub cutoff: f64,
    pub window: Window,
}

impl FirSpec {
    /// Drift extractor: order 5000, 0.01 Hz.
    pub fn drift() -> Self {
        Self {
            order: 5000,
            cutoff: 0.01,
            window: Window::Rectangular,
        }
    }

    /// Noise filter: order 2000, 50 Hz.
    pub fn denoise() -> Self {
        Self {
            order: 2000,
            cutoff: 50.0,
            window: Window::Hann,
        }
    }

    pub fn taps(&self) -> usize {
        self.order + 1
    }

    fn validate(&self, rate: f64) -> Result<()> {
        if self.order < 2 || !self.order.is_multiple_of(2) {
            return Err(Error::param(
                "filter order",
                format!("must be even and >= 2, got {}", self.order),
            ));
        }
        if !(rate > 0.0) {
            return Err(Error::param("sample rate", format!("must be positive, got {rate}")));
        }
        if !(self.cutoff > 0.0) || self.cutoff >= 0.5 * rate {
            return Err(Error::param(
                "cutoff",
                format!("{} Hz must lie in (0, {} Hz)", self.cutoff, 0.5 * rate),
            ));
        }
        Ok(())
    }
}

/// Linear-phase low-pass taps, normalized to unit DC gain.
pub fn design_lowpass(spec: &FirSpec, rate: f64) -> Result<Vec<f64>> {
    spec.validate(rate)?;
    let order = spec.order;
    let half = order / 2;
    let fc = spec.cutoff / rate;
    let mut taps = vec![0.0; order + 1];
    for n in 0..=half {
        let x = n as f64 - half as f64;
        let sinc = if n == half {
            2.0 * fc
        } else {
            (2.0 * PI * fc * x).sin() / (PI * x)
        };
        taps[n] = sinc * spec.window.coeff(n, order);
    }
    let total = 2.0 * taps[..half].iter().sum::<f64>() + taps[half];
    for t in &mut taps[..=half] {
        *t /= total;
    }
    for n in 0..half {
        taps[order - n] = taps[n];
    }
    Ok(taps)
}

/// Magnitude of the tap transfer function at `freq` [Hz].
pub fn frequency_response(taps: &[f64], freq: f64, rate: f64) -> f64 {
    let w = 2.0 * PI * freq / rate;
    let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, h)| {
        let (s, c) = (w * n as f64).sin_cos();
        (re + h * c, im - h * s)
    });
    re.hypot(im)
}

/// Above this many multiply-adds the causal pass switches to FFT convolution.
const DIRECT_LIMIT: usize = 1 << 22;

/// Causal FIR pass with zero initial state; output has the input's length.
fn causal_filter(input: &[f64], taps: &[f64]) -> Vec<f64> {
    if input.len().saturating_mul(taps.len()) <= DIRECT_LIMIT {
        return (0..input.len())
            .map(|n| {
                let k_max = n.min(taps.len() - 1);
                (0..=k_max).map(|k| taps[k] * input[n - k]).sum()
            })
            .collect();
    }
    let size = (input.len() + taps.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    let mut a: Vec<Complex<f64>> = input.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(size, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = taps.iter().map(|&v| Complex::new(v, 0.0)).collect();
    b.resize(size, Complex::new(0.0, 0.0));
    forward.process(&mut a);
    forward.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inverse.process(&mut a);
    let scale = 1.0 / size as f64;
    a[..input.len()].iter().map(|c| c.re * scale).collect()
}

/// Forward-backward filtering: the magnitude response is squared and the net
/// phase is zero. The record is extended by one filter length at each end by
/// odd reflection about the end samples, which carries linear trends through
/// the edges unchanged.
pub fn zero_phase_filter(series: &TimeSeries, taps: &[f64]) -> Result<TimeSeries> {
    let x = series.samples();
    let n = x.len();
    let pad = taps.len();
    if taps.is_empty() {
        return Err(Error::param("taps", "empty filter"));
    }
    if n <= 3 * pad {
        return Err(Error::TooShort {
            what: "samples for zero-phase filtering (3x filter length)",
            need: 3 * pad + 1,
            got: n,
        });
    }
    let (first, last) = (x[0], x[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| 2.0 * first - x[k]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|k| 2.0 * last - x[n - 1 - k]));

    let mut y = causal_filter(&ext, taps);
    y.reverse();
    let mut y = causal_filter(&y, taps);
    y.reverse();
    Ok(series.with_samples(y[pad..pad + n].to_vec()))
}

/// Subtracts the zero-phase low-pass of `series` from itself.
pub fn remove_drift(series: &TimeSeries, spec: &FirSpec) -> Result<TimeSeries> {
    let taps = design_lowpass(spec, series.rate())?;
    let drift = zero_phase_filter(series, &taps)?;
    let out = series
        .samples()
        .iter()
        .zip(drift.samples())
        .map(|(x, d)| x - d)
        .collect();
    Ok(series.with_samples(out))
}

pub fn denoise(series: &TimeSeries, spec: &FirSpec) -> Result<TimeSeries> {
    let taps = design_lowpass(spec, series.rate())?;
    zero_phase_filter(series, &taps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RATE: f64 = 5000.0;

    /// Sine sampled on [0, secs] inclusive, so both ends sit on zero crossings.
    fn sine(freq: f64, secs: f64) -> TimeSeries {
        TimeSeries::from_fn(RATE, 0.0, (secs * RATE) as usize + 1, |t| (2.0 * PI * freq * t).sin()).unwrap()
    }

    fn amplitude(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn taps_sum_to_one_and_are_symmetric() {
        for spec in [
            FirSpec::drift(),
            FirSpec::denoise(),
            FirSpec {
                order: 2,
                cutoff: 100.0,
                window: Window::Hann,
            },
            FirSpec {
                order: 64,
                cutoff: 2000.0,
                window: Window::Rectangular,
            },
        ] {
            let taps = design_lowpass(&spec, RATE).unwrap();
            assert_eq!(taps.len(), spec.order + 1);
            assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..taps.len() {
                assert_eq!(taps[i], taps[spec.order - i]);
            }
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let odd = FirSpec {
            order: 5,
            cutoff: 10.0,
            window: Window::Hann,
        };
        assert!(design_lowpass(&odd, RATE).is_err());
        let nyq = FirSpec {
            order: 10,
            cutoff: 2500.0,
            window: Window::Hann,
        };
        assert!(design_lowpass(&nyq, RATE).is_err());
        let neg = FirSpec {
            order: 10,
            cutoff: -1.0,
            window: Window::Hann,
        };
        assert!(design_lowpass(&neg, RATE).is_err());
    }

    #[test]
    fn denoise_filter_passband_and_stopband() {
        // oracle: direct evaluation of the tap transfer function
        let taps = design_lowpass(&FirSpec::denoise(), RATE).unwrap();
        assert!((frequency_response(&taps, 1.0, RATE) - 1.0).abs() < 1e-3);
        assert!(frequency_response(&taps, 500.0, RATE) < 1e-3);
        assert!((frequency_response(&taps, 0.0, RATE) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn drift_filter_nulls_integer_hertz() {
        let taps = design_lowpass(&FirSpec::drift(), RATE).unwrap();
        for f in [1.0, 2.0, 3.0, 4.0] {
            assert!(frequency_response(&taps, f, RATE) < 1e-3, "{f} Hz");
        }
        assert!(frequency_response(&taps, 0.005, RATE) > 0.999);
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        let x: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let taps = design_lowpass(
            &FirSpec {
                order: 200,
                cutoff: 300.0,
                window: Window::Hann,
            },
            RATE,
        )
        .unwrap();
        let direct = causal_filter(&x, &taps);
        let big: Vec<f64> = x.iter().cycle().take(30_000).copied().collect();
        let fft = causal_filter(&big, &taps);
        assert!(big.len() * taps.len() > DIRECT_LIMIT);
        for i in 0..3000 {
            assert!((direct[i] - fft[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_passes_unchanged() {
        let ts = TimeSeries::new(RATE, 0.0, vec![0.37; 10_000]).unwrap();
        let taps = design_lowpass(&FirSpec::denoise(), RATE).unwrap();
        let out = zero_phase_filter(&ts, &taps).unwrap();
        assert!(out.samples().iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn passband_sine_keeps_amplitude_and_phase() {
        let ts = sine(1.0, 4.0);
        let taps = design_lowpass(&FirSpec::denoise(), RATE).unwrap();
        let out = zero_phase_filter(&ts, &taps).unwrap();
        assert!((amplitude(out.samples()) - 1.0).abs() < 5e-3);
        assert_eq!(xcorr_peak_lag(ts.samples(), out.samples(), 50), 0);
    }

    #[test]
    fn stopband_sine_is_removed() {
        let ts = sine(500.0, 4.0);
        let taps = design_lowpass(&FirSpec::denoise(), RATE).unwrap();
        let out = zero_phase_filter(&ts, &taps).unwrap();
        assert!(amplitude(out.samples()) < 1e-4);
    }

    #[test]
    fn short_series_is_rejected() {
        let ts = sine(1.0, 1.2); // 6001 samples < 3 x 2001 + 1
        let taps = design_lowpass(&FirSpec::denoise(), RATE).unwrap();
        assert!(matches!(zero_phase_filter(&ts, &taps), Err(Error::TooShort { .. })));
    }

    #[test]
    fn drift_removal_of_constant_is_zero() {
        let ts = TimeSeries::new(RATE, 0.0, vec![-2.5e-4; 20_000]).unwrap();
        let out = remove_drift(&ts, &FirSpec::drift()).unwrap();
        assert!(out.samples().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn drift_removal_suppresses_ramp_keeps_sine() {
        // 60 s of 1 Hz sine on a ramp; oracle is the known decomposition
        let ramp = |t: f64| 0.5 * t / 60.0;
        let ts = TimeSeries::from_fn(RATE, 0.0, 60 * 5000, |t| (2.0 * PI * t).sin() + ramp(t)).unwrap();
        let out = remove_drift(&ts, &FirSpec::drift()).unwrap();
        let residual_ramp: Vec<f64> = out
            .samples()
            .iter()
            .enumerate()
            .map(|(i, v)| v - (2.0 * PI * ts.time(i)).sin())
            .collect();
        assert!(amplitude(&residual_ramp) < 0.05 * 0.5);
        assert!((amplitude(out.samples()) - 1.0).abs() < 0.01);
    }

    #[test]
    fn drift_removal_keeps_pure_sine() {
        let ts = sine(1.0, 10.0);
        let out = remove_drift(&ts, &FirSpec::drift()).unwrap();
        let err = out
            .samples()
            .iter()
            .zip(ts.samples())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 0.01);
    }

    #[test]
    fn drift_removal_is_idempotent_on_drift_free_signal() {
        let ts = TimeSeries::from_fn(RATE, 0.0, 20_001, |t| {
            (2.0 * PI * t).sin() + 0.3 * (2.0 * PI * 3.0 * t).sin()
        })
        .unwrap();
        let once = remove_drift(&ts, &FirSpec::drift()).unwrap();
        let twice = remove_drift(&once, &FirSpec::drift()).unwrap();
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        let diff: Vec<f64> = once.samples().iter().zip(twice.samples()).map(|(a, b)| a - b).collect();
        assert!(rms(&diff) < 1e-3 * rms(once.samples()));
    }

    pub(crate) fn xcorr_peak_lag(a: &[f64], b: &[f64], max_lag: isize) -> isize {
        let n = a.len() as isize;
        (-max_lag..=max_lag)
            .map(|lag| {
                let c: f64 = (0..n)
                    .filter(|&i| (0..n).contains(&(i + lag)))
                    .map(|i| a[i as usize] * b[(i + lag) as usize])
                    .sum();
                (lag, c)
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
            .0
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn filter_chain_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, f1 in 0.5f64..20.0, f2 in 0.5f64..200.0) {
            let n = 8000;
            let x = TimeSeries::from_fn(RATE, 0.0, n, |t| (2.0 * PI * f1 * t).sin() + 0.01 * t).unwrap();
            let y = TimeSeries::from_fn(RATE, 0.0, n, |t| (2.0 * PI * f2 * t).cos()).unwrap();
            let combo = TimeSeries::new(
                RATE,
                0.0,
                x.samples().iter().zip(y.samples()).map(|(p, q)| a * p + b * q).collect(),
            )
            .unwrap();
            let drift = FirSpec { order: 1000, cutoff: 0.01, window: Window::Rectangular };
            let chain = |s: &TimeSeries| denoise(&remove_drift(s, &drift).unwrap(), &FirSpec { order: 400, ..FirSpec::denoise() }).unwrap();
            let (cx, cy, cc) = (chain(&x), chain(&y), chain(&combo));
            let scale = cc.samples().iter().fold(1e-12f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                let lin = a * cx.samples()[i] + b * cy.samples()[i];
                prop_assert!((cc.samples()[i] - lin).abs() <= 1e-10 * scale.max(1.0));
            }
        }
    }
}
