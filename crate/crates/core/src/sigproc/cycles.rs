use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{Error, Result};
use crate::numerics::mean_and_esd;

/// Splits `series` into consecutive actuation periods of `round(rate / f)`
/// samples starting at `t0`. The partial trailing window is dropped.
pub fn segment_cycles(series: &TimeSeries, freq: f64, t0: f64) -> Result<Vec<&[f64]>> {
    if !(freq > 0.0) || !freq.is_finite() {
        return Err(Error::param(
            "actuation frequency",
            format!("must be positive, got {freq}"),
        ));
    }
    let rate = series.rate();
    let end = series.start() + series.duration();
    if !t0.is_finite() || t0 >= end {
        return Err(Error::param(
            "t0",
            format!("{t0} s is beyond the series end at {end} s"),
        ));
    }
    if t0 < series.start() {
        return Err(Error::param(
            "t0",
            format!("{t0} s precedes the series start at {} s", series.start()),
        ));
    }
    let width = (rate / freq).round() as usize;
    if width < 2 {
        return Err(Error::param(
            "actuation frequency",
            format!("{freq} Hz leaves fewer than 2 samples per cycle at {rate} Hz"),
        ));
    }
    let offset = ((t0 - series.start()) * rate).round() as usize;
    let samples = &series.samples()[offset.min(series.len())..];
    if samples.len() < width {
        return Err(Error::TooShort {
            what: "samples after t0 for one actuation period",
            need: width,
            got: samples.len(),
        });
    }
    Ok(samples.chunks_exact(width).collect())
}

/// Peak and cycle-averaged force of one actuation period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclePoint {
    pub peak: f64,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleMetrics {
    pub cycles: Vec<CyclePoint>,
    /// Mean peak force over the selected cycles.
    pub peak_mean: f64,
    /// Mean cycle-averaged force over the selected cycles.
    pub average_mean: f64,
}

/// Metrics over the first `n_cycles` windows.
///
/// The cycle average is the trapezoid rule over one full period of a periodic
/// signal, which reduces to the arithmetic mean of the window samples.
pub fn cycle_metrics(windows: &[&[f64]], n_cycles: usize) -> Result<CycleMetrics> {
    if n_cycles == 0 {
        return Err(Error::param("n_cycles", "must be at least 1"));
    }
    if windows.len() < n_cycles {
        return Err(Error::TooShort {
            what: "cycle windows",
            need: n_cycles,
            got: windows.len(),
        });
    }
    let cycles: Vec<CyclePoint> = windows[..n_cycles]
        .iter()
        .map(|w| {
            let peak = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let average = w.iter().sum::<f64>() / w.len() as f64;
            CyclePoint { peak, average }
        })
        .collect();
    let n = cycles.len() as f64;
    let peak_mean = cycles.iter().map(|c| c.peak).sum::<f64>() / n;
    let average_mean = cycles.iter().map(|c| c.average).sum::<f64>() / n;
    Ok(CycleMetrics {
        cycles,
        peak_mean,
        average_mean,
    })
}

/// Across-test statistics of the per-test means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestAggregate {
    pub tests: usize,
    pub peak_mean: f64,
    pub peak_esd: f64,
    pub average_mean: f64,
    pub average_esd: f64,
}

pub fn aggregate_tests(tests: &[CycleMetrics]) -> Result<TestAggregate> {
    if tests.is_empty() {
        return Err(Error::TooShort {
            what: "tests to aggregate",
            need: 1,
            got: 0,
        });
    }
    let peaks: Vec<f64> = tests.iter().map(|t| t.peak_mean).collect();
    let avgs: Vec<f64> = tests.iter().map(|t| t.average_mean).collect();
    let (peak_mean, peak_esd) = mean_and_esd(&peaks);
    let (average_mean, average_esd) = mean_and_esd(&avgs);
    Ok(TestAggregate {
        tests: tests.len(),
        peak_mean,
        peak_esd,
        average_mean,
        average_esd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn series(secs: f64, f: impl FnMut(f64) -> f64) -> TimeSeries {
        TimeSeries::from_fn(5000.0, 0.0, (secs * 5000.0).round() as usize, f).unwrap()
    }

    #[test]
    fn window_counts() {
        let ts = series(5.5, |_| 0.0);
        let w = segment_cycles(&ts, 1.0, 0.0).unwrap();
        assert_eq!(w.len(), 5);
        assert!(w.iter().all(|w| w.len() == 5000));
        let w = segment_cycles(&ts, 2.0, 0.0).unwrap();
        assert_eq!(w.len(), 11);
        assert!(w.iter().all(|w| w.len() == 2500));
        assert_eq!(segment_cycles(&ts, 1.0, 0.25).unwrap().len(), 5);
    }

    #[test]
    fn segmentation_errors() {
        let ts = series(5.5, |_| 0.0);
        assert!(segment_cycles(&ts, 0.0, 0.0).is_err());
        assert!(segment_cycles(&ts, -1.0, 0.0).is_err());
        assert!(segment_cycles(&ts, 1.0, 6.0).is_err());
        assert!(segment_cycles(&ts, 1.0, 5.0).is_err());
        let w = segment_cycles(&ts, 1.0, 0.0).unwrap();
        assert!(matches!(
            cycle_metrics(&w, 6),
            Err(Error::TooShort { need: 6, got: 5, .. })
        ));
    }

    #[test]
    fn constant_trace() {
        let ts = series(5.5, |_| 0.3e-3);
        let w = segment_cycles(&ts, 1.0, 0.0).unwrap();
        let m = cycle_metrics(&w, 5).unwrap();
        for c in &m.cycles {
            assert_eq!(c.peak, 0.3e-3);
            assert!((c.average - 0.3e-3).abs() < 1e-12 * 0.3e-3);
        }
        let agg = aggregate_tests(&[m.clone(), m.clone(), m]).unwrap();
        assert_eq!(agg.peak_esd, 0.0);
        assert!(agg.average_esd < 1e-12 * 0.3e-3);
    }

    #[test]
    fn zero_mean_sinusoid() {
        let ts = series(5.5, |t| 0.2e-3 * (2.0 * PI * t).sin());
        let w = segment_cycles(&ts, 1.0, 0.0).unwrap();
        let m = cycle_metrics(&w, 5).unwrap();
        for c in &m.cycles {
            assert!((c.peak - 0.2e-3).abs() < 1e-7 * 0.2e-3 + 1e-12);
            assert!(c.average.abs() < 1e-12);
        }
    }

    /// Half-sine spike of `peak` lasting `spike` seconds at the start of each
    /// period, then a half-sine trough of depth `trough` lasting `dip` seconds.
    pub(crate) fn spike_train(t: f64, peak: f64, spike: f64, trough: f64, dip: f64) -> f64 {
        let phase = t.rem_euclid(1.0);
        if phase < spike {
            peak * (PI * phase / spike).sin()
        } else if phase < spike + dip {
            -trough * (PI * (phase - spike) / dip).sin()
        } else {
            0.0
        }
    }

    #[test]
    fn spike_train_matches_closed_form() {
        let (peak, spike, trough, dip) = (0.48e-3, 0.08, 8e-6, 0.4);
        let ts = series(5.5, |t| spike_train(t, peak, spike, trough, dip));
        let w = segment_cycles(&ts, 1.0, 0.0).unwrap();
        let m = cycle_metrics(&w, 5).unwrap();
        // oracle: integral of A sin(pi t / T) over [0, T] is 2 A T / pi
        let exact_avg = 2.0 * peak * spike / PI - 2.0 * trough * dip / PI;
        assert!((m.peak_mean - peak).abs() < 1e-9 * peak);
        assert!(
            (m.average_mean - exact_avg).abs() < 1e-4 * exact_avg.abs(),
            "{} vs {exact_avg}",
            m.average_mean
        );
    }

    #[test]
    fn aggregate_uses_sample_esd() {
        let mk = |p: f64, a: f64| CycleMetrics {
            cycles: vec![],
            peak_mean: p,
            average_mean: a,
        };
        let agg = aggregate_tests(&[mk(1.0, 0.1), mk(2.0, 0.2), mk(3.0, 0.3)]).unwrap();
        assert_eq!(agg.peak_mean, 2.0);
        assert!((agg.peak_esd - 1.0).abs() < 1e-15);
        assert!((agg.average_esd - 0.1).abs() < 1e-15);
        assert!(aggregate_tests(&[]).is_err());
    }

    proptest! {
        #[test]
        fn metric_bounds(values in proptest::collection::vec(-1.0f64..1.0, 40..200), f in 1u32..5) {
            let ts = TimeSeries::new(100.0, 0.0, values).unwrap();
            if let Ok(w) = segment_cycles(&ts, f as f64, 0.0) {
                let m = cycle_metrics(&w, w.len()).unwrap();
                for (c, win) in m.cycles.iter().zip(&w) {
                    let lo = win.iter().copied().fold(f64::INFINITY, f64::min);
                    prop_assert!(lo <= c.average + 1e-15);
                    prop_assert!(c.average <= c.peak + 1e-15);
                }
            }
        }
    }
}
