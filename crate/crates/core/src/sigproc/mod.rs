//! Measured-force processing: zero-phase FIR drift removal and denoising,
//! cycle segmentation on the actuation clock, and peak/average metrics.

mod cycles;
mod fir;
mod series;

pub use cycles::{aggregate_tests, cycle_metrics, segment_cycles, CycleMetrics, CyclePoint, TestAggregate};
pub use fir::{denoise, design_lowpass, frequency_response, remove_drift, zero_phase_filter, FirSpec, Window};
pub use series::TimeSeries;

/// Sample rate of the reference acquisition system [Hz].
pub const REFERENCE_RATE: f64 = 5000.0;

use crate::error::Result;

/// Drift removal, denoising, segmentation on the actuation clock and per-cycle
/// metrics over the first `n_cycles` periods. Returns the filtered force and
/// the metrics.
pub fn measure_cycles(
    force: &TimeSeries,
    freq: f64,
    t0: f64,
    n_cycles: usize,
    drift: &FirSpec,
    noise: &FirSpec,
) -> Result<(TimeSeries, CycleMetrics)> {
    let filtered = denoise(&remove_drift(force, drift)?, noise)?;
    let windows = segment_cycles(&filtered, freq, t0)?;
    let metrics = cycle_metrics(&windows, n_cycles)?;
    Ok((filtered, metrics))
}
