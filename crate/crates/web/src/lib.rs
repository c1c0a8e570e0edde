//! Browser bindings: sensor response curve, model thrust trace and the
//! force-trace filter chain, each returning plain arrays for canvas plots.

use tailthrust::kinematics::{
    compute_frames, compute_kinematics, generate_wave, uniform_times, ArcGrid, WaveMode, WaveParams,
};
use tailthrust::reactive::{cycle_average_thrust, reactive_force, TailPlanform};
use tailthrust::sensor::{bandwidth_for_error, normalized_response, DcsDesign};
use tailthrust::sigproc::{measure_cycles, FirSpec};
use tailthrust::synthetic::{SpikeTrain, TraceFixture};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct SensorCurve {
    freqs: Vec<f64>,
    response_db: Vec<f64>,
    bandwidth_hz: f64,
    stiffness: f64,
}

#[wasm_bindgen]
impl SensorCurve {
    #[wasm_bindgen(getter)]
    pub fn freqs(&self) -> Vec<f64> {
        self.freqs.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn response_db(&self) -> Vec<f64> {
        self.response_db.clone()
    }

    /// Highest frequency with response error at most the requested bound, or NaN.
    #[wasm_bindgen(getter)]
    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    #[wasm_bindgen(getter)]
    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }
}

/// Reference beam geometry with the given beam length, natural frequency and
/// loss coefficient, evaluated from 1 Hz to 1 kHz.
pub fn sensor_curve_native(
    beam_length_mm: f64,
    natural_freq_hz: f64,
    loss_coeff: f64,
    max_error_pct: f64,
    points: usize,
) -> Result<SensorCurve, String> {
    let mut design = DcsDesign::reference();
    design.beam_length = beam_length_mm * 1e-3;
    design.loss_coeff = loss_coeff;
    let design = design.with_natural_frequency(natural_freq_hz);
    design.validate().map_err(|e| e.to_string())?;
    let points = points.max(2);
    let freqs: Vec<f64> = (0..points)
        .map(|i| 10f64.powf(3.0 * i as f64 / (points - 1) as f64))
        .collect();
    let response_db = freqs
        .iter()
        .map(|f| 20.0 * normalized_response(f / natural_freq_hz, loss_coeff).log10())
        .collect();
    let bandwidth_hz = bandwidth_for_error(&design, max_error_pct / 100.0).unwrap_or(f64::NAN);
    Ok(SensorCurve {
        freqs,
        response_db,
        bandwidth_hz,
        stiffness: design.stiffness(),
    })
}

#[wasm_bindgen]
pub fn sensor_curve(
    beam_length_mm: f64,
    natural_freq_hz: f64,
    loss_coeff: f64,
    max_error_pct: f64,
    points: usize,
) -> Result<SensorCurve, JsError> {
    sensor_curve_native(beam_length_mm, natural_freq_hz, loss_coeff, max_error_pct, points)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct ThrustCurve {
    times: Vec<f64>,
    thrust: Vec<f64>,
    mean: f64,
}

#[wasm_bindgen]
impl ThrustCurve {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    /// [N]
    #[wasm_bindgen(getter)]
    pub fn thrust(&self) -> Vec<f64> {
        self.thrust.clone()
    }

    /// Average over whole periods [N].
    #[wasm_bindgen(getter)]
    pub fn mean(&self) -> f64 {
        self.mean
    }
}

/// `mode`: 0 traveling, 1 standing, 2 rigid translation.
#[allow(clippy::too_many_arguments)]
pub fn thrust_curve_native(
    mode: u8,
    amp0_mm: f64,
    amp_slope: f64,
    wavelength_mm: f64,
    freq_hz: f64,
    length_mm: f64,
    periods: usize,
) -> Result<ThrustCurve, String> {
    let mode = match mode {
        0 => WaveMode::Traveling,
        1 => WaveMode::Standing,
        2 => WaveMode::RigidTranslation,
        m => return Err(format!("unknown wave mode {m}")),
    };
    let wavenumber = if wavelength_mm > 0.0 {
        2.0 * std::f64::consts::PI / (wavelength_mm * 1e-3)
    } else {
        0.0
    };
    let params = WaveParams {
        mode,
        amp0: amp0_mm * 1e-3,
        amp_slope,
        wavenumber,
        angular_freq: 2.0 * std::f64::consts::PI * freq_hz,
        phase: 0.0,
        speed: 0.0,
    };
    let planform = TailPlanform::new(length_mm * 1e-3, 50.8e-6);
    let period = params.period().ok_or("frequency must be positive")?;
    let steps = 200;
    let times = uniform_times(0.0, period / steps as f64, steps * periods.max(1) + 1);
    let grid = ArcGrid::new(81, planform.length).map_err(|e| e.to_string())?;
    let run = || -> tailthrust::Result<ThrustCurve> {
        let cl = generate_wave(&params, &grid, &times)?;
        let frames = compute_frames(&cl)?;
        let kin = compute_kinematics(&cl, &frames, None)?;
        let trace = reactive_force(&kin, &frames, &planform)?;
        let mean = cycle_average_thrust(&trace, period)?;
        Ok(ThrustCurve {
            times: trace.times,
            thrust: trace.thrust,
            mean,
        })
    };
    run().map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn thrust_curve(
    mode: u8,
    amp0_mm: f64,
    amp_slope: f64,
    wavelength_mm: f64,
    freq_hz: f64,
    length_mm: f64,
    periods: usize,
) -> Result<ThrustCurve, JsError> {
    thrust_curve_native(mode, amp0_mm, amp_slope, wavelength_mm, freq_hz, length_mm, periods)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct FilterDemo {
    times: Vec<f64>,
    raw: Vec<f64>,
    filtered: Vec<f64>,
    clean: Vec<f64>,
    peak_mean: f64,
    average_mean: f64,
    true_peak: f64,
    true_average: f64,
}

#[wasm_bindgen]
impl FilterDemo {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn raw(&self) -> Vec<f64> {
        self.raw.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn filtered(&self) -> Vec<f64> {
        self.filtered.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn clean(&self) -> Vec<f64> {
        self.clean.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn peak_mean(&self) -> f64 {
        self.peak_mean
    }

    #[wasm_bindgen(getter)]
    pub fn average_mean(&self) -> f64 {
        self.average_mean
    }

    #[wasm_bindgen(getter)]
    pub fn true_peak(&self) -> f64 {
        self.true_peak
    }

    #[wasm_bindgen(getter)]
    pub fn true_average(&self) -> f64 {
        self.true_average
    }
}

/// Synthetic 5.5 s spike-train record through drift removal and denoising.
/// Drift and noise are given relative to the 0.48 mN spike; arrays are
/// decimated by `stride` for plotting.
pub fn filter_demo_native(drift_ratio: f64, noise_ratio: f64, seed: u64, stride: usize) -> Result<FilterDemo, String> {
    let train = SpikeTrain::reference();
    let mut fixture = TraceFixture::reference(train);
    fixture.drift_amplitude = drift_ratio * train.peak;
    fixture.noise_sd = noise_ratio * train.peak;
    let run = || -> tailthrust::Result<FilterDemo> {
        let raw = fixture.generate(seed)?;
        let clean = fixture.clean()?;
        let (filtered, metrics) = measure_cycles(&raw, train.freq, 0.0, 5, &FirSpec::drift(), &FirSpec::denoise())?;
        let stride = stride.max(1);
        let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<f64>>();
        Ok(FilterDemo {
            times: (0..raw.len()).step_by(stride).map(|i| raw.time(i)).collect(),
            raw: pick(raw.samples()),
            filtered: pick(filtered.samples()),
            clean: pick(clean.samples()),
            peak_mean: metrics.peak_mean,
            average_mean: metrics.average_mean,
            true_peak: train.peak,
            true_average: train.cycle_mean(),
        })
    };
    run().map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn filter_demo(drift_ratio: f64, noise_ratio: f64, seed: u32, stride: usize) -> Result<FilterDemo, JsError> {
    filter_demo_native(drift_ratio, noise_ratio, seed as u64, stride).map_err(|e| JsError::new(&e))
}
