//! Dual-cantilever force sensor: lumped stiffness and frequency response,
//! simulated calibration step responses, and the static calibration fit.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::mean_and_esd;
use crate::sigproc::TimeSeries;

/// Displacement-limited force resolution of the reference sensor [N].
pub const RESOLUTION: f64 = 0.274e-6;
/// Symmetric operating range of the reference sensor [N].
pub const RANGE: f64 = 6.85e-3;
/// Hysteretic loss coefficient of Invar-36.
pub const INVAR_LOSS_COEFF: f64 = 0.007;
/// Handbook Young's modulus of Invar-36 [Pa].
pub const INVAR_YOUNGS_MODULUS: f64 = 141e9;
/// Natural frequency of the reference design [Hz].
pub const REFERENCE_NATURAL_FREQ: f64 = 288.0;
/// Static voltage-to-force mapping of the reference calibration [V/N].
pub const REFERENCE_SLOPE: f64 = 1.46e3;
/// Calibration weight set of the reference procedure [N].
pub const REFERENCE_WEIGHTS: [f64; 5] = [0.107e-3, 0.2011e-3, 0.299e-3, 0.393e-3, 0.486e-3];

/// Geometry and material of the dual-cantilever structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcsDesign {
    /// Young's modulus E [Pa].
    pub youngs_modulus: f64,
    /// Beam width w [m].
    pub width: f64,
    /// Material thickness d [m].
    pub thickness: f64,
    /// Beam length l_b [m].
    pub beam_length: f64,
    /// Hysteretic loss coefficient eta.
    pub loss_coeff: f64,
    /// Equivalent moving mass m_tot [kg].
    pub mass: f64,
}

impl DcsDesign {
    /// The 3 mm x 0.153 mm x 16 mm Invar-36 design, with the equivalent mass
    /// chosen to put the natural frequency at 288 Hz.
    pub fn reference() -> Self {
        let base = Self {
            youngs_modulus: INVAR_YOUNGS_MODULUS,
            width: 3e-3,
            thickness: 0.153e-3,
            beam_length: 16e-3,
            loss_coeff: INVAR_LOSS_COEFF,
            mass: 1.0,
        };
        base.with_natural_frequency(REFERENCE_NATURAL_FREQ)
    }

    /// Back-solves the equivalent mass for a target natural frequency [Hz].
    pub fn with_natural_frequency(mut self, hz: f64) -> Self {
        let wn = 2.0 * PI * hz;
        self.mass = self.stiffness() / (wn * wn);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("Young's modulus", self.youngs_modulus),
            ("beam width", self.width),
            ("beam thickness", self.thickness),
            ("beam length", self.beam_length),
            ("loss coefficient", self.loss_coeff),
            ("equivalent mass", self.mass),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.loss_coeff >= 1.0 {
            return Err(Error::param("loss coefficient", "must be well below 1"));
        }
        Ok(())
    }

    /// Second moment of area of one beam, `w d^3 / 12` [m^4].
    pub fn second_moment(&self) -> f64 {
        self.width * self.thickness.powi(3) / 12.0
    }

    /// Lumped stiffness `24 E I / l_b^3` [N/m].
    pub fn stiffness(&self) -> f64 {
        24.0 * self.youngs_modulus * self.second_moment() / self.beam_length.powi(3)
    }

    /// Undamped natural frequency [rad/s].
    pub fn natural_angular_freq(&self) -> f64 {
        (self.stiffness() / self.mass).sqrt()
    }

    pub fn natural_frequency(&self) -> f64 {
        self.natural_angular_freq() / (2.0 * PI)
    }
}

/// `|delta(w)| / |delta(0)|` for frequency ratio `r = w / w_n`.
pub fn normalized_response(ratio: f64, loss_coeff: f64) -> f64 {
    let eta2 = loss_coeff * loss_coeff;
    let detune = 1.0 - ratio * ratio;
    ((1.0 + eta2) / (eta2 + detune * detune)).sqrt()
}

/// Steady-state deflection amplitude [m] under `F0 e^(j w0 t)`.
pub fn magnitude_response(design: &DcsDesign, amplitude: f64, omega: f64) -> f64 {
    let r = omega / design.natural_angular_freq();
    let eta = design.loss_coeff;
    amplitude / (design.stiffness() * (eta * eta + (1.0 - r * r).powi(2)).sqrt())
}

/// Relative measurement error of a quasi-static calibration at `freq` [Hz].
pub fn response_error(design: &DcsDesign, freq: f64) -> f64 {
    normalized_response(freq / design.natural_frequency(), design.loss_coeff) - 1.0
}

/// Highest excitation frequency [Hz] below which the normalized response stays
/// within `max_rel_error` of unity.
///
/// Below resonance the response rises monotonically, so the band edge is the
/// unique root of `response - 1 - max_rel_error` on `(0, w_n)`.
pub fn bandwidth_for_error(design: &DcsDesign, max_rel_error: f64) -> Result<f64> {
    design.validate()?;
    let eta = design.loss_coeff;
    if !(max_rel_error > 0.0) || !max_rel_error.is_finite() {
        return Err(Error::param(
            "error tolerance",
            format!("must be positive, got {max_rel_error}"),
        ));
    }
    let peak = normalized_response(1.0, eta);
    if 1.0 + max_rel_error >= peak {
        return Err(Error::Unreachable(format!(
            "tolerance {max_rel_error} exceeds the resonant overshoot {:.3}",
            peak - 1.0
        )));
    }
    let target = 1.0 + max_rel_error;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normalized_response(mid, eta) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(lo * design.natural_frequency())
}

/// Parameters of a simulated calibration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTest {
    /// Applied force [N].
    pub force: f64,
    /// Record length [s].
    pub duration: f64,
    /// Sample rate [Hz].
    pub rate: f64,
    /// Additive white-noise standard deviation [V].
    pub noise_sd: f64,
    /// Probe sensitivity [V/m].
    pub gain: f64,
}

/// Voltage record of a Heaviside load applied at t = 0.
///
/// The transient is the canonical underdamped second-order step response with
/// damping ratio `eta / 2`; it settles to `gain * force / k_tot`.
pub fn simulate_step_response(design: &DcsDesign, step: &StepTest, seed: u64) -> Result<TimeSeries> {
    design.validate()?;
    let fn_hz = design.natural_frequency();
    if !(step.rate >= 4.0 * fn_hz) {
        return Err(Error::param(
            "sample rate",
            format!(
                "{} Hz undersamples the {fn_hz:.1} Hz transient (need >= 4 f_n)",
                step.rate
            ),
        ));
    }
    if !(step.duration > 0.0) || !(step.noise_sd >= 0.0) || !step.gain.is_finite() {
        return Err(Error::param(
            "step test",
            "duration must be positive and noise non-negative",
        ));
    }
    let wn = design.natural_angular_freq();
    let zeta = 0.5 * design.loss_coeff;
    let wd = wn * (1.0 - zeta * zeta).sqrt();
    let steady = step.gain * step.force / design.stiffness();
    let n = (step.duration * step.rate).round() as usize + 1;
    let mut rng = StdRng::seed_from_u64(seed);
    let noise = Normal::new(0.0, step.noise_sd).map_err(|e| Error::param("noise", e.to_string()))?;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / step.rate;
            let envelope = (-zeta * wn * t).exp();
            let shape = 1.0 - envelope * ((wd * t).cos() + zeta / (1.0 - zeta * zeta).sqrt() * (wd * t).sin());
            steady * shape + noise.sample(&mut rng)
        })
        .collect();
    TimeSeries::new(step.rate, 0.0, samples)
}

/// Repeated steady-state voltages at each applied force.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRecord {
    levels: Vec<(f64, Vec<f64>)>,
}

impl CalibrationRecord {
    /// Groups `(force [N], voltage [V])` observations by force level.
    pub fn from_observations<I: IntoIterator<Item = (f64, f64)>>(obs: I) -> Result<Self> {
        let mut map: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        for (force, volts) in obs {
            if !force.is_finite() || !volts.is_finite() {
                return Err(Error::param("calibration record", "non-finite observation"));
            }
            let force = force + 0.0; // -0.0 joins the 0.0 level
                                     // sign-magnitude bits -> monotone unsigned key
            let key = force.to_bits() ^ if force.is_sign_negative() { u64::MAX } else { 1 << 63 };
            map.entry(key).or_insert_with(|| (force, Vec::new())).1.push(volts);
        }
        if map.is_empty() {
            return Err(Error::TooShort {
                what: "calibration observations",
                need: 1,
                got: 0,
            });
        }
        Ok(Self {
            levels: map.into_values().collect(),
        })
    }

    pub fn levels(&self) -> &[(f64, Vec<f64>)] {
        &self.levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSummary {
    pub force: f64,
    pub mean: f64,
    pub esd: f64,
    pub reps: usize,
}

/// Linear static mapping `V = slope * F + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    /// [V/N]
    pub slope: f64,
    /// [V]
    pub intercept: f64,
    pub r_squared: f64,
    pub levels: Vec<LevelSummary>,
}

impl CalibrationFit {
    /// Proportional mapping with no offset, e.g. a slope taken from a manifest.
    pub fn proportional(slope: f64) -> Self {
        Self {
            slope,
            intercept: 0.0,
            r_squared: 1.0,
            levels: Vec::new(),
        }
    }

    pub fn force_to_voltage(&self, force: f64) -> f64 {
        self.slope * force + self.intercept
    }
}

/// Ordinary least squares of the per-level mean voltage against force.
pub fn fit_calibration(rec: &CalibrationRecord) -> Result<CalibrationFit> {
    let levels: Vec<LevelSummary> = rec
        .levels
        .iter()
        .map(|(force, volts)| {
            let (mean, esd) = mean_and_esd(volts);
            LevelSummary {
                force: *force,
                mean,
                esd,
                reps: volts.len(),
            }
        })
        .collect();
    if levels.len() < 2 {
        return Err(Error::SingularFit(format!(
            "need at least two distinct force levels, got {}",
            levels.len()
        )));
    }
    let n = levels.len() as f64;
    let fx = levels.iter().map(|l| l.force).sum::<f64>() / n;
    let fy = levels.iter().map(|l| l.mean).sum::<f64>() / n;
    let sxx: f64 = levels.iter().map(|l| (l.force - fx).powi(2)).sum();
    let sxy: f64 = levels.iter().map(|l| (l.force - fx) * (l.mean - fy)).sum();
    if sxx == 0.0 {
        return Err(Error::SingularFit("all force levels are identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = fy - slope * fx;
    let ss_tot: f64 = levels.iter().map(|l| (l.mean - fy).powi(2)).sum();
    let ss_res: f64 = levels
        .iter()
        .map(|l| (l.mean - (slope * l.force + intercept)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(CalibrationFit {
        slope,
        intercept,
        r_squared,
        levels,
    })
}

/// Inverts the calibration sample by sample: `F = (V - intercept) / slope`.
pub fn voltage_to_force(fit: &CalibrationFit, series: &TimeSeries) -> Result<TimeSeries> {
    if fit.slope == 0.0 || !fit.slope.is_finite() {
        return Err(Error::param(
            "calibration slope",
            format!("cannot invert {}", fit.slope),
        ));
    }
    let samples = series
        .samples()
        .iter()
        .map(|v| (v - fit.intercept) / fit.slope)
        .collect();
    TimeSeries::new(series.rate(), series.start(), samples)
}
