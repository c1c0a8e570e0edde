//! Reactive (added-mass) force on an undulating tail.
//!
//! The tail is treated as a slender plate whose cross-sections accelerate the
//! fluid they displace. With added mass per unit length `m(s)`, the force
//! exerted on the tail is
//!
//! ```text
//! F_r(t) = -int_0^l m(s) (dvn/dt + v_t dvn/ds) u_n ds
//! ```
//!
//! and the signed thrust is its b1 component. Viscous forces are not modeled.

use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ArcGrid, FrameField, KinematicField};
use crate::numerics::{derivative, integer_period_mean, unwrap_angles};

/// Default planform coefficient of `h(s) = c_h sqrt(l - s)` in mm^(1/2).
pub const DEFAULT_HEIGHT_COEFF: f64 = 0.694;

/// Density of water at room temperature [kg/m^3].
pub const WATER_DENSITY: f64 = 998.0;

/// Parabolic tail planform.
///
/// The height coefficient follows the millimetre convention: `h` in mm for
/// `s`, `l` in mm. Everything stored here is SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailPlanform {
    /// Tail length l [m].
    pub length: f64,
    /// Material thickness [m].
    pub thickness: f64,
    #[serde(default = "default_height_coeff")]
    pub height_coeff: f64,
    #[serde(default = "default_density")]
    pub density: f64,
}

fn default_height_coeff() -> f64 {
    DEFAULT_HEIGHT_COEFF
}

fn default_density() -> f64 {
    WATER_DENSITY
}

impl TailPlanform {
    pub fn new(length: f64, thickness: f64) -> Self {
        Self {
            length,
            thickness,
            height_coeff: DEFAULT_HEIGHT_COEFF,
            density: WATER_DENSITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tail length", self.length),
            ("tail thickness", self.thickness),
            ("height coefficient", self.height_coeff),
            ("fluid density", self.density),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Local planform height h(s) [m].
    pub fn height(&self, s: f64) -> f64 {
        let remaining_mm = 1e3 * (self.length - s).max(0.0);
        self.height_coeff * remaining_mm.sqrt() * 1e-3
    }

    /// `m(s) = C sqrt(l - s)` with `s` in metres; returns `C` [kg/m^(3/2)].
    fn mass_coeff(&self) -> f64 {
        // h(s) = c_h * 1e-3 * sqrt(1e3 (l - s)) = c_h * 10^-1.5 * sqrt(l - s)
        2.0 * self.density * self.thickness * self.height_coeff * 1e3f64.sqrt() * 1e-3
    }

    /// Added mass per unit length at `s` [kg/m].
    pub fn added_mass(&self, s: f64) -> Result<f64> {
        if !(0.0..=self.length).contains(&s) {
            return Err(Error::Domain(format!(
                "arc position {s:.6e} m outside [0, {:.6e}] m",
                self.length
            )));
        }
        Ok(2.0 * self.density * self.thickness * self.height(s))
    }
}

/// Product-trapezoid weights `w_j = int m(s) phi_j(s) ds` for the hat basis of
/// `grid`, so that `int m g ds ~ sum_j w_j g(s_j)`.
///
/// The moments of `sqrt(l - s)` are integrated exactly, which keeps second-order
/// accuracy despite the square-root behaviour at the tip.
pub fn added_mass_weights(planform: &TailPlanform, grid: &ArcGrid) -> Vec<f64> {
    let coeff = planform.mass_coeff();
    let l = grid.length();
    let h = grid.step();
    let n = grid.len();
    let half_pow = |u: f64| (2.0 / 5.0) * u.powf(2.5);
    let three_half_pow = |u: f64| (2.0 / 3.0) * u.powf(1.5);
    let mut w = vec![0.0; n];
    for j in 0..n - 1 {
        let u_hi = (l - grid.s(j)).max(0.0);
        let u_lo = (l - grid.s(j + 1)).max(0.0);
        let first = half_pow(u_hi) - half_pow(u_lo);
        let zeroth = three_half_pow(u_hi) - three_half_pow(u_lo);
        w[j] += coeff * (first - u_lo * zeroth) / h;
        w[j + 1] += coeff * (u_hi * zeroth - first) / h;
    }
    w
}

/// Thrust (b1) and lateral (b2) components of the reactive force.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrace {
    pub times: Vec<f64>,
    /// Signed thrust F_th [N]; negative values push the body toward -b1.
    pub thrust: Vec<f64>,
    pub lateral: Vec<f64>,
}

impl ForceTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn peak_abs_thrust(&self) -> f64 {
        self.thrust.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn first_non_finite(name: &'static str, a: &Array2<f64>) -> Result<()> {
    if let Some(((frame, sample), _)) = a.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            field: name,
            frame,
            sample,
        });
    }
    Ok(())
}

pub fn reactive_force(kin: &KinematicField, frames: &FrameField, planform: &TailPlanform) -> Result<ForceTrace> {
    planform.validate()?;
    let (nt, ns) = kin.dim();
    if frames.dim() != (nt, ns) {
        return Err(Error::ShapeMismatch(format!(
            "frames {:?} vs kinematics {:?}",
            frames.dim(),
            (nt, ns)
        )));
    }
    let grid_length = kin.arc_step * (ns - 1) as f64;
    if (grid_length - planform.length).abs() > 1e-9 * planform.length {
        return Err(Error::ShapeMismatch(format!(
            "kinematics span {grid_length:.9e} m but planform length is {:.9e} m",
            planform.length
        )));
    }
    first_non_finite("dvn/dt", &kin.dvn_dt)?;
    first_non_finite("dvn/ds", &kin.dvn_ds)?;
    first_non_finite("slip velocity", &kin.slip_velocity)?;
    first_non_finite("tangent angle", &frames.theta)?;

    let grid = ArcGrid::new(ns, planform.length)?;
    let weights = added_mass_weights(planform, &grid);
    let mut thrust = Vec::with_capacity(nt);
    let mut lateral = Vec::with_capacity(nt);
    for i in 0..nt {
        let (mut fx, mut fy) = (0.0, 0.0);
        for (j, w) in weights.iter().enumerate() {
            let accel = kin.dvn_dt[[i, j]] + kin.slip_velocity[[i, j]] * kin.dvn_ds[[i, j]];
            let wa = w * accel;
            fx += wa * frames.normal[[i, j, 0]];
            fy += wa * frames.normal[[i, j, 1]];
        }
        thrust.push(-fx);
        lateral.push(-fy);
    }
    Ok(ForceTrace {
        times: kin.times.clone(),
        thrust,
        lateral,
    })
}

/// Time-averaged thrust over the whole undulation periods in the trace.
pub fn cycle_average_thrust(trace: &ForceTrace, period: f64) -> Result<f64> {
    integer_period_mean(&trace.times, &trace.thrust, period)
}

/// Cycle-averaged power carried by the wave, `P_w(s) = m(s) <v_n^2> v_w / 2`,
/// at every arc sample.
pub fn wave_power(kin: &KinematicField, planform: &TailPlanform, wave_speed: f64, period: f64) -> Result<Vec<f64>> {
    planform.validate()?;
    if !(wave_speed > 0.0) || !wave_speed.is_finite() {
        return Err(Error::param(
            "wave speed",
            format!("must be positive, got {wave_speed}"),
        ));
    }
    let (_, ns) = kin.dim();
    let grid = ArcGrid::new(ns, planform.length)?;
    let mut out = Vec::with_capacity(ns);
    for (j, lane) in kin.normal_velocity.axis_iter(Axis(1)).enumerate() {
        let squared: Vec<f64> = lane.iter().map(|v| v * v).collect();
        let mean_sq = integer_period_mean(&kin.times, &squared, period)?;
        let m = planform.added_mass(grid.s(j))?;
        out.push(0.5 * m * mean_sq * wave_speed);
    }
    Ok(out)
}

/// Normal and tangential material acceleration of the fluid in contact with
/// the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelField {
    pub normal: Array2<f64>,
    pub tangential: Array2<f64>,
}

pub fn material_acceleration(kin: &KinematicField, frames: &FrameField) -> Result<AccelField> {
    let (nt, ns) = kin.dim();
    if frames.dim() != (nt, ns) || kin.slip_velocity.dim() != (nt, ns) {
        return Err(Error::ShapeMismatch(format!(
            "frames {:?}, slip {:?} vs kinematics {:?}",
            frames.dim(),
            kin.slip_velocity.dim(),
            (nt, ns)
        )));
    }
    if nt < 3 || ns < 3 {
        return Err(Error::TooShort {
            what: "samples per axis for angle derivatives",
            need: 3,
            got: nt.min(ns),
        });
    }
    let (dt, ds) = (kin.time_step, kin.arc_step);
    let theta_t = derivative(unwrap_angles(frames.theta.view(), Axis(0)).view(), Axis(0), dt);
    let theta_s = derivative(unwrap_angles(frames.theta.view(), Axis(1)).view(), Axis(1), ds);
    let vt = &kin.slip_velocity;
    let vt_t = derivative(vt.view(), Axis(0), dt);
    let vt_s = derivative(vt.view(), Axis(1), ds);

    let mut normal = Array2::zeros((nt, ns));
    let mut tangential = Array2::zeros((nt, ns));
    Zip::indexed(&mut normal)
        .and(&mut tangential)
        .for_each(|(i, j), an, at| {
            let v_t = vt[[i, j]];
            let v_n = kin.normal_velocity[[i, j]];
            let dvn = kin.dvn_dt[[i, j]] + v_t * kin.dvn_ds[[i, j]];
            let dvt = vt_t[[i, j]] + v_t * vt_s[[i, j]];
            *an = dvn + v_t * theta_t[[i, j]] + v_t * v_t * theta_s[[i, j]];
            *at = dvt - v_n * theta_t[[i, j]] - v_n * v_t * theta_s[[i, j]];
        });
    Ok(AccelField { normal, tangential })
}
