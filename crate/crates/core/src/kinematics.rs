//! Tail centerline kinematics.
//!
//! A centerline is sampled on a uniform arc-length grid `s in [0, l]` at a
//! sequence of times. Arrays are indexed `[frame, sample]`, with a trailing
//! component axis (b1, b2) for vector fields. All quantities are SI.

use ndarray::{Array2, Array3, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{derivative, gauss4};

/// Default relative tolerance on `|dr/ds| = 1`.
pub const ARC_TOLERANCE: f64 = 1e-3;

/// Relative tolerance used when checking that sample times are uniform.
const UNIFORM_TIME_TOL: f64 = 1e-6;

/// Uniform arc-length grid `s_i = i * l / (n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcGrid {
    len: usize,
    length: f64,
}

impl ArcGrid {
    pub fn new(len: usize, length: f64) -> Result<Self> {
        if len < 3 {
            return Err(Error::param("arc grid", format!("need >= 3 samples, got {len}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::param("tail length", format!("must be positive, got {length}")));
        }
        Ok(Self { len, length })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn step(&self) -> f64 {
        self.length / (self.len - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        if i + 1 == self.len {
            self.length
        } else {
            i as f64 * self.length / (self.len - 1) as f64
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.s(i))
    }
}

/// Sampled tail centerlines `r(s, t) = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineSequence {
    grid: ArcGrid,
    times: Vec<f64>,
    x: Array2<f64>,
    y: Array2<f64>,
}

impl CenterlineSequence {
    pub fn new(grid: ArcGrid, times: Vec<f64>, x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        let shape = (times.len(), grid.len());
        if x.dim() != shape || y.dim() != shape {
            return Err(Error::ShapeMismatch(format!(
                "expected {shape:?} coordinates, got x {:?} and y {:?}",
                x.dim(),
                y.dim()
            )));
        }
        if times.is_empty() {
            return Err(Error::TooShort {
                what: "centerline frames",
                need: 1,
                got: 0,
            });
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::Domain(format!(
                    "frame times must be strictly increasing (frame {})",
                    i + 1
                )));
            }
        }
        check_finite("x", &x)?;
        check_finite("y", &y)?;
        Ok(Self { grid, times, x, y })
    }

    pub fn grid(&self) -> &ArcGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn frames(&self) -> usize {
        self.times.len()
    }

    /// Reflection `y -> -y` about the b1 axis.
    pub fn mirrored(&self) -> Self {
        Self {
            grid: self.grid,
            times: self.times.clone(),
            x: self.x.clone(),
            y: self.y.mapv(|v| -v),
        }
    }

    /// Largest `| |dr/ds| - 1 |` over all frames, with `dr/ds` from
    /// second-order finite differences along the grid.
    pub fn max_arc_length_error(&self) -> f64 {
        let h = self.grid.step();
        let dx = derivative(self.x.view(), Axis(1), h);
        let dy = derivative(self.y.view(), Axis(1), h);
        Zip::from(&dx)
            .and(&dy)
            .fold(0.0f64, |acc, &a, &b| acc.max((a.hypot(b) - 1.0).abs()))
    }

    /// Fails when the arc-length invariant is violated beyond `tol`.
    pub fn check_inextensible(&self, tol: f64) -> Result<()> {
        let err = self.max_arc_length_error();
        if err > tol {
            return Err(Error::Domain(format!(
                "arc-length invariant violated: max | |dr/ds| - 1 | = {err:.3e} > {tol:.1e}"
            )));
        }
        Ok(())
    }
}

fn check_finite(field: &'static str, a: &Array2<f64>) -> Result<()> {
    if let Some(((frame, sample), _)) = a.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { field, frame, sample });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveMode {
    /// `y = a(s) sin(k s - w t + phi)`
    Traveling,
    /// `y = a(s) cos(k s) sin(w t + phi)`
    Standing,
    /// `y = a0 sin(w t + phi)`, the whole tail moving as a rigid body.
    RigidTranslation,
}

/// Idealized tail kinematics with an affine amplitude envelope
/// `a(s) = amp0 + amp_slope * s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveParams {
    pub mode: WaveMode,
    /// Envelope offset [m].
    #[serde(default)]
    pub amp0: f64,
    /// Envelope slope [m/m].
    #[serde(default)]
    pub amp_slope: f64,
    /// Wavenumber [rad/m].
    #[serde(default)]
    pub wavenumber: f64,
    /// Angular frequency [rad/s].
    pub angular_freq: f64,
    #[serde(default)]
    pub phase: f64,
    /// Swimming speed of the body toward -b1 [m/s]. Zero for a tethered tail.
    #[serde(default)]
    pub speed: f64,
}

impl WaveParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("amp0", self.amp0),
            ("amp_slope", self.amp_slope),
            ("wavenumber", self.wavenumber),
            ("angular_freq", self.angular_freq),
            ("phase", self.phase),
            ("speed", self.speed),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::param("wave parameters", format!("{name} is {v}")));
        }
        match self.mode {
            WaveMode::Traveling | WaveMode::Standing if self.angular_freq <= 0.0 => {
                Err(Error::param("angular_freq", "must be positive for oscillatory modes"))
            }
            WaveMode::RigidTranslation if self.amp_slope != 0.0 => Err(Error::param(
                "amp_slope",
                "rigid translation requires a uniform amplitude",
            )),
            WaveMode::RigidTranslation if self.angular_freq < 0.0 => {
                Err(Error::param("angular_freq", "must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    /// Undulation period `2 pi / w`, or `None` for a non-oscillating tail.
    pub fn period(&self) -> Option<f64> {
        (self.angular_freq > 0.0).then(|| 2.0 * std::f64::consts::PI / self.angular_freq)
    }

    /// Phase speed `w / k` of the traveling wave.
    pub fn wave_speed(&self) -> Option<f64> {
        (self.wavenumber != 0.0).then(|| self.angular_freq / self.wavenumber.abs())
    }

    fn envelope(&self, s: f64) -> f64 {
        self.amp0 + self.amp_slope * s
    }

    /// Lateral deflection and its arc-length slope at `(s, t)`.
    fn lateral(&self, s: f64, t: f64) -> (f64, f64) {
        let a = self.envelope(s);
        let k = self.wavenumber;
        match self.mode {
            WaveMode::Traveling => {
                let phase = k * s - self.angular_freq * t + self.phase;
                let (sin, cos) = phase.sin_cos();
                (a * sin, self.amp_slope * sin + a * k * cos)
            }
            WaveMode::Standing => {
                let temporal = (self.angular_freq * t + self.phase).sin();
                let (sin_ks, cos_ks) = (k * s).sin_cos();
                (
                    a * cos_ks * temporal,
                    (self.amp_slope * cos_ks - a * k * sin_ks) * temporal,
                )
            }
            WaveMode::RigidTranslation => (self.amp0 * (self.angular_freq * t + self.phase).sin(), 0.0),
        }
    }
}

/// Uniformly spaced sample times `t_i = start + i * step`.
pub fn uniform_times(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + i as f64 * step).collect()
}

/// Samples the idealized wave on `grid` at `times`.
///
/// The lateral deflection is prescribed as a function of arc length; `x` is
/// recovered from inextensibility, `x(s, t) = -U t + int_0^s sqrt(1 - y_s^2)`,
/// integrated cell by cell with a four-point Gauss rule.
pub fn generate_wave(params: &WaveParams, grid: &ArcGrid, times: &[f64]) -> Result<CenterlineSequence> {
    params.validate()?;
    let (nt, ns) = (times.len(), grid.len());
    let mut x = Array2::zeros((nt, ns));
    let mut y = Array2::zeros((nt, ns));

    for (frame, &t) in times.iter().enumerate() {
        let mut run = -params.speed * t;
        let mut prev_s = 0.0;
        for j in 0..ns {
            let s = grid.s(j);
            let (yv, slope) = params.lateral(s, t);
            if slope.abs() >= 1.0 {
                return Err(Error::Inextensible { frame, s, slope });
            }
            if j > 0 {
                let mut bad = None;
                run += gauss4(prev_s, s, |sigma| {
                    let (_, sl) = params.lateral(sigma, t);
                    if sl.abs() >= 1.0 {
                        bad.get_or_insert((sigma, sl));
                        0.0
                    } else {
                        (1.0 - sl * sl).sqrt()
                    }
                });
                if let Some((s, slope)) = bad {
                    return Err(Error::Inextensible { frame, s, slope });
                }
            }
            x[[frame, j]] = run;
            y[[frame, j]] = yv;
            prev_s = s;
        }
    }
    CenterlineSequence::new(*grid, times.to_vec(), x, y)
}

/// Tangent angle and the local Lagrangian frame along each centerline.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    /// Tangent angle from b1 [rad].
    pub theta: Array2<f64>,
    /// Unit tangent `(cos theta, sin theta)`.
    pub tangent: Array3<f64>,
    /// Unit normal, the tangent rotated by +pi/2.
    pub normal: Array3<f64>,
}

impl FrameField {
    pub fn dim(&self) -> (usize, usize) {
        self.theta.dim()
    }
}

pub fn compute_frames(cl: &CenterlineSequence) -> Result<FrameField> {
    let h = cl.grid.step();
    let dx = derivative(cl.x.view(), Axis(1), h);
    let dy = derivative(cl.y.view(), Axis(1), h);
    let (nt, ns) = dx.dim();
    let mut theta = Array2::zeros((nt, ns));
    let mut tangent = Array3::zeros((nt, ns, 2));
    let mut normal = Array3::zeros((nt, ns, 2));
    for ((frame, sample), &a) in dx.indexed_iter() {
        let b = dy[[frame, sample]];
        if a.hypot(b) < 1e-9 {
            return Err(Error::DegenerateFrame { frame, sample });
        }
        let th = b.atan2(a);
        let (sin, cos) = th.sin_cos();
        theta[[frame, sample]] = th;
        tangent[[frame, sample, 0]] = cos;
        tangent[[frame, sample, 1]] = sin;
        normal[[frame, sample, 0]] = -sin;
        normal[[frame, sample, 1]] = cos;
    }
    Ok(FrameField { theta, tangent, normal })
}

/// Velocity fields seen by the fluid in contact with the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicField {
    pub times: Vec<f64>,
    pub time_step: f64,
    pub arc_step: f64,
    /// Centerline velocity `dr/dt` [m/s].
    pub body_velocity: Array3<f64>,
    /// Normal velocity `v_b . u_n` [m/s] (no penetration).
    pub normal_velocity: Array2<f64>,
    pub dvn_dt: Array2<f64>,
    pub dvn_ds: Array2<f64>,
    /// Tangential slip velocity of the fluid [m/s].
    pub slip_velocity: Array2<f64>,
}

impl KinematicField {
    pub fn dim(&self) -> (usize, usize) {
        self.normal_velocity.dim()
    }
}

/// Returns the common step of `times`, failing when it is not uniform.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::TooShort {
            what: "time samples",
            need: 2,
            got: times.len(),
        });
    }
    let expected = times[1] - times[0];
    for (i, w) in times.windows(2).enumerate().skip(1) {
        let step = w[1] - w[0];
        if (step - expected).abs() > UNIFORM_TIME_TOL * expected.abs() {
            return Err(Error::NonUniformTime {
                index: i,
                step,
                expected,
            });
        }
    }
    Ok((times[times.len() - 1] - times[0]) / (times.len() - 1) as f64)
}

/// Differentiates the centerline in time and projects onto the local frame.
///
/// `slip` is the fluid tangential velocity field; `None` applies the
/// zero-slip assumption used for tethered tails.
pub fn compute_kinematics(
    cl: &CenterlineSequence,
    frames: &FrameField,
    slip: Option<Array2<f64>>,
) -> Result<KinematicField> {
    let (nt, ns) = (cl.frames(), cl.grid.len());
    if nt < 3 {
        return Err(Error::TooShort {
            what: "frames for time derivatives",
            need: 3,
            got: nt,
        });
    }
    if frames.dim() != (nt, ns) {
        return Err(Error::ShapeMismatch(format!(
            "frame field {:?} vs centerline {:?}",
            frames.dim(),
            (nt, ns)
        )));
    }
    let dt = uniform_step(&cl.times)?;
    let ds = cl.grid.step();

    let vx = derivative(cl.x.view(), Axis(0), dt);
    let vy = derivative(cl.y.view(), Axis(0), dt);
    let mut body_velocity = Array3::zeros((nt, ns, 2));
    body_velocity.index_axis_mut(Axis(2), 0).assign(&vx);
    body_velocity.index_axis_mut(Axis(2), 1).assign(&vy);

    let nx = frames.normal.index_axis(Axis(2), 0);
    let ny = frames.normal.index_axis(Axis(2), 1);
    let mut normal_velocity = Array2::zeros((nt, ns));
    Zip::from(&mut normal_velocity)
        .and(&vx)
        .and(&vy)
        .and(&nx)
        .and(&ny)
        .for_each(|vn, &a, &b, &c, &d| *vn = a * c + b * d);

    let dvn_dt = derivative(normal_velocity.view(), Axis(0), dt);
    let dvn_ds = derivative(normal_velocity.view(), Axis(1), ds);

    let slip_velocity = match slip {
        Some(v) if v.dim() != (nt, ns) => {
            return Err(Error::ShapeMismatch(format!(
                "slip field {:?} vs centerline {:?}",
                v.dim(),
                (nt, ns)
            )))
        }
        Some(v) => {
            check_finite("slip velocity", &v)?;
            v
        }
        None => Array2::zeros((nt, ns)),
    };

    Ok(KinematicField {
        times: cl.times.clone(),
        time_step: dt,
        arc_step: ds,
        body_velocity,
        normal_velocity,
        dvn_dt,
        dvn_ds,
        slip_velocity,
    })
}
