//! Small numerical kernels shared by the model modules: second-order finite
//! differences, phase unwrapping, fixed Gauss-Legendre rules, and integer-period
//! time averaging.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis, Zip};

use crate::error::{Error, Result};

/// Second-order first derivative of a uniformly sampled lane.
///
/// Centered differences in the interior, one-sided three-point stencils at
/// both ends. Written in difference form so that a constant lane differentiates
/// to exactly zero.
pub fn derivative_1d(values: ArrayView1<f64>, step: f64, mut out: ArrayViewMut1<f64>) {
    let n = values.len();
    debug_assert!(n >= 3 && out.len() == n);
    let inv2h = 0.5 / step;
    out[0] = (4.0 * (values[1] - values[0]) - (values[2] - values[0])) * inv2h;
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) * inv2h;
    }
    out[n - 1] = (4.0 * (values[n - 1] - values[n - 2]) - (values[n - 1] - values[n - 3])) * inv2h;
}

/// Differentiates every lane of `field` along `axis`.
pub fn derivative(field: ArrayView2<f64>, axis: Axis, step: f64) -> Array2<f64> {
    let mut out = Array2::zeros(field.raw_dim());
    Zip::from(field.lanes(axis))
        .and(out.lanes_mut(axis))
        .for_each(|lane, dst| derivative_1d(lane, step, dst));
    out
}

/// Removes 2*pi jumps along `axis` so that angle fields can be differenced.
pub fn unwrap_angles(field: ArrayView2<f64>, axis: Axis) -> Array2<f64> {
    use std::f64::consts::PI;
    let mut out = field.to_owned();
    for mut lane in out.lanes_mut(axis) {
        let mut offset = 0.0;
        let mut prev = lane[0];
        for v in lane.iter_mut().skip(1) {
            let raw = *v;
            let mut d = raw - prev;
            while d > PI {
                d -= 2.0 * PI;
                offset -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
                offset += 2.0 * PI;
            }
            prev = raw;
            *v = raw + offset;
        }
    }
    out
}

/// Four-point Gauss-Legendre rule on [-1, 1]: (node, weight).
const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_26, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_26, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Integrates `f` over `[a, b]` with the four-point Gauss-Legendre rule.
pub fn gauss4<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    GAUSS4.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Trapezoidal time average of `values` over the largest whole number of
/// `period`s contained in the sample span. Trailing partial data is dropped;
/// when the last whole period ends between samples the endpoint is linearly
/// interpolated.
pub fn integer_period_mean(times: &[f64], values: &[f64], period: f64) -> Result<f64> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::param("period", format!("must be positive, got {period}")));
    }
    if times.len() != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} times vs {} values",
            times.len(),
            values.len()
        )));
    }
    if times.len() < 2 {
        return Err(Error::TooShort {
            what: "samples for a time average",
            need: 2,
            got: times.len(),
        });
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let cycles = (span / period * (1.0 + 1e-9)).floor();
    if cycles < 1.0 {
        return Err(Error::Domain(format!(
            "trace spans {span:.6e} s, shorter than one period of {period:.6e} s"
        )));
    }
    let window = cycles * period;
    let t_end = t0 + window;
    let slack = 1e-9 * period;

    let mut acc = 0.0;
    for i in 1..times.len() {
        let (ta, tb) = (times[i - 1], times[i]);
        if ta >= t_end - slack {
            break;
        }
        if tb <= t_end + slack {
            acc += 0.5 * (values[i - 1] + values[i]) * (tb - ta);
        } else {
            let frac = (t_end - ta) / (tb - ta);
            let v_end = values[i - 1] + frac * (values[i] - values[i - 1]);
            acc += 0.5 * (values[i - 1] + v_end) * (t_end - ta);
            break;
        }
    }
    Ok(acc / window)
}

/// Sample mean and experimental standard deviation (divisor n - 1).
///
/// A single value has no spread to estimate; its ESD is reported as 0.
pub fn mean_and_esd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn derivative_exact_for_quadratics() {
        let h = 0.1;
        let x = Array1::from_iter((0..7).map(|i| i as f64 * h));
        let f = x.mapv(|x| 3.0 * x * x - 2.0 * x + 1.0);
        let mut d = Array1::zeros(7);
        derivative_1d(f.view(), h, d.view_mut());
        for (xi, di) in x.iter().zip(d.iter()) {
            assert!((di - (6.0 * xi - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let f = Array1::from_elem(5, 0.123_456_789);
        let mut d = Array1::ones(5);
        derivative_1d(f.view(), 1e-3, d.view_mut());
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_along_each_axis() {
        let field = Array2::from_shape_fn((4, 5), |(i, j)| 2.0 * i as f64 + 5.0 * j as f64);
        let dt = derivative(field.view(), Axis(0), 0.5);
        let ds = derivative(field.view(), Axis(1), 0.25);
        assert!(dt.iter().all(|&v| (v - 4.0).abs() < 1e-12));
        assert!(ds.iter().all(|&v| (v - 20.0).abs() < 1e-12));
    }

    #[test]
    fn unwrap_removes_jumps() {
        let a = array![[3.0, -3.0, 3.1]];
        let u = unwrap_angles(a.view(), Axis(1));
        assert!((u[[0, 1]] - (2.0 * std::f64::consts::PI - 3.0)).abs() < 1e-12);
        assert!((u[[0, 2]] - 3.1).abs() < 1e-12);
    }

    #[test]
    fn gauss4_exact_to_degree_seven() {
        let v = gauss4(0.0, 2.0, |x| x.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-10);
    }

    #[test]
    fn period_mean_of_constant_and_sinusoid() {
        let n = 201;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        let c: Vec<f64> = vec![2.5; n];
        assert!((integer_period_mean(&t, &c, 1.0).unwrap() - 2.5).abs() < 1e-12);
        let s: Vec<f64> = t.iter().map(|t| (2.0 * std::f64::consts::PI * t).sin()).collect();
        assert!(integer_period_mean(&t, &s, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn period_mean_rejects_short_trace() {
        let t = [0.0, 0.1, 0.2];
        let v = [1.0, 1.0, 1.0];
        assert!(integer_period_mean(&t, &v, 1.0).is_err());
    }

    #[test]
    fn period_mean_truncates_partial_period() {
        // ramp over 1.5 periods: the average over the first whole period is 0.5
        let t: Vec<f64> = (0..=150).map(|i| i as f64 * 0.01).collect();
        let v = t.clone();
        assert!((integer_period_mean(&t, &v, 1.0).unwrap() - 0.5).abs() < 1e-12);
        // whole period ending between samples
        let t: Vec<f64> = (0..=13).map(|i| i as f64 * 0.3).collect();
        let v = t.clone();
        assert!((integer_period_mean(&t, &v, 1.0).unwrap() - 0.5 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn esd_uses_sample_divisor() {
        let (m, s) = mean_and_esd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_esd(&[7.0]), (7.0, 0.0));
    }
}
