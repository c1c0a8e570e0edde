use tailthrust_web::{filter_demo_native, sensor_curve_native, thrust_curve_native};

#[test]
fn sensor_curve_spans_three_decades() {
    let c = sensor_curve_native(16.0, 288.0, 0.007, 1.0, 500).unwrap();
    assert_eq!(c.freqs().len(), 500);
    assert!((c.freqs()[0] - 1.0).abs() < 1e-12);
    assert!((c.freqs()[499] - 1000.0).abs() < 1e-9);
    assert!((c.bandwidth_hz() - 28.7).abs() < 0.3);
    let peak = c.response_db().iter().copied().fold(f64::MIN, f64::max);
    // sampled curve can only undershoot the +43.1 dB resonance
    assert!(peak > 30.0 && peak < 43.11, "{peak}");
    assert!(sensor_curve_native(-1.0, 288.0, 0.007, 1.0, 10).is_err());
}

#[test]
fn rigid_mode_has_zero_mean_thrust() {
    let c = thrust_curve_native(2, 1.0, 0.0, 0.0, 1.0, 20.0, 1).unwrap();
    assert_eq!(c.mean(), 0.0);
    assert_eq!(c.times().len(), 201);
    assert!(thrust_curve_native(7, 1.0, 0.0, 0.0, 1.0, 20.0, 1).is_err());
}

#[test]
fn standing_wave_thrusts_toward_minus_b1() {
    let c = thrust_curve_native(1, 0.0, 0.05, 0.0, 1.0, 20.0, 2).unwrap();
    assert!(c.mean() < 0.0);
}

#[test]
fn filter_demo_recovers_peak() {
    let d = filter_demo_native(10.0, 0.05, 1, 10).unwrap();
    assert_eq!(d.raw().len(), 2750);
    assert_eq!(d.filtered().len(), d.times().len());
    // drift removal takes out the cycle mean, so the peak sits lower by about that much
    let expected = d.true_peak() - d.true_average();
    assert!(
        (d.peak_mean() - expected).abs() < 0.03 * d.true_peak(),
        "{} vs {}",
        d.peak_mean(),
        expected
    );
}
