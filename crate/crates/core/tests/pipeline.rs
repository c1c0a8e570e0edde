use std::path::Path;
use std::process::Command;

use tailthrust::datastore::{read_results, write_trace, Device, ExperimentManifest};
use tailthrust::sigproc::{measure_cycles, FirSpec, TimeSeries};
use tailthrust::synthetic::{SpikeTrain, TraceFixture};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tailthrust"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

// Drift removal takes out the record mean along with the drift, so what the
// chain recovers is the spike height above the cycle mean and a near-zero
// average. The first cycle carries the start-of-record transient.
#[test]
fn drift_removed_metrics_are_relative_to_the_cycle_mean() {
    let train = SpikeTrain::reference();
    let mut fixture = TraceFixture::reference(train);
    let expected = train.peak - train.cycle_mean();
    let settled = |m: &tailthrust::sigproc::CycleMetrics| m.cycles[1..].iter().map(|c| c.peak).sum::<f64>() / 4.0;

    let clean = fixture.clean().unwrap();
    let (_, m) = measure_cycles(&clean, 1.0, 0.0, 5, &FirSpec::drift(), &FirSpec::denoise()).unwrap();
    assert!(
        (settled(&m) - expected).abs() < 5e-3 * expected,
        "{} vs {expected}",
        settled(&m)
    );

    fixture.noise_sd = 0.0;
    let (_, m) = measure_cycles(
        &fixture.generate(3).unwrap(),
        1.0,
        0.0,
        5,
        &FirSpec::drift(),
        &FirSpec::denoise(),
    )
    .unwrap();
    assert!(
        (settled(&m) - expected).abs() < 5e-3 * expected,
        "{} vs {expected}",
        settled(&m)
    );
    assert!((m.peak_mean - expected).abs() < 0.02 * expected);

    let fixture = TraceFixture::reference(train);
    for seed in 0..5 {
        let force = fixture.generate(seed).unwrap();
        let (_, m) = measure_cycles(&force, 1.0, 0.0, 5, &FirSpec::drift(), &FirSpec::denoise()).unwrap();
        assert!(
            (settled(&m) - expected).abs() < 0.02 * expected,
            "seed {seed}: {} vs {expected}",
            settled(&m)
        );
        assert!(
            m.average_mean.abs() < 0.5 * train.cycle_mean(),
            "seed {seed}: {}",
            m.average_mean
        );
    }
}

fn write_test(dir: &Path, id: &str, index: u32, seed: u64) -> std::path::PathBuf {
    let fixture = TraceFixture::reference(SpikeTrain::reference());
    let force = fixture.generate(seed).unwrap();
    let volts = TimeSeries::new(5000.0, 0.0, force.samples().iter().map(|f| f * 1460.0).collect()).unwrap();
    let trace = format!("{id}.csv");
    write_trace(dir.join(&trace), &volts).unwrap();
    let mut m = ExperimentManifest::new(id, Device::DualTail, 1.0, 4.0, 5000.0, 1460.0, &trace);
    m.test_index = index;
    let path = dir.join(format!("{id}.toml"));
    m.save(&path).unwrap();
    path
}

#[test]
fn analyze_twice_then_sweep_from_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (i, id) in ["dual-a", "dual-b"].iter().enumerate() {
        let manifest = write_test(dir.path(), id, i as u32, 40 + i as u64);
        let text = run_ok(bin().arg("--out").arg(&out).arg("analyze").arg(&manifest));
        assert!(text.contains("5 cycles"), "{text}");
        assert!(out.join(format!("{id}_filtered.csv")).exists());
    }
    let table = read_results(out.join("results.csv")).unwrap();
    assert_eq!(table.tests().len(), 2);
    assert_eq!(table.aggregates().len(), 1);
    assert_eq!(table.aggregates()[0].tests, 2);

    let text = run_ok(bin().arg("--out").arg(&out).arg("sweep").arg(out.join("results.csv")));
    assert!(text.starts_with("2 test rows, 1 aggregate rows"), "{text}");
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2);
    assert_eq!(
        agg.lines().next().unwrap(),
        "f_hz,dc_pct,mean_Fp_N,esd_Fp_N,mean_Fa_N,esd_Fa_N"
    );
}

#[test]
fn simulate_then_estimate_from_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("model.toml");
    std::fs::write(
        &config,
        "[wave]\nmode = \"traveling\"\namp0 = 2e-4\namp_slope = 0.05\nwavenumber = 200.0\nangular_freq = 6.283185307179586\n\n[simulation]\narc_points = 41\nsteps_per_period = 100\nperiods = 1\n",
    )
    .unwrap();
    let sim = run_ok(
        bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(dir.path())
            .arg("simulate"),
    );
    assert!(sim.contains("samples:           101"), "{sim}");
    assert!(dir.path().join("wave_power.csv").exists());
    let est = run_ok(
        bin()
            .arg("--config")
            .arg(&config)
            .arg("--report-propulsive")
            .arg("estimate")
            .arg(dir.path().join("centerline.csv")),
    );
    assert!(est.contains("propulsive positive"), "{est}");
    assert!(dir.path().join("centerline_force.csv").exists());
}

#[test]
fn sensor_and_calibrate_from_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let text = run_ok(bin().arg("--out").arg(dir.path()).arg("sensor"));
    assert!(text.contains("1.00 %  -> 28.658 Hz"), "{text}");

    let data = dir.path().join("cal.csv");
    let mut csv = String::from("force_N,rep,voltage_V\n");
    for f in [0.107e-3, 0.2011e-3, 0.299e-3, 0.393e-3, 0.486e-3] {
        for rep in 1..=3 {
            csv.push_str(&format!("{f},{rep},{}\n", f * 1460.0));
        }
    }
    std::fs::write(&data, csv).unwrap();
    let text = run_ok(bin().arg("--out").arg(dir.path()).arg("calibrate").arg(&data));
    assert!(text.contains("slope:     1.460000 V/mN"), "{text}");
}

#[test]
fn bad_inputs_exit_with_a_located_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cal.csv");
    std::fs::write(&data, "force_N,rep,voltage_V\n1e-4,1,0.146\n2e-4,1,oops\n").unwrap();
    let out = bin()
        .arg("--out")
        .arg(dir.path())
        .arg("calibrate")
        .arg(&data)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cal.csv") && err.contains('3'), "{err}");

    let out = bin()
        .arg("analyze")
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}
