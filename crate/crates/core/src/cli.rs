//! Command implementations behind the `tailthrust` binary. Each command reads
//! its inputs, writes SI-unit CSV files into the output directory and returns
//! a report whose `Display` form is the console summary (mN for peaks, uN for
//! cycle averages).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datastore::{
    load_calibration, load_centerline, load_trace, read_results, write_centerline, write_force_trace, write_results,
    write_table, write_trace, Device, ExperimentManifest, ResultsTable, TestRow,
};
use crate::error::{Error, Result};
use crate::kinematics::{
    compute_frames, compute_kinematics, generate_wave, uniform_times, ArcGrid, CenterlineSequence, WaveMode, WaveParams,
};
use crate::reactive::{cycle_average_thrust, reactive_force, wave_power, ForceTrace, TailPlanform};
use crate::sensor::{
    bandwidth_for_error, fit_calibration, normalized_response, voltage_to_force, CalibrationFit, DcsDesign, RANGE,
    REFERENCE_NATURAL_FREQ, RESOLUTION,
};
use crate::sigproc::{measure_cycles, CycleMetrics, FirSpec, TimeSeries};
use crate::synthetic::{SpikeTrain, TraceFixture};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Simulate,
    Estimate {
        centerline: PathBuf,
    },
    Analyze {
        manifest: PathBuf,
    },
    Sensor,
    Calibrate {
        data: PathBuf,
    },
    /// Re-aggregates an existing results table, or runs a synthetic sweep
    /// over the configured f-DC grid when no table is given.
    Sweep {
        results: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub n_cycles: usize,
    /// Report thrust toward the locomotion direction as positive. Files keep
    /// the raw signed model values.
    pub report_propulsive: bool,
    pub model: ModelConfig,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            out_dir: PathBuf::from("."),
            seed: 0,
            n_cycles: 5,
            report_propulsive: false,
            model: ModelConfig::default(),
        }
    }

    fn thrust_sign(&self) -> f64 {
        if self.report_propulsive {
            -1.0
        } else {
            1.0
        }
    }
}

/// Model and processing parameters, read from the `--config` TOML file. Every
/// section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub wave: WaveParams,
    pub planform: TailPlanform,
    pub simulation: SimulationGrid,
    pub sensor: SensorConfig,
    pub drift: FirSpec,
    pub denoise: FirSpec,
    /// Results table updated by `analyze`; defaults to `<out>/results.csv`.
    pub results: Option<PathBuf>,
    pub sweep: SweepConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            wave: WaveParams {
                mode: WaveMode::Standing,
                amp0: 0.0,
                amp_slope: 0.05,
                wavenumber: 0.0,
                angular_freq: 2.0 * std::f64::consts::PI,
                phase: 0.0,
                speed: 0.0,
            },
            planform: TailPlanform::new(0.02, 50.8e-6),
            simulation: SimulationGrid::default(),
            sensor: SensorConfig::default(),
            drift: FirSpec::drift(),
            denoise: FirSpec::denoise(),
            results: None,
            sweep: SweepConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Domain(message) => Error::Schema {
                path: path.into(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Domain(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationGrid {
    pub arc_points: usize,
    pub steps_per_period: usize,
    pub periods: usize,
}

impl Default for SimulationGrid {
    fn default() -> Self {
        Self {
            arc_points: 81,
            steps_per_period: 200,
            periods: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub design: DcsDesign,
    /// When set, the equivalent mass is back-solved for this natural frequency [Hz].
    pub natural_freq_hz: Option<f64>,
    /// Error bounds for the bandwidth table [%].
    pub bandwidth_errors_pct: Vec<f64>,
    /// Points of the 1 Hz to 1 kHz response curve.
    pub curve_points: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            design: DcsDesign::reference(),
            natural_freq_hz: Some(REFERENCE_NATURAL_FREQ),
            bandwidth_errors_pct: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
            curve_points: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub device: Device,
    pub freqs_hz: Vec<f64>,
    pub duty_cycles_pct: Vec<f64>,
    pub tests_per_cell: u32,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub calibration_slope_v_per_n: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            device: Device::SingleTail,
            freqs_hz: vec![1.0, 2.0, 3.0, 4.0],
            duty_cycles_pct: (1..=10).map(f64::from).collect(),
            tests_per_cell: 5,
            duration_s: 5.5,
            rate_hz: 5000.0,
            calibration_slope_v_per_n: crate::sensor::REFERENCE_SLOPE,
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn mn(newtons: f64) -> f64 {
    newtons * 1e3
}

fn un(newtons: f64) -> f64 {
    newtons * 1e6
}

/// Six significant digits without switching to exponent notation.
fn sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = (5 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Outcome of `simulate` and `estimate`.
#[derive(Debug, Clone)]
pub struct ThrustReport {
    pub trace: ForceTrace,
    /// Raw signed time-averaged thrust [N].
    pub mean_thrust: f64,
    pub peak_abs_thrust: f64,
    /// Cycle-averaged wave power per arc sample [W], when the wave travels.
    pub wave_power: Option<Vec<f64>>,
    pub files: Vec<PathBuf>,
    sign: f64,
}

impl ThrustReport {
    /// Mean thrust in the reporting sign convention [N].
    pub fn reported_mean(&self) -> f64 {
        self.sign * self.mean_thrust
    }

    /// Instantaneous thrust in the reporting sign convention [N].
    pub fn reported_trace(&self) -> Vec<f64> {
        self.trace.thrust.iter().map(|f| self.sign * f).collect()
    }
}

impl fmt::Display for ThrustReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let convention = if self.sign < 0.0 {
            "propulsive positive"
        } else {
            "b1 positive"
        };
        writeln!(f, "samples:           {}", self.trace.len())?;
        writeln!(
            f,
            "mean thrust:       {} uN ({convention})",
            sig(un(self.reported_mean()))
        )?;
        writeln!(f, "peak |thrust|:     {} mN", sig(mn(self.peak_abs_thrust)))?;
        if let Some(p) = &self.wave_power {
            writeln!(f, "wave power at root: {:.6e} W", p[0])?;
        }
        for file in &self.files {
            writeln!(f, "wrote {}", file.display())?;
        }
        Ok(())
    }
}

fn mean_over_record(trace: &ForceTrace, period: Option<f64>) -> Result<f64> {
    let span = trace.times[trace.len() - 1] - trace.times[0];
    match period {
        Some(p) if p <= span * (1.0 + 1e-9) => cycle_average_thrust(trace, p),
        _ => cycle_average_thrust(trace, span),
    }
}

/// The centerline sequence `simulate` works on.
pub fn simulated_centerline(model: &ModelConfig) -> Result<CenterlineSequence> {
    model.wave.validate()?;
    model.planform.validate()?;
    let sim = model.simulation;
    if sim.steps_per_period < 2 || sim.periods == 0 {
        return Err(Error::param(
            "simulation grid",
            "need at least 2 steps per period and 1 period",
        ));
    }
    let period = model.wave.period().unwrap_or(1.0);
    let dt = period / sim.steps_per_period as f64;
    let times = uniform_times(0.0, dt, sim.steps_per_period * sim.periods + 1);
    let grid = ArcGrid::new(sim.arc_points, model.planform.length)?;
    generate_wave(&model.wave, &grid, &times)
}

/// Model-based thrust for the configured wave kinematics.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<ThrustReport> {
    let model = &cfg.model;
    let cl = simulated_centerline(model)?;
    let frames = compute_frames(&cl)?;
    let kin = compute_kinematics(&cl, &frames, None)?;
    let trace = reactive_force(&kin, &frames, &model.planform)?;
    let mean_thrust = mean_over_record(&trace, model.wave.period())?;
    let power = match (model.wave.wave_speed(), model.wave.period()) {
        (Some(c), Some(p)) if model.wave.mode == WaveMode::Traveling => Some(wave_power(&kin, &model.planform, c, p)?),
        _ => None,
    };

    ensure_dir(&cfg.out_dir)?;
    let mut files = vec![cfg.out_dir.join("force_trace.csv"), cfg.out_dir.join("centerline.csv")];
    write_force_trace(&files[0], &trace)?;
    write_centerline(&files[1], &cl)?;
    if let Some(p) = &power {
        let path = cfg.out_dir.join("wave_power.csv");
        let grid = cl.grid();
        write_table(
            &path,
            &["s_m", "P_w_W"],
            p.iter().enumerate().map(|(j, w)| vec![grid.s(j), *w]),
        )?;
        files.push(path);
    }
    Ok(ThrustReport {
        peak_abs_thrust: trace.peak_abs_thrust(),
        trace,
        mean_thrust,
        wave_power: power,
        files,
        sign: cfg.thrust_sign(),
    })
}

/// Model thrust from a measured centerline with zero tangential slip. The
/// trace is written beside the input as `<stem>_force.csv`.
pub fn cmd_estimate(cfg: &RunConfig, centerline: &Path) -> Result<ThrustReport> {
    let cl = load_centerline(centerline)?;
    let mut planform = cfg.model.planform;
    let length = cl.grid().length();
    if (planform.length - length).abs() > 1e-9 * length {
        log::warn!(
            "configured tail length {} m replaced by the centerline's {} m",
            planform.length,
            length
        );
        planform.length = length;
    }
    let frames = compute_frames(&cl)?;
    let kin = compute_kinematics(&cl, &frames, None)?;
    let trace = reactive_force(&kin, &frames, &planform)?;
    let mean_thrust = mean_over_record(&trace, cfg.model.wave.period())?;

    let stem = centerline.file_stem().unwrap_or_default().to_string_lossy();
    let out = centerline.with_file_name(format!("{stem}_force.csv"));
    write_force_trace(&out, &trace)?;
    Ok(ThrustReport {
        peak_abs_thrust: trace.peak_abs_thrust(),
        trace,
        mean_thrust,
        wave_power: None,
        files: vec![out],
        sign: cfg.thrust_sign(),
    })
}

#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub manifest: ExperimentManifest,
    pub metrics: CycleMetrics,
    pub row: TestRow,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for AnalyzeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.manifest;
        writeln!(
            f,
            "{} ({}, f = {} Hz, DC = {} %): {} cycles",
            m.test_id,
            m.device.as_str(),
            m.f_hz,
            m.dc_pct,
            self.metrics.cycles.len()
        )?;
        for (i, c) in self.metrics.cycles.iter().enumerate() {
            writeln!(
                f,
                "  cycle {}: F_p = {} mN, F_a = {} uN",
                i + 1,
                sig(mn(c.peak)),
                sig(un(c.average))
            )?;
        }
        writeln!(f, "mean peak force:           {} mN", sig(mn(self.metrics.peak_mean)))?;
        writeln!(
            f,
            "mean cycle-averaged force: {} uN",
            sig(un(self.metrics.average_mean))
        )?;
        for file in &self.files {
            writeln!(f, "wrote {}", file.display())?;
        }
        Ok(())
    }
}

fn results_path(cfg: &RunConfig) -> PathBuf {
    cfg.model
        .results
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("results.csv"))
}

/// Converts a voltage trace to force, filters it, and records the cycle
/// metrics in the results table.
pub fn cmd_analyze(cfg: &RunConfig, manifest_path: &Path) -> Result<AnalyzeReport> {
    let manifest = ExperimentManifest::load(manifest_path)?;
    let volts = load_trace(manifest.trace_path(), &manifest)?;
    let mut fit = CalibrationFit::proportional(manifest.calibration_slope_v_per_n);
    fit.intercept = manifest.calibration_intercept_v;
    let force = voltage_to_force(&fit, &volts)?;
    let (filtered, metrics) = measure_cycles(
        &force,
        manifest.f_hz,
        manifest.t0_s,
        cfg.n_cycles,
        &cfg.model.drift,
        &cfg.model.denoise,
    )?;

    ensure_dir(&cfg.out_dir)?;
    let filtered_path = cfg.out_dir.join(format!("{}_filtered.csv", manifest.test_id));
    write_trace(&filtered_path, &filtered)?;

    let row = TestRow {
        device: manifest.device,
        f_hz: manifest.f_hz,
        dc_pct: manifest.dc_pct,
        test_index: manifest.test_index,
        test_id: manifest.test_id.clone(),
        peak_n: metrics.peak_mean,
        average_n: metrics.average_mean,
    };
    let table_path = results_path(cfg);
    let mut table = if table_path.exists() {
        read_results(&table_path)?
    } else {
        ResultsTable::new()
    };
    table.upsert_test(row.clone());
    table.aggregate();
    write_results(&table, &table_path)?;
    Ok(AnalyzeReport {
        manifest,
        metrics,
        row,
        files: vec![filtered_path, table_path],
    })
}

#[derive(Debug, Clone)]
pub struct SensorReport {
    pub design: DcsDesign,
    /// [N/m]
    pub stiffness: f64,
    /// [Hz]
    pub natural_freq: f64,
    /// `(max error [%], bandwidth [Hz])`; `None` when the bound is never met
    /// below resonance.
    pub bandwidths: Vec<(f64, Option<f64>)>,
    /// Largest sampled point of the response curve: `(freq [Hz], |delta|/delta(0))`.
    pub curve_peak: (f64, f64),
    pub files: Vec<PathBuf>,
}

impl fmt::Display for SensorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stiffness k_tot:   {:.3} N/m", self.stiffness)?;
        writeln!(f, "natural frequency: {:.3} Hz", self.natural_freq)?;
        writeln!(f, "equivalent mass:   {:.6e} kg", self.design.mass)?;
        writeln!(f, "resolution:        {:.3} uN", un(RESOLUTION))?;
        writeln!(f, "range:             +/- {:.2} mN", mn(RANGE))?;
        writeln!(f, "bandwidth by maximum response error:")?;
        for (err, bw) in &self.bandwidths {
            match bw {
                Some(hz) => writeln!(f, "  {err:>6.2} %  -> {hz:.3} Hz")?,
                None => writeln!(f, "  {err:>6.2} %  -> not limiting below resonance")?,
            }
        }
        let (pf, pv) = self.curve_peak;
        writeln!(
            f,
            "response peak:     {pv:.2} ({:+.2} dB) at {pf:.2} Hz",
            20.0 * pv.log10()
        )?;
        for file in &self.files {
            writeln!(f, "wrote {}", file.display())?;
        }
        Ok(())
    }
}

/// Log-spaced normalized response of `design` from 1 Hz to 1 kHz.
pub fn response_curve(design: &DcsDesign, points: usize) -> Vec<(f64, f64)> {
    let fn_hz = design.natural_frequency();
    (0..points)
        .map(|i| {
            let freq = 10f64.powf(3.0 * i as f64 / (points.max(2) - 1) as f64);
            (freq, normalized_response(freq / fn_hz, design.loss_coeff))
        })
        .collect()
}

pub fn cmd_sensor(cfg: &RunConfig) -> Result<SensorReport> {
    let sc = &cfg.model.sensor;
    let design = match sc.natural_freq_hz {
        Some(hz) => sc.design.with_natural_frequency(hz),
        None => sc.design,
    };
    design.validate()?;
    if sc.curve_points < 2 {
        return Err(Error::param("curve_points", "need at least 2"));
    }
    let mut bandwidths = Vec::with_capacity(sc.bandwidth_errors_pct.len());
    for &pct in &sc.bandwidth_errors_pct {
        match bandwidth_for_error(&design, pct / 100.0) {
            Ok(hz) => bandwidths.push((pct, Some(hz))),
            Err(Error::Unreachable(_)) => bandwidths.push((pct, None)),
            Err(e) => return Err(e),
        }
    }
    let curve = response_curve(&design, sc.curve_points);
    let curve_peak = curve
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((f64::NAN, f64::NAN));

    ensure_dir(&cfg.out_dir)?;
    let curve_path = cfg.out_dir.join("sensor_response.csv");
    write_table(
        &curve_path,
        &["freq_hz", "normalized_response", "normalized_response_db", "error_pct"],
        curve
            .iter()
            .map(|&(f, r)| vec![f, r, 20.0 * r.log10(), (r - 1.0).abs() * 100.0]),
    )?;
    let bw_path = cfg.out_dir.join("sensor_bandwidth.csv");
    write_table(
        &bw_path,
        &["max_error_pct", "bandwidth_hz"],
        bandwidths.iter().map(|&(e, b)| vec![e, b.unwrap_or(f64::NAN)]),
    )?;
    Ok(SensorReport {
        stiffness: design.stiffness(),
        natural_freq: design.natural_frequency(),
        design,
        bandwidths,
        curve_peak,
        files: vec![curve_path, bw_path],
    })
}

#[derive(Debug, Clone)]
pub struct CalibrateReport {
    pub fit: CalibrationFit,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for CalibrateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fit = &self.fit;
        writeln!(f, "slope:     {:.6} V/mN", fit.slope * 1e-3)?;
        writeln!(f, "intercept: {:.6e} V", fit.intercept)?;
        writeln!(f, "R^2:       {:.6}", fit.r_squared)?;
        writeln!(f, "levels:")?;
        for l in &fit.levels {
            writeln!(
                f,
                "  {:.4} mN: mean {:.6} V, ESD {:.3e} V over {} reps",
                mn(l.force),
                l.mean,
                l.esd,
                l.reps
            )?;
        }
        for file in &self.files {
            writeln!(f, "wrote {}", file.display())?;
        }
        Ok(())
    }
}

pub fn cmd_calibrate(cfg: &RunConfig, data: &Path) -> Result<CalibrateReport> {
    let rec = load_calibration(data)?;
    let fit = fit_calibration(&rec)?;
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("calibration_fit.csv");
    write_table(
        &path,
        &["force_N", "mean_V", "esd_V", "reps", "fit_V"],
        fit.levels
            .iter()
            .map(|l| vec![l.force, l.mean, l.esd, l.reps as f64, fit.force_to_voltage(l.force)]),
    )?;
    Ok(CalibrateReport { fit, files: vec![path] })
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub table: ResultsTable,
    pub files: Vec<PathBuf>,
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} test rows, {} aggregate rows",
            self.table.tests().len(),
            self.table.aggregates().len()
        )?;
        writeln!(
            f,
            "{:>6} {:>7} {:>5} {:>22} {:>22}",
            "f [Hz]", "DC [%]", "n", "F_p mean/ESD [mN]", "F_a mean/ESD [uN]"
        )?;
        for a in self.table.aggregates() {
            writeln!(
                f,
                "{:>6} {:>7} {:>5} {:>11.5} {:>10.5} {:>11.4} {:>10.4}",
                a.f_hz,
                a.dc_pct,
                a.tests,
                mn(a.mean_peak_n),
                mn(a.esd_peak_n),
                un(a.mean_average_n),
                un(a.esd_average_n)
            )?;
        }
        for file in &self.files {
            writeln!(f, "wrote {}", file.display())?;
        }
        Ok(())
    }
}

/// Synthetic force profile of one sweep cell. Spike height grows with duty
/// cycle and falls at the higher actuation frequencies; the trough deepens
/// with duty cycle. Shapes are test fixtures, not measured data.
pub fn sweep_cell_train(f_hz: f64, dc_pct: f64) -> SpikeTrain {
    let freq_scale = 1.0 / (1.0 + 0.15 * (f_hz - 1.0).max(0.0));
    SpikeTrain {
        freq: f_hz,
        peak: (0.1e-3 + 0.038e-3 * dc_pct) * freq_scale,
        spike_frac: 0.08,
        trough: 1.6e-6 * dc_pct,
        trough_frac: 0.4,
    }
}

fn synthetic_sweep(cfg: &RunConfig) -> Result<ResultsTable> {
    let sw = &cfg.model.sweep;
    if sw.tests_per_cell == 0 || sw.freqs_hz.is_empty() || sw.duty_cycles_pct.is_empty() {
        return Err(Error::param(
            "sweep",
            "needs at least one frequency, duty cycle and test",
        ));
    }
    let mut master = StdRng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, 0.03).expect("fixed standard deviation");
    let mut table = ResultsTable::new();
    for &f_hz in &sw.freqs_hz {
        for &dc in &sw.duty_cycles_pct {
            for i in 0..sw.tests_per_cell {
                let test_seed: u64 = master.random();
                let mut rng = StdRng::seed_from_u64(test_seed);
                let mut train = sweep_cell_train(f_hz, dc);
                train.peak *= 1.0 + jitter.sample(&mut rng);
                let mut fixture = TraceFixture::reference(train);
                fixture.duration = sw.duration_s;
                fixture.rate = sw.rate_hz;
                let force = fixture.generate(rng.random())?;
                let volts = force
                    .samples()
                    .iter()
                    .map(|v| v * sw.calibration_slope_v_per_n)
                    .collect();
                let volts = TimeSeries::new(force.rate(), force.start(), volts)?;
                let force = voltage_to_force(&CalibrationFit::proportional(sw.calibration_slope_v_per_n), &volts)?;
                let (_, metrics) =
                    measure_cycles(&force, f_hz, 0.0, cfg.n_cycles, &cfg.model.drift, &cfg.model.denoise)?;
                table.upsert_test(TestRow {
                    device: sw.device,
                    f_hz,
                    dc_pct: dc,
                    test_index: i,
                    test_id: format!("{}-f{f_hz}-dc{dc}-t{}", sw.device.as_str(), i + 1),
                    peak_n: metrics.peak_mean,
                    average_n: metrics.average_mean,
                });
            }
        }
    }
    Ok(table)
}

/// Aggregates test rows per (device, f, DC) cell and writes the results
/// table together with the metrics and aggregate exports.
pub fn cmd_sweep(cfg: &RunConfig, results: Option<&Path>) -> Result<SweepReport> {
    let mut table = match results {
        Some(path) => read_results(path)?,
        None => synthetic_sweep(cfg)?,
    };
    table.aggregate();
    ensure_dir(&cfg.out_dir)?;
    let files = vec![
        results_path(cfg),
        cfg.out_dir.join("metrics.csv"),
        cfg.out_dir.join("aggregate.csv"),
    ];
    write_results(&table, &files[0])?;
    table.write_metrics_csv(&files[1])?;
    table.write_aggregate_csv(&files[2])?;
    Ok(SweepReport { table, files })
}

/// Runs the configured command and returns its console summary.
pub fn run(cfg: &RunConfig) -> Result<String> {
    Ok(match &cfg.command {
        Command::Simulate => cmd_simulate(cfg)?.to_string(),
        Command::Estimate { centerline } => cmd_estimate(cfg, centerline)?.to_string(),
        Command::Analyze { manifest } => cmd_analyze(cfg, manifest)?.to_string(),
        Command::Sensor => cmd_sensor(cfg)?.to_string(),
        Command::Calibrate { data } => cmd_calibrate(cfg, data)?.to_string(),
        Command::Sweep { results } => cmd_sweep(cfg, results.as_deref())?.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn cfg(command: Command, out: &Path) -> RunConfig {
        let mut c = RunConfig::new(command);
        c.out_dir = out.to_path_buf();
        c
    }

    #[test]
    fn config_sections_are_optional() {
        let m = ModelConfig::from_toml("").unwrap();
        assert_eq!(m, ModelConfig::default());
        let m = ModelConfig::from_toml(
            "[simulation]\narc_points = 41\n[drift]\norder = 1000\ncutoff = 0.05\nwindow = \"hann\"\n",
        )
        .unwrap();
        assert_eq!(m.simulation.arc_points, 41);
        assert_eq!(m.simulation.periods, 2);
        assert_eq!(m.drift.order, 1000);
        assert!(ModelConfig::from_toml("[simulation]\nbogus = 1\n").is_err());
    }

    #[test]
    fn rigid_translation_mean_is_zero() {
        let dir = tempdir().unwrap();
        let mut c = cfg(Command::Simulate, dir.path());
        c.model.wave = WaveParams {
            mode: WaveMode::RigidTranslation,
            amp0: 1e-3,
            amp_slope: 0.0,
            wavenumber: 0.0,
            angular_freq: 2.0 * std::f64::consts::PI,
            phase: 0.0,
            speed: 0.0,
        };
        let r = cmd_simulate(&c).unwrap();
        assert_eq!(r.mean_thrust, 0.0);
        assert!(r.files.iter().all(|f| f.exists()));
    }

    #[test]
    fn propulsive_flag_only_changes_reporting() {
        let dir = tempdir().unwrap();
        let mut c = cfg(Command::Simulate, dir.path());
        let raw = cmd_simulate(&c).unwrap();
        let raw_file = fs::read_to_string(dir.path().join("force_trace.csv")).unwrap();
        c.report_propulsive = true;
        let flipped = cmd_simulate(&c).unwrap();
        assert_eq!(flipped.reported_mean(), -raw.reported_mean());
        assert_eq!(
            raw_file,
            fs::read_to_string(dir.path().join("force_trace.csv")).unwrap()
        );
        assert!(raw.mean_thrust < 0.0);
        assert!(flipped.to_string().contains("propulsive positive"));
    }

    #[test]
    fn estimate_needs_three_frames() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(
            &p,
            "frame,time_s,s_m,x_m,y_m\n0,0,0,0,0\n0,0,0.01,0.01,0\n0,0,0.02,0.02,0\n",
        )
        .unwrap();
        let err = cmd_estimate(&cfg(Command::Sensor, dir.path()), &p).unwrap_err();
        assert!(err.to_string().contains("need at least 3"), "{err}");
    }

    #[test]
    fn sensor_report_reference_bandwidth() {
        let dir = tempdir().unwrap();
        let r = cmd_sensor(&cfg(Command::Sensor, dir.path())).unwrap();
        let one = r.bandwidths.iter().find(|(e, _)| *e == 1.0).unwrap().1.unwrap();
        assert!((one - 28.7).abs() < 0.3);
        assert!((r.curve_peak.0 - 288.0).abs() < 0.01 * 288.0);
        let text = fs::read_to_string(&r.files[0]).unwrap();
        assert_eq!(text.lines().count(), 1001);
    }

    #[test]
    fn constant_voltage_analyzes_to_zero() {
        let dir = tempdir().unwrap();
        let trace = dir.path().join("trace.csv");
        let ts = TimeSeries::new(5000.0, 0.0, vec![0.42; 27_500]).unwrap();
        write_trace(&trace, &ts).unwrap();
        let m = ExperimentManifest::new("const", Device::SingleTail, 1.0, 5.0, 5000.0, 1460.0, "trace.csv");
        let mp = dir.path().join("m.toml");
        m.save(&mp).unwrap();
        let r = cmd_analyze(&cfg(Command::Sensor, dir.path()), &mp).unwrap();
        assert_eq!(r.metrics.cycles.len(), 5);
        assert!(r.metrics.peak_mean.abs() < 1e-15);
        assert!(r.metrics.average_mean.abs() < 1e-15);
        let table = read_results(dir.path().join("results.csv")).unwrap();
        assert_eq!(table.tests().len(), 1);
        assert_eq!(table.aggregates().len(), 1);
    }
}
