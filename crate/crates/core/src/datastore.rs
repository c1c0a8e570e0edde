//! File ingestion and persistence: experiment manifests (TOML), force traces,
//! centerline sequences, calibration records, and the sweep results table.
//!
//! Files hold SI values only. Floats are written with Rust's shortest
//! round-trip formatting, so every value reads back bit-exactly.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ArcGrid, CenterlineSequence, ARC_TOLERANCE};
use crate::numerics::mean_and_esd;
use crate::reactive::ForceTrace;
use crate::sensor::CalibrationRecord;
use crate::sigproc::TimeSeries;

pub const SCHEMA_VERSION: u32 = 1;

/// Relative disagreement tolerated between a trace's sample spacing and the
/// manifest rate.
pub const RATE_TOLERANCE: f64 = 1e-3;

pub const TRACE_HEADER: [&str; 2] = ["time_s", "value"];
pub const CENTERLINE_HEADER: [&str; 5] = ["frame", "time_s", "s_m", "x_m", "y_m"];
pub const FORCE_TRACE_HEADER: [&str; 3] = ["time_s", "F_th_N", "F_lat_N"];
pub const CALIBRATION_HEADER: [&str; 3] = ["force_N", "rep", "voltage_V"];
pub const METRICS_HEADER: [&str; 5] = ["test_id", "f_hz", "dc_pct", "Fp_bar_N", "Fa_bar_N"];
pub const AGGREGATE_HEADER: [&str; 6] = ["f_hz", "dc_pct", "mean_Fp_N", "esd_Fp_N", "mean_Fa_N", "esd_Fa_N"];
const RESULTS_HEADER: [&str; 11] = [
    "kind",
    "device",
    "f_hz",
    "dc_pct",
    "test_index",
    "test_id",
    "n_tests",
    "Fp_N",
    "Fa_N",
    "esd_Fp_N",
    "esd_Fa_N",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Device {
    SingleTail,
    DualTail,
}

impl Device {
    pub fn as_str(self) -> &'static str {
        match self {
            Device::SingleTail => "single-tail",
            Device::DualTail => "dual-tail",
        }
    }
}

impl FromStr for Device {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "single-tail" => Ok(Device::SingleTail),
            "dual-tail" => Ok(Device::DualTail),
            other => Err(format!("unknown device {other:?} (expected single-tail or dual-tail)")),
        }
    }
}

fn default_current() -> f64 {
    250.0
}

/// One force test: actuation settings, acquisition rate, calibration and the
/// trace file it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub schema: u32,
    pub test_id: String,
    pub device: Device,
    /// Actuation frequency [Hz].
    pub f_hz: f64,
    /// PWM duty cycle [%].
    pub dc_pct: f64,
    pub rate_hz: f64,
    /// Start of steady-state operation in the trace [s].
    #[serde(default)]
    pub t0_s: f64,
    /// SMA drive current [mA].
    #[serde(default = "default_current")]
    pub current_ma: f64,
    /// [V/N]
    pub calibration_slope_v_per_n: f64,
    #[serde(default)]
    pub calibration_intercept_v: f64,
    /// Repetition number within the (device, f, DC) cell.
    #[serde(default)]
    pub test_index: u32,
    /// Trace CSV, relative to the manifest's directory unless absolute.
    pub trace: PathBuf,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl ExperimentManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        test_id: impl Into<String>,
        device: Device,
        f_hz: f64,
        dc_pct: f64,
        rate_hz: f64,
        calibration_slope_v_per_n: f64,
        trace: impl Into<PathBuf>,
    ) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            test_id: test_id.into(),
            device,
            f_hz,
            dc_pct,
            rate_hz,
            t0_s: 0.0,
            current_ma: default_current(),
            calibration_slope_v_per_n,
            calibration_intercept_v: 0.0,
            test_index: 0,
            trace: trace.into(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = toml::from_str(&text).map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|message| Error::Schema {
            path: path.into(),
            message,
        })?;
        for w in m.warnings() {
            log::warn!("{}: {w}", path.display());
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self).map_err(|e| Error::Schema {
            path: path.into(),
            message: e.to_string(),
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.schema != SCHEMA_VERSION {
            return Err(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            ));
        }
        let positive = [("rate_hz", self.rate_hz), ("f_hz", self.f_hz), ("dc_pct", self.dc_pct)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.t0_s.is_finite() || self.t0_s < 0.0 {
            return Err(format!("t0_s must be non-negative, got {}", self.t0_s));
        }
        if self.calibration_slope_v_per_n == 0.0 || !self.calibration_slope_v_per_n.is_finite() {
            return Err("calibration_slope_v_per_n must be finite and non-zero".into());
        }
        Ok(())
    }

    /// Settings outside the characterized f-DC grid. Not errors.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if ![1.0, 2.0, 3.0, 4.0].contains(&self.f_hz) {
            out.push(format!(
                "f = {} Hz is outside the characterized set {{1, 2, 3, 4}} Hz",
                self.f_hz
            ));
        }
        if !(1.0..=10.0).contains(&self.dc_pct) {
            out.push(format!(
                "DC = {} % is outside the characterized range [1, 10] %",
                self.dc_pct
            ));
        }
        out
    }

    pub fn trace_path(&self) -> PathBuf {
        if self.trace.is_absolute() {
            self.trace.clone()
        } else {
            self.base_dir.join(&self.trace)
        }
    }
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(rdr)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: path.into(),
        line,
        message: e.to_string(),
    }
}

fn records(path: &Path, rdr: &mut csv::Reader<File>) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).unwrap_or("");
    raw.parse().map_err(|e| Error::Parse {
        path: path.into(),
        line,
        message: format!("column {name}: cannot parse {raw:?}: {e}"),
    })
}

fn finite(path: &Path, line: u64, name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Parse {
            path: path.into(),
            line,
            message: format!("column {name}: non-finite value"),
        })
    }
}

/// Reads a `time_s,value` trace and checks it against the manifest rate.
pub fn load_trace(path: impl AsRef<Path>, manifest: &ExperimentManifest) -> Result<TimeSeries> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &TRACE_HEADER)?;
    let rows = records(path, &mut rdr)?;
    if rows.is_empty() {
        return Err(Error::Schema {
            path: path.into(),
            message: "no samples".into(),
        });
    }
    let step = 1.0 / manifest.rate_hz;
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let t = finite(path, *line, "time_s", field(path, *line, rec, 0, "time_s")?)?;
        let v = finite(path, *line, "value", field(path, *line, rec, 1, "value")?)?;
        if let Some(&prev) = times.last() {
            let dt: f64 = t - prev;
            if dt <= 0.0 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: *line,
                    message: format!("time does not increase ({prev} s -> {t} s)"),
                });
            }
            if (dt - step).abs() > 0.5 * step {
                return Err(Error::Parse {
                    path: path.into(),
                    line: *line,
                    message: format!("sample gap of {dt} s at a declared rate of {} Hz", manifest.rate_hz),
                });
            }
        }
        times.push(t);
        values.push(v);
    }
    if times.len() > 1 {
        let measured = (times.len() - 1) as f64 / (times[times.len() - 1] - times[0]);
        if ((measured - manifest.rate_hz) / manifest.rate_hz).abs() > RATE_TOLERANCE {
            return Err(Error::Schema {
                path: path.into(),
                message: format!(
                    "sample rate {measured:.6} Hz differs from the manifest's {} Hz by more than {}%",
                    manifest.rate_hz,
                    RATE_TOLERANCE * 100.0
                ),
            });
        }
    }
    TimeSeries::new(manifest.rate_hz, times[0], values)
}

/// Writes a uniformly sampled series as `time_s,value`.
pub fn write_trace(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    write_table(
        path,
        &TRACE_HEADER,
        series
            .samples()
            .iter()
            .enumerate()
            .map(|(i, v)| vec![series.time(i), *v]),
    )
}

/// Writes numeric rows under `header`.
pub fn write_table<I>(path: impl AsRef<Path>, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let werr = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(werr)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(werr)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_force_trace(path: impl AsRef<Path>, trace: &ForceTrace) -> Result<()> {
    write_table(
        path,
        &FORCE_TRACE_HEADER,
        (0..trace.len()).map(|i| vec![trace.times[i], trace.thrust[i], trace.lateral[i]]),
    )
}

pub fn read_force_trace(path: impl AsRef<Path>) -> Result<ForceTrace> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &FORCE_TRACE_HEADER)?;
    let mut tr = ForceTrace {
        times: vec![],
        thrust: vec![],
        lateral: vec![],
    };
    for (line, rec) in records(path, &mut rdr)? {
        tr.times.push(field(path, line, &rec, 0, "time_s")?);
        tr.thrust.push(field(path, line, &rec, 1, "F_th_N")?);
        tr.lateral.push(field(path, line, &rec, 2, "F_lat_N")?);
    }
    Ok(tr)
}

/// Reads a `frame,time_s,s_m,x_m,y_m` centerline export.
///
/// Frames must be numbered consecutively and every frame must carry the same
/// uniform arc grid starting at the root. A sequence that stretches by more
/// than the arc tolerance is accepted with a warning.
pub fn load_centerline(path: impl AsRef<Path>) -> Result<CenterlineSequence> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &CENTERLINE_HEADER)?;
    let rows = records(path, &mut rdr)?;
    let schema = |message: String| Error::Schema {
        path: path.into(),
        message,
    };
    if rows.is_empty() {
        return Err(schema("no centerline rows".into()));
    }

    // frame -> (time, [(s, x, y)], first line)
    let mut frames: BTreeMap<u64, (f64, Vec<[f64; 3]>, u64)> = BTreeMap::new();
    let mut last_frame = None;
    for (line, rec) in &rows {
        let frame: u64 = field(path, *line, rec, 0, "frame")?;
        let t = finite(path, *line, "time_s", field(path, *line, rec, 1, "time_s")?)?;
        let s = finite(path, *line, "s_m", field(path, *line, rec, 2, "s_m")?)?;
        let x = finite(path, *line, "x_m", field(path, *line, rec, 3, "x_m")?)?;
        let y = finite(path, *line, "y_m", field(path, *line, rec, 4, "y_m")?)?;
        if last_frame.is_some_and(|f| frame < f) {
            return Err(Error::Parse {
                path: path.into(),
                line: *line,
                message: format!("frame {frame} appears after frame {}", last_frame.unwrap()),
            });
        }
        let entry = frames.entry(frame).or_insert((t, Vec::new(), *line));
        if last_frame != Some(frame) && !entry.1.is_empty() {
            return Err(Error::Parse {
                path: path.into(),
                line: *line,
                message: format!("rows of frame {frame} are not contiguous"),
            });
        }
        if entry.0 != t {
            return Err(Error::Parse {
                path: path.into(),
                line: *line,
                message: format!("frame {frame} has rows at different times ({} s and {t} s)", entry.0),
            });
        }
        entry.1.push([s, x, y]);
        last_frame = Some(frame);
    }

    let first = *frames.keys().next().unwrap();
    for (k, f) in frames.keys().enumerate() {
        let expected = first + k as u64;
        if *f != expected {
            return Err(schema(format!(
                "frame {expected} is missing (next frame present is {f})"
            )));
        }
    }

    let (_, root_rows, _) = &frames[&first];
    let ns = root_rows.len();
    let length = root_rows[ns - 1][0];
    if ns < 3 {
        return Err(schema(format!("frame {first} has {ns} arc samples; need at least 3")));
    }
    let grid = ArcGrid::new(ns, length).map_err(|e| schema(format!("frame {first}: {e}")))?;
    let grid_tol = 1e-9 * length;
    let nt = frames.len();
    let mut times = Vec::with_capacity(nt);
    let mut x = Array2::zeros((nt, ns));
    let mut y = Array2::zeros((nt, ns));
    for (i, (frame, (t, pts, line))) in frames.iter().enumerate() {
        if pts.len() != ns {
            return Err(schema(format!(
                "frame {frame} (from line {line}) has {} arc samples, expected {ns}",
                pts.len()
            )));
        }
        for (j, p) in pts.iter().enumerate() {
            if (p[0] - grid.s(j)).abs() > grid_tol {
                return Err(schema(format!(
                    "frame {frame}: arc sample {j} at s = {} m, expected {} m on the uniform grid",
                    p[0],
                    grid.s(j)
                )));
            }
            x[[i, j]] = p[1];
            y[[i, j]] = p[2];
        }
        times.push(*t);
    }
    let cl = CenterlineSequence::new(grid, times, x, y).map_err(|e| schema(e.to_string()))?;
    let stretch = cl.max_arc_length_error();
    if stretch > ARC_TOLERANCE {
        log::warn!(
            "{}: centerline arc length deviates by {:.3}% from the nominal grid",
            path.display(),
            stretch * 100.0
        );
    }
    Ok(cl)
}

pub fn write_centerline(path: impl AsRef<Path>, cl: &CenterlineSequence) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let werr = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(CENTERLINE_HEADER).map_err(werr)?;
    for (i, t) in cl.times().iter().enumerate() {
        for j in 0..cl.grid().len() {
            w.write_record([
                i.to_string(),
                t.to_string(),
                cl.grid().s(j).to_string(),
                cl.x()[[i, j]].to_string(),
                cl.y()[[i, j]].to_string(),
            ])
            .map_err(werr)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads `force_N,rep,voltage_V` calibration observations.
pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationRecord> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &CALIBRATION_HEADER)?;
    let mut obs = Vec::new();
    for (line, rec) in records(path, &mut rdr)? {
        let f = finite(path, line, "force_N", field(path, line, &rec, 0, "force_N")?)?;
        let _rep: u32 = field(path, line, &rec, 1, "rep")?;
        let v = finite(path, line, "voltage_V", field(path, line, &rec, 2, "voltage_V")?)?;
        obs.push((f, v));
    }
    if obs.is_empty() {
        return Err(Error::Schema {
            path: path.into(),
            message: "no calibration observations".into(),
        });
    }
    CalibrationRecord::from_observations(obs)
}

pub fn write_calibration(path: impl AsRef<Path>, rec: &CalibrationRecord) -> Result<()> {
    let rows = rec
        .levels()
        .iter()
        .flat_map(|(f, vs)| vs.iter().enumerate().map(move |(r, v)| vec![*f, r as f64, *v]));
    write_table(path, &CALIBRATION_HEADER, rows)
}

/// Per-test metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub device: Device,
    pub f_hz: f64,
    pub dc_pct: f64,
    pub test_index: u32,
    pub test_id: String,
    /// Mean peak force over the analyzed cycles [N].
    pub peak_n: f64,
    /// Mean cycle-averaged force [N].
    pub average_n: f64,
}

/// Across-test statistics of one (device, f, DC) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub device: Device,
    pub f_hz: f64,
    pub dc_pct: f64,
    pub tests: usize,
    pub mean_peak_n: f64,
    pub esd_peak_n: f64,
    pub mean_average_n: f64,
    pub esd_average_n: f64,
}

type CellKey = (Device, u64, u64);

fn ordered_bits(v: f64) -> u64 {
    let v = v + 0.0;
    let b = v.to_bits();
    if v.is_sign_negative() {
        !b
    } else {
        b | (1 << 63)
    }
}

fn cell_key(device: Device, f: f64, dc: f64) -> CellKey {
    (device, ordered_bits(f), ordered_bits(dc))
}

/// Test rows keyed by (device, f, DC, test index), plus aggregate rows.
/// Rows are kept sorted by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultsTable {
    tests: Vec<TestRow>,
    aggregates: Vec<AggregateRow>,
}

impl ResultsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tests(&self) -> &[TestRow] {
        &self.tests
    }

    pub fn aggregates(&self) -> &[AggregateRow] {
        &self.aggregates
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty() && self.aggregates.is_empty()
    }

    /// Inserts a test row, replacing any row with the same key. Aggregates
    /// are left stale until [`ResultsTable::aggregate`] is called.
    pub fn upsert_test(&mut self, row: TestRow) {
        let key = (cell_key(row.device, row.f_hz, row.dc_pct), row.test_index);
        match self
            .tests
            .binary_search_by_key(&key, |r| (cell_key(r.device, r.f_hz, r.dc_pct), r.test_index))
        {
            Ok(i) => self.tests[i] = row,
            Err(i) => self.tests.insert(i, row),
        }
    }

    /// Rebuilds every aggregate row from the test rows.
    pub fn aggregate(&mut self) {
        let mut cells: BTreeMap<CellKey, Vec<&TestRow>> = BTreeMap::new();
        for r in &self.tests {
            cells.entry(cell_key(r.device, r.f_hz, r.dc_pct)).or_default().push(r);
        }
        self.aggregates = cells
            .into_values()
            .map(|rows| {
                let peaks: Vec<f64> = rows.iter().map(|r| r.peak_n).collect();
                let avgs: Vec<f64> = rows.iter().map(|r| r.average_n).collect();
                let (mean_peak_n, esd_peak_n) = mean_and_esd(&peaks);
                let (mean_average_n, esd_average_n) = mean_and_esd(&avgs);
                AggregateRow {
                    device: rows[0].device,
                    f_hz: rows[0].f_hz,
                    dc_pct: rows[0].dc_pct,
                    tests: rows.len(),
                    mean_peak_n,
                    esd_peak_n,
                    mean_average_n,
                    esd_average_n,
                }
            })
            .collect();
    }

    fn sort(&mut self) {
        self.tests
            .sort_by_key(|r| (cell_key(r.device, r.f_hz, r.dc_pct), r.test_index));
        self.aggregates.sort_by_key(|r| cell_key(r.device, r.f_hz, r.dc_pct));
    }

    fn check_references(&self) -> std::result::Result<(), String> {
        let mut counts: BTreeMap<CellKey, usize> = BTreeMap::new();
        for r in &self.tests {
            *counts.entry(cell_key(r.device, r.f_hz, r.dc_pct)).or_default() += 1;
        }
        for a in &self.aggregates {
            let have = counts.get(&cell_key(a.device, a.f_hz, a.dc_pct)).copied().unwrap_or(0);
            if a.tests == 0 || have != a.tests {
                return Err(format!(
                    "aggregate {} f={} Hz DC={} % claims {} tests but the table holds {have}",
                    a.device.as_str(),
                    a.f_hz,
                    a.dc_pct,
                    a.tests
                ));
            }
        }
        Ok(())
    }

    /// Per-test export with the `test_id,f_hz,dc_pct,Fp_bar_N,Fa_bar_N` header.
    pub fn write_metrics_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let werr = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(METRICS_HEADER).map_err(werr)?;
        for r in &self.tests {
            w.write_record([
                r.test_id.clone(),
                r.f_hz.to_string(),
                r.dc_pct.to_string(),
                r.peak_n.to_string(),
                r.average_n.to_string(),
            ])
            .map_err(werr)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Aggregate export with the `f_hz,dc_pct,mean_Fp_N,esd_Fp_N,mean_Fa_N,esd_Fa_N` header.
    pub fn write_aggregate_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_table(
            path,
            &AGGREGATE_HEADER,
            self.aggregates.iter().map(|a| {
                vec![
                    a.f_hz,
                    a.dc_pct,
                    a.mean_peak_n,
                    a.esd_peak_n,
                    a.mean_average_n,
                    a.esd_average_n,
                ]
            }),
        )
    }
}

/// Exclusive writer claim on a results file, released on drop.
struct WriteLock {
    path: PathBuf,
}

impl WriteLock {
    fn acquire(target: &Path) -> Result<Self> {
        let mut name = target.file_name().unwrap_or_default().to_os_string();
        name.push(".lock");
        let path = target.with_file_name(name);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked { path: target.into() }),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes the table atomically. A concurrent writer on the same path fails
/// with [`Error::Locked`] instead of overwriting.
pub fn write_results(table: &ResultsTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut table = table.clone();
    table.sort();
    table.check_references().map_err(|message| Error::Schema {
        path: path.into(),
        message,
    })?;
    let _lock = WriteLock::acquire(path)?;
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);

    let write = || -> Result<()> {
        let mut file = BufWriter::new(File::create(&tmp).map_err(|e| Error::io(&tmp, e))?);
        writeln!(file, "# schema={SCHEMA_VERSION}").map_err(|e| Error::io(&tmp, e))?;
        let mut w = csv::Writer::from_writer(file);
        let werr = |e: csv::Error| Error::io(&tmp, std::io::Error::other(e));
        w.write_record(RESULTS_HEADER).map_err(werr)?;
        for r in &table.tests {
            w.write_record([
                "test".to_string(),
                r.device.as_str().to_string(),
                r.f_hz.to_string(),
                r.dc_pct.to_string(),
                r.test_index.to_string(),
                r.test_id.clone(),
                String::new(),
                r.peak_n.to_string(),
                r.average_n.to_string(),
                String::new(),
                String::new(),
            ])
            .map_err(werr)?;
        }
        for a in &table.aggregates {
            w.write_record([
                "aggregate".to_string(),
                a.device.as_str().to_string(),
                a.f_hz.to_string(),
                a.dc_pct.to_string(),
                String::new(),
                String::new(),
                a.tests.to_string(),
                a.mean_peak_n.to_string(),
                a.mean_average_n.to_string(),
                a.esd_peak_n.to_string(),
                a.esd_average_n.to_string(),
            ])
            .map_err(werr)?;
        }
        let file = w.into_inner().map_err(|e| Error::io(&tmp, e.into_error()))?;
        file.into_inner()
            .map_err(|e| Error::io(&tmp, e.into_error()))?
            .sync_all()
            .map_err(|e| Error::io(&tmp, e))
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<ResultsTable> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let version = first.trim().strip_prefix("# schema=").ok_or_else(|| Error::Parse {
        path: path.into(),
        line: 1,
        message: "missing `# schema=` line".into(),
    })?;
    if version.trim() != SCHEMA_VERSION.to_string() {
        return Err(Error::Schema {
            path: path.into(),
            message: format!("schema version mismatch: file has {version}, expected {SCHEMA_VERSION}"),
        });
    }
    let mut rdr = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
    // line numbers below are offset by the schema line
    let located = |line: u64, message: String| Error::Parse {
        path: path.into(),
        line: line + 1,
        message,
    };
    let header = rdr.headers().map_err(|e| located(1, e.to_string()))?;
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(located(1, format!("expected header `{}`", RESULTS_HEADER.join(","))));
    }
    let mut table = ResultsTable::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| located(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            get(i)
                .parse::<f64>()
                .map_err(|e| located(line, format!("column {}: {e}", RESULTS_HEADER[i])))
        };
        let device: Device = get(1).parse().map_err(|e| located(line, e))?;
        match get(0) {
            "test" => table.tests.push(TestRow {
                device,
                f_hz: num(2)?,
                dc_pct: num(3)?,
                test_index: get(4)
                    .parse()
                    .map_err(|e| located(line, format!("column test_index: {e}")))?,
                test_id: get(5).to_string(),
                peak_n: num(7)?,
                average_n: num(8)?,
            }),
            "aggregate" => table.aggregates.push(AggregateRow {
                device,
                f_hz: num(2)?,
                dc_pct: num(3)?,
                tests: get(6)
                    .parse()
                    .map_err(|e| located(line, format!("column n_tests: {e}")))?,
                mean_peak_n: num(7)?,
                mean_average_n: num(8)?,
                esd_peak_n: num(9)?,
                esd_average_n: num(10)?,
            }),
            other => return Err(located(line, format!("unknown row kind {other:?}"))),
        }
    }
    table.sort();
    table.check_references().map_err(|message| Error::Schema {
        path: path.into(),
        message,
    })?;
    Ok(table)
}
