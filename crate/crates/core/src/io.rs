//! File formats: sample sets (CSV or binary), trajectories, discrete plans,
//! loss and metric CSVs, and run manifests.
//!
//! Binary files are little-endian and start with an 8-byte magic string.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::TrajectoryBatch;
use crate::error::{Error, Result};
use crate::evaluation::{DiscretePlan, MetricRecord};
use crate::samples::SampleSet;
use crate::training::{SolverConfig, TrainReport};

pub const DATASET_MAGIC: &[u8; 8] = b"MXBDATA1";
pub const TRAJECTORY_MAGIC: &[u8; 8] = b"MXBTRAJ1";
pub const PLAN_MAGIC: &[u8; 8] = b"MXBPLAN1";
pub const TRAJECTORY_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetLayout {
    /// Header `x0,x1,...,x{D-1}` then one row per sample.
    Csv,
    /// Magic, `u64 N`, `u64 D`, then `N * D` float64 values row-major.
    Binary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub layout: DatasetLayout,
}

impl DatasetFile {
    pub fn new(path: impl Into<PathBuf>, layout: DatasetLayout) -> Self {
        Self {
            path: path.into(),
            layout,
        }
    }

    /// Picks the layout from the file's leading bytes.
    pub fn detect(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut head = [0u8; 8];
        let mut f = File::open(&path)?;
        let got = read_up_to(&mut f, &mut head)?;
        let layout = if got == 8 && &head == DATASET_MAGIC {
            DatasetLayout::Binary
        } else {
            DatasetLayout::Csv
        };
        Ok(Self { path, layout })
    }

    pub fn load(&self) -> Result<SampleSet> {
        load_samples(self)
    }
}

fn read_up_to(f: &mut File, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match f.read(&mut buf[got..])? {
            0 => break,
            n => got += n,
        }
    }
    Ok(got)
}

pub fn load_samples(file: &DatasetFile) -> Result<SampleSet> {
    match file.layout {
        DatasetLayout::Csv => load_csv(&file.path),
        DatasetLayout::Binary => load_binary(&file.path),
    }
}

/// Loads a dataset, detecting the layout.
pub fn load_any(path: impl AsRef<Path>) -> Result<SampleSet> {
    DatasetFile::detect(path.as_ref())?.load()
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn format_error(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<SampleSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let dim = header.len();
    for (j, name) in header.iter().enumerate() {
        if name != format!("x{j}") {
            return Err(parse_error(
                path,
                1,
                format!("expected column x{j}, found {name:?}"),
            ));
        }
    }
    if dim == 0 {
        return Err(parse_error(path, 1, "empty header"));
    }
    let mut data = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut n = 0;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != dim {
            return Err(parse_error(
                path,
                line,
                format!("expected {dim} fields, found {}", record.len()),
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(path, line, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("non-finite value {field}")));
            }
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(format_error(path, "no data rows"));
    }
    SampleSet::new(n, dim, data)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<SampleSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    if bytes.len() < 24 || &bytes[..8] != DATASET_MAGIC {
        return Err(format_error(path, "missing dataset magic"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(24))
        .ok_or_else(|| format_error(path, "header sizes overflow"))?;
    if bytes.len() != expected {
        return Err(format_error(
            path,
            format!(
                "header says {n}x{d} but payload has {} bytes",
                bytes.len() - 24
            ),
        ));
    }
    let data = f64s_from_le(&bytes[24..]);
    SampleSet::new(n, d, data).map_err(|e| match e {
        Error::NonFinite(_) => format_error(path, "non-finite value in payload"),
        other => other,
    })
}

fn f64s_from_le(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// 17 significant digits, enough for a bit-exact round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn save_csv(path: impl AsRef<Path>, samples: &SampleSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..samples.dim()).map(|j| format!("x{j}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in samples.rows() {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_binary(path: impl AsRef<Path>, samples: &SampleSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    w.write_all(&(samples.dim() as u64).to_le_bytes())?;
    write_f64s(&mut w, samples.as_slice())?;
    w.flush()?;
    Ok(())
}

pub fn save_samples(file: &DatasetFile, samples: &SampleSet) -> Result<()> {
    match file.layout {
        DatasetLayout::Csv => save_csv(&file.path, samples),
        DatasetLayout::Binary => save_binary(&file.path, samples),
    }
}

/// Hex SHA-256 of `N`, `D` (u64 LE) and the row-major LE payload; identical
/// for the CSV and binary form of the same matrix.
pub fn content_digest(samples: &SampleSet) -> String {
    let mut h = Sha256::new();
    h.update((samples.len() as u64).to_le_bytes());
    h.update((samples.dim() as u64).to_le_bytes());
    for v in samples.as_slice() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Hex SHA-256 of a file's raw bytes.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Errors unless both sets have the same dimension.
pub fn check_paired(a: &SampleSet, b: &SampleSet) -> Result<()> {
    b.check_dim(a.dim())
}

/// Path of the times sidecar written next to a trajectory file.
pub fn times_sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push("_times.csv");
    path.with_file_name(name)
}

/// Writes the binary trajectory file and its times sidecar.
///
/// Header (32 bytes): magic, `u32 P`, `u32 T`, `u32 D`, `u32 version`,
/// `f64 epsilon`; then `P * T * D` float64 values.
pub fn save_trajectories(path: impl AsRef<Path>, batch: &TrajectoryBatch) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(TRAJECTORY_MAGIC)?;
    for v in [batch.n_particles, batch.n_times(), batch.dim] {
        let v = u32::try_from(v).map_err(|_| format_error(path, "trajectory too large"))?;
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&TRAJECTORY_VERSION.to_le_bytes())?;
    w.write_all(&batch.epsilon.to_le_bytes())?;
    write_f64s(&mut w, &batch.states)?;
    w.flush()?;

    let mut s = BufWriter::new(File::create(times_sidecar_path(path))?);
    writeln!(s, "t")?;
    for &t in &batch.times {
        writeln!(s, "{}", fmt_f64(t))?;
    }
    s.flush()?;
    Ok(())
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<TrajectoryBatch> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    if bytes.len() < 32 || &bytes[..8] != TRAJECTORY_MAGIC {
        return Err(format_error(path, "missing trajectory magic"));
    }
    let word =
        |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    let (p, t, d, version) = (word(0), word(1), word(2), word(3));
    if version != TRAJECTORY_VERSION as usize {
        return Err(format_error(path, format!("unsupported version {version}")));
    }
    let epsilon = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    if bytes.len() != 32 + p * t * d * 8 {
        return Err(format_error(path, "payload size does not match header"));
    }
    let states = f64s_from_le(&bytes[32..]);

    let sidecar = times_sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar)?;
    let mut times = Vec::with_capacity(t);
    for (i, line) in text.lines().enumerate().skip(1) {
        let v = line
            .trim()
            .parse()
            .map_err(|_| parse_error(&sidecar, i + 1, format!("not a number: {line:?}")))?;
        times.push(v);
    }
    if times.len() != t {
        return Err(format_error(
            &sidecar,
            format!("expected {t} times, found {}", times.len()),
        ));
    }
    TrajectoryBatch::new(times, states, p, d, epsilon)
}

/// Long-format CSV `particle,t,x0,...` for plotting.
pub fn save_trajectories_csv(path: impl AsRef<Path>, batch: &TrajectoryBatch) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let cols: Vec<String> = (0..batch.dim).map(|j| format!("x{j}")).collect();
    writeln!(w, "particle,t,{}", cols.join(","))?;
    for p in 0..batch.n_particles {
        for (i, &t) in batch.times.iter().enumerate() {
            let vals: Vec<String> = batch.state(p, i).iter().map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{p},{},{}", fmt_f64(t), vals.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Dense plan export: magic, `u64 N`, `u64 M`, then `N * M` log masses.
pub fn save_plan(path: impl AsRef<Path>, plan: &DiscretePlan) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(PLAN_MAGIC)?;
    w.write_all(&(plan.n0() as u64).to_le_bytes())?;
    w.write_all(&(plan.n1() as u64).to_le_bytes())?;
    write_f64s(&mut w, &plan.log_plan)?;
    w.flush()?;
    Ok(())
}

/// Reads a plan written by [`save_plan`] as `(N, M, log masses)`.
pub fn load_plan_masses(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    if bytes.len() < 24 || &bytes[..8] != PLAN_MAGIC {
        return Err(format_error(path, "missing plan magic"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let m = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if bytes.len() != 24 + n * m * 8 {
        return Err(format_error(path, "payload size does not match header"));
    }
    Ok((n, m, f64s_from_le(&bytes[24..])))
}

pub fn save_loss_csv(path: impl AsRef<Path>, trace: &[TrainReport]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", TrainReport::csv_header())?;
    for r in trace {
        writeln!(w, "{}", r.csv_line())?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_metrics_csv(path: impl AsRef<Path>, rows: &[MetricRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", MetricRecord::CSV_HEADER)?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
    pub n: usize,
    pub dim: usize,
}

impl DatasetRecord {
    pub fn new(role: impl Into<String>, path: impl Into<PathBuf>, samples: &SampleSet) -> Self {
        Self {
            role: role.into(),
            path: path.into(),
            sha256: content_digest(samples),
            n: samples.len(),
            dim: samples.dim(),
        }
    }
}

/// Everything needed to re-run a command: its name and arguments, the
/// resolved solver configuration, input hashes and output files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SolverConfig>,
    pub datasets: Vec<DatasetRecord>,
    pub seed: u64,
    pub code_version: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn code_version() -> String {
        format!("mixbridge {}", env!("CARGO_PKG_VERSION"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
