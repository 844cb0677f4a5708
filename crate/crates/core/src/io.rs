//! Capture-table cache, CSV writers and JSON helpers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capture::{build_capture_table, CaptureTable, ChannelParams};
use crate::density_evolution::LoadPoint;
use crate::error::{Error, Result};
use crate::simulator::RunRecord;
use crate::sweep::PointAggregate;

pub const CACHE_FORMAT_VERSION: u32 = 1;
/// Environment variable overriding the capture-table cache directory.
pub const CACHE_DIR_ENV: &str = "FRAMELESS_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".frameless-cache";

/// Formats a float with 9 significant digits, trailing zeros trimmed.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&magnitude) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub const RUNS_CSV_COLUMNS: [&str; 12] = [
    "seed",
    "beta",
    "threshold_v",
    "threshold_s",
    "capture_ratio",
    "snr_ratio",
    "n_users",
    "slots_used",
    "resolved_count",
    "fraction_resolved",
    "throughput",
    "cause",
];

pub const CURVE_CSV_COLUMNS: [&str; 4] = ["slots_per_user", "beta", "p_r", "throughput"];

pub const GRID_CSV_COLUMNS: [&str; 10] = [
    "beta",
    "threshold_v",
    "threshold_s",
    "runs",
    "mean_throughput",
    "se_throughput",
    "mean_fraction_resolved",
    "se_fraction_resolved",
    "mean_slots_per_user",
    "se_slots_per_user",
];

/// Human-readable description of every CSV output.
pub fn csv_schema() -> String {
    format!(
        "sim_runs.csv: one row per simulated contention period\n  {}\n  \
         capture_ratio and snr_ratio (b / mean SNR) are empty on the collision channel;\n  \
         slots_used excludes the beacon; throughput = resolved_count / (slots_used + 1);\n  \
         cause is one of fraction_threshold, throughput_threshold, all_resolved, slot_cap\n\
         de_sweep.csv: beta-optimized and-or tree solution per slots-per-user ratio M/N\n  {}\n\
         sweep_grid.csv: simulated aggregates per (beta, V, S) grid point\n  {}\n\
         floats carry 9 significant digits\n",
        RUNS_CSV_COLUMNS.join(","),
        CURVE_CSV_COLUMNS.join(","),
        GRID_CSV_COLUMNS.join(","),
    )
}

pub fn write_runs_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUNS_CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            format_float(r.beta),
            format_float(r.threshold_v),
            format_float(r.threshold_s),
            opt_float(r.capture_ratio),
            opt_float(r.snr_ratio),
            r.n_users.to_string(),
            r.slots_used.to_string(),
            r.resolved_count.to_string(),
            format_float(r.fraction_resolved),
            format_float(r.throughput),
            r.cause.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_curve_csv<W: Write>(out: W, curve: &[LoadPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_CSV_COLUMNS)?;
    for p in curve {
        w.write_record([
            format_float(p.slots_per_user),
            format_float(p.beta),
            format_float(p.p_r),
            format_float(p.throughput),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_grid_csv<W: Write>(out: W, points: &[PointAggregate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRID_CSV_COLUMNS)?;
    for p in points {
        let s = &p.summary;
        w.write_record([
            format_float(p.point.beta),
            format_float(p.point.threshold_v),
            format_float(p.point.threshold_s),
            s.runs.to_string(),
            format_float(s.mean_throughput),
            format_float(s.se_throughput),
            format_float(s.mean_fraction_resolved),
            format_float(s.se_fraction_resolved),
            format_float(s.mean_slots_per_user),
            format_float(s.se_slots_per_user),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn with_file<T>(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<fs::File>) -> Result<T>) -> Result<T> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let value = f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(value)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    with_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Identity of a cached capture table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableKey {
    pub capture_ratio: f64,
    /// `b / mean_snr`.
    pub snr_ratio: f64,
    pub t_max: usize,
    pub samples: u64,
    pub seed: u64,
}

impl TableKey {
    pub fn channel(&self) -> Result<ChannelParams> {
        ChannelParams::from_ratio(self.capture_ratio, self.snr_ratio)
    }

    pub fn file_name(&self) -> String {
        format!(
            "pi_b{}_r{}_t{}_n{}_s{}_v{}.json",
            self.capture_ratio, self.snr_ratio, self.t_max, self.samples, self.seed, CACHE_FORMAT_VERSION
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheRecord {
    format_version: u32,
    key: TableKey,
    table: CaptureTable,
    checksum: String,
}

fn checksum(key: &TableKey, table: &CaptureTable) -> Result<String> {
    let payload = serde_json::to_vec(&(CACHE_FORMAT_VERSION, key, table))?;
    let digest = Sha256::digest(&payload);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Hit,
    Built,
}

/// Directory of capture tables keyed by [`TableKey`].
#[derive(Debug, Clone)]
pub struct TableCache {
    dir: PathBuf,
}

impl TableCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// `$FRAMELESS_CACHE_DIR`, falling back to `.frameless-cache`.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(CACHE_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR), PathBuf::from))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &TableKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// Reads a cached table. `Ok(None)` when absent; an error when the file
    /// exists but fails its checksum or key check.
    pub fn load(&self, key: &TableKey) -> Result<Option<CaptureTable>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let corrupt = |reason: String| Error::CorruptCache {
            path: path.clone(),
            reason,
        };
        let record: CacheRecord = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if record.format_version != CACHE_FORMAT_VERSION {
            return Err(corrupt(format!("format version {}", record.format_version)));
        }
        if record.key != *key {
            return Err(corrupt("key does not match file name".into()));
        }
        if record.checksum != checksum(&record.key, &record.table)? {
            return Err(corrupt("checksum mismatch".into()));
        }
        Ok(Some(record.table))
    }

    pub fn store(&self, key: &TableKey, table: &CaptureTable) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let record = CacheRecord {
            format_version: CACHE_FORMAT_VERSION,
            key: *key,
            table: table.clone(),
            checksum: checksum(key, table)?,
        };
        let path = self.path_for(key);
        let tmp = path.with_extension("json.tmp");
        write_json(&tmp, &record)?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Returns the cached table, building and storing it on a miss unless
    /// `allow_build` is false.
    pub fn load_or_build(&self, key: &TableKey, allow_build: bool) -> Result<(CaptureTable, CacheStatus)> {
        if let Some(table) = self.load(key)? {
            return Ok((table, CacheStatus::Hit));
        }
        if !allow_build {
            return Err(Error::CacheMiss(self.path_for(key)));
        }
        let table = build_capture_table(key.channel()?, key.t_max, key.samples, key.seed)?;
        self.store(key, &table)?;
        Ok((table, CacheStatus::Built))
    }
}
