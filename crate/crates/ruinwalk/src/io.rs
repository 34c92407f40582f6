//! Flat-file formats: JSON for configs and summaries, CSV for record
//! streams, KS series and plot data.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use ruinwalk_core::exceed::{ExceedanceRecord, HitStatus};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result};

/// One CSV row per exceedance record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub hit: u8,
    pub tau: Option<f64>,
    pub tau_rw: Option<u64>,
    pub tau_hat_rw: Option<u64>,
    #[serde(rename = "T_pre")]
    pub t_pre: f64,
    pub t_in_cycle: f64,
    #[serde(rename = "Z_before")]
    pub z_before: f64,
    pub overshoot: f64,
    pub max_dev: f64,
    pub weight: f64,
    pub steps_run: u64,
}

impl From<&ExceedanceRecord> for RecordRow {
    fn from(r: &ExceedanceRecord) -> Self {
        Self {
            hit: r.is_hit() as u8,
            tau: r.tau,
            tau_rw: r.tau_rw,
            tau_hat_rw: r.tau_hat_rw,
            t_pre: r.t_pre,
            t_in_cycle: r.t_in_cycle,
            z_before: r.z_before,
            overshoot: r.overshoot,
            max_dev: r.max_dev,
            weight: r.weight,
            steps_run: r.steps_run,
        }
    }
}

impl From<RecordRow> for ExceedanceRecord {
    /// Columns not stored in the CSV come back as NaN (`cycle_overshoot`)
    /// or are rebuilt from `weight` (`log_weight`).
    fn from(r: RecordRow) -> Self {
        Self {
            status: if r.hit == 1 {
                HitStatus::Hit
            } else {
                HitStatus::NoHit
            },
            tau: r.tau,
            tau_rw: r.tau_rw,
            tau_hat_rw: r.tau_hat_rw,
            t_pre: r.t_pre,
            t_in_cycle: r.t_in_cycle,
            z_before: r.z_before,
            overshoot: r.overshoot,
            cycle_overshoot: f64::NAN,
            max_dev: r.max_dev,
            weight: r.weight,
            log_weight: r.weight.ln(),
            steps_run: r.steps_run,
        }
    }
}

/// Row of a KS trend series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub x: f64,
    pub ks: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Row of plot data: empirical and limit quantiles at level `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub q: f64,
    pub statistic: f64,
    pub limit: f64,
}

/// Row of the per-level estimate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub x: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub asymptote: f64,
    pub ratio: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

pub fn write_records(path: &Path, records: &[ExceedanceRecord]) -> Result<()> {
    let rows: Vec<RecordRow> = records.iter().map(RecordRow::from).collect();
    write_csv(path, &rows)
}

pub fn read_records(path: &Path) -> Result<Vec<ExceedanceRecord>> {
    Ok(read_csv::<RecordRow>(path)?
        .into_iter()
        .map(ExceedanceRecord::from)
        .collect())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}
