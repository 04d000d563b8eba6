//! Batch evaluation against a manifest of recordings with known DRR.
//!
//! Manifest format (CSV with header; empty cells allowed for optional
//! columns):
//!
//! ```text
//! wav,geometry,truth_drr_db,noise_type,noise_level,room,distance,split,doa_az,doa_zen
//! scenes/a.wav,triangle,0.0,none,,synth,,dev,,
//! ```
//!
//! Relative paths resolve against the manifest's directory. `geometry` is
//! `triangle` or a geometry TOML file. `doa_az`/`doa_zen` accept radians or
//! a `deg` suffix and, when both are present, bypass the DOA search.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::drr::{fit_calibration, Calibration};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::SolidAngle;
use crate::io::{parse_angle, read_wav, resolve_geometry};
use crate::pipeline::{estimate, EstimatorConfig};

pub const DEV_SPLIT: &str = "dev";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub wav: String,
    pub geometry: String,
    pub truth_drr_db: f64,
    #[serde(default)]
    pub noise_type: String,
    #[serde(default)]
    pub noise_level: String,
    #[serde(default)]
    pub room: String,
    #[serde(default)]
    pub distance: String,
    #[serde(default)]
    pub split: String,
    #[serde(default)]
    pub doa_az: String,
    #[serde(default)]
    pub doa_zen: String,
}

impl ManifestRow {
    fn known_doa(&self) -> Result<Option<SolidAngle>> {
        match (self.doa_az.trim(), self.doa_zen.trim()) {
            ("", "") => Ok(None),
            (az, zen) if !az.is_empty() && !zen.is_empty() => {
                Ok(Some(SolidAngle::new(parse_angle(az)?, parse_angle(zen)?)?))
            }
            _ => Err(Error::InvalidArgument(
                "doa_az and doa_zen must be given together".into(),
            )),
        }
    }
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<ManifestRow>, _>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(rows)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    read_manifest(std::fs::File::open(path)?)
}

pub fn write_manifest<W: Write>(out: W, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// How calibration enters an evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum CalibrationMode {
    #[default]
    None,
    Fixed(Calibration),
    /// Fit on the `dev` split, apply to every other row.
    FitOnDev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub index: usize,
    pub wav: String,
    pub split: String,
    pub noise_type: String,
    pub noise_level: String,
    pub room: String,
    pub distance: String,
    pub truth_drr_db: f64,
    pub raw_db: Option<f64>,
    pub calibrated_db: Option<f64>,
    pub error_db: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean_error_db: f64,
    pub mean_abs_error_db: f64,
    pub std_error_db: f64,
    pub max_abs_error_db: f64,
}

impl Stats {
    pub fn of(errors: &[f64]) -> Option<Self> {
        if errors.is_empty() {
            return None;
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = if errors.len() > 1 {
            errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            count: errors.len(),
            mean_error_db: mean,
            mean_abs_error_db: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
            std_error_db: var.sqrt(),
            max_abs_error_db: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub field: String,
    pub value: String,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub rows: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    /// Over the scored rows: every row, or every non-dev row when the
    /// calibration was fitted on the dev split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overall: Option<Stats>,
    pub groups: Vec<GroupStats>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<RowResult>,
    pub summary: EvalSummary,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn run_row(row: &ManifestRow, base: &Path, config: &EstimatorConfig) -> Result<f64> {
    let geom = match row.geometry.trim() {
        g @ ("triangle" | "default") => resolve_geometry(g)?,
        g => resolve_geometry(&resolve(base, g).to_string_lossy())?,
    };
    let audio = read_wav(&resolve(base, &row.wav))?;
    let mut cfg = config.clone();
    if let Some(doa) = row.known_doa()? {
        cfg.doa = Some(doa);
    }
    Ok(estimate(&audio.channels, audio.sample_rate as f64, &geom, &cfg, None)?
        .drr
        .raw_db)
}

/// Estimates every row, then calibrates and summarises. Row failures are
/// recorded and do not stop the run.
pub fn evaluate(
    rows: &[ManifestRow],
    base_dir: &Path,
    config: &EstimatorConfig,
    calibration: &CalibrationMode,
    exec: Execution,
) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let raw = exec.map_slice(rows, |row| run_row(row, base_dir, config));
    score(rows, raw, calibration)
}

/// Calibration and statistics over precomputed raw estimates.
pub fn score(rows: &[ManifestRow], raw: Vec<Result<f64>>, calibration: &CalibrationMode) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let is_dev = |r: &ManifestRow| r.split.trim().eq_ignore_ascii_case(DEV_SPLIT);
    let cal = match calibration {
        CalibrationMode::None => None,
        CalibrationMode::Fixed(c) => Some(c.clone()),
        CalibrationMode::FitOnDev => {
            let pairs: Vec<(f64, f64)> = rows
                .iter()
                .zip(&raw)
                .filter(|(r, _)| is_dev(r))
                .filter_map(|(r, e)| e.as_ref().ok().map(|&e| (e, r.truth_drr_db)))
                .collect();
            Some(fit_calibration(&pairs)?)
        }
    };
    let fitted = matches!(calibration, CalibrationMode::FitOnDev);

    let mut results = Vec::with_capacity(rows.len());
    let mut failures = Vec::new();
    for (i, (row, est)) in rows.iter().zip(raw).enumerate() {
        let calibrate = cal.as_ref().filter(|_| !(fitted && is_dev(row)));
        let (raw_db, calibrated_db, err) = match est {
            Ok(r) => {
                let c = calibrate.map_or(r, |c| r - c.bias_db);
                (Some(r), Some(c), None)
            }
            Err(e) => {
                failures.push(format!("row {} ({}): {e}", i + 1, row.wav));
                (None, None, Some(e.to_string()))
            }
        };
        results.push(RowResult {
            index: i + 1,
            wav: row.wav.clone(),
            split: row.split.clone(),
            noise_type: row.noise_type.clone(),
            noise_level: row.noise_level.clone(),
            room: row.room.clone(),
            distance: row.distance.clone(),
            truth_drr_db: row.truth_drr_db,
            raw_db,
            calibrated_db,
            error_db: calibrated_db.map(|c| c - row.truth_drr_db),
            error: err,
        });
    }

    let scored: Vec<&RowResult> = results
        .iter()
        .filter(|r| !(fitted && r.split.trim().eq_ignore_ascii_case(DEV_SPLIT)))
        .filter(|r| r.error_db.is_some())
        .collect();
    let errors: Vec<f64> = scored.iter().filter_map(|r| r.error_db).collect();

    let mut groups = Vec::new();
    type Key = fn(&RowResult) -> String;
    let fields: [(&str, Key); 4] = [
        ("noise", |r| {
            format!("{} {}", r.noise_type, r.noise_level).trim().to_string()
        }),
        ("room", |r| r.room.clone()),
        ("distance", |r| r.distance.clone()),
        ("split", |r| r.split.clone()),
    ];
    for (field, key) in fields {
        let mut by: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in &scored {
            let k = key(r);
            if !k.is_empty() {
                by.entry(k).or_default().push(r.error_db.unwrap());
            }
        }
        for (value, errs) in by {
            groups.push(GroupStats {
                field: field.into(),
                value,
                stats: Stats::of(&errs).expect("non-empty group"),
            });
        }
    }

    Ok(EvalReport {
        summary: EvalSummary {
            rows: results.len(),
            failed: failures.len(),
            calibration: cal,
            overall: Stats::of(&errors),
            groups,
            failures,
        },
        rows: results,
    })
}

impl EvalReport {
    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads `estimate_db,truth_db` pairs.
pub fn read_pairs<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    #[derive(Deserialize)]
    struct Pair {
        estimate_db: f64,
        truth_db: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let pairs = rdr
        .deserialize()
        .map(|p: std::result::Result<Pair, _>| p.map(|p| (p.estimate_db, p.truth_db)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if pairs.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    Ok(pairs)
}
