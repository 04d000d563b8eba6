//! Reduction of per-bin PSD estimates to a single DRR figure, plus the
//! constant-bias calibration fitted on a development set.

use std::f64::consts::PI;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psd_estimation::{Method, PsdPair};

pub const DEFAULT_BAND_HZ: (f64, f64) = (300.0, 5500.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrrEstimate {
    pub raw_db: f64,
    pub calibrated_db: f64,
    pub bias_db: f64,
    pub first_bin: usize,
    pub last_bin: usize,
    pub bins_used: usize,
    pub bins_excluded: usize,
    pub bins_clamped: usize,
    pub method: Method,
}

/// `10 log10(Σ P_D / (4π Σ P̄_R))` over the usable bins of `band`.
///
/// Ill-conditioned bins are skipped; clamped bins contribute their clamped
/// values.
pub fn compute_drr(psd: &PsdPair, band: RangeInclusive<usize>) -> Result<DrrEstimate> {
    let (first, last) = (*band.start(), *band.end());
    if first > last || last >= psd.bins() {
        return Err(Error::InvalidArgument(format!(
            "band {first}..={last} outside 0..{}",
            psd.bins()
        )));
    }
    let mut direct = 0.0;
    let mut reverb = 0.0;
    let mut used = 0;
    let mut clamped = 0;
    for k in band {
        let status = psd.status[k];
        if !status.is_usable() {
            continue;
        }
        used += 1;
        clamped += usize::from(status.clamped);
        direct += psd.direct[k];
        reverb += psd.reverb[k];
    }
    if used == 0 {
        return Err(Error::NoUsableBins);
    }
    if !(reverb > 0.0) {
        return Err(Error::NoReverberantEnergy);
    }
    let raw_db = 10.0 * (direct / (4.0 * PI * reverb)).log10();
    Ok(DrrEstimate {
        raw_db,
        calibrated_db: raw_db,
        bias_db: 0.0,
        first_bin: first,
        last_bin: last,
        bins_used: used,
        bins_excluded: last - first + 1 - used,
        bins_clamped: clamped,
        method: psd.method,
    })
}

/// Constant dB offset subtracted from raw estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub bias_db: f64,
    #[serde(default)]
    pub provenance: String,
}

impl Calibration {
    pub fn new(bias_db: f64, provenance: impl Into<String>) -> Result<Self> {
        if !bias_db.is_finite() {
            return Err(Error::InvalidArgument("calibration bias must be finite".into()));
        }
        Ok(Self {
            bias_db,
            provenance: provenance.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cal: Calibration = toml::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Calibration::new(cal.bias_db, cal.provenance)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serialises")
    }
}

/// Mean of `estimate − truth` over the pairs.
pub fn fit_calibration(pairs: &[(f64, f64)]) -> Result<Calibration> {
    if pairs.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let bias = pairs.iter().map(|(est, truth)| est - truth).sum::<f64>() / pairs.len() as f64;
    Calibration::new(bias, format!("mean error over {} pairs", pairs.len()))
}

pub fn apply_calibration(raw: &DrrEstimate, cal: &Calibration) -> DrrEstimate {
    DrrEstimate {
        calibrated_db: raw.raw_db - cal.bias_db,
        bias_db: cal.bias_db,
        ..raw.clone()
    }
}
