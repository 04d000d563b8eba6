//! End-to-end blind DRR estimation from a multichannel recording.

use std::f64::consts::FRAC_PI_3;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::beamforming::{apply_beamformer, das_weights, output_psd};
use crate::doa::{estimate_doa, DoaGrid};
use crate::drr::{apply_calibration, compute_drr, Calibration, DrrEstimate, DEFAULT_BAND_HZ};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{ArrayGeometry, SolidAngle, Vec3};
use crate::psd_estimation::{
    build_gain_matrix, identical_beampattern_psd, solve_psd, GainMatrix, Method, PsdPair, DEFAULT_COND_THRESHOLD,
};
use crate::quadrature::{SphericalQuadrature, DEFAULT_AZIMUTH_NODES, DEFAULT_ZENITH_NODES};
use crate::stft::{analyze, BinGrid, StftConfig, DEFAULT_SAMPLE_RATE};
use crate::vad::{detect, VadConfig, VadMask};

pub const DEFAULT_SECOND_BEAM_OFFSET: f64 = FRAC_PI_3;

/// Every setting that influences an estimate. Serialised verbatim into
/// reports, so a report's `config` table reproduces its numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Required input sample rate; `None` accepts any.
    pub sample_rate: Option<u32>,
    pub stft: StftConfig,
    pub method: Method,
    /// Summation band for the DRR, Hz.
    pub band_hz: (f64, f64),
    /// Band of the SRP search, Hz.
    pub doa_band_hz: (f64, f64),
    pub grid: DoaGrid,
    /// Known source direction; skips the search when set.
    pub doa: Option<SolidAngle>,
    /// Azimuth offset of the second beam from the source direction.
    pub second_beam_offset: f64,
    pub cond_threshold: f64,
    pub quadrature_zenith_nodes: usize,
    pub quadrature_azimuth_nodes: usize,
    pub vad: VadConfig,
    pub execution: Execution,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            sample_rate: Some(DEFAULT_SAMPLE_RATE),
            stft: StftConfig::default(),
            method: Method::Beamspace,
            band_hz: DEFAULT_BAND_HZ,
            doa_band_hz: DEFAULT_BAND_HZ,
            grid: DoaGrid::default(),
            doa: None,
            second_beam_offset: DEFAULT_SECOND_BEAM_OFFSET,
            cond_threshold: DEFAULT_COND_THRESHOLD,
            quadrature_zenith_nodes: DEFAULT_ZENITH_NODES,
            quadrature_azimuth_nodes: DEFAULT_AZIMUTH_NODES,
            vad: VadConfig::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaReport {
    pub azimuth: f64,
    pub zenith: f64,
    pub supplied: bool,
    pub informative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VadStats {
    pub enabled: bool,
    pub frames: usize,
    pub active_frames: usize,
}

/// Result of [`estimate`], with the per-bin quantities kept for diagnostics.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub drr: DrrEstimate,
    pub doa: DoaReport,
    pub vad: VadStats,
    pub grid: BinGrid,
    pub beam_psds: Vec<[f64; 2]>,
    pub gains: GainMatrix,
    pub psd: PsdPair,
}

fn band_bins(grid: &BinGrid, band: (f64, f64), what: &str) -> Result<(usize, usize)> {
    grid.band(band.0, band.1)
        .ok_or_else(|| Error::InvalidArgument(format!("{what} {:?} Hz contains no bins", band)))
}

pub fn estimate(
    channels: &[Vec<f64>],
    sample_rate: f64,
    geom: &ArrayGeometry,
    config: &EstimatorConfig,
    calibration: Option<&Calibration>,
) -> Result<Estimate> {
    if channels.len() < 2 || geom.channels() < 2 {
        return Err(Error::BeamspaceDegenerate(format!(
            "{} channel(s): two beams from one microphone share one beampattern",
            channels.len().min(geom.channels())
        )));
    }
    if channels.len() != geom.channels() {
        return Err(Error::ChannelMismatch {
            expected: geom.channels(),
            got: channels.len(),
        });
    }
    if let Some(expected) = config.sample_rate {
        if sample_rate != expected as f64 {
            return Err(Error::SampleRateMismatch {
                expected,
                got: sample_rate.round() as u32,
            });
        }
    }
    let exec = config.execution;
    let spec = analyze(channels, sample_rate, &config.stft, exec)?;
    let grid = spec.grid();
    let (lo, hi) = band_bins(&grid, config.band_hz, "DRR band")?;

    let mask = detect(&spec, &config.vad)?;
    let vad = VadStats {
        enabled: config.vad.enabled,
        frames: mask.len(),
        active_frames: mask.active_count(),
    };

    let doa = match config.doa {
        Some(d) => DoaReport {
            azimuth: d.azimuth(),
            zenith: d.zenith(),
            supplied: true,
            informative: true,
        },
        None => {
            let (dlo, dhi) = band_bins(&grid, config.doa_band_hz, "DOA band")?;
            let est = estimate_doa(&spec, geom, &config.grid, &mask, dlo..=dhi, exec)?;
            DoaReport {
                azimuth: est.direction.azimuth(),
                zenith: est.direction.zenith(),
                supplied: false,
                informative: est.informative,
            }
        }
    };
    let source = SolidAngle::new(doa.azimuth, doa.zenith)?;

    let w1 = das_weights(geom, source, &grid);
    let w2 = das_weights(geom, source.offset_azimuth(config.second_beam_offset), &grid);
    let p1 = output_psd(&apply_beamformer(&spec, &w1)?, 0, &mask)?;
    let p2 = output_psd(&apply_beamformer(&spec, &w2)?, 0, &mask)?;
    let beam_psds: Vec<[f64; 2]> = p1.iter().zip(&p2).map(|(&a, &b)| [a, b]).collect();

    let quad = SphericalQuadrature::product(config.quadrature_zenith_nodes, config.quadrature_azimuth_nodes)?;
    let gains = build_gain_matrix(&w1, &w2, &source, geom, &quad, exec)?;

    let psd = match config.method {
        Method::Beamspace => solve_psd(&beam_psds, &gains, config.cond_threshold)?,
        Method::IdenticalBeampattern => {
            let g1: Vec<f64> = gains.entries.iter().map(|m| m[0][0]).collect();
            let g2: Vec<f64> = gains.entries.iter().map(|m| m[1][0]).collect();
            let mic = mean_mic_psd(&spec, &mask)?;
            identical_beampattern_psd(&p1, &p2, &g1, &g2, &mic, config.cond_threshold)?
        }
    };

    let mut drr = compute_drr(&psd, lo..=hi)?;
    if let Some(cal) = calibration {
        drr = apply_calibration(&drr, cal);
    }
    Ok(Estimate {
        drr,
        doa,
        vad,
        grid,
        beam_psds,
        gains,
        psd,
    })
}

fn mean_mic_psd(spec: &crate::stft::MultichannelSpectrogram, mask: &VadMask) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; spec.bins()];
    for m in 0..spec.channels() {
        for (a, p) in acc.iter_mut().zip(output_psd(spec, m, mask)?) {
            *a += p;
        }
    }
    let n = spec.channels() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

impl Estimate {
    /// Per-bin beam PSDs, gains, estimates and flags as CSV.
    pub fn write_diagnostics<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "bin",
            "freq_hz",
            "in_band",
            "p_beam1",
            "p_beam2",
            "g1_source",
            "g1_integrated",
            "g2_source",
            "g2_integrated",
            "condition",
            "direct",
            "reverb",
            "raw_direct",
            "raw_reverb",
            "clamped",
            "ill_conditioned",
        ])?;
        for k in 0..self.psd.bins() {
            let g = self.gains.entries[k];
            let s = self.psd.status[k];
            let in_band = (self.drr.first_bin..=self.drr.last_bin).contains(&k);
            w.write_record([
                k.to_string(),
                self.grid.frequency_hz(k).to_string(),
                in_band.to_string(),
                self.beam_psds[k][0].to_string(),
                self.beam_psds[k][1].to_string(),
                g[0][0].to_string(),
                g[0][1].to_string(),
                g[1][0].to_string(),
                g[1][1].to_string(),
                self.gains.condition[k].to_string(),
                self.psd.direct[k].to_string(),
                self.psd.reverb[k].to_string(),
                self.psd.raw_direct[k].to_string(),
                self.psd.raw_reverb[k].to_string(),
                s.clamped.to_string(),
                s.ill_conditioned.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub channels: usize,
    pub speed_of_sound: f64,
    pub aperture_m: f64,
    pub positions: Vec<Vec3>,
}

impl GeometrySummary {
    pub fn of(geom: &ArrayGeometry) -> Self {
        Self {
            channels: geom.channels(),
            speed_of_sound: geom.speed_of_sound(),
            aperture_m: geom.aperture(),
            positions: geom.positions().to_vec(),
        }
    }
}

/// Human-readable record of one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub tool_version: String,
    pub input: String,
    pub sample_rate: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    pub drr: DrrEstimate,
    pub doa: DoaReport,
    pub vad: VadStats,
    pub geometry: GeometrySummary,
    pub config: EstimatorConfig,
}

impl EstimateReport {
    pub fn new(
        input: impl Into<String>,
        sample_rate: f64,
        geom: &ArrayGeometry,
        config: &EstimatorConfig,
        estimate: &Estimate,
        calibration: Option<&Calibration>,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input: input.into(),
            sample_rate,
            method: config.method,
            diagnostics_csv: None,
            calibration: calibration.cloned(),
            drr: estimate.drr.clone(),
            doa: estimate.doa,
            vad: estimate.vad,
            geometry: GeometrySummary::of(geom),
            config: config.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        crate::io::to_toml(self)
    }
}
