//! Energy-threshold frame selection.
//!
//! The stationary noise floor is a per-bin low percentile of the power over
//! all frames; a frame is active when its broadband power exceeds the summed
//! floor by a margin in dB. The mask is computed on one reference channel and
//! applied to every beamformer output, so all expectations run over the same
//! frame set.
//!
//! The floor sits below the noise PSD by the matching quantile of the
//! exponential distribution (about −6.5 dB at the 20th percentile);
//! [`noise_psd_from_floor`] undoes that offset when an unbiased level is
//! wanted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stft::MultichannelSpectrogram;

pub const MIN_FLOOR_FRAMES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadConfig {
    pub enabled: bool,
    pub channel: usize,
    pub margin_db: f64,
    pub percentile: f64,
    pub min_frames: usize,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            channel: 0,
            margin_db: 10.0,
            percentile: 20.0,
            min_frames: 10,
        }
    }
}

/// Per-frame activity decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VadMask {
    active: Vec<bool>,
    count: usize,
}

impl VadMask {
    pub fn from_flags(active: Vec<bool>) -> Self {
        let count = active.iter().filter(|&&a| a).count();
        Self { active, count }
    }

    /// Every frame active.
    pub fn all(frames: usize) -> Self {
        Self::from_flags(vec![true; frames])
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.count
    }

    pub fn is_active(&self, frame: usize) -> bool {
        self.active[frame]
    }

    pub fn flags(&self) -> &[bool] {
        &self.active
    }

    pub fn active_frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.active.iter().enumerate().filter_map(|(t, &a)| a.then_some(t))
    }
}

/// Linear-interpolated percentile (0..=100) of an unsorted sample.
pub fn percentile(values: &mut [f64], pct: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let pos = (pct / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    values[lo] + (values[hi] - values[lo]) * frac
}

/// Per-bin stationary noise floor: the `pct`-th percentile of `|X|²` over
/// all frames of one channel.
pub fn estimate_noise_floor(spec: &MultichannelSpectrogram, channel: usize, pct: f64) -> Result<Vec<f64>> {
    check_channel(spec, channel)?;
    if spec.frames() < MIN_FLOOR_FRAMES {
        return Err(Error::TooFewFrames {
            needed: MIN_FLOOR_FRAMES,
            got: spec.frames(),
        });
    }
    if !(pct > 0.0 && pct < 100.0) {
        return Err(Error::InvalidArgument(format!(
            "percentile must be within (0, 100), got {pct}"
        )));
    }
    let mut column = vec![0.0; spec.frames()];
    Ok((0..spec.bins())
        .map(|k| {
            for (t, c) in column.iter_mut().enumerate() {
                *c = spec.get(channel, k, t).norm_sqr();
            }
            percentile(&mut column, pct)
        })
        .collect())
}

/// Rescales a `pct`-th percentile floor to the mean of the exponential
/// distribution it was drawn from, i.e. the noise PSD.
pub fn noise_psd_from_floor(floor: &[f64], pct: f64) -> Vec<f64> {
    let quantile = -(1.0 - pct / 100.0).ln();
    floor.iter().map(|f| f / quantile).collect()
}

/// Frames whose broadband power exceeds `Σ floor · 10^(margin/10)`.
pub fn compute_mask(
    spec: &MultichannelSpectrogram,
    channel: usize,
    floor: &[f64],
    margin_db: f64,
    min_frames: usize,
) -> Result<VadMask> {
    check_channel(spec, channel)?;
    if floor.len() != spec.bins() {
        return Err(Error::InvalidArgument(format!(
            "noise floor has {} bins, spectrogram has {}",
            floor.len(),
            spec.bins()
        )));
    }
    let threshold = floor.iter().sum::<f64>() * 10f64.powf(margin_db / 10.0);
    let flags = (0..spec.frames())
        .map(|t| {
            let power: f64 = spec.frame(channel, t).iter().map(|z| z.norm_sqr()).sum();
            power > threshold
        })
        .collect();
    let mask = VadMask::from_flags(flags);
    if mask.active_count() < min_frames.max(1) {
        return Err(Error::VadTooFewFrames {
            active: mask.active_count(),
            required: min_frames.max(1),
        });
    }
    Ok(mask)
}

/// Noise floor and mask in one step, or all frames when disabled.
pub fn detect(spec: &MultichannelSpectrogram, config: &VadConfig) -> Result<VadMask> {
    if !config.enabled {
        return Ok(VadMask::all(spec.frames()));
    }
    let floor = estimate_noise_floor(spec, config.channel, config.percentile)?;
    compute_mask(spec, config.channel, &floor, config.margin_db, config.min_frames)
}

fn check_channel(spec: &MultichannelSpectrogram, channel: usize) -> Result<()> {
    if channel >= spec.channels() {
        return Err(Error::InvalidArgument(format!(
            "VAD channel {channel} out of range ({} channels)",
            spec.channels()
        )));
    }
    Ok(())
}
