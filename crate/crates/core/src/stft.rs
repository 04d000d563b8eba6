//! Multichannel short-time Fourier analysis.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fft::RealFft;

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_FRAME_SIZE: usize = 512;
pub const DEFAULT_HOP: usize = 256;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub frame_size: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_size: DEFAULT_FRAME_SIZE,
            hop: DEFAULT_HOP,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_size < 2 {
            return Err(Error::InvalidArgument("frame size must be at least 2".into()));
        }
        if self.hop == 0 || self.hop > self.frame_size {
            return Err(Error::InvalidArgument(format!(
                "hop must be in 1..={}, got {}",
                self.frame_size, self.hop
            )));
        }
        Ok(())
    }

    pub fn frame_count(&self, samples: usize) -> usize {
        if samples < self.frame_size {
            0
        } else {
            (samples - self.frame_size) / self.hop + 1
        }
    }
}

/// Maps one-sided DFT bin indices to physical frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    pub sample_rate: f64,
    pub frame_size: usize,
}

impl BinGrid {
    pub fn new(sample_rate: f64, frame_size: usize) -> Self {
        Self {
            sample_rate,
            frame_size,
        }
    }

    pub fn bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn frequency_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.frame_size as f64
    }

    /// Angular frequency `2π k fs / N` in rad/s.
    pub fn omega(&self, bin: usize) -> f64 {
        2.0 * PI * self.frequency_hz(bin)
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| self.omega(k)).collect()
    }

    /// Inclusive bin range whose centre frequencies fall within `[lo, hi]` Hz,
    /// or `None` if it is empty.
    pub fn band(&self, lo_hz: f64, hi_hz: f64) -> Option<(usize, usize)> {
        let df = self.sample_rate / self.frame_size as f64;
        let first = (lo_hz / df).ceil().max(0.0) as usize;
        let last = ((hi_hz / df).floor() as isize).min(self.bins() as isize - 1);
        if last < 0 || first as isize > last {
            None
        } else {
            Some((first, last as usize))
        }
    }
}

/// Complex STFT of every channel, stored channel-major then frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSpectrogram {
    data: Vec<Complex64>,
    channels: usize,
    frames: usize,
    bins: usize,
    sample_rate: f64,
    config: StftConfig,
}

impl MultichannelSpectrogram {
    pub(crate) fn from_parts(
        data: Vec<Complex64>,
        channels: usize,
        frames: usize,
        sample_rate: f64,
        config: StftConfig,
    ) -> Self {
        let bins = config.frame_size / 2 + 1;
        assert_eq!(data.len(), channels * frames * bins);
        Self {
            data,
            channels,
            frames,
            bins,
            sample_rate,
            config,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn grid(&self) -> BinGrid {
        BinGrid::new(self.sample_rate, self.config.frame_size)
    }

    /// `X^(channel)(bin, frame)`.
    pub fn get(&self, channel: usize, bin: usize, frame: usize) -> Complex64 {
        self.data[(channel * self.frames + frame) * self.bins + bin]
    }

    /// All bins of one frame of one channel.
    pub fn frame(&self, channel: usize, frame: usize) -> &[Complex64] {
        let start = (channel * self.frames + frame) * self.bins;
        &self.data[start..start + self.bins]
    }

    /// The array snapshot `x(bin, frame)` across channels.
    pub fn snapshot(&self, bin: usize, frame: usize) -> Vec<Complex64> {
        (0..self.channels).map(|m| self.get(m, bin, frame)).collect()
    }

    /// Parseval weight of a one-sided bin: `1/N` at DC and Nyquist, `2/N`
    /// elsewhere, so that `Σ_k weight·|X_k|²` equals the windowed frame energy.
    pub fn parseval_weight(&self, bin: usize) -> f64 {
        parseval_weight(self.config.frame_size, bin)
    }

    /// Factor converting summed windowed-frame energy into signal energy for
    /// a stationary input: `hop / Σ w²`.
    pub fn power_compensation(&self) -> f64 {
        let w = self.config.window.coefficients(self.config.frame_size);
        self.config.hop as f64 / w.iter().map(|x| x * x).sum::<f64>()
    }
}

pub fn parseval_weight(frame_size: usize, bin: usize) -> f64 {
    let edge = bin == 0 || (frame_size.is_multiple_of(2) && bin == frame_size / 2);
    if edge {
        1.0 / frame_size as f64
    } else {
        2.0 / frame_size as f64
    }
}

/// Windowed one-sided STFT of every channel. The trailing partial frame is
/// dropped.
pub fn analyze<S: AsRef<[f64]> + Sync>(
    signal: &[S],
    sample_rate: f64,
    config: &StftConfig,
    exec: Execution,
) -> Result<MultichannelSpectrogram> {
    config.validate()?;
    if !(sample_rate > 0.0) {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    let Some(first) = signal.first() else {
        return Err(Error::InvalidArgument("signal has no channels".into()));
    };
    let len = first.as_ref().len();
    if let Some(bad) = signal.iter().find(|c| c.as_ref().len() != len) {
        return Err(Error::InvalidArgument(format!(
            "channel length mismatch: {} vs {}",
            len,
            bad.as_ref().len()
        )));
    }
    if len < config.frame_size {
        return Err(Error::InsufficientSamples {
            needed: config.frame_size,
            got: len,
        });
    }
    let frames = config.frame_count(len);
    let window = config.window.coefficients(config.frame_size);
    let fft = RealFft::new(config.frame_size);
    let per_channel = exec.map_slice(signal, |channel| {
        let x = channel.as_ref();
        let mut out = Vec::with_capacity(frames * (config.frame_size / 2 + 1));
        let mut buf = vec![0.0; config.frame_size];
        for t in 0..frames {
            let start = t * config.hop;
            for ((b, s), w) in buf.iter_mut().zip(&x[start..]).zip(&window) {
                *b = s * w;
            }
            out.extend(fft.forward(&buf));
        }
        out
    });
    let channels = signal.len();
    Ok(MultichannelSpectrogram::from_parts(
        per_channel.into_iter().flatten().collect(),
        channels,
        frames,
        sample_rate,
        *config,
    ))
}
