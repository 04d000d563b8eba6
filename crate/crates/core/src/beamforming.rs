//! Delay-and-sum beamformers, their directional and spherically integrated
//! power gains, and beamformer output PSDs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, SolidAngle, Vec3};
use crate::quadrature::SphericalQuadrature;
use crate::stft::{BinGrid, MultichannelSpectrogram};
use crate::vad::VadMask;

/// Per-bin weight vectors `w(ω)`, one entry per microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerWeights {
    look: SolidAngle,
    omegas: Vec<f64>,
    weights: Vec<Vec<Complex64>>,
}

impl BeamformerWeights {
    pub fn look_direction(&self) -> SolidAngle {
        self.look
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn channels(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn omega(&self, bin: usize) -> f64 {
        self.omegas[bin]
    }

    pub fn at(&self, bin: usize) -> &[Complex64] {
        &self.weights[bin]
    }

    /// `w^H(ω) v` for a vector `v` over channels.
    pub fn response(&self, bin: usize, v: &[Complex64]) -> Complex64 {
        self.weights[bin].iter().zip(v).map(|(w, x)| w.conj() * x).sum()
    }
}

/// Phase-align-and-average weights `w(ω) = a_look(ω) / M` for every bin of
/// the grid.
pub fn das_weights(geom: &ArrayGeometry, look: SolidAngle, grid: &BinGrid) -> BeamformerWeights {
    let m = geom.channels() as f64;
    let d = look.unit_vector();
    let omegas = grid.omegas();
    let weights = omegas
        .iter()
        .map(|&omega| geom.steering_entries(&d, omega).into_iter().map(|a| a / m).collect())
        .collect();
    BeamformerWeights { look, omegas, weights }
}

/// `G(Ω, ω) = |w^H a_Ω|²`.
pub fn beam_gain(w: &BeamformerWeights, geom: &ArrayGeometry, dir: &SolidAngle, bin: usize) -> f64 {
    gain_for_vector(w, geom, &dir.unit_vector(), bin)
}

fn gain_for_vector(w: &BeamformerWeights, geom: &ArrayGeometry, d: &Vec3, bin: usize) -> f64 {
    let omega = w.omega(bin);
    let c = geom.speed_of_sound();
    w.at(bin)
        .iter()
        .zip(geom.positions())
        .map(|(wm, r)| {
            let phase = omega * (r[0] * d[0] + r[1] * d[1] + r[2] * d[2]) / c;
            wm.conj() * Complex64::cis(phase)
        })
        .sum::<Complex64>()
        .norm_sqr()
}

/// `∫ G(Ω, ω) dΩ` over the full sphere, by quadrature.
pub fn integrated_gain(w: &BeamformerWeights, geom: &ArrayGeometry, bin: usize, quad: &SphericalQuadrature) -> f64 {
    quad.integrate(|d| gain_for_vector(w, geom, d, bin))
}

/// `Y(ω, t) = w^H(ω) x(ω, t)` for every bin and frame; the result has one
/// channel.
pub fn apply_beamformer(spec: &MultichannelSpectrogram, w: &BeamformerWeights) -> Result<MultichannelSpectrogram> {
    if w.channels() != spec.channels() {
        return Err(Error::ChannelMismatch {
            expected: w.channels(),
            got: spec.channels(),
        });
    }
    if w.bins() != spec.bins() {
        return Err(Error::InvalidArgument(format!(
            "weights cover {} bins, spectrogram has {}",
            w.bins(),
            spec.bins()
        )));
    }
    let mut data = Vec::with_capacity(spec.frames() * spec.bins());
    for t in 0..spec.frames() {
        for k in 0..spec.bins() {
            let y = (0..spec.channels())
                .map(|m| w.at(k)[m].conj() * spec.get(m, k, t))
                .sum();
            data.push(y);
        }
    }
    Ok(MultichannelSpectrogram::from_parts(
        data,
        1,
        spec.frames(),
        spec.sample_rate(),
        *spec.config(),
    ))
}

/// Mean of `|Y(ω, t)|²` over the active frames, per bin, for one channel.
pub fn output_psd(spec: &MultichannelSpectrogram, channel: usize, mask: &VadMask) -> Result<Vec<f64>> {
    if mask.len() != spec.frames() {
        return Err(Error::InvalidArgument(format!(
            "mask has {} frames, spectrogram has {}",
            mask.len(),
            spec.frames()
        )));
    }
    if channel >= spec.channels() {
        return Err(Error::InvalidArgument(format!("channel {channel} out of range")));
    }
    if mask.active_count() == 0 {
        return Err(Error::NoActiveFrames);
    }
    let mut psd = vec![0.0; spec.bins()];
    for t in mask.active_frames() {
        for (p, y) in psd.iter_mut().zip(spec.frame(channel, t)) {
            *p += y.norm_sqr();
        }
    }
    let n = mask.active_count() as f64;
    psd.iter_mut().for_each(|p| *p /= n);
    Ok(psd)
}
