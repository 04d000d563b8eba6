//! Synthetic scenes with a known DRR: one plane wave plus an isotropic
//! diffuse field, optionally with independent white sensor noise.
//!
//! The diffuse field is a sum of plane waves from a golden-spiral point set,
//! each carrying an independent realisation of the source process with equal
//! energy. All delays are applied as phase shifts on a single FFT of the
//! whole signal, so they are exact fractional (circular) delays.
//!
//! Random streams are derived from the seed by position: stream 0 drives the
//! source, stream `k + 1` the `k`-th diffuse direction and streams from
//! [`NOISE_STREAM_BASE`] the sensor noise. Output is therefore identical
//! under sequential and parallel execution.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fft::RealFft;
use crate::geometry::{ArrayGeometry, SolidAngle, Vec3};
use crate::quadrature::SphericalQuadrature;
use crate::stft::{StftConfig, DEFAULT_SAMPLE_RATE};

pub const DEFAULT_DIFFUSE_DIRECTIONS: usize = 256;
pub const MIN_DIFFUSE_DIRECTIONS: usize = 32;
pub const NOISE_STREAM_BASE: u64 = 1 << 32;

/// Corner frequency of the first-order spectral tilt of the speech-shaped
/// source, `|H(f)|² = 1 / (1 + (f / f_c)²)`.
pub const SPEECH_TILT_HZ: f64 = 500.0;
/// Burst period, on-fraction, leading silence and cosine ramp length.
pub const BURST_PERIOD_S: f64 = 1.0;
pub const BURST_DUTY: f64 = 0.5;
pub const BURST_OFFSET_S: f64 = 0.25;
pub const BURST_RAMP_S: f64 = 0.02;

const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    WhiteNoise,
    /// Tilted noise gated by a periodic on/off envelope.
    SpeechShapedBursts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    #[default]
    None,
    White {
        snr_db: f64,
    },
}

fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}

fn default_directions() -> usize {
    DEFAULT_DIFFUSE_DIRECTIONS
}

/// Everything needed to regenerate a scene bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub direction: SolidAngle,
    /// `inf` for no diffuse field, `-inf` for diffuse only.
    pub target_drr_db: f64,
    pub duration_s: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default)]
    pub source: SourceKind,
    #[serde(default = "default_directions")]
    pub diffuse_directions: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(direction: SolidAngle, target_drr_db: f64, duration_s: f64, seed: u64) -> Self {
        Self {
            direction,
            target_drr_db,
            duration_s,
            sample_rate: DEFAULT_SAMPLE_RATE,
            source: SourceKind::default(),
            diffuse_directions: DEFAULT_DIFFUSE_DIRECTIONS,
            noise: NoiseSpec::None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        SolidAngle::new(self.direction.azimuth(), self.direction.zenith())?;
        if self.target_drr_db.is_nan() {
            return Err(Error::InvalidArgument("target DRR is NaN".into()));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::InvalidArgument("duration must be positive".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if self.samples() == 0 {
            return Err(Error::InvalidArgument("scene has no samples".into()));
        }
        if self.diffuse_directions < MIN_DIFFUSE_DIRECTIONS {
            return Err(Error::InvalidArgument(format!(
                "at least {MIN_DIFFUSE_DIRECTIONS} diffuse directions required"
            )));
        }
        if let NoiseSpec::White { snr_db } = self.noise {
            if !snr_db.is_finite() {
                return Err(Error::InvalidArgument("noise SNR must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }
}

/// Energy bookkeeping at the reference point (array centroid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub measured_drr_db: f64,
    pub target_drr_db: f64,
    pub direct_energy: f64,
    pub diffuse_energy: f64,
    pub direction: SolidAngle,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub truth: GroundTruth,
    /// Per-sample source activity.
    pub activity: Vec<bool>,
}

impl Scene {
    /// A frame is labelled active when at least half its samples are.
    pub fn frame_labels(&self, config: &StftConfig) -> Vec<bool> {
        let frames = config.frame_count(self.activity.len());
        (0..frames)
            .map(|t| {
                let s = &self.activity[t * config.hop..t * config.hop + config.frame_size];
                2 * s.iter().filter(|&&a| a).count() >= s.len()
            })
            .collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Gain of the burst envelope at sample `n`.
pub fn burst_envelope(n: usize, sample_rate: f64) -> f64 {
    let t = n as f64 / sample_rate - BURST_OFFSET_S;
    if t < 0.0 {
        return 0.0;
    }
    let p = t % BURST_PERIOD_S;
    let on = BURST_DUTY * BURST_PERIOD_S;
    if p >= on {
        return 0.0;
    }
    let edge = p.min(on - p);
    if edge >= BURST_RAMP_S {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge / BURST_RAMP_S).cos()
    }
}

/// One realisation of the source process, returned as its one-sided
/// spectrum together with its time-domain energy.
fn realise(
    kind: SourceKind,
    rng: &mut ChaCha8Rng,
    fft: &RealFft,
    envelope: &[f64],
    sample_rate: f64,
) -> (Vec<Complex64>, f64) {
    let n = fft.len();
    let x = gaussian(rng, n);
    match kind {
        SourceKind::WhiteNoise => {
            let e = x.iter().map(|v| v * v).sum();
            (fft.forward(&x), e)
        }
        SourceKind::SpeechShapedBursts => {
            let mut spec = fft.forward(&x);
            for (k, z) in spec.iter_mut().enumerate() {
                let f = k as f64 * sample_rate / n as f64;
                *z /= (1.0 + (f / SPEECH_TILT_HZ).powi(2)).sqrt();
            }
            let shaped: Vec<f64> = fft.inverse(&spec).iter().zip(envelope).map(|(v, g)| v * g).collect();
            let e = shaped.iter().map(|v| v * v).sum();
            (fft.forward(&shaped), e)
        }
    }
}

/// Applies per-microphone delays for direction `d` and adds `gain · X · a_m`
/// into `acc[m]`.
fn accumulate_delayed(
    acc: &mut [Vec<Complex64>],
    x: &[Complex64],
    gain: f64,
    geom: &ArrayGeometry,
    d: &Vec3,
    sample_rate: f64,
    len: usize,
) {
    let bin_omega = TAU * sample_rate / len as f64;
    for (m, tau) in geom.delays_for_vector(d).into_iter().enumerate() {
        // a_m(ω_k) = exp(−j ω_k τ) advanced by a per-bin rotation, re-anchored
        // periodically to keep rounding error negligible.
        let step = Complex64::cis(-bin_omega * tau);
        let mut rot = Complex64::new(gain, 0.0);
        for (k, (out, z)) in acc[m].iter_mut().zip(x).enumerate() {
            if k % 1024 == 0 {
                rot = Complex64::from_polar(gain, -bin_omega * tau * k as f64);
            }
            *out += z * rot;
            rot *= step;
        }
    }
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

struct SourceSignal {
    spectrum: Vec<Complex64>,
    energy: f64,
    envelope: Vec<f64>,
    /// Diffuse copies are fresh realisations of the generated process when
    /// true; phase-randomised copies of the given spectrum otherwise.
    generated: Option<SourceKind>,
}

/// Generates a scene from the source process described by `spec`.
pub fn synthesize_scene(spec: &SceneSpec, geom: &ArrayGeometry, exec: Execution) -> Result<Scene> {
    spec.validate()?;
    let n = spec.samples();
    let fs = spec.sample_rate as f64;
    let fft = RealFft::new(n);
    let envelope: Vec<f64> = match spec.source {
        SourceKind::WhiteNoise => vec![1.0; n],
        SourceKind::SpeechShapedBursts => (0..n).map(|i| burst_envelope(i, fs)).collect(),
    };
    let (spectrum, energy) = realise(spec.source, &mut stream(spec.seed, 0), &fft, &envelope, fs);
    let source = SourceSignal {
        spectrum,
        energy,
        envelope,
        generated: Some(spec.source),
    };
    render(spec, geom, &fft, source, exec)
}

/// Like [`synthesize_scene`] with a caller-supplied source signal; the
/// scene length follows the signal and `spec.duration_s` is ignored. Every
/// sample is labelled active. Diffuse copies keep the source magnitude
/// spectrum with independent random phases.
pub fn synthesize_with_source(
    spec: &SceneSpec,
    geom: &ArrayGeometry,
    source: &[f64],
    exec: Execution,
) -> Result<Scene> {
    let e = energy(source);
    if source.is_empty() || !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidArgument("source signal is empty or silent".into()));
    }
    let mut spec = spec.clone();
    spec.duration_s = source.len() as f64 / spec.sample_rate.max(1) as f64;
    spec.validate()?;
    let fft = RealFft::new(source.len());
    let src = SourceSignal {
        spectrum: fft.forward(source),
        energy: e,
        envelope: vec![1.0; source.len()],
        generated: None,
    };
    render(&spec, geom, &fft, src, exec)
}

fn render(
    spec: &SceneSpec,
    geom: &ArrayGeometry,
    fft: &RealFft,
    source: SourceSignal,
    exec: Execution,
) -> Result<Scene> {
    let n = fft.len();
    let fs = spec.sample_rate as f64;
    let m = geom.channels();
    let bins = n / 2 + 1;
    let zero = || vec![vec![Complex64::new(0.0, 0.0); bins]; m + 1];

    let with_direct = spec.target_drr_db != f64::NEG_INFINITY;
    let with_diffuse = spec.target_drr_db != f64::INFINITY;

    // direct path: channel m is the reference point, which sees the source
    // itself
    let mut direct = vec![vec![0.0; n]; m + 1];
    if with_direct {
        let mut acc = zero();
        accumulate_delayed(
            &mut acc[..m],
            &source.spectrum,
            1.0,
            geom,
            &spec.direction.unit_vector(),
            fs,
            n,
        );
        for (out, spec_m) in direct.iter_mut().zip(&acc[..m]) {
            *out = fft.inverse(spec_m);
        }
        direct[m] = fft.inverse(&source.spectrum);
    }

    let mut diffuse = vec![vec![0.0; n]; m + 1];
    if with_diffuse {
        let points = SphericalQuadrature::fibonacci(spec.diffuse_directions)?;
        let dirs = points.unit_vectors();
        let chunks = dirs.len().div_ceil(CHUNK);
        let partials = exec.map(chunks, |c| {
            let mut acc = zero();
            for (k, dir) in dirs.iter().enumerate().skip(c * CHUNK).take(CHUNK) {
                let mut rng = stream(spec.seed, k as u64 + 1);
                let (x, e) = match source.generated {
                    Some(kind) => realise(kind, &mut rng, fft, &source.envelope, fs),
                    None => (random_phase(&source.spectrum, &mut rng), source.energy),
                };
                // equal realised energy per direction
                let gain = (source.energy / e).sqrt();
                accumulate_delayed(&mut acc[..m], &x, gain, geom, dir, fs, n);
                for (out, z) in acc[m].iter_mut().zip(&x) {
                    *out += z * gain;
                }
            }
            acc
        });
        let mut total = zero();
        for part in partials {
            for (t, p) in total.iter_mut().zip(part) {
                t.iter_mut().zip(p).for_each(|(a, b)| *a += b);
            }
        }
        let rendered = exec.map_slice(&total, |s| fft.inverse(s));
        diffuse = rendered;
    }

    let e_direct = energy(&direct[m]);
    let e_diffuse_raw = energy(&diffuse[m]);
    let diffuse_gain = match (with_direct, with_diffuse) {
        (_, false) => 0.0,
        (false, true) => (source.energy / e_diffuse_raw).sqrt(),
        (true, true) => (e_direct / (10f64.powf(spec.target_drr_db / 10.0) * e_diffuse_raw)).sqrt(),
    };
    if with_diffuse && !diffuse_gain.is_finite() {
        return Err(Error::InvalidArgument("diffuse field has no energy".into()));
    }

    let mut channels: Vec<Vec<f64>> = (0..m)
        .map(|c| {
            direct[c]
                .iter()
                .zip(&diffuse[c])
                .map(|(d, r)| d + diffuse_gain * r)
                .collect()
        })
        .collect();
    let e_diffuse = energy(&diffuse[m]) * diffuse_gain * diffuse_gain;
    let measured_drr_db = if !with_diffuse {
        f64::INFINITY
    } else if !with_direct {
        f64::NEG_INFINITY
    } else {
        10.0 * (e_direct / e_diffuse).log10()
    };

    if let NoiseSpec::White { snr_db } = spec.noise {
        let clean = channels.iter().map(|c| energy(c)).sum::<f64>() / (m * n) as f64;
        let sigma = (clean / 10f64.powf(snr_db / 10.0)).sqrt();
        for (c, ch) in channels.iter_mut().enumerate() {
            let mut rng = stream(spec.seed, NOISE_STREAM_BASE + c as u64);
            for v in ch.iter_mut() {
                *v += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    Ok(Scene {
        channels,
        sample_rate: spec.sample_rate,
        truth: GroundTruth {
            measured_drr_db,
            target_drr_db: spec.target_drr_db,
            direct_energy: e_direct,
            diffuse_energy: if with_diffuse { e_diffuse } else { 0.0 },
            direction: spec.direction,
            seed: spec.seed,
        },
        activity: source.envelope.iter().map(|&g| g >= 0.5).collect(),
    })
}

fn random_phase(x: &[Complex64], rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    x.iter()
        .map(|z| z.norm() * Complex64::cis(rng.random::<f64>() * TAU))
        .collect()
}
