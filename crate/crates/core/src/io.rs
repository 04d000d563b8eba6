//! WAV files, TOML configuration files and angle strings.

use std::f64::consts::PI;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Vec3, DEFAULT_SPEED_OF_SOUND};
use crate::synth::{GroundTruth, SceneSpec};

/// Deinterleaved audio in `[-1, 1]` full scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

pub fn read_wav(path: &Path) -> Result<Audio> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let m = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (format, bits) => {
            return Err(Error::UnsupportedFormat(format!("{format:?} {bits}-bit")));
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / m.max(1)); m];
    for frame in interleaved.chunks_exact(m) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    Ok(Audio {
        channels,
        sample_rate: spec.sample_rate,
    })
}

/// Writes 32-bit float samples.
pub fn write_wav(path: &Path, channels: &[Vec<f64>], sample_rate: u32) -> Result<()> {
    let len = channels.first().map_or(0, Vec::len);
    if channels.is_empty() || channels.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidArgument(
            "channels must be non-empty and of equal length".into(),
        ));
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for i in 0..len {
        for c in channels {
            writer.write_sample(c[i] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_toml(&text, path)
}

pub(crate) fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config {
        path: "<serialise>".into(),
        message: e.to_string(),
    })
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

/// On-disk array description: microphone positions in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
    pub positions: Vec<Vec3>,
}

impl GeometryFile {
    pub fn from_geometry(geom: &ArrayGeometry) -> Self {
        Self {
            speed_of_sound: geom.speed_of_sound(),
            positions: geom.positions().to_vec(),
        }
    }

    pub fn build(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::new(self.positions.clone(), self.speed_of_sound)
    }
}

/// `triangle` (or `default`) names the bundled 3-mic array; anything else is
/// read as a geometry TOML file.
pub fn resolve_geometry(arg: &str) -> Result<ArrayGeometry> {
    match arg {
        "triangle" | "default" => Ok(ArrayGeometry::default_triangle()),
        path => load_toml::<GeometryFile>(Path::new(path))?.build(),
    }
}

/// Parses `"0.5"`, `"0.5rad"`, `"45deg"` or `"45°"` into radians.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    let (num, scale) = if let Some(v) = t.strip_suffix("deg").or_else(|| t.strip_suffix('°')) {
        (v, PI / 180.0)
    } else if let Some(v) = t.strip_suffix("rad") {
        (v, 1.0)
    } else {
        (t, 1.0)
    };
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("cannot parse angle '{s}'")))?;
    if !value.is_finite() {
        return Err(Error::InvalidArgument(format!("angle '{s}' is not finite")));
    }
    Ok(value * scale)
}

/// Ground truth written next to a synthesised WAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub wav: String,
    pub truth: GroundTruth,
    pub scene: SceneSpec,
    pub geometry: GeometryFile,
    /// Source-active intervals in seconds, `[start, end)`.
    pub active_segments: Vec<[f64; 2]>,
}

pub fn active_segments(activity: &[bool], sample_rate: u32) -> Vec<[f64; 2]> {
    let fs = sample_rate as f64;
    let mut out = Vec::new();
    let mut start = None;
    for (i, &a) in activity.iter().chain(std::iter::once(&false)).enumerate() {
        match (a, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push([s as f64 / fs, i as f64 / fs]);
                start = None;
            }
            _ => {}
        }
    }
    out
}
