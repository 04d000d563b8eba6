use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
///
/// Variants are grouped so that front ends can map each class onto a
/// distinct exit status (see [`Error::class`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("channel mismatch: expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("sample rate mismatch: expected {expected} Hz, got {got} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },

    #[error("no active frames")]
    NoActiveFrames,

    #[error("too few frames for noise floor estimation: need {needed}, got {got}")]
    TooFewFrames { needed: usize, got: usize },

    #[error("VAD selected too few frames: {active} active, {required} required")]
    VadTooFewFrames { active: usize, required: usize },

    #[error("beamspace degenerate: {0}")]
    BeamspaceDegenerate(String),

    #[error("no reverberant energy estimated (DRR unbounded)")]
    NoReverberantEnergy,

    #[error("no usable frequency bins in band")]
    NoUsableBins,

    #[error("calibration requires at least one (estimate, truth) pair")]
    EmptyCalibration,

    #[error("empty manifest")]
    EmptyManifest,

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error classes, stable across releases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    ChannelMismatch,
    SampleRateMismatch,
    Vad,
    Degenerate,
    Undefined,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::EmptyCalibration | Error::EmptyManifest | Error::Config { .. } => {
                ErrorClass::Usage
            }
            Error::Io(_) | Error::Wav(_) | Error::Csv(_) | Error::UnsupportedFormat(_) => ErrorClass::Io,
            Error::InsufficientSamples { .. } => ErrorClass::Io,
            Error::ChannelMismatch { .. } => ErrorClass::ChannelMismatch,
            Error::SampleRateMismatch { .. } => ErrorClass::SampleRateMismatch,
            Error::NoActiveFrames | Error::TooFewFrames { .. } | Error::VadTooFewFrames { .. } => ErrorClass::Vad,
            Error::BeamspaceDegenerate(_) => ErrorClass::Degenerate,
            Error::NoReverberantEnergy | Error::NoUsableBins => ErrorClass::Undefined,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
