//! Blind direct-to-reverberant ratio estimation from a small microphone array,
//! by solving for direct and reverberant PSDs from two fixed beams.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod doa;
pub mod drr;
pub mod error;
pub mod eval;
pub mod exec;
mod fft;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod psd_estimation;
pub mod quadrature;
pub mod stft;
pub mod synth;
pub mod vad;
