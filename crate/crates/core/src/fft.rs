//! Thin real-signal wrappers over rustfft.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse plans for one transform length.
pub(crate) struct RealFft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl RealFft {
    pub(crate) fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// One-sided spectrum (`len / 2 + 1` bins), unnormalised.
    pub(crate) fn forward(&self, input: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(input.len(), self.len);
        let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf.truncate(self.len / 2 + 1);
        buf
    }

    /// Inverse of [`RealFft::forward`], including the `1 / len` factor.
    /// The imaginary parts of the DC and Nyquist bins are ignored.
    pub(crate) fn inverse(&self, half: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(half.len(), self.len / 2 + 1);
        let n = self.len;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..half.len()].copy_from_slice(half);
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        for k in 1..n.div_ceil(2) {
            buf[n - k] = half[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.into_iter().map(|z| z.re * scale).collect()
    }
}
