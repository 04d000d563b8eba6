//! Source direction by steered-response-power grid search.

use std::f64::consts::{PI, TAU};
use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{ArrayGeometry, SolidAngle};
use crate::stft::MultichannelSpectrogram;
use crate::vad::VadMask;

pub const DEFAULT_AZIMUTH_STEP: f64 = PI / 72.0;
pub const DEFAULT_ZENITH_STEP: f64 = PI / 60.0;

// Relative slack under which two SRP values count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Search grid over azimuth `[0, 2π)` and zenith `[0, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaGrid {
    pub azimuth_step: f64,
    pub zenith_step: f64,
}

impl Default for DoaGrid {
    fn default() -> Self {
        Self {
            azimuth_step: DEFAULT_AZIMUTH_STEP,
            zenith_step: DEFAULT_ZENITH_STEP,
        }
    }
}

impl DoaGrid {
    pub fn new(azimuth_step: f64, zenith_step: f64) -> Result<Self> {
        let grid = Self {
            azimuth_step,
            zenith_step,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64, max: f64| s.is_finite() && s > 0.0 && s <= max;
        if !ok(self.azimuth_step, TAU) || !ok(self.zenith_step, PI) {
            return Err(Error::InvalidArgument(format!(
                "grid steps must lie in (0, 2π] / (0, π], got {} / {}",
                self.azimuth_step, self.zenith_step
            )));
        }
        Ok(())
    }

    pub fn azimuths(&self) -> Vec<f64> {
        let n = (TAU / self.azimuth_step - 1e-9).ceil().max(1.0) as usize;
        (0..n).map(|i| i as f64 * self.azimuth_step).collect()
    }

    pub fn zeniths(&self) -> Vec<f64> {
        let n = (PI / self.zenith_step + 1e-9).floor() as usize;
        (0..=n).map(|i| (i as f64 * self.zenith_step).min(PI)).collect()
    }

    /// Every grid point, zenith-major, so index order is the tie-break order.
    pub fn points(&self) -> Vec<SolidAngle> {
        let az = self.azimuths();
        self.zeniths()
            .into_iter()
            .flat_map(|z| az.iter().map(move |&a| SolidAngle::new(a, z).expect("grid point")))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.azimuths().len() * self.zeniths().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate {
    pub direction: SolidAngle,
    pub power: f64,
    /// False when the response surface is flat and the pick is the tie-break.
    pub informative: bool,
}

/// Per-bin spatial covariance over the active frames, row-major `M×M`.
fn covariances(spec: &MultichannelSpectrogram, mask: &VadMask, band: &RangeInclusive<usize>) -> Vec<Vec<Complex64>> {
    let m = spec.channels();
    let n = mask.active_count() as f64;
    band.clone()
        .map(|k| {
            let mut r = vec![Complex64::new(0.0, 0.0); m * m];
            for t in mask.active_frames() {
                let x = spec.snapshot(k, t);
                for i in 0..m {
                    for j in 0..m {
                        r[i * m + j] += x[i] * x[j].conj();
                    }
                }
            }
            r.iter_mut().for_each(|v| *v /= n);
            r
        })
        .collect()
}

fn check_inputs(
    spec: &MultichannelSpectrogram,
    geom: &ArrayGeometry,
    grid: &DoaGrid,
    mask: &VadMask,
    band: &RangeInclusive<usize>,
) -> Result<()> {
    grid.validate()?;
    if spec.channels() != geom.channels() {
        return Err(Error::ChannelMismatch {
            expected: geom.channels(),
            got: spec.channels(),
        });
    }
    if mask.len() != spec.frames() {
        return Err(Error::InvalidArgument(format!(
            "mask has {} frames, spectrogram has {}",
            mask.len(),
            spec.frames()
        )));
    }
    if mask.active_count() == 0 {
        return Err(Error::NoActiveFrames);
    }
    if band.is_empty() || *band.end() >= spec.bins() {
        return Err(Error::InvalidArgument(format!(
            "band {}..={} empty or outside 0..{}",
            band.start(),
            band.end(),
            spec.bins()
        )));
    }
    Ok(())
}

/// SRP of a delay-and-sum beamformer at every grid point, in
/// [`DoaGrid::points`] order.
pub fn srp_map(
    spec: &MultichannelSpectrogram,
    geom: &ArrayGeometry,
    grid: &DoaGrid,
    mask: &VadMask,
    band: RangeInclusive<usize>,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_inputs(spec, geom, grid, mask, &band)?;
    let m = geom.channels();
    let cov = covariances(spec, mask, &band);
    let omegas: Vec<f64> = band.clone().map(|k| spec.grid().omega(k)).collect();
    let points = grid.points();
    let scale = 1.0 / (m * m) as f64;
    Ok(exec.map_slice(&points, |dir| {
        let d = dir.unit_vector();
        let mut total = 0.0;
        for (r, &omega) in cov.iter().zip(&omegas) {
            let a = geom.steering_entries(&d, omega);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..m {
                let mut row = Complex64::new(0.0, 0.0);
                for j in 0..m {
                    row += r[i * m + j] * a[j];
                }
                acc += a[i].conj() * row;
            }
            total += acc.re * scale;
        }
        total
    }))
}

/// Grid point maximising the broadband SRP; ties go to the smallest zenith,
/// then the smallest azimuth.
pub fn estimate_doa(
    spec: &MultichannelSpectrogram,
    geom: &ArrayGeometry,
    grid: &DoaGrid,
    mask: &VadMask,
    band: RangeInclusive<usize>,
    exec: Execution,
) -> Result<DoaEstimate> {
    let map = srp_map(spec, geom, grid, mask, band, exec)?;
    let points = grid.points();
    let peak = map.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = map.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = TIE_TOLERANCE * peak.abs().max(f64::MIN_POSITIVE);
    let best = map.iter().position(|&v| v >= peak - slack).expect("grid is non-empty");
    Ok(DoaEstimate {
        direction: points[best],
        power: map[best],
        informative: peak - floor > slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::{analyze, StftConfig};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn default_grid_shape() {
        let g = DoaGrid::default();
        assert_eq!(g.azimuths().len(), 144);
        assert_eq!(g.zeniths().len(), 61);
        assert_eq!(*g.zeniths().last().unwrap(), PI);
        assert!(g.azimuths().last().unwrap() < &TAU);
        assert_eq!(g.points().len(), g.len());
        assert!(DoaGrid::new(0.0, 0.1).is_err());
        assert!(DoaGrid::new(0.1, f64::NAN).is_err());
    }

    #[test]
    fn uneven_step_has_no_wraparound_duplicate() {
        let g = DoaGrid::new(1.0, 1.0).unwrap();
        assert_eq!(g.azimuths(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(g.zeniths(), vec![0.0, 1.0, 2.0, 3.0]);
    }

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn single_microphone_is_non_informative() {
        let geom = ArrayGeometry::new(vec![[0.0; 3]], 343.0).unwrap();
        let spec = analyze(
            &[noise(8192, 1)],
            16_000.0,
            &StftConfig::default(),
            Execution::Sequential,
        )
        .unwrap();
        let mask = VadMask::all(spec.frames());
        let est = estimate_doa(&spec, &geom, &DoaGrid::default(), &mask, 10..=176, Execution::default()).unwrap();
        assert!(!est.informative);
        assert_eq!((est.direction.azimuth(), est.direction.zenith()), (0.0, 0.0));
    }

    #[test]
    fn errors() {
        let geom = ArrayGeometry::default_triangle();
        let x: Vec<Vec<f64>> = (0..3).map(|s| noise(4096, s)).collect();
        let spec = analyze(&x, 16_000.0, &StftConfig::default(), Execution::Sequential).unwrap();
        let grid = DoaGrid::default();
        let none = VadMask::from_flags(vec![false; spec.frames()]);
        let all = VadMask::all(spec.frames());
        assert!(matches!(
            estimate_doa(&spec, &geom, &grid, &none, 10..=20, Execution::Sequential),
            Err(Error::NoActiveFrames)
        ));
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 20..=10;
        assert!(estimate_doa(&spec, &geom, &grid, &all, empty, Execution::Sequential).is_err());
        assert!(estimate_doa(&spec, &geom, &grid, &all, 10..=400, Execution::Sequential).is_err());
        let two = ArrayGeometry::new(vec![[0.0; 3], [0.1, 0.0, 0.0]], 343.0).unwrap();
        assert!(matches!(
            estimate_doa(&spec, &two, &grid, &all, 10..=20, Execution::Sequential),
            Err(Error::ChannelMismatch { .. })
        ));
    }
}
