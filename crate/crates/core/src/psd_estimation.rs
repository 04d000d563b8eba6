//! Direct and reverberant PSD estimation in beamspace.
//!
//! Two beamformers observe the same field. Under the plane-wave model with
//! an uncorrelated, isotropic reverberant part, each output PSD is
//!
//! ```text
//! P_l(ω) = G_l(Ω_D, ω) · P_D(ω) + [∫ G_l(Ω, ω) dΩ] · P̄_R(ω)
//! ```
//!
//! so stacking the two outputs gives a 2×2 linear system per bin whose
//! unknowns are the direct PSD at the reference point and the reverberant
//! PSD per steradian. [`solve_psd`] inverts it bin by bin. The older
//! identical-beampattern estimator ([`identical_beampattern_psd`]) is the
//! special case where both beams have the same integrated gain.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::beamforming::{beam_gain, integrated_gain, BeamformerWeights};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{ArrayGeometry, SolidAngle};
use crate::quadrature::SphericalQuadrature;

pub const DEFAULT_COND_THRESHOLD: f64 = 1e3;

/// Which estimator produced a [`PsdPair`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Beamspace,
    IdenticalBeampattern,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Beamspace => "beamspace",
            Method::IdenticalBeampattern => "identical-beampattern",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beamspace" => Ok(Method::Beamspace),
            "identical-beampattern" => Ok(Method::IdenticalBeampattern),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

pub type Matrix2 = [[f64; 2]; 2];

/// 2-norm condition number of a 2×2 matrix (`∞` when singular).
pub fn condition_number(m: &Matrix2) -> f64 {
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs();
    if det == 0.0 {
        return f64::INFINITY;
    }
    let fro2 = m.iter().flatten().map(|x| x * x).sum::<f64>();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let smax2 = 0.5 * (fro2 + disc);
    smax2 / det
}

/// Per-bin beamspace gain matrices.
///
/// Row `l` is `[G_l(Ω_D, ω), ∫ G_l(Ω, ω) dΩ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub entries: Vec<Matrix2>,
    pub condition: Vec<f64>,
}

impl GainMatrix {
    pub fn from_entries(entries: Vec<Matrix2>) -> Self {
        let condition = entries.iter().map(condition_number).collect();
        Self { entries, condition }
    }

    pub fn bins(&self) -> usize {
        self.entries.len()
    }
}

pub fn build_gain_matrix(
    w1: &BeamformerWeights,
    w2: &BeamformerWeights,
    source: &SolidAngle,
    geom: &ArrayGeometry,
    quad: &SphericalQuadrature,
    exec: Execution,
) -> Result<GainMatrix> {
    if w1.bins() != w2.bins() || w1.channels() != w2.channels() {
        return Err(Error::InvalidArgument(
            "beamformers must share bins and channel count".into(),
        ));
    }
    if w1.channels() != geom.channels() {
        return Err(Error::ChannelMismatch {
            expected: geom.channels(),
            got: w1.channels(),
        });
    }
    let entries = exec.map(w1.bins(), |k| {
        [
            [beam_gain(w1, geom, source, k), integrated_gain(w1, geom, k, quad)],
            [beam_gain(w2, geom, source, k), integrated_gain(w2, geom, k, quad)],
        ]
    });
    Ok(GainMatrix::from_entries(entries))
}

/// Interventions applied to one bin.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinStatus {
    /// A negative component of the raw solution was set to zero.
    pub clamped: bool,
    /// The system was too close to singular; the bin is excluded downstream.
    pub ill_conditioned: bool,
}

impl BinStatus {
    pub fn is_ok(&self) -> bool {
        !self.clamped && !self.ill_conditioned
    }

    pub fn is_usable(&self) -> bool {
        !self.ill_conditioned
    }
}

/// Estimated direct PSD at the reference point and reverberant PSD per
/// steradian, with the unclamped solution kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdPair {
    pub direct: Vec<f64>,
    pub reverb: Vec<f64>,
    pub raw_direct: Vec<f64>,
    pub raw_reverb: Vec<f64>,
    pub status: Vec<BinStatus>,
    pub method: Method,
}

impl PsdPair {
    /// Wraps already-clean estimates (every bin ok).
    pub fn from_estimates(direct: Vec<f64>, reverb: Vec<f64>, method: Method) -> Self {
        assert_eq!(direct.len(), reverb.len());
        Self {
            status: vec![BinStatus::default(); direct.len()],
            raw_direct: direct.clone(),
            raw_reverb: reverb.clone(),
            direct,
            reverb,
            method,
        }
    }

    pub fn bins(&self) -> usize {
        self.direct.len()
    }

    fn push(&mut self, raw: Option<(f64, f64)>) {
        match raw {
            None => {
                self.raw_direct.push(f64::NAN);
                self.raw_reverb.push(f64::NAN);
                self.direct.push(0.0);
                self.reverb.push(0.0);
                self.status.push(BinStatus {
                    clamped: false,
                    ill_conditioned: true,
                });
            }
            Some((d, r)) => {
                self.raw_direct.push(d);
                self.raw_reverb.push(r);
                self.direct.push(d.max(0.0));
                self.reverb.push(r.max(0.0));
                self.status.push(BinStatus {
                    clamped: d < 0.0 || r < 0.0,
                    ill_conditioned: false,
                });
            }
        }
    }

    fn empty(method: Method, bins: usize) -> Self {
        Self {
            direct: Vec::with_capacity(bins),
            reverb: Vec::with_capacity(bins),
            raw_direct: Vec::with_capacity(bins),
            raw_reverb: Vec::with_capacity(bins),
            status: Vec::with_capacity(bins),
            method,
        }
    }

    fn check_not_degenerate(self) -> Result<Self> {
        if self.status.iter().all(|s| s.ill_conditioned) {
            return Err(Error::BeamspaceDegenerate(
                "every frequency bin is ill-conditioned".into(),
            ));
        }
        Ok(self)
    }
}

fn solve2(m: &Matrix2, p: [f64; 2]) -> (f64, f64) {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    (
        (m[1][1] * p[0] - m[0][1] * p[1]) / det,
        (m[0][0] * p[1] - m[1][0] * p[0]) / det,
    )
}

/// Solves `G(ω) · [P_D, P̄_R]ᵀ = [P_1, P_2]ᵀ` at every bin.
///
/// Bins whose condition number exceeds `cond_threshold` are flagged
/// ill-conditioned; negative components are clamped to zero and flagged.
pub fn solve_psd(beam_psds: &[[f64; 2]], gains: &GainMatrix, cond_threshold: f64) -> Result<PsdPair> {
    if beam_psds.len() != gains.bins() {
        return Err(Error::InvalidArgument(format!(
            "{} PSD bins but {} gain matrices",
            beam_psds.len(),
            gains.bins()
        )));
    }
    if beam_psds.iter().flatten().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidArgument("beamformer PSDs must be nonnegative".into()));
    }
    let mut out = PsdPair::empty(Method::Beamspace, beam_psds.len());
    for ((p, m), &cond) in beam_psds.iter().zip(&gains.entries).zip(&gains.condition) {
        let well_posed = cond.is_finite() && cond <= cond_threshold;
        out.push(well_posed.then(|| solve2(m, *p)));
    }
    out.check_not_degenerate()
}

/// Identical-beampattern estimator: `P_D = (P_1 − P_2) / (g_1 − g_2)` and
/// `P_R = P_X − P_D`, where `P_X` is a microphone PSD and `g_l` the gains
/// toward the source. The total reverberant power is returned per steradian
/// (divided by 4π) so both estimators share one output convention.
///
/// Bins with `|g_1 − g_2| ≤ 1 / cond_threshold` are flagged ill-conditioned.
pub fn identical_beampattern_psd(
    p1: &[f64],
    p2: &[f64],
    g1: &[f64],
    g2: &[f64],
    mic_psd: &[f64],
    cond_threshold: f64,
) -> Result<PsdPair> {
    let n = p1.len();
    if [p2.len(), g1.len(), g2.len(), mic_psd.len()].iter().any(|&l| l != n) {
        return Err(Error::InvalidArgument("per-bin inputs differ in length".into()));
    }
    let min_gap = 1.0 / cond_threshold;
    let mut out = PsdPair::empty(Method::IdenticalBeampattern, n);
    for k in 0..n {
        let gap = g1[k] - g2[k];
        let well_posed = gap.is_finite() && gap.abs() > min_gap;
        out.push(well_posed.then(|| {
            let direct = (p1[k] - p2[k]) / gap;
            (direct, (mic_psd[k] - direct) / (4.0 * PI))
        }));
    }
    out.check_not_degenerate()
}
