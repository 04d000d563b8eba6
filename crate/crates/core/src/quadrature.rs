//! Integration over the unit sphere.
//!
//! The product rule pairs Gauss-Legendre nodes in `cos φ` with a uniform
//! azimuth grid. For an integrand that is a trigonometric polynomial in θ of
//! degree below the azimuth node count and a polynomial in `cos φ` of degree
//! below twice the zenith node count, the rule is exact.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::{SolidAngle, Vec3};

pub const DEFAULT_ZENITH_NODES: usize = 24;
pub const DEFAULT_AZIMUTH_NODES: usize = 48;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Weighted point set on the sphere; weights sum to 4π.
#[derive(Debug, Clone)]
pub struct SphericalQuadrature {
    directions: Vec<SolidAngle>,
    unit_vectors: Vec<Vec3>,
    weights: Vec<f64>,
}

impl SphericalQuadrature {
    /// Gauss-Legendre in `cos φ` times a uniform azimuth grid starting at 0.
    pub fn product(zenith_nodes: usize, azimuth_nodes: usize) -> Result<Self> {
        if zenith_nodes == 0 || azimuth_nodes == 0 {
            return Err(Error::InvalidArgument("quadrature node counts must be positive".into()));
        }
        let (u, wu) = gauss_legendre(zenith_nodes);
        let dtheta = TAU / azimuth_nodes as f64;
        let mut directions = Vec::with_capacity(zenith_nodes * azimuth_nodes);
        let mut weights = Vec::with_capacity(zenith_nodes * azimuth_nodes);
        for (&ui, &wi) in u.iter().zip(&wu) {
            let zenith = ui.clamp(-1.0, 1.0).acos();
            for j in 0..azimuth_nodes {
                directions.push(SolidAngle::new(j as f64 * dtheta, zenith)?);
                weights.push(wi * dtheta);
            }
        }
        Ok(Self::from_parts(directions, weights))
    }

    /// Near-uniform golden-spiral point set with equal weights `4π / n`.
    pub fn fibonacci(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("point count must be positive".into()));
        }
        let golden = PI * (3.0 - 5f64.sqrt());
        let directions = (0..n)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                SolidAngle::new(golden * i as f64, z.clamp(-1.0, 1.0).acos())
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = vec![4.0 * PI / n as f64; n];
        Ok(Self::from_parts(directions, weights))
    }

    fn from_parts(directions: Vec<SolidAngle>, weights: Vec<f64>) -> Self {
        let unit_vectors = directions.iter().map(SolidAngle::unit_vector).collect();
        Self {
            directions,
            unit_vectors,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn directions(&self) -> &[SolidAngle] {
        &self.directions
    }

    pub fn unit_vectors(&self) -> &[Vec3] {
        &self.unit_vectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: FnMut(&Vec3) -> f64>(&self, mut f: F) -> f64 {
        self.unit_vectors.iter().zip(&self.weights).map(|(d, w)| w * f(d)).sum()
    }
}

impl Default for SphericalQuadrature {
    fn default() -> Self {
        Self::product(DEFAULT_ZENITH_NODES, DEFAULT_AZIMUTH_NODES).expect("valid defaults")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_small_orders() {
        let (x, w) = gauss_legendre(2);
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-14);
        let (x, w) = gauss_legendre(3);
        assert_relative_eq!(x[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_eq!(x[1], 0.0);
        assert_relative_eq!(w[1], 8.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(w[0], 5.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 5, 24, 64] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for deg in (0..2 * n).step_by(2) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert_relative_eq!(q, 2.0 / (deg as f64 + 1.0), epsilon = 1e-12);
            }
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn weights_sum_to_four_pi() {
        for (nz, na) in [(1, 1), (24, 48), (48, 96), (7, 13)] {
            let q = SphericalQuadrature::product(nz, na).unwrap();
            assert_relative_eq!(q.integrate(|_| 1.0), 4.0 * PI, epsilon = 1e-9);
        }
        let f = SphericalQuadrature::fibonacci(256).unwrap();
        assert_relative_eq!(f.weights().iter().sum::<f64>(), 4.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn integrates_low_order_harmonics() {
        let q = SphericalQuadrature::default();
        // ∫ z² dΩ = 4π/3, ∫ x y dΩ = 0, ∫ x⁴ dΩ = 4π/5
        assert_relative_eq!(q.integrate(|d| d[2] * d[2]), 4.0 * PI / 3.0, epsilon = 1e-12);
        assert!(q.integrate(|d| d[0] * d[1]).abs() < 1e-13);
        assert_relative_eq!(q.integrate(|d| d[0].powi(4)), 4.0 * PI / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn fibonacci_points_are_balanced() {
        let f = SphericalQuadrature::fibonacci(512).unwrap();
        let mean: Vec3 = f
            .unit_vectors()
            .iter()
            .fold([0.0; 3], |a, v| [a[0] + v[0], a[1] + v[1], a[2] + v[2]]);
        for c in mean {
            assert!((c / 512.0).abs() < 1e-2);
        }
    }

    #[test]
    fn rejects_zero_nodes() {
        assert!(SphericalQuadrature::product(0, 4).is_err());
        assert!(SphericalQuadrature::fibonacci(0).is_err());
    }
}
