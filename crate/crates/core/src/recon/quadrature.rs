//! Product quadrature on the sphere: Gauss-Legendre in `cos(theta)` times an
//! equispaced azimuthal rule.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::angular::{Direction, HalfInt};
use crate::error::{Error, Result};

/// Nodes and weights on the unit sphere, weights summing to `4 pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    nodes: Vec<(Direction, f64)>,
    n_theta: usize,
    n_phi: usize,
}

impl QuadratureGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return Err(Error::InvalidInput("quadrature needs at least one node per axis".into()));
        }
        let (xs, ws) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        for (x, w) in xs.iter().zip(&ws) {
            let theta = x.clamp(-1.0, 1.0).acos();
            for j in 0..n_phi {
                nodes.push((Direction::new(theta, j as f64 * dphi), w * dphi));
            }
        }
        Ok(QuadratureGrid { nodes, n_theta, n_phi })
    }

    /// Default grid for order `K`: `2K+1` polar nodes, `4K+2` azimuthal nodes.
    pub fn for_order(k: HalfInt) -> Self {
        let n = k.dim();
        Self::new(n, 2 * n).expect("K >= 0")
    }

    pub fn nodes(&self) -> &[(Direction, f64)] {
        &self.nodes
    }

    /// Largest total harmonic degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        (2 * self.n_theta - 1).min(self.n_phi - 1)
    }

    pub fn integrate(&self, f: impl Fn(Direction) -> f64) -> f64 {
        self.nodes.iter().map(|&(d, w)| w * f(d)).sum()
    }

    pub fn integrate_complex(&self, f: impl Fn(Direction) -> Complex64) -> Complex64 {
        self.nodes.iter().map(|&(d, w)| f(d) * w).sum()
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::spherical_harmonic;

    #[test]
    fn small_rules() {
        let (x, w) = gauss_legendre(1);
        assert!(x[0].abs() < 1e-16 && (w[0] - 2.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert!(x[1].abs() < 1e-16);
        assert!((x[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15 && (w[0] - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exactness() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n = {n}, deg = {deg}");
            }
        }
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        for k2 in 0..=8 {
            let g = QuadratureGrid::for_order(HalfInt::from_twice(k2));
            assert!((g.integrate(|_| 1.0) - 4.0 * PI).abs() < 1e-12);
            assert!(g.nodes().iter().all(|&(_, w)| w > 0.0));
            assert!(g.exact_degree() >= 2 * k2 as usize);
        }
    }

    #[test]
    fn harmonics_integrate_to_zero_except_monopole() {
        let g = QuadratureGrid::for_order(HalfInt::from_twice(4));
        for l in 0..=4 {
            for m in -l..=l {
                let v = g.integrate_complex(|d| spherical_harmonic(l, m, d));
                let want = if l == 0 { (4.0 * PI).sqrt() } else { 0.0 };
                assert!((v - Complex64::from(want)).norm() < 1e-12);
            }
        }
    }
}
