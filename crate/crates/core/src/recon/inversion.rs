//! Inversions from intensity data to multipoles: the continuous-angle
//! projection onto spherical harmonics, the closed-form first-order matrix
//! and the general per-order solve over `2L+1` directions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::directions::{harmonic_matrix, legendre_gram, DirectionSet};
use super::quadrature::QuadratureGrid;
use super::schur::{inverse_schur_correlation, MultipoleVector};
use crate::angular::{clebsch_gordan, parity_sign, spherical_harmonic, Direction, HalfInt};
use crate::error::{Error, Result};
use crate::fock::CorrelationMatrix;
use crate::forward::IntensityMomentSet;

/// `cond(P_L)` above which the discrete solve is refused.
pub const COND_ERROR_THRESHOLD: f64 = 1e6;
/// `cond(P_L)` above which the discrete solve succeeds with a warning.
pub const COND_WARN_THRESHOLD: f64 = 1e3;
/// Magnitude below which `C^{L0}_{Kq,K-q}` counts as vanishing.
pub const VANISHING_CG: f64 = 1e-12;

/// Recovers `G^K` from `I_Kq` sampled over the whole sphere.
///
/// For each `L` the projection `int I_Kq Y_Lm dOmega` is rescaled by
/// `s(q) sqrt((2L+1)/4pi) / C^{L0}_{Kq,K-q}`, then the multipoles are
/// recombined. Fails when that coefficient vanishes for some `L`.
pub fn continuous_inversion<F>(sampler: F, k: HalfInt, q: HalfInt, grid: &QuadratureGrid) -> Result<CorrelationMatrix>
where
    F: Fn(Direction) -> IntensityMomentSet + Sync,
{
    if !k.admits(q) {
        return Err(Error::InvalidInput(format!("q = {q} is not a projection of K = {k}")));
    }
    let need = 2 * k.twice() as usize;
    if grid.exact_degree() < need {
        return Err(Error::InvalidInput(format!(
            "quadrature exact to degree {} but order K = {k} needs {need}",
            grid.exact_degree()
        )));
    }
    let max_l = k.twice() as u32;
    let coefficients: Vec<f64> = (0..=max_l)
        .map(|l| clebsch_gordan(k, q, k, -q, HalfInt::integer(l as i32), HalfInt::ZERO))
        .collect();
    if let Some(l) = coefficients.iter().position(|c| c.abs() < VANISHING_CG) {
        return Err(Error::VanishingCoefficient { k: k.to_string(), q: q.to_string(), l });
    }
    let samples: Vec<(Direction, f64, f64)> = grid
        .nodes()
        .par_iter()
        .map(|&(dir, w)| {
            let set = sampler(dir);
            if set.k != k {
                return Err(Error::InvalidInput(format!("sampler returned K = {} for K = {k}", set.k)));
            }
            Ok((dir, w, set.value(q)))
        })
        .collect::<Result<_>>()?;
    let s = parity_sign((k - q).as_int());
    let multipoles = (0..=max_l)
        .map(|l| {
            let li = l as i32;
            let scale = s * (f64::from(2 * li + 1) / (4.0 * PI)).sqrt() / coefficients[l as usize];
            let components = (-li..=li)
                .map(|m| {
                    let proj: Complex64 =
                        samples.iter().map(|&(d, w, v)| spherical_harmonic(li, m, d) * (w * v)).sum();
                    proj * scale
                })
                .collect();
            MultipoleVector { l, components }
        })
        .collect::<Vec<_>>();
    inverse_schur_correlation(k, &multipoles)
}

/// First-order multipoles from `I~_1` at the `+x`, `+y`, `+z` axes:
///
/// ```text
/// (G~^(1), G~^(0), G~^(-1)) = (1/sqrt3) [[-1, i, 0], [0, 0, sqrt2], [1, i, 0]] (I~_x, I~_y, I~_z)
/// ```
pub fn first_order_inversion(ix: f64, iy: f64, iz: f64) -> MultipoleVector {
    let r = 3f64.sqrt().recip();
    let i = Complex64::I;
    let plus = Complex64::from(-ix) + i * iy;
    let zero = Complex64::from(2f64.sqrt() * iz);
    let minus = Complex64::from(ix) + i * iy;
    MultipoleVector { l: 1, components: vec![minus * r, zero * r, plus * r] }
}

/// Result of the per-order direction solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteInversion {
    pub multipole: MultipoleVector,
    pub cond_p: f64,
    pub warning: Option<String>,
}

/// `G~_L = sqrt(4pi/(2L+1)) Y_L^T P_L^{-1} I~_L` over the `2L+1` directions of `dirs`.
pub fn discrete_inversion(values: &[f64], dirs: &DirectionSet) -> Result<DiscreteInversion> {
    discrete_inversion_with_threshold(values, dirs, COND_ERROR_THRESHOLD)
}

pub fn discrete_inversion_with_threshold(
    values: &[f64],
    dirs: &DirectionSet,
    threshold: f64,
) -> Result<DiscreteInversion> {
    let l = dirs.l;
    let n = 2 * l as usize + 1;
    if values.len() != n || dirs.directions.len() != n {
        return Err(Error::InvalidInput(format!(
            "order L = {l} needs {n} values and directions, got {} and {}",
            values.len(),
            dirs.directions.len()
        )));
    }
    let p = legendre_gram(l, &dirs.directions);
    let lu = p.lu();
    if dirs.min_angle_deg < 1e-9 || !dirs.cond_p.is_finite() || !lu.is_invertible() {
        return Err(Error::RankDeficient(format!(
            "directions for L = {l} contain coincident or antipodal lines; P_L is singular"
        )));
    }
    if dirs.cond_p > threshold {
        return Err(Error::IllConditioned { l: l as usize, cond: dirs.cond_p, threshold });
    }
    let warning = (dirs.cond_p > COND_WARN_THRESHOLD)
        .then(|| format!("L = {l}: cond(P_L) = {:.3e} exceeds {COND_WARN_THRESHOLD:.0e}", dirs.cond_p));
    let x = lu
        .solve(&DVector::from_column_slice(values))
        .ok_or_else(|| Error::RankDeficient(format!("P_L for L = {l} could not be solved")))?;
    let y: DMatrix<Complex64> = harmonic_matrix(l, &dirs.directions);
    let scale = (4.0 * PI / f64::from(2 * l + 1)).sqrt();
    let xc = x.map(Complex64::from);
    let g = y.transpose() * xc * Complex64::from(scale);
    Ok(DiscreteInversion {
        multipole: MultipoleVector { l, components: g.iter().copied().collect() },
        cond_p: dirs.cond_p,
        warning,
    })
}

/// `I~_L(dir) = sqrt(4pi/(2L+1)) sum_m Y*_Lm(dir) G~_L^(m)`, real for data of
/// a Hermitian `G^K`.
pub fn synthesize_transformed(mv: &MultipoleVector, dir: Direction) -> Complex64 {
    let li = mv.l as i32;
    let s: Complex64 = (-li..=li).map(|m| spherical_harmonic(li, m, dir).conj() * mv.get(m)).sum();
    s * (4.0 * PI / f64::from(2 * li + 1)).sqrt()
}
