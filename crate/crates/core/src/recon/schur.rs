//! Clebsch-Gordan (Schur) transforms between the `(q, q')` labels of the
//! intensity moments and correlation matrices and the coupled `(L, m)` labels.
//!
//! Conventions, with `s(q) = (-1)^{K-q}`:
//!
//! ```text
//! I~_L       = sum_q        s(q)  C^{L0}_{Kq,K-q}    I_Kq
//! G~_L^(m)   = sum_{q'',q'} s(q') C^{Lm}_{Kq'',K-q'} G_{q''q'}
//! I~_L(dir)  = sqrt(4pi/(2L+1)) sum_m Y*_Lm(dir) G~_L^(m)
//! ```
//!
//! The signs are pinned by requiring the last line to reproduce the directly
//! computed intensity moments.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::{clebsch_gordan, parity_sign, HalfInt};
use crate::error::{Error, Result};
use crate::fock::CorrelationMatrix;

/// The `2L+1` multipole components `G~_L^(m)`, stored for `m = -L ... L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipoleVector {
    pub l: u32,
    pub components: Vec<Complex64>,
}

impl MultipoleVector {
    pub fn new(l: u32, components: Vec<Complex64>) -> Result<Self> {
        if components.len() != 2 * l as usize + 1 {
            return Err(Error::InvalidInput(format!(
                "multipole L = {l} needs {} components, got {}",
                2 * l + 1,
                components.len()
            )));
        }
        Ok(MultipoleVector { l, components })
    }

    pub fn zeros(l: u32) -> Self {
        MultipoleVector { l, components: vec![Complex64::ZERO; 2 * l as usize + 1] }
    }

    /// Component for projection `m`.
    pub fn get(&self, m: i32) -> Complex64 {
        self.components[(m + self.l as i32) as usize]
    }

    /// Euclidean norm of the components.
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn sign(k: HalfInt, q: HalfInt) -> f64 {
    parity_sign((k - q).as_int())
}

fn check_degree(k: HalfInt, l: u32) {
    assert!(
        l as i32 <= k.twice(),
        "multipole order L = {l} exceeds 2K = {}",
        k.twice()
    );
}

/// `I~_L` from the moments `I_Kq` listed for `q = K ... -K`.
pub fn schur_transform_intensity(k: HalfInt, values: &[f64], l: u32) -> f64 {
    check_degree(k, l);
    assert_eq!(values.len(), k.dim(), "expected one moment per projection of K = {k}");
    let big_l = HalfInt::integer(l as i32);
    k.projections()
        .zip(values)
        .map(|(q, v)| sign(k, q) * clebsch_gordan(k, q, k, -q, big_l, HalfInt::ZERO) * v)
        .sum()
}

/// Recovers `I_Kq` for `q = K ... -K` from `I~_L` listed for `L = 0 ... 2K`.
pub fn inverse_schur_intensity(k: HalfInt, transformed: &[f64]) -> Vec<f64> {
    assert_eq!(transformed.len(), k.dim(), "expected I~_L for L = 0 ..= 2K");
    k.projections()
        .map(|q| {
            let s = sign(k, q);
            transformed
                .iter()
                .enumerate()
                .map(|(l, v)| s * clebsch_gordan(k, q, k, -q, HalfInt::integer(l as i32), HalfInt::ZERO) * v)
                .sum()
        })
        .collect()
}

/// Single component `G~_L^(m)`.
pub fn schur_transform_correlation(g: &CorrelationMatrix, l: u32, m: i32) -> Complex64 {
    let k = g.k();
    check_degree(k, l);
    assert!(m.unsigned_abs() <= l, "|m| = {} exceeds L = {l}", m.abs());
    let (big_l, mm) = (HalfInt::integer(l as i32), HalfInt::integer(m));
    let mut acc = Complex64::ZERO;
    for (a, qpp) in k.projections().enumerate() {
        let qp = qpp - mm;
        if !k.admits(qp) {
            continue;
        }
        let c = clebsch_gordan(k, qpp, k, -qp, big_l, mm);
        acc += g.entries()[(a, k.index_of(qp))] * (sign(k, qp) * c);
    }
    acc
}

/// All multipole vectors `L = 0 ... 2K` of a correlation matrix.
pub fn schur_multipoles(g: &CorrelationMatrix) -> Vec<MultipoleVector> {
    (0..=g.k().twice() as u32)
        .map(|l| MultipoleVector {
            l,
            components: (-(l as i32)..=l as i32).map(|m| schur_transform_correlation(g, l, m)).collect(),
        })
        .collect()
}

/// Reassembles `G^K` from a complete set of multipole vectors `L = 0 ... 2K`.
pub fn inverse_schur_correlation(k: HalfInt, multipoles: &[MultipoleVector]) -> Result<CorrelationMatrix> {
    let max_l = k.twice() as u32;
    let mut by_l: Vec<Option<&MultipoleVector>> = vec![None; max_l as usize + 1];
    for mv in multipoles {
        if mv.l > max_l {
            return Err(Error::InvalidInput(format!("multipole L = {} exceeds 2K = {max_l}", mv.l)));
        }
        if mv.components.len() != 2 * mv.l as usize + 1 {
            return Err(Error::InvalidInput(format!("multipole L = {} has wrong length", mv.l)));
        }
        by_l[mv.l as usize] = Some(mv);
    }
    let missing: Vec<String> = by_l
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_none())
        .map(|(l, _)| l.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::InvalidInput(format!(
            "incomplete multipole set for K = {k}: missing L = {}",
            missing.join(", ")
        )));
    }
    let n = k.dim();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for (a, qpp) in k.projections().enumerate() {
        for (b, qp) in k.projections().enumerate() {
            let m = qpp - qp;
            let mut acc = Complex64::ZERO;
            for mv in by_l.iter().flatten() {
                if m.twice().unsigned_abs() > 2 * mv.l {
                    continue;
                }
                let c = clebsch_gordan(k, qpp, k, -qp, HalfInt::integer(mv.l as i32), m);
                acc += mv.get(m.as_int()) * c;
            }
            out[(a, b)] = acc * sign(k, qp);
        }
    }
    CorrelationMatrix::new(k, out)
}
