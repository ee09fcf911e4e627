//! Wave-plate retarders and the quarter/half/quarter SU(2) gadget.
//!
//! Jones matrices act on the single-photon amplitudes `(H, V)`, which are the
//! `m = +1/2, -1/2` states of the spin-1/2 layer, so an SU(2) Jones matrix is
//! directly the spin-1/2 representation `D^{1/2}` of a rotation.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;

use crate::angular::{wigner_d_matrix, EulerAngles, HalfInt};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateKind {
    Quarter,
    Half,
}

/// A wave plate with its fast axis at `angle` from horizontal, in `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateSetting {
    pub kind: PlateKind,
    pub angle: f64,
}

impl PlateSetting {
    pub fn new(kind: PlateKind, angle: f64) -> Self {
        let mut a = angle.rem_euclid(PI);
        if a >= PI {
            a = 0.0;
        }
        PlateSetting { kind, angle: a }
    }

    pub fn quarter(angle: f64) -> Self {
        Self::new(PlateKind::Quarter, angle)
    }

    pub fn half(angle: f64) -> Self {
        Self::new(PlateKind::Half, angle)
    }
}

/// A 2x2 unitary acting on the mode amplitudes `(a_H, a_V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeUnitary(Matrix2<Complex64>);

impl ModeUnitary {
    pub fn new(m: Matrix2<Complex64>) -> Self {
        ModeUnitary(m)
    }

    pub fn identity() -> Self {
        ModeUnitary(Matrix2::identity())
    }

    /// The spin-1/2 rotation matrix `D^{1/2}(g)`.
    pub fn from_euler(g: EulerAngles) -> Self {
        let d = wigner_d_matrix(HalfInt::HALF, g);
        ModeUnitary(Matrix2::new(d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]))
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }

    pub fn det(&self) -> Complex64 {
        self.0.determinant()
    }

    /// Frobenius distance of `U U^†` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        (self.0 * self.0.adjoint() - Matrix2::identity()).norm()
    }

    /// Rescales by a global phase so that `det = +1`.
    pub fn su2_normalized(&self) -> Self {
        let phase = self.det().sqrt();
        ModeUnitary(self.0 / phase)
    }

    /// Frobenius distance to `other`, minimized over the global sign of the
    /// SU(2) representatives.
    pub fn distance_up_to_phase(&self, other: &ModeUnitary) -> f64 {
        let a = self.su2_normalized().0;
        let b = other.su2_normalized().0;
        (a - b).norm().min((a + b).norm())
    }

    pub fn compose(&self, after: &ModeUnitary) -> ModeUnitary {
        ModeUnitary(after.0 * self.0)
    }
}

fn rotation(a: f64) -> Matrix2<Complex64> {
    let (s, c) = a.sin_cos();
    Matrix2::new(c.into(), (-s).into(), s.into(), c.into())
}

/// Jones matrix of a rotated retarder, scaled to `det = +1`.
pub fn plate_unitary(p: PlateSetting) -> ModeUnitary {
    let (retarder, phase) = match p.kind {
        PlateKind::Quarter => (
            Matrix2::new(Complex64::ONE, Complex64::ZERO, Complex64::ZERO, Complex64::I),
            Complex64::from_polar(1.0, -FRAC_PI_4),
        ),
        PlateKind::Half => (
            Matrix2::new(Complex64::ONE, Complex64::ZERO, Complex64::ZERO, -Complex64::ONE),
            Complex64::I,
        ),
    };
    ModeUnitary(rotation(p.angle) * retarder * rotation(-p.angle) * phase)
}

/// Quarter, half, quarter plates traversed in that order.
pub fn gadget_unitary(q1: PlateSetting, h: PlateSetting, q2: PlateSetting) -> Result<ModeUnitary> {
    if q1.kind != PlateKind::Quarter || h.kind != PlateKind::Half || q2.kind != PlateKind::Quarter {
        return Err(Error::InvalidInput("gadget plates must be quarter, half, quarter".into()));
    }
    Ok(gadget_from_angles(q1.angle, h.angle, q2.angle))
}

fn gadget_from_angles(a1: f64, a2: f64, a3: f64) -> ModeUnitary {
    let u = plate_unitary(PlateSetting::quarter(a3)).0
        * plate_unitary(PlateSetting::half(a2)).0
        * plate_unitary(PlateSetting::quarter(a1)).0;
    ModeUnitary(u).su2_normalized()
}

/// Plate orientations realizing a target unitary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GadgetSetting {
    pub q1: PlateSetting,
    pub h: PlateSetting,
    pub q2: PlateSetting,
    /// Frobenius distance between the recomposed gadget and the target.
    pub residual: f64,
}

const DECOMPOSE_TOL: f64 = 1e-9;
const GRID: usize = 10;
const STARTS: usize = 12;

/// Finds plate angles whose gadget reproduces `target` up to a global phase.
///
/// Coarse grid seeding followed by Levenberg-Marquardt polishing from the
/// best seeds; fails with the best residual seen if none converges.
pub fn gadget_decompose(target: &ModeUnitary) -> Result<GadgetSetting> {
    if target.unitarity_defect() > 1e-8 {
        return Err(Error::InvalidInput("gadget target is not unitary".into()));
    }
    let t = target.su2_normalized();
    let mut seeds: Vec<(f64, [f64; 3])> = Vec::with_capacity(GRID * GRID * GRID);
    let step = PI / GRID as f64;
    for i in 0..GRID {
        for j in 0..GRID {
            for k in 0..GRID {
                let x = [i as f64 * step, j as f64 * step, k as f64 * step];
                seeds.push((gadget_from_angles(x[0], x[1], x[2]).distance_up_to_phase(&t), x));
            }
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best = (f64::INFINITY, [0.0; 3]);
    for (_, x0) in seeds.iter().take(STARTS) {
        for sign in [1.0, -1.0] {
            let (res, x) = polish(&t, *x0, sign);
            if res < best.0 {
                best = (res, x);
            }
            if best.0 < DECOMPOSE_TOL * 1e-2 {
                break;
            }
        }
        if best.0 < DECOMPOSE_TOL * 1e-2 {
            break;
        }
    }
    let [a1, a2, a3] = best.1;
    let residual = gadget_from_angles(a1, a2, a3).distance_up_to_phase(&t);
    if residual >= DECOMPOSE_TOL {
        return Err(Error::NoConvergence { restarts: STARTS, residual });
    }
    Ok(GadgetSetting {
        q1: PlateSetting::quarter(a1),
        h: PlateSetting::half(a2),
        q2: PlateSetting::quarter(a3),
        residual,
    })
}

fn residual_vector(t: &ModeUnitary, x: [f64; 3], sign: f64) -> [f64; 8] {
    let d = gadget_from_angles(x[0], x[1], x[2]).0 - t.0 * Complex64::from(sign);
    let mut r = [0.0; 8];
    for (i, z) in d.iter().enumerate() {
        r[2 * i] = z.re;
        r[2 * i + 1] = z.im;
    }
    r
}

fn norm8(r: &[f64; 8]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn polish(t: &ModeUnitary, mut x: [f64; 3], sign: f64) -> (f64, [f64; 3]) {
    const H: f64 = 1e-7;
    let mut r = residual_vector(t, x, sign);
    let mut cost = norm8(&r);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        if cost < 1e-14 {
            break;
        }
        let mut jac = [[0.0; 3]; 8];
        for p in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[p] += H;
            xm[p] -= H;
            let rp = residual_vector(t, xp, sign);
            let rm = residual_vector(t, xm, sign);
            for i in 0..8 {
                jac[i][p] = (rp[i] - rm[i]) / (2.0 * H);
            }
        }
        let mut jtj = nalgebra::Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for i in 0..8 {
            for a in 0..3 {
                jtr[a] += jac[i][a] * r[i];
                for b in 0..3 {
                    jtj[(a, b)] += jac[i][a] * jac[i][b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut m = jtj;
            for a in 0..3 {
                m[(a, a)] += lambda * (1.0 + jtj[(a, a)]);
            }
            let Some(delta) = m.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [x[0] - delta[0], x[1] - delta[1], x[2] - delta[2]];
            let rt = residual_vector(t, trial, sign);
            let ct = norm8(&rt);
            if ct < cost {
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (cost, x)
}

/// Euler angles of an SU(2) element, with `theta` in `[0, pi]` and `phi`,
/// `psi` in `[0, 2pi)`; `D^{1/2}` of the result equals `u` up to sign.
///
/// At `theta = 0` or `pi` only one combination of `phi` and `psi` is defined;
/// `psi` is then set to zero.
pub fn su2_to_euler(u: &ModeUnitary) -> EulerAngles {
    const DEGENERATE: f64 = 1e-14;
    let m = u.su2_normalized().0;
    let c = m[(1, 1)].norm();
    let s = m[(1, 0)].norm();
    let theta = 2.0 * s.atan2(c);
    let wrap = |a: f64| {
        let r = a.rem_euclid(2.0 * PI);
        if r >= 2.0 * PI {
            0.0
        } else {
            r
        }
    };
    // m11 = e^{i(phi+psi)/2} cos, m10 = e^{i(phi-psi)/2} sin
    let (phi, psi) = if s <= DEGENERATE {
        (2.0 * m[(1, 1)].arg(), 0.0)
    } else if c <= DEGENERATE {
        (2.0 * m[(1, 0)].arg(), 0.0)
    } else {
        let alpha = m[(1, 1)].arg();
        let beta = m[(1, 0)].arg();
        (alpha + beta, alpha - beta)
    };
    EulerAngles { phi: wrap(phi), theta, psi: wrap(psi) }
}
