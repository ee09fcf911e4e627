//! Rotation of states and the intensity moments
//! `I_Kq(g) = Tr[rho R(g) T_Kq T_Kq^† R(g)^†]`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::angular::{binomial, clebsch_gordan, parity_sign, spherical_harmonic, wigner_d_matrix, Direction, EulerAngles, HalfInt};
use crate::error::{Error, Result};
use crate::fock::{correlation_matrix, occupations, CorrelationMatrix, CoherenceBlock, TensorIndex, TwoModeState};
use crate::registry::{Named, Registry};

/// Conjugates every layer by `D^S(g)`: `rho -> R rho R^†`. Layer weights are untouched.
pub fn rotate_state(state: &TwoModeState, g: EulerAngles) -> TwoModeState {
    conjugate_state(state, |s| wigner_d_matrix(s, g))
}

/// `rho -> R^† rho R`, the frame in which `T_Kq T_Kq^†` is read off for `I_Kq(g)`.
pub fn counter_rotate_state(state: &TwoModeState, g: EulerAngles) -> TwoModeState {
    conjugate_state(state, |s| wigner_d_matrix(s, g).adjoint())
}

fn conjugate_state(state: &TwoModeState, rep: impl Fn(HalfInt) -> DMatrix<Complex64>) -> TwoModeState {
    let mut out = state.map_layers(|l| {
        let d = rep(l.spin());
        &d * l.rho() * d.adjoint()
    });
    let coherences = state
        .coherences()
        .iter()
        .map(|c| CoherenceBlock {
            lower: c.lower,
            upper: c.upper,
            block: rep(c.lower) * &c.block * rep(c.upper).adjoint(),
        })
        .collect();
    out.set_coherences(coherences);
    out
}

/// Binomial moment `C(n_H, K+q) C(n_V, K-q)`, the eigenvalue of `T_Kq T_Kq^†`
/// on `|n_H, n_V>`.
pub fn binomial_moment(n_h: u32, n_v: u32, idx: TensorIndex) -> f64 {
    let (ph, pv) = idx.powers();
    binomial(i64::from(n_h), i64::from(ph)) * binomial(i64::from(n_v), i64::from(pv))
}

/// All `I_Kq(g)` for `q = K ... -K` from one counter-rotation of the state.
pub fn intensity_moments_direct(state: &TwoModeState, k: HalfInt, g: EulerAngles) -> Vec<f64> {
    let rotated = counter_rotate_state(state, g);
    k.projections()
        .map(|q| {
            let idx = TensorIndex::new(k, q).expect("projection of K");
            diagonal_moment(&rotated, idx)
        })
        .collect()
}

/// `I_Kq(g)` by direct expectation in the counter-rotated state.
pub fn intensity_moment_direct(state: &TwoModeState, idx: TensorIndex, g: EulerAngles) -> f64 {
    diagonal_moment(&counter_rotate_state(state, g), idx)
}

fn diagonal_moment(state: &TwoModeState, idx: TensorIndex) -> f64 {
    state
        .layers()
        .iter()
        .map(|l| {
            let mut acc = 0.0;
            for i in 0..l.spin().dim() {
                let (nh, nv) = occupations(l.spin(), i);
                let w = binomial_moment(nh, nv, idx);
                if w != 0.0 {
                    acc += w * l.rho()[(i, i)].re;
                }
            }
            l.weight() * acc
        })
        .sum()
}

/// `I_Kq` at `dir` from the multipole expansion
/// `sum_L sqrt(4pi/(2L+1)) sum_{q',q''} (-1)^{q-q'} C^{L0}_{Kq,K-q} G_{q''q'} sum_m C^{Lm}_{Kq'',K-q'} Y*_{Lm}`.
pub fn intensity_moment_multipole(g: &CorrelationMatrix, q: HalfInt, dir: Direction) -> Result<f64> {
    let k = g.k();
    if !k.admits(q) {
        return Err(Error::InvalidInput(format!("q = {q} is not a projection of K = {k}")));
    }
    let two_k = k.twice();
    let mut total = Complex64::ZERO;
    for l in 0..=two_k {
        let big_l = HalfInt::integer(l);
        let c_l0 = clebsch_gordan(k, q, k, -q, big_l, HalfInt::ZERO);
        if c_l0 == 0.0 {
            continue;
        }
        let ys: Vec<Complex64> = (-l..=l).map(|m| spherical_harmonic(l, m, dir).conj()).collect();
        let mut inner = Complex64::ZERO;
        for (a, qpp) in k.projections().enumerate() {
            for (b, qp) in k.projections().enumerate() {
                let m = qpp - qp;
                if m.twice().abs() > 2 * l {
                    continue;
                }
                let c = clebsch_gordan(k, qpp, k, -qp, big_l, m);
                if c == 0.0 {
                    continue;
                }
                let sign = parity_sign((q - qp).twice() / 2);
                inner += g.entries()[(a, b)] * (sign * c) * ys[(m.as_int() + l) as usize];
            }
        }
        total += inner * (c_l0 * (4.0 * PI / f64::from(2 * l + 1)).sqrt());
    }
    Ok(total.re)
}

/// A route from a state to its intensity moments.
pub trait IntensityModel: Named + Send + Sync {
    /// `I_Kq` for `q = K ... -K` at rotation `g`.
    fn moments(&self, state: &TwoModeState, k: HalfInt, g: EulerAngles) -> Vec<f64>;
}

/// Expectation of `T_Kq T_Kq^†` in the counter-rotated state.
pub struct DirectModel;

impl Named for DirectModel {
    fn name(&self) -> &'static str {
        "direct"
    }
}

impl IntensityModel for DirectModel {
    fn moments(&self, state: &TwoModeState, k: HalfInt, g: EulerAngles) -> Vec<f64> {
        intensity_moments_direct(state, k, g)
    }
}

/// Spherical-harmonic expansion over the correlation matrix `G^K`.
pub struct MultipoleModel;

impl Named for MultipoleModel {
    fn name(&self) -> &'static str {
        "multipole"
    }
}

impl IntensityModel for MultipoleModel {
    fn moments(&self, state: &TwoModeState, k: HalfInt, g: EulerAngles) -> Vec<f64> {
        let gk = correlation_matrix(state, k);
        let dir = Direction::new(g.theta, g.phi);
        k.projections()
            .map(|q| intensity_moment_multipole(&gk, q, dir).expect("projection of K"))
            .collect()
    }
}

/// Registry holding the built-in intensity models.
pub fn intensity_models() -> Registry<dyn IntensityModel> {
    let mut r: Registry<dyn IntensityModel> = Registry::new();
    r.register(Arc::new(DirectModel));
    r.register(Arc::new(MultipoleModel));
    r
}
