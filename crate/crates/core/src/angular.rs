//! Angular-momentum special functions in the z-y-z active-rotation
//! convention with Condon-Shortley phases.
//!
//! Every angular-momentum label is a [`HalfInt`] holding twice its value, so
//! half-integer spins stay exact. Basis vectors of a spin-`j` multiplet are
//! indexed from `m = j` (index 0) down to `m = -j` (index `2j`).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::sync::{OnceLock, RwLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An integer or half-integer angular-momentum quantum number, stored as
/// twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn integer(n: i32) -> Self {
        HalfInt(2 * n)
    }

    /// Nearest half-integer to `x`; fails when `x` is not within 1e-9 of one.
    pub fn from_f64(x: f64) -> Result<Self> {
        let twice = (2.0 * x).round();
        if !x.is_finite() || (2.0 * x - twice).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("{x} is not a half-integer")));
        }
        Ok(HalfInt(twice as i32))
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub const fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// Multiplet dimension `2j + 1`.
    pub fn dim(self) -> usize {
        debug_assert!(self.0 >= 0);
        (self.0 + 1) as usize
    }

    /// True when `m` is a valid projection of this `j`.
    pub fn admits(self, m: HalfInt) -> bool {
        self.0 >= 0 && m.0.abs() <= self.0 && (self.0 - m.0) % 2 == 0
    }

    /// Projections `m = j, j-1, ..., -j` in basis order.
    pub fn projections(self) -> impl DoubleEndedIterator<Item = HalfInt> + ExactSizeIterator {
        let j = self.0;
        (0..(j + 1).max(0) as usize).map(move |k| HalfInt(j - 2 * k as i32))
    }

    /// Basis index of projection `m` inside this multiplet.
    pub fn index_of(self, m: HalfInt) -> usize {
        debug_assert!(self.admits(m));
        ((self.0 - m.0) / 2) as usize
    }

    /// Projection stored at basis index `i`.
    pub fn projection_at(self, i: usize) -> HalfInt {
        HalfInt(self.0 - 2 * i as i32)
    }

    /// Integer value; only meaningful when [`HalfInt::is_integer`] holds.
    pub fn as_int(self) -> i32 {
        debug_assert!(self.is_integer());
        self.0 / 2
    }
}

impl Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// `(-1)^n` for an integer exponent.
pub(crate) fn parity_sign(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn wrap_two_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r >= 2.0 * PI {
        0.0
    } else {
        r
    }
}

/// Euler angles of a z-y-z rotation `R = e^{-i phi Jz} e^{-i theta Jy} e^{-i psi Jz}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerAngles {
    pub const IDENTITY: EulerAngles = EulerAngles { phi: 0.0, theta: 0.0, psi: 0.0 };

    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        EulerAngles { phi, theta, psi }
    }

    /// The rotation whose `D_{m0}` column reads off the harmonics at `dir`.
    pub fn from_direction(dir: Direction, psi: f64) -> Self {
        EulerAngles { phi: dir.phi, theta: dir.theta, psi }
    }

    /// Equivalent angles with `theta` in `[0, pi]` and `phi`, `psi` in `[0, 2pi)`.
    ///
    /// For integer spins the result represents the same rotation; for
    /// half-integer spins it may differ by the sign of the double cover.
    pub fn normalized(self) -> Self {
        let mut theta = self.theta.rem_euclid(2.0 * PI);
        let (mut phi, mut psi) = (self.phi, self.psi);
        if theta > PI {
            theta = 2.0 * PI - theta;
            phi += PI;
            psi += PI;
        }
        EulerAngles { phi: wrap_two_pi(phi), theta, psi: wrap_two_pi(psi) }
    }

    /// Angles of the inverse rotation.
    pub fn inverse(self) -> Self {
        EulerAngles { phi: -self.psi, theta: -self.theta, psi: -self.phi }
    }
}

/// A point on the unit sphere in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub const Z: Direction = Direction { theta: 0.0, phi: 0.0 };

    pub fn new(theta: f64, phi: f64) -> Self {
        Direction { theta, phi }
    }

    /// Polar coordinates of a (not necessarily normalized) Cartesian vector.
    pub fn from_cartesian(v: [f64; 3]) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let theta = (v[2] / r).clamp(-1.0, 1.0).acos();
        let phi = wrap_two_pi(v[1].atan2(v[0]));
        Direction { theta, phi }
    }

    pub fn to_cartesian(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    /// Equivalent coordinates with `theta` in `[0, pi]`, `phi` in `[0, 2pi)`.
    pub fn normalized(self) -> Self {
        Direction::from_cartesian(self.to_cartesian())
    }

    /// Cosine of the angle between two directions (spherical law of cosines).
    pub fn cos_angle_to(self, other: Direction) -> f64 {
        let c = self.theta.cos() * other.theta.cos()
            + self.theta.sin() * other.theta.sin() * (self.phi - other.phi).cos();
        c.clamp(-1.0, 1.0)
    }
}

const LN_FACTORIAL_TABLE_LEN: usize = 201;

fn ln_factorial_table() -> &'static [f64; LN_FACTORIAL_TABLE_LEN] {
    static TABLE: OnceLock<[f64; LN_FACTORIAL_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; LN_FACTORIAL_TABLE_LEN];
        // Exact products while they fit in f64 mantissa, summed logs after.
        let mut exact = 1.0f64;
        for n in 1..LN_FACTORIAL_TABLE_LEN {
            if n <= 20 {
                exact *= n as f64;
                t[n] = exact.ln();
            } else {
                t[n] = t[n - 1] + (n as f64).ln();
            }
        }
        t
    })
}

/// `ln(n!)`: table lookup up to 200, Stirling series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACTORIAL_TABLE_LEN {
        return ln_factorial_table()[n as usize];
    }
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn lnf(n: i32) -> f64 {
    debug_assert!(n >= 0);
    ln_factorial(n as u64)
}

/// Binomial coefficient as a float; zero when `k` is outside `0..=n`.
pub fn binomial(n: i64, k: i64) -> f64 {
    if k < 0 || n < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

type CgKey = (i32, i32, i32, i32, i32, i32);

fn cg_cache() -> &'static RwLock<HashMap<CgKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CgKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>` (Condon-Shortley).
///
/// Returns 0 whenever a selection rule fails: `M != m1 + m2`, the triangle
/// inequality, or an invalid `(j, m)` pair.
pub fn clebsch_gordan(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    if !(j1.admits(m1) && j2.admits(m2) && j.admits(m)) {
        return 0.0;
    }
    if m1.0 + m2.0 != m.0 {
        return 0.0;
    }
    let (a, b, c) = (j1.0, j2.0, j.0);
    if c > a + b || c < (a - b).abs() || (a + b + c) % 2 != 0 {
        return 0.0;
    }
    let key = (j1.0, m1.0, j2.0, m2.0, j.0, m.0);
    if let Some(v) = cg_cache().read().expect("cg cache poisoned").get(&key) {
        return *v;
    }
    let v = racah_cg(j1.0, m1.0, j2.0, m2.0, j.0, m.0);
    cg_cache().write().expect("cg cache poisoned").insert(key, v);
    v
}

/// Racah's closed-form sum over doubled labels, evaluated in log space.
fn racah_cg(j1: i32, m1: i32, j2: i32, m2: i32, j: i32, m: i32) -> f64 {
    let h = |x: i32| -> i32 {
        debug_assert!(x % 2 == 0, "odd doubled label {x}");
        x / 2
    };
    let ln_pref = 0.5
        * ((f64::from(j + 1)).ln() + lnf(h(j + j1 - j2)) + lnf(h(j - j1 + j2)) + lnf(h(j1 + j2 - j))
            - lnf(h(j1 + j2 + j) + 1)
            + lnf(h(j + m))
            + lnf(h(j - m))
            + lnf(h(j1 - m1))
            + lnf(h(j1 + m1))
            + lnf(h(j2 - m2))
            + lnf(h(j2 + m2)));

    let d = [h(j1 + j2 - j), h(j1 - m1), h(j2 + m2)];
    let e = [h(j - j2 + m1), h(j - j1 - m2)];
    let k_min = 0.max(-e[0]).max(-e[1]);
    let k_max = d[0].min(d[1]).min(d[2]);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = lnf(k) + lnf(d[0] - k) + lnf(d[1] - k) + lnf(d[2] - k) + lnf(e[0] + k) + lnf(e[1] + k);
        sum += parity_sign(k) * (ln_pref - ln_den).exp();
    }
    sum
}

/// Wigner small-d function `d^j_{m' m}(theta)`.
pub fn wigner_small_d(j: HalfInt, mp: HalfInt, m: HalfInt, theta: f64) -> f64 {
    if !(j.admits(mp) && j.admits(m)) {
        return 0.0;
    }
    let jp = (j + mp).twice() / 2;
    let jm_p = (j - mp).twice() / 2;
    let jpm = (j + m).twice() / 2;
    let jmm = (j - m).twice() / 2;
    let dm = (mp - m).twice() / 2;
    let two_j = j.twice();
    let ln_pref = 0.5 * (lnf(jp) + lnf(jm_p) + lnf(jpm) + lnf(jmm));
    let (s, c) = (theta / 2.0).sin_cos();
    let s_min = 0.max(-dm);
    let s_max = jpm.min(jm_p);
    let mut sum = 0.0;
    for k in s_min..=s_max {
        let ln_den = lnf(jpm - k) + lnf(k) + lnf(dm + k) + lnf(jm_p - k);
        let cos_pow = two_j - dm - 2 * k;
        let sin_pow = dm + 2 * k;
        sum += parity_sign(dm + k) * (ln_pref - ln_den).exp() * c.powi(cos_pow) * s.powi(sin_pow);
    }
    sum
}

/// Wigner D-function `D^j_{m' m}(phi, theta, psi) = e^{-i m' phi} d^j_{m' m}(theta) e^{-i m psi}`.
pub fn wigner_d(j: HalfInt, mp: HalfInt, m: HalfInt, angles: EulerAngles) -> Complex64 {
    let d = wigner_small_d(j, mp, m, angles.theta);
    Complex64::from_polar(d, -mp.value() * angles.phi - m.value() * angles.psi)
}

/// Full real matrix `d^j(theta)` in basis order `m = j ... -j`.
pub fn wigner_small_d_matrix(j: HalfInt, theta: f64) -> DMatrix<f64> {
    let n = j.dim();
    DMatrix::from_fn(n, n, |r, c| wigner_small_d(j, j.projection_at(r), j.projection_at(c), theta))
}

/// Full unitary matrix `D^j(g)` in basis order `m = j ... -j`.
pub fn wigner_d_matrix(j: HalfInt, angles: EulerAngles) -> DMatrix<Complex64> {
    let n = j.dim();
    let small = wigner_small_d_matrix(j, angles.theta);
    DMatrix::from_fn(n, n, |r, c| {
        let (mp, m) = (j.projection_at(r), j.projection_at(c));
        Complex64::from_polar(small[(r, c)], -mp.value() * angles.phi - m.value() * angles.psi)
    })
}

/// Associated Legendre function `P_l^m(x)` for `m >= 0`, Condon-Shortley phase included.
fn assoc_legendre(l: i32, m: i32, x: f64) -> f64 {
    debug_assert!(0 <= m && m <= l);
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0;
    let mut fact = 1.0;
    for _ in 0..m {
        pmm *= -fact * somx2;
        fact += 2.0;
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * f64::from(2 * m + 1) * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * f64::from(2 * ll - 1) * pmmp1 - f64::from(ll + m - 1) * pmm) / f64::from(ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

/// Orthonormal spherical harmonic `Y_lm(theta, phi)` with the Condon-Shortley phase.
pub fn spherical_harmonic(l: i32, m: i32, dir: Direction) -> Complex64 {
    assert!(l >= 0 && m.abs() <= l, "invalid harmonic indices ({l}, {m})");
    let am = m.abs();
    let norm = (f64::from(2 * l + 1) / (4.0 * PI)).sqrt()
        * (0.5 * (lnf(l - am) - lnf(l + am))).exp();
    let p = assoc_legendre(l, am, dir.theta.cos());
    let y = Complex64::from_polar(norm * p, f64::from(am) * dir.phi);
    if m >= 0 {
        y
    } else {
        parity_sign(am) * y.conj()
    }
}

/// Legendre polynomial `P_l(x)` by upward recurrence.
///
/// Arguments up to 1e-12 outside `[-1, 1]` are clipped; anything further out
/// is a domain error.
pub fn legendre_p(l: u32, x: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if !(x.abs() <= 1.0 + SLACK) {
        return Err(Error::Domain(format!("Legendre argument {x} outside [-1, 1]")));
    }
    let x = x.clamp(-1.0, 1.0);
    if l == 0 {
        return Ok(1.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for n in 2..=l {
        let n = f64::from(n);
        let p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
        p0 = p1;
        p1 = p2;
    }
    Ok(p1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn ln_factorial_small_values() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        // exact integer oracle
        let exact: u64 = (1..=10).product();
        assert!((ln_factorial(10) - (exact as f64).ln()).abs() < 1e-14 * 15.1);
    }

    #[test]
    fn ln_factorial_table_and_stirling_meet() {
        // 170! is the largest factorial representable in f64
        let mut exact = 1.0f64;
        for n in 1..=170u64 {
            exact *= n as f64;
            let rel = (ln_factorial(n) - exact.ln()).abs() / exact.ln().max(1.0);
            assert!(rel < 1e-14, "n = {n}: rel {rel}");
        }
        // Kahan-summed logs as an independent oracle past 170
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for n in 1..=260u64 {
            let y = (n as f64).ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            if n >= 150 {
                assert!((ln_factorial(n) - sum).abs() / sum < 1e-14, "n = {n}");
            }
        }
        assert!(ln_factorial(201) > ln_factorial(200));
        assert!((ln_factorial(201) - ln_factorial(200) - 201f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn half_int_projection_order() {
        let j = h(3);
        let ms: Vec<i32> = j.projections().map(HalfInt::twice).collect();
        assert_eq!(ms, vec![3, 1, -1, -3]);
        assert_eq!(j.index_of(h(-1)), 2);
        assert_eq!(j.projection_at(1), h(1));
        assert_eq!(format!("{}", h(3)), "3/2");
        assert_eq!(format!("{}", h(-4)), "-2");
        assert!(HalfInt::from_f64(0.3).is_err());
        assert_eq!(HalfInt::from_f64(1.5).unwrap(), h(3));
    }

    #[test]
    fn cg_examples() {
        let v = clebsch_gordan(h(1), h(1), h(1), h(-1), h(2), h(0));
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(clebsch_gordan(h(1), h(1), h(1), h(1), h(2), h(0)), 0.0);
        assert!(clebsch_gordan(h(2), h(0), h(2), h(0), h(2), h(0)).abs() < 1e-15);
        // singlet: <1/2 -1/2; 1/2 1/2 | 0 0> = -1/sqrt 2
        let s = clebsch_gordan(h(1), h(-1), h(1), h(1), h(0), h(0));
        assert!((s + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    /// Explicit diagonalization oracle for two spin-1/2 systems: the coupled
    /// states are known in closed form, so every coefficient is fixed.
    #[test]
    fn cg_spin_half_pair_matches_coupled_basis() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        // |1,1> = |++>, |1,0> = (|+-> + |-+>)/sqrt2, |1,-1> = |-->, |0,0> = (|+-> - |-+>)/sqrt2
        let table = [
            ((1, 1, 2, 2), 1.0),
            ((1, -1, 2, 0), r),
            ((-1, 1, 2, 0), r),
            ((-1, -1, 2, -2), 1.0),
            ((1, -1, 0, 0), r),
            ((-1, 1, 0, 0), -r),
        ];
        for ((m1, m2, j, m), want) in table {
            let got = clebsch_gordan(h(1), h(m1), h(1), h(m2), h(j), h(m));
            assert!((got - want).abs() < 1e-15, "{m1} {m2} {j} {m}: {got}");
        }
    }

    #[test]
    fn small_d_spin_half_against_exponential() {
        // exp(-i theta sigma_y / 2) = cos(theta/2) I - i sin(theta/2) sigma_y
        for &t in &[0.0, 0.3, 1.7, 3.0, 5.5] {
            let (s, c) = (t / 2.0f64).sin_cos();
            assert!((wigner_small_d(h(1), h(1), h(1), t) - c).abs() < 1e-15);
            assert!((wigner_small_d(h(1), h(1), h(-1), t) + s).abs() < 1e-15);
            assert!((wigner_small_d(h(1), h(-1), h(1), t) - s).abs() < 1e-15);
            assert!((wigner_small_d(h(1), h(-1), h(-1), t) - c).abs() < 1e-15);
        }
    }

    #[test]
    fn small_d_identity_and_orthogonality() {
        for tj in 0..=8 {
            let j = h(tj);
            let id = wigner_small_d_matrix(j, 0.0);
            assert!((id - DMatrix::<f64>::identity(j.dim(), j.dim())).amax() < 1e-15);
            let d = wigner_small_d_matrix(j, 1.234);
            for row in d.row_iter() {
                assert!((row.norm() - 1.0).abs() < 1e-13);
            }
            let prod = &d * d.transpose();
            assert!((prod - DMatrix::<f64>::identity(j.dim(), j.dim())).amax() < 1e-13);
        }
    }

    #[test]
    fn legendre_basics() {
        for x in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert_eq!(legendre_p(0, x).unwrap(), 1.0);
            assert_eq!(legendre_p(1, x).unwrap(), x);
        }
        for l in 0..=10 {
            assert!((legendre_p(l, 1.0).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!((legendre_p(2, 0.5).unwrap() - (-0.125)).abs() < 1e-15);
        assert!(legendre_p(3, 1.0 + 5e-13).is_ok());
        assert!(matches!(legendre_p(3, 1.01), Err(Error::Domain(_))));
        assert!(legendre_p(3, f64::NAN).is_err());
    }

    #[test]
    fn harmonic_low_orders() {
        let d = Direction::new(0.7, 2.1);
        let y00 = spherical_harmonic(0, 0, d);
        assert!((y00.re - 0.282_094_791_773_878_14).abs() < 1e-15 && y00.im == 0.0);
        // Rodrigues oracle: P_1(x) = x
        let y10 = spherical_harmonic(1, 0, d);
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt() * d.theta.cos()).abs() < 1e-15);
        // Y_11 = -sqrt(3/8pi) sin(theta) e^{i phi}
        let y11 = spherical_harmonic(1, 1, d);
        let want = Complex64::from_polar(-(3.0 / (8.0 * PI)).sqrt() * d.theta.sin(), d.phi);
        assert!((y11 - want).norm() < 1e-15);
    }

    #[test]
    fn euler_normalization_and_inverse() {
        let g = EulerAngles::new(-0.4, 4.0, 7.0).normalized();
        assert!((0.0..=PI).contains(&g.theta));
        assert!((0.0..2.0 * PI).contains(&g.phi) && (0.0..2.0 * PI).contains(&g.psi));
        let j = HalfInt::ONE;
        let a = EulerAngles::new(0.3, 1.1, -0.7);
        let prod = wigner_d_matrix(j, a) * wigner_d_matrix(j, a.inverse());
        assert!(crate::fock::max_modulus(&(prod - DMatrix::<Complex64>::identity(3, 3))) < 1e-14);
        let an = EulerAngles::new(-0.4, 4.0, 7.0);
        let diff = wigner_d_matrix(j, an) - wigner_d_matrix(j, an.normalized());
        assert!(crate::fock::max_modulus(&diff) < 1e-13);
    }

    #[test]
    fn direction_roundtrip() {
        let d = Direction::new(2.0, 5.0);
        let back = Direction::from_cartesian(d.to_cartesian());
        assert!((back.theta - d.theta).abs() < 1e-14 && (back.phi - d.phi).abs() < 1e-14);
        assert!((Direction::Z.cos_angle_to(Direction::new(PI / 2.0, 0.3))).abs() < 1e-15);
    }
}
