//! Measurement-direction design: `2L+1` lines through the origin spread as
//! widely as possible, and the matrices `P_L` and `Y_L` they induce.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::angular::{legendre_p, spherical_harmonic, Direction};
use crate::error::{Error, Result};

const RESTARTS: u64 = 16;
const COND_LIMIT: f64 = 50.0;
const TIE_DEG: f64 = 1e-6;

/// `2L+1` measurement directions for the order-`L` multipole, with the
/// conditioning of the linear system they define.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub l: u32,
    pub directions: Vec<Direction>,
    pub min_angle_deg: f64,
    pub cond_p: f64,
    pub cond_y: f64,
}

impl DirectionSet {
    pub fn new(l: u32, directions: Vec<Direction>) -> Result<Self> {
        let n = 2 * l as usize + 1;
        if directions.len() != n {
            return Err(Error::InvalidInput(format!(
                "order L = {l} needs {n} directions, got {}",
                directions.len()
            )));
        }
        let min_angle_deg = min_line_angle(&directions).to_degrees();
        let cond_p = condition_number(&legendre_gram(l, &directions));
        let cond_y = condition_number_complex(&harmonic_matrix(l, &directions));
        Ok(DirectionSet { l, directions, min_angle_deg, cond_p, cond_y })
    }

    /// The three coordinate axes `+x, +y, +z` for `L = 1`.
    pub fn axes() -> Self {
        Self::new(1, cartesian(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])).expect("three directions")
    }
}

/// `[P_L]_{jk} = P_L(cos chi_jk)` with `chi_jk` the angle between directions `j` and `k`.
pub fn legendre_gram(l: u32, dirs: &[Direction]) -> DMatrix<f64> {
    let n = dirs.len();
    DMatrix::from_fn(n, n, |j, k| {
        legendre_p(l, dirs[j].cos_angle_to(dirs[k])).expect("cosine within [-1, 1]")
    })
}

/// `[Y_L]_{jk} = Y_{L,m}(dir_j)` with column `k` holding `m = k - L`.
pub fn harmonic_matrix(l: u32, dirs: &[Direction]) -> DMatrix<Complex64> {
    let li = l as i32;
    DMatrix::from_fn(dirs.len(), 2 * l as usize + 1, |j, k| spherical_harmonic(li, k as i32 - li, dirs[j]))
}

/// Ratio of extreme singular values; infinite for a singular matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    ratio(m.singular_values().as_slice())
}

pub fn condition_number_complex(m: &DMatrix<Complex64>) -> f64 {
    ratio(m.singular_values().as_slice())
}

fn ratio(sv: &[f64]) -> f64 {
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= max * f64::EPSILON {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Smallest angle between any two of the lines spanned by `dirs`, in radians.
/// A single line gives `pi/2`.
pub fn min_line_angle(dirs: &[Direction]) -> f64 {
    let mut best = std::f64::consts::FRAC_PI_2;
    for (j, a) in dirs.iter().enumerate() {
        for b in &dirs[j + 1..] {
            best = best.min(a.cos_angle_to(*b).abs().min(1.0).acos());
        }
    }
    best
}

fn cartesian(vs: &[[f64; 3]]) -> Vec<Direction> {
    vs.iter().map(|v| Direction::from_cartesian(*v)).collect()
}

/// Known good configurations for small `L`.
fn canonical(l: u32) -> Option<Vec<Direction>> {
    match l {
        0 => Some(vec![Direction::Z]),
        1 => Some(DirectionSet::axes().directions),
        2 => {
            // five of the six icosahedral diagonals, excluding the polar one
            let theta = (1.0 / 5f64.sqrt()).acos();
            Some((0..5).map(|k| Direction::new(theta, 0.4 * std::f64::consts::PI * k as f64)).collect())
        }
        3 => {
            let mut v = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            v.extend([[1.0, 1.0, 1.0], [-1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [1.0, -1.0, 1.0]]);
            Some(cartesian(&v))
        }
        _ => None,
    }
}

type Lines = Vec<Vector3<f64>>;

fn min_abs_cos(v: &Lines) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for j in 0..v.len() {
        for k in j + 1..v.len() {
            let c = v[j].dot(&v[k]).abs();
            if c > worst.0 {
                worst = (c, j, k);
            }
        }
    }
    worst
}

fn random_lines(n: usize, rng: &mut ChaCha8Rng) -> Lines {
    (0..n)
        .map(|_| {
            let v = Vector3::new(
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            );
            v.normalize()
        })
        .collect()
}

/// Descent on `sum_{j<k} |v_j . v_k|^p` with `p` raised in stages, so the
/// energy approaches the largest pairwise `|cos|`.
fn repel(v: &mut Lines) {
    let n = v.len();
    for p in [2.0f64, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0] {
        let mut step = 0.05;
        for _ in 0..300 {
            let mut grads = vec![Vector3::zeros(); n];
            for j in 0..n {
                for k in j + 1..n {
                    let c = v[j].dot(&v[k]);
                    let a = c.abs();
                    if a < 1e-300 {
                        continue;
                    }
                    let f = p * a.powf(p - 2.0) * c;
                    grads[j] += v[k] * f;
                    grads[k] += v[j] * f;
                }
            }
            for (vj, gj) in v.iter().zip(grads.iter_mut()) {
                *gj -= *vj * vj.dot(gj);
            }
            let gmax = grads.iter().map(|g| g.norm()).fold(0.0, f64::max);
            if gmax < 1e-300 {
                break;
            }
            for (vj, gj) in v.iter_mut().zip(&grads) {
                *vj = (*vj - gj * (step / gmax)).normalize();
            }
            step *= 0.985;
        }
    }
}

fn cond_of(l: u32, v: &Lines) -> f64 {
    condition_number(&legendre_gram(l, &to_upper_hemisphere(v)))
}

fn perturb(v: &mut Lines, pick: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let unit = Uniform::new(-1.0f64, 1.0).expect("valid range");
    let old = v[pick];
    let d = Vector3::new(unit.sample(rng), unit.sample(rng), unit.sample(rng));
    v[pick] = (old + d * scale).normalize();
    old
}

/// Random single-line moves accepted when `cond(P_L)` does not grow, until
/// it falls to half the design limit.
fn condition(l: u32, v: &mut Lines, rng: &mut ChaCha8Rng) {
    let n = v.len();
    let mut cur = cond_of(l, v);
    let mut scale = 0.1;
    for it in 0..3000 {
        if cur <= 0.5 * COND_LIMIT {
            break;
        }
        let pick = it % n;
        let old = perturb(v, pick, scale, rng);
        let next = cond_of(l, v);
        if next <= cur {
            cur = next;
        } else {
            v[pick] = old;
            scale = (scale * 0.998f64).max(1e-6);
        }
    }
}

/// Random moves of the tightest pair, accepted only when the minimum line
/// angle does not decrease and `cond(P_L)` stays within the design limit.
fn refine(l: u32, v: &mut Lines, rng: &mut ChaCha8Rng) {
    let bound = cond_of(l, v).max(COND_LIMIT);
    let (mut cur, _, _) = min_abs_cos(v);
    let mut scale = 1e-2;
    for it in 0..4000 {
        let (_, j, k) = min_abs_cos(v);
        let pick = if it % 2 == 0 { j } else { k };
        let old = perturb(v, pick, scale, rng);
        let (next, _, _) = min_abs_cos(v);
        if next <= cur && cond_of(l, v) <= bound {
            cur = next;
        } else {
            v[pick] = old;
            scale = (scale * 0.995).max(1e-9);
        }
    }
}

fn to_upper_hemisphere(v: &Lines) -> Vec<Direction> {
    v.iter()
        .map(|x| {
            let y = if x.z < 0.0 || (x.z == 0.0 && (x.y < 0.0 || (x.y == 0.0 && x.x < 0.0))) { -x } else { *x };
            Direction::from_cartesian([y.x, y.y, y.z])
        })
        .collect()
}

/// Seeded multi-start design of `2L+1` well-separated lines.
///
/// Each restart spreads random lines by soft repulsion, lowers `cond(P_L)`
/// below the design limit of 50, then raises the minimum line angle without
/// leaving that limit. Candidates from every restart and the canonical
/// configuration are compared by minimum line angle among those within the
/// limit; the canonical set wins ties.
pub fn design_directions(l: u32, seed: u64) -> DirectionSet {
    static CACHE: OnceLock<Mutex<HashMap<(u32, u64), DirectionSet>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(d) = cache.lock().expect("direction cache").get(&(l, seed)) {
        return d.clone();
    }
    let d = design_uncached(l, seed);
    cache.lock().expect("direction cache").insert((l, seed), d.clone());
    d
}

fn design_uncached(l: u32, seed: u64) -> DirectionSet {
    let n = 2 * l as usize + 1;
    if l == 0 {
        return DirectionSet::new(0, vec![Direction::Z]).expect("one direction");
    }
    let mut candidates: Vec<DirectionSet> = Vec::new();
    if let Some(c) = canonical(l) {
        candidates.push(DirectionSet::new(l, c).expect("canonical size"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESTARTS {
        let mut v = random_lines(n, &mut rng);
        repel(&mut v);
        condition(l, &mut v, &mut rng);
        refine(l, &mut v, &mut rng);
        candidates.push(DirectionSet::new(l, to_upper_hemisphere(&v)).expect("2L+1 lines"));
    }
    let usable: Vec<&DirectionSet> = candidates.iter().filter(|c| c.cond_p <= COND_LIMIT).collect();
    let pool: Vec<&DirectionSet> = if usable.is_empty() { candidates.iter().collect() } else { usable };
    let mut best = pool[0];
    for c in &pool[1..] {
        if c.min_angle_deg > best.min_angle_deg + TIE_DEG {
            best = c;
        }
    }
    best.clone()
}
