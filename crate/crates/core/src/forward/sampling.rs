//! Photon-number-resolving detection after the gadget, and the sample
//! estimators of the intensity moments.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::intensity::{binomial_moment, counter_rotate_state};
use crate::angular::{Direction, EulerAngles, HalfInt};
use crate::error::{Error, Result};
use crate::fock::{photon_number_distribution, TensorIndex, TwoModeState};

/// Intensity moments `I_Kq` at one gadget setting, `q = K ... -K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityMomentSet {
    pub k: HalfInt,
    pub direction: Direction,
    pub psi: Option<f64>,
    pub values: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub shots: Option<u64>,
}

impl IntensityMomentSet {
    pub fn noiseless(k: HalfInt, direction: Direction, values: Vec<f64>) -> Self {
        IntensityMomentSet { k, direction, psi: None, values, std_errors: None, shots: None }
    }

    pub fn euler(&self) -> EulerAngles {
        EulerAngles::from_direction(self.direction, self.psi.unwrap_or(0.0))
    }

    /// Value for projection `q`.
    pub fn value(&self, q: HalfInt) -> f64 {
        self.values[self.k.index_of(q)]
    }
}

/// Draws `shots` photon-number outcomes `(n_H, n_V)` for the gadget set to
/// measure `I_Kq(g)`, i.e. from the counter-rotated state.
pub fn sample_counts(state: &TwoModeState, g: EulerAngles, shots: u64, seed: u64) -> Result<Vec<(u32, u32)>> {
    if shots == 0 {
        return Err(Error::InvalidInput("shots must be at least 1".into()));
    }
    let dist = photon_number_distribution(&counter_rotate_state(state, g));
    let (outcomes, probs): (Vec<(u32, u32)>, Vec<f64>) = dist.into_iter().unzip();
    let index = WeightedIndex::new(&probs)
        .map_err(|e| Error::InvalidInput(format!("bad outcome distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..shots).map(|_| outcomes[index.sample(&mut rng)]).collect())
}

/// Sample mean and standard error of `C(n_H, K+q) C(n_V, K-q)`.
pub fn estimate_intensity(counts: &[(u32, u32)], idx: TensorIndex) -> Result<(f64, f64)> {
    if counts.is_empty() {
        return Err(Error::InvalidInput("no counts to estimate from".into()));
    }
    let n = counts.len() as f64;
    let xs: Vec<f64> = counts.iter().map(|&(a, b)| binomial_moment(a, b, idx)).collect();
    let mean = xs.iter().sum::<f64>() / n;
    if counts.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Shot-limited measurement of every `I_Kq` at one direction.
pub fn simulate_moments(
    state: &TwoModeState,
    k: HalfInt,
    direction: Direction,
    psi: f64,
    shots: u64,
    seed: u64,
) -> Result<IntensityMomentSet> {
    let g = EulerAngles::from_direction(direction, psi);
    let counts = sample_counts(state, g, shots, seed)?;
    let mut values = Vec::with_capacity(k.dim());
    let mut errors = Vec::with_capacity(k.dim());
    for q in k.projections() {
        let (v, e) = estimate_intensity(&counts, TensorIndex::new(k, q)?)?;
        values.push(v);
        errors.push(e);
    }
    Ok(IntensityMomentSet {
        k,
        direction,
        psi: Some(psi),
        values,
        std_errors: Some(errors),
        shots: Some(shots),
    })
}
