//! Two-mode states organised by Fock layer, the creation-operator tensors
//! `T_Kq = a_H^{†(K+q)} a_V^{†(K-q)} / sqrt((K+q)! (K-q)!)`, and the
//! correlation matrices `G^K_{qq'} = Tr(rho T_Kq T_Kq'^†)`.
//!
//! A layer of spin `S` holds the `2S` photon states `|S, m> = |n_H = S+m, n_V = S-m>`,
//! indexed from `m = S` (all photons horizontal) down to `m = -S`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::angular::{binomial, HalfInt};
use crate::error::{Error, Result};

pub(crate) const HERMITIAN_TOL: f64 = 1e-12;
pub(crate) const TRACE_TOL: f64 = 1e-12;
pub(crate) const PSD_TOL: f64 = 1e-10;

/// Density operator restricted to one Fock layer, with the layer's probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    spin: HalfInt,
    weight: f64,
    rho: DMatrix<Complex64>,
}

impl LayerState {
    /// Validates and wraps a layer density matrix.
    pub fn new(spin: HalfInt, weight: f64, rho: DMatrix<Complex64>) -> Result<Self> {
        if spin.twice() < 0 {
            return Err(Error::InvalidInput(format!("negative layer spin {spin}")));
        }
        let n = spin.dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "layer S = {spin} needs a {n}x{n} density matrix, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if !(0.0..=1.0 + TRACE_TOL).contains(&weight) {
            return Err(Error::InvalidInput(format!("layer weight {weight} outside [0, 1]")));
        }
        check_density(&rho, &format!("layer S = {spin}"))?;
        Ok(LayerState { spin, weight, rho })
    }

    /// Normalized rank-one layer state `|psi> = sum_m amps[m] |S, m>`, weight 1.
    pub fn pure(spin: HalfInt, amplitudes: &[Complex64]) -> Result<Self> {
        if spin.twice() < 0 || amplitudes.len() != spin.dim() {
            return Err(Error::InvalidInput(format!(
                "layer S = {spin} needs {} amplitudes, got {}",
                spin.dim(),
                amplitudes.len()
            )));
        }
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("amplitude vector must be nonzero and finite".into()));
        }
        let v = v / Complex64::from(norm);
        let rho = &v * v.adjoint();
        Ok(LayerState { spin, weight: 1.0, rho })
    }

    /// Reproducible random density matrix of the given rank: Haar-random
    /// eigenvectors with eigenvalues drawn uniformly from the simplex.
    pub fn random(spin: HalfInt, rank: usize, seed: u64) -> Result<Self> {
        let n = spin.dim();
        if rank < 1 || rank > n {
            return Err(Error::InvalidInput(format!("rank {rank} outside 1..={n} for S = {spin}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = haar_columns(n, rank, &mut rng);
        let mut probs: Vec<f64> = (0..rank).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let mut rho = DMatrix::<Complex64>::zeros(n, n);
        for (k, p) in probs.iter().enumerate() {
            let v = basis.column(k);
            rho += (v * v.adjoint()) * Complex64::from(*p);
        }
        hermitize(&mut rho);
        Ok(LayerState { spin, weight: 1.0, rho })
    }

    pub fn spin(&self) -> HalfInt {
        self.spin
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn rho(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub(crate) fn with_rho(&self, rho: DMatrix<Complex64>) -> Self {
        LayerState { spin: self.spin, weight: self.weight, rho }
    }
}

/// `rank` orthonormal Haar-distributed columns via Gram-Schmidt on
/// complex Gaussian vectors.
fn haar_columns(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let mut out = DMatrix::<Complex64>::zeros(n, rank);
    let mut k = 0;
    while k < rank {
        let mut v = DVector::<Complex64>::from_fn(n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        for prev in 0..k {
            let u = out.column(prev);
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm < 1e-8 {
            continue;
        }
        out.set_column(k, &(v / Complex64::from(norm)));
        k += 1;
    }
    out
}

pub(crate) fn hermitize(m: &mut DMatrix<Complex64>) {
    let h = (&*m + m.adjoint()) * Complex64::from(0.5);
    *m = h;
}

fn check_density(rho: &DMatrix<Complex64>, what: &str) -> Result<()> {
    let herm = max_modulus(&(rho - rho.adjoint()));
    if herm > HERMITIAN_TOL {
        return Err(Error::InvalidInput(format!("{what}: density matrix not Hermitian ({herm:.2e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::InvalidInput(format!("{what}: trace {tr} differs from 1")));
    }
    let min_eig = min_eigenvalue(rho);
    if min_eig < -PSD_TOL {
        return Err(Error::InvalidInput(format!("{what}: negative eigenvalue {min_eig:.3e}")));
    }
    Ok(())
}

/// Largest entry modulus of a complex matrix.
pub fn max_modulus(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let mut h = m.clone();
    hermitize(&mut h);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Off-diagonal density block `<S_lo, m| rho |S_hi, m'>` between two layers,
/// in the global (weight-inclusive) normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceBlock {
    pub lower: HalfInt,
    pub upper: HalfInt,
    pub block: DMatrix<Complex64>,
}

/// A two-mode state as a weighted collection of Fock layers, optionally with
/// inter-layer coherences.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    layers: Vec<LayerState>,
    coherences: Vec<CoherenceBlock>,
}

impl TwoModeState {
    /// Block-diagonal state from layers whose weights sum to one.
    pub fn from_layers(layers: Vec<LayerState>) -> Result<Self> {
        Self::with_coherences(layers, Vec::new())
    }

    pub fn with_coherences(mut layers: Vec<LayerState>, coherences: Vec<CoherenceBlock>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("state has no layers".into()));
        }
        layers.sort_by_key(|l| l.spin);
        if layers.windows(2).any(|w| w[0].spin == w[1].spin) {
            return Err(Error::InvalidInput("duplicate layer spin".into()));
        }
        let total: f64 = layers.iter().map(|l| l.weight).sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidInput(format!("layer weights sum to {total}, not 1")));
        }
        let state = TwoModeState { layers, coherences };
        for c in &state.coherences {
            if c.lower >= c.upper {
                return Err(Error::InvalidInput(format!(
                    "coherence block ({}, {}) must have lower < upper",
                    c.lower, c.upper
                )));
            }
            if state.layer(c.lower).is_none() || state.layer(c.upper).is_none() {
                return Err(Error::InvalidInput(format!(
                    "coherence block ({}, {}) references a missing layer",
                    c.lower, c.upper
                )));
            }
            if c.block.nrows() != c.lower.dim() || c.block.ncols() != c.upper.dim() {
                return Err(Error::InvalidInput(format!(
                    "coherence block ({}, {}) has wrong shape",
                    c.lower, c.upper
                )));
            }
        }
        if !state.coherences.is_empty() {
            let min = min_eigenvalue(&state.global_matrix());
            if min < -PSD_TOL {
                return Err(Error::InvalidInput(format!(
                    "coherences make the global density matrix indefinite ({min:.3e})"
                )));
            }
        }
        Ok(state)
    }

    pub fn single(layer: LayerState) -> Self {
        TwoModeState { layers: vec![layer.with_weight(1.0)], coherences: Vec::new() }
    }

    pub fn vacuum() -> Self {
        Self::fock(0, 0)
    }

    /// Number state `|n_H> ⊗ |n_V>`.
    pub fn fock(n_h: u32, n_v: u32) -> Self {
        let spin = HalfInt::from_twice((n_h + n_v) as i32);
        let m = HalfInt::from_twice(n_h as i32 - n_v as i32);
        let mut amps = vec![Complex64::ZERO; spin.dim()];
        amps[spin.index_of(m)] = Complex64::ONE;
        Self::single(LayerState::pure(spin, &amps).expect("nonzero amplitude"))
    }

    /// Pure superposition over layers given as `(spin, amplitudes)` blocks;
    /// cross-layer terms become coherence blocks.
    pub fn pure_superposition(parts: &[(HalfInt, Vec<Complex64>)]) -> Result<Self> {
        let norm2: f64 = parts.iter().flat_map(|(_, a)| a.iter()).map(|a| a.norm_sqr()).sum();
        if !(norm2 > 0.0) {
            return Err(Error::InvalidInput("superposition has zero norm".into()));
        }
        let scale = Complex64::from(norm2.sqrt().recip());
        let vecs: Vec<(HalfInt, DVector<Complex64>)> = parts
            .iter()
            .map(|(s, a)| (*s, DVector::from_column_slice(a) * scale))
            .collect();
        let mut layers = Vec::new();
        for (s, v) in &vecs {
            let w = v.norm_squared();
            if w == 0.0 {
                continue;
            }
            let rho = (v * v.adjoint()) / Complex64::from(w);
            layers.push(LayerState::new(*s, w, rho)?);
        }
        let mut coherences = Vec::new();
        for (i, (si, vi)) in vecs.iter().enumerate() {
            for (sj, vj) in vecs.iter().skip(i + 1) {
                if vi.norm_squared() == 0.0 || vj.norm_squared() == 0.0 {
                    continue;
                }
                let (lo, hi, vl, vh) = if si < sj { (*si, *sj, vi, vj) } else { (*sj, *si, vj, vi) };
                coherences.push(CoherenceBlock { lower: lo, upper: hi, block: vl * vh.adjoint() });
            }
        }
        Self::with_coherences(layers, coherences)
    }

    pub fn layers(&self) -> &[LayerState] {
        &self.layers
    }

    pub fn coherences(&self) -> &[CoherenceBlock] {
        &self.coherences
    }

    pub fn layer(&self, spin: HalfInt) -> Option<&LayerState> {
        self.layers.iter().find(|l| l.spin == spin)
    }

    pub fn max_spin(&self) -> HalfInt {
        self.layers.iter().map(|l| l.spin).max().unwrap_or(HalfInt::ZERO)
    }

    /// Global density block with rows in layer `a` and columns in layer `b`.
    pub fn block(&self, a: HalfInt, b: HalfInt) -> Option<DMatrix<Complex64>> {
        if a == b {
            return self.layer(a).map(|l| &l.rho * Complex64::from(l.weight));
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let c = self.coherences.iter().find(|c| c.lower == lo && c.upper == hi)?;
        Some(if a < b { c.block.clone() } else { c.block.adjoint() })
    }

    /// Full density matrix over all present layers, ordered by spin.
    pub fn global_matrix(&self) -> DMatrix<Complex64> {
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.spin.dim();
                Some(o)
            })
            .collect();
        let n: usize = self.layers.iter().map(|l| l.spin.dim()).sum();
        let mut g = DMatrix::<Complex64>::zeros(n, n);
        for (i, li) in self.layers.iter().enumerate() {
            for (j, lj) in self.layers.iter().enumerate() {
                if let Some(b) = self.block(li.spin, lj.spin) {
                    g.view_mut((offsets[i], offsets[j]), (b.nrows(), b.ncols())).copy_from(&b);
                }
            }
        }
        g
    }

    pub(crate) fn map_layers(&self, f: impl Fn(&LayerState) -> DMatrix<Complex64>) -> TwoModeState {
        TwoModeState {
            layers: self.layers.iter().map(|l| l.with_rho(f(l))).collect(),
            coherences: self.coherences.clone(),
        }
    }

    pub(crate) fn set_coherences(&mut self, coherences: Vec<CoherenceBlock>) {
        self.coherences = coherences;
    }
}

/// Label `(K, q)` of a tensor operator, `-K <= q <= K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorIndex {
    k: HalfInt,
    q: HalfInt,
}

impl TensorIndex {
    pub fn new(k: HalfInt, q: HalfInt) -> Result<Self> {
        if !k.admits(q) {
            return Err(Error::InvalidInput(format!("invalid tensor index K = {k}, q = {q}")));
        }
        Ok(TensorIndex { k, q })
    }

    pub fn k(self) -> HalfInt {
        self.k
    }

    pub fn q(self) -> HalfInt {
        self.q
    }

    /// Creation powers `(K + q, K - q)` on the H and V modes.
    pub fn powers(self) -> (u32, u32) {
        (((self.k + self.q).twice() / 2) as u32, ((self.k - self.q).twice() / 2) as u32)
    }
}

/// Photon numbers `(n_H, n_V)` of basis index `i` in layer `s`.
pub fn occupations(s: HalfInt, i: usize) -> (u32, u32) {
    let m = s.projection_at(i);
    (((s + m).twice() / 2) as u32, ((s - m).twice() / 2) as u32)
}

/// Image of basis index `i` of layer `s` under `T_Kq`: target index in layer
/// `s + K` and the ladder coefficient `sqrt(C(n_H+K+q, K+q) C(n_V+K-q, K-q))`.
pub fn tensor_image(idx: TensorIndex, s: HalfInt, i: usize) -> (usize, f64) {
    let (nh, nv) = occupations(s, i);
    let (ph, pv) = idx.powers();
    let coef = (binomial(i64::from(nh + ph), i64::from(ph)) * binomial(i64::from(nv + pv), i64::from(pv))).sqrt();
    let target = s + idx.k;
    (target.index_of(s.projection_at(i) + idx.q), coef)
}

/// Applies `T_Kq` to an amplitude vector of layer `s`, returning a vector of layer `s + K`.
pub fn apply_tensor(idx: TensorIndex, s: HalfInt, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if v.len() != s.dim() {
        return Err(Error::InvalidInput(format!(
            "vector of length {} does not live in layer S = {s}",
            v.len()
        )));
    }
    let target = s + idx.k;
    let mut out = DVector::<Complex64>::zeros(target.dim());
    for i in 0..s.dim() {
        let (t, c) = tensor_image(idx, s, i);
        out[t] += v[i] * c;
    }
    Ok(out)
}

/// Matrix of `T_Kq` from layer `s` to layer `s + K`.
pub fn tensor_matrix(idx: TensorIndex, s: HalfInt) -> DMatrix<f64> {
    let target = s + idx.k;
    let mut m = DMatrix::<f64>::zeros(target.dim(), s.dim());
    for i in 0..s.dim() {
        let (t, c) = tensor_image(idx, s, i);
        m[(t, i)] = c;
    }
    m
}

/// `sum_m ||T_Kq |S, m>||^2`, which equals the binomial `C(2S + 2K + 1, 2K + 1)`.
pub fn tensor_norm_sum(s: HalfInt, idx: TensorIndex) -> f64 {
    let (ph, pv) = idx.powers();
    (0..s.dim())
        .map(|i| {
            let (nh, nv) = occupations(s, i);
            binomial(i64::from(nh + ph), i64::from(ph)) * binomial(i64::from(nv + pv), i64::from(pv))
        })
        .sum()
}

/// Matrix `G^K_{qq'}` with rows and columns ordered `q = K ... -K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    k: HalfInt,
    entries: DMatrix<Complex64>,
}

impl CorrelationMatrix {
    pub fn new(k: HalfInt, entries: DMatrix<Complex64>) -> Result<Self> {
        if k.twice() < 0 || entries.nrows() != k.dim() || entries.ncols() != k.dim() {
            return Err(Error::InvalidInput(format!("G^K for K = {k} must be {0}x{0}", k.dim())));
        }
        Ok(CorrelationMatrix { k, entries })
    }

    pub fn zeros(k: HalfInt) -> Self {
        CorrelationMatrix { k, entries: DMatrix::zeros(k.dim(), k.dim()) }
    }

    pub fn k(&self) -> HalfInt {
        self.k
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    /// Entry `G_{q q'}` addressed by projections.
    pub fn get(&self, q: HalfInt, qp: HalfInt) -> Complex64 {
        self.entries[(self.k.index_of(q), self.k.index_of(qp))]
    }

    pub fn max_abs_diff(&self, other: &CorrelationMatrix) -> f64 {
        max_modulus(&(&self.entries - &other.entries))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        max_modulus(&(&self.entries - self.entries.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }
}

/// `G^K_{qq'} = sum_S Tr(rho_S T_Kq T_Kq'^†)` over all layers of the state.
pub fn correlation_matrix(state: &TwoModeState, k: HalfInt) -> CorrelationMatrix {
    let n = k.dim();
    let mut g = DMatrix::<Complex64>::zeros(n, n);
    for (a, q) in k.projections().enumerate() {
        for (b, qp) in k.projections().enumerate() {
            let iq = TensorIndex { k, q };
            let iqp = TensorIndex { k, q: qp };
            g[(a, b)] = mixed_correlation(state, iq, iqp);
        }
    }
    CorrelationMatrix { k, entries: g }
}

/// `Tr(rho T_{K q} T_{K' q'}^†)`, including coherences between layers that
/// differ by `K - K'`. Missing coherence blocks contribute zero.
pub fn interlayer_correlation(state: &TwoModeState, a: TensorIndex, b: TensorIndex) -> Complex64 {
    mixed_correlation(state, a, b)
}

fn mixed_correlation(state: &TwoModeState, a: TensorIndex, b: TensorIndex) -> Complex64 {
    let mut total = Complex64::ZERO;
    // T_b^† lowers layer S = base + K_b onto `base`; T_a raises it to base + K_a.
    for layer in state.layers() {
        let base = layer.spin - b.k;
        if base.twice() < 0 {
            continue;
        }
        let row_layer = base + b.k;
        let col_layer = base + a.k;
        let Some(block) = state.block(row_layer, col_layer) else {
            continue;
        };
        for c in 0..base.dim() {
            let (ra, ca) = tensor_image(a, base, c);
            let (rb, cb) = tensor_image(b, base, c);
            total += block[(rb, ra)] * (ca * cb);
        }
    }
    total
}

/// Probability of each photon-number outcome `(n_H, n_V)`.
pub fn photon_number_distribution(state: &TwoModeState) -> BTreeMap<(u32, u32), f64> {
    let mut p = BTreeMap::new();
    for layer in state.layers() {
        for i in 0..layer.spin.dim() {
            let prob = layer.weight * layer.rho[(i, i)].re;
            *p.entry(occupations(layer.spin, i)).or_insert(0.0) += prob.max(0.0);
        }
    }
    p
}
