//! Reconstruction strategies turning measured intensity moments into `G^K`.
//!
//! Strategies implement [`Reconstructor`] and are looked up by name through
//! [`reconstructors`]:
//!
//! * `exact` chains the Schur transform of each record, the per-order
//!   direction solve and the inverse Schur transform. It needs exactly
//!   `2L+1` directions for every `L = 0 ... 2K`.
//! * `lsq` (alias `least_squares`) fits the Hermitian entries of `G^K`
//!   to all records by weighted, optionally Tikhonov-regularized, least
//!   squares and reports standard errors and `chi^2`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::directions::DirectionSet;
use super::inversion::{discrete_inversion_with_threshold, COND_ERROR_THRESHOLD};
use super::schur::{inverse_schur_correlation, schur_transform_intensity};
use crate::angular::{wigner_d_matrix, HalfInt};
use crate::error::{Error, Result};
use crate::fock::{hermitize, CorrelationMatrix};
use crate::forward::{intensity_moment_multipole, IntensityMomentSet};
use crate::registry::{Named, Registry};

/// One measured setting, optionally tagged with the multipole order whose
/// direction set it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub moments: IntensityMomentSet,
    pub order: Option<u32>,
}

impl MeasurementRecord {
    pub fn new(moments: IntensityMomentSet, order: Option<u32>) -> Self {
        MeasurementRecord { moments, order }
    }

    pub fn k(&self) -> HalfInt {
        self.moments.k
    }
}

/// Which projections `q` enter the least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Channels {
    /// Only `q = K`; one statistically independent value per setting.
    #[default]
    Stretched,
    /// Every `q`, treated as independent.
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructOptions {
    pub lambda: f64,
    pub psd_project: bool,
    pub channels: Channels,
    pub cond_threshold: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            lambda: 0.0,
            psd_project: false,
            channels: Channels::Stretched,
            cond_threshold: COND_ERROR_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub k: HalfInt,
    pub mode: String,
    /// RMS misfit of the records for `exact`, `chi^2` for `lsq`.
    pub residual: f64,
    pub degrees_of_freedom: Option<usize>,
    pub cond_p: BTreeMap<u32, f64>,
    pub psd_projected: bool,
    /// Standard errors of the real and imaginary parts of each entry.
    pub std_errors: Option<DMatrix<Complex64>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub correlations: CorrelationMatrix,
    pub diagnostics: Diagnostics,
}

pub trait Reconstructor: Named + Send + Sync {
    /// Reconstructs `G^K` from the records of order `k`; records of other
    /// orders are ignored.
    fn reconstruct(&self, records: &[MeasurementRecord], k: HalfInt, opts: &ReconstructOptions)
        -> Result<Reconstruction>;
}

/// Registry holding the built-in reconstruction strategies.
pub fn reconstructors() -> Registry<dyn Reconstructor> {
    let mut r: Registry<dyn Reconstructor> = Registry::new();
    r.register(Arc::new(ExactReconstructor));
    r.register(Arc::new(LeastSquaresReconstructor));
    r
}

/// Runs the strategy registered as `mode`.
pub fn reconstruct_correlations(
    records: &[MeasurementRecord],
    k: HalfInt,
    mode: &str,
    opts: &ReconstructOptions,
) -> Result<Reconstruction> {
    let strategy = reconstructors().get(mode).ok_or_else(|| {
        Error::InvalidInput(format!(
            "unknown reconstruction mode {mode:?}; available: {}",
            reconstructors().names().join(", ")
        ))
    })?;
    strategy.reconstruct(records, k, opts)
}

fn records_for(records: &[MeasurementRecord], k: HalfInt) -> Result<Vec<&MeasurementRecord>> {
    let own: Vec<&MeasurementRecord> = records.iter().filter(|r| r.k() == k).collect();
    for r in &own {
        if r.moments.values.len() != k.dim() {
            return Err(Error::InvalidInput(format!(
                "record for K = {k} has {} values, expected {}",
                r.moments.values.len(),
                k.dim()
            )));
        }
    }
    if own.is_empty() {
        return Err(Error::InvalidInput(format!("no records for K = {k}")));
    }
    Ok(own)
}

fn rms_misfit(g: &CorrelationMatrix, records: &[&MeasurementRecord]) -> Result<f64> {
    let k = g.k();
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in records {
        for (q, v) in k.projections().zip(&r.moments.values) {
            let pred = intensity_moment_multipole(g, q, r.moments.direction)?;
            sum += (pred - v).powi(2);
            n += 1;
        }
    }
    Ok((sum / n as f64).sqrt())
}

fn project_psd(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = g.clone().symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&clipped.map(Complex64::from)) * v.adjoint();
    hermitize(&mut out);
    out
}

/// Per-order discrete inversion over designed direction sets.
pub struct ExactReconstructor;

impl Named for ExactReconstructor {
    fn name(&self) -> &'static str {
        "exact"
    }
}

/// Splits records into direction blocks by their order tags, or, when no
/// record is tagged, into consecutive blocks of sizes `1, 3, 5, ...`.
fn group_by_order<'a>(records: &[&'a MeasurementRecord]) -> Result<BTreeMap<u32, Vec<&'a MeasurementRecord>>> {
    let tagged = records.iter().filter(|r| r.order.is_some()).count();
    let mut out: BTreeMap<u32, Vec<&MeasurementRecord>> = BTreeMap::new();
    if tagged == records.len() {
        for r in records {
            out.entry(r.order.expect("tagged")).or_default().push(r);
        }
    } else if tagged == 0 {
        let mut rest = records;
        let mut l = 0u32;
        while !rest.is_empty() {
            let n = (2 * l as usize + 1).min(rest.len());
            out.insert(l, rest[..n].to_vec());
            rest = &rest[n..];
            l += 1;
        }
    } else {
        return Err(Error::InvalidInput("records mix order-tagged and untagged entries".into()));
    }
    Ok(out)
}

impl Reconstructor for ExactReconstructor {
    fn reconstruct(
        &self,
        records: &[MeasurementRecord],
        k: HalfInt,
        opts: &ReconstructOptions,
    ) -> Result<Reconstruction> {
        let own = records_for(records, k)?;
        let groups = group_by_order(&own)?;
        let max_l = k.twice() as u32;
        let missing: Vec<String> = (0..=max_l).filter(|l| !groups.contains_key(l)).map(|l| l.to_string()).collect();
        if !missing.is_empty() {
            return Err(Error::InvalidInput(format!(
                "insufficient directions for K = {k}: no records for L = {}",
                missing.join(", ")
            )));
        }
        let mut warnings = Vec::new();
        for (l, g) in &groups {
            if *l > max_l {
                warnings.push(format!("ignored {} records tagged L = {l} > 2K", g.len()));
            } else if g.len() != 2 * *l as usize + 1 {
                return Err(Error::InvalidInput(format!(
                    "insufficient directions for K = {k}: L = {l} has {} records, needs {}",
                    g.len(),
                    2 * l + 1
                )));
            }
        }
        let solved = (0..=max_l)
            .into_par_iter()
            .map(|l| {
                let block = &groups[&l];
                let dirs = DirectionSet::new(l, block.iter().map(|r| r.moments.direction).collect())?;
                let data: Vec<f64> =
                    block.iter().map(|r| schur_transform_intensity(k, &r.moments.values, l)).collect();
                discrete_inversion_with_threshold(&data, &dirs, opts.cond_threshold)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cond_p = BTreeMap::new();
        let mut multipoles = Vec::with_capacity(solved.len());
        for s in solved {
            cond_p.insert(s.multipole.l, s.cond_p);
            warnings.extend(s.warning);
            multipoles.push(s.multipole);
        }
        let mut entries = inverse_schur_correlation(k, &multipoles)?.into_entries();
        hermitize(&mut entries);
        if opts.psd_project {
            entries = project_psd(&entries);
        }
        let correlations = CorrelationMatrix::new(k, entries)?;
        let used: Vec<&MeasurementRecord> =
            groups.iter().filter(|(l, _)| **l <= max_l).flat_map(|(_, g)| g.iter().copied()).collect();
        let residual = rms_misfit(&correlations, &used)?;
        Ok(Reconstruction {
            correlations,
            diagnostics: Diagnostics {
                k,
                mode: self.name().into(),
                residual,
                degrees_of_freedom: None,
                cond_p,
                psd_projected: opts.psd_project,
                std_errors: None,
                warnings,
            },
        })
    }
}

/// Weighted least squares over the Hermitian parameters of `G^K`.
pub struct LeastSquaresReconstructor;

impl Named for LeastSquaresReconstructor {
    fn name(&self) -> &'static str {
        "lsq"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["least_squares"]
    }
}

/// Real parameters of a Hermitian `n x n` matrix: the diagonal, then the
/// real and imaginary parts of each upper-triangle entry.
struct HermitianLayout {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl HermitianLayout {
    fn new(n: usize) -> Self {
        let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        HermitianLayout { n, pairs }
    }

    fn len(&self) -> usize {
        self.n * self.n
    }

    /// Coefficients of `sum_{ab} w_a conj(w_b) G_ab` in the parameters.
    fn row(&self, w: &[Complex64]) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.len());
        row.extend(w.iter().map(|x| x.norm_sqr()));
        for &(a, b) in &self.pairs {
            let z = w[a] * w[b].conj();
            row.push(2.0 * z.re);
            row.push(-2.0 * z.im);
        }
        row
    }

    fn assemble(&self, x: &DVector<f64>) -> DMatrix<Complex64> {
        let mut g = DMatrix::<Complex64>::zeros(self.n, self.n);
        for a in 0..self.n {
            g[(a, a)] = Complex64::from(x[a]);
        }
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            let z = Complex64::new(x[self.n + 2 * i], x[self.n + 2 * i + 1]);
            g[(a, b)] = z;
            g[(b, a)] = z.conj();
        }
        g
    }

    fn std_errors(&self, cov: &DMatrix<f64>) -> DMatrix<Complex64> {
        let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();
        let mut e = DMatrix::<Complex64>::zeros(self.n, self.n);
        for a in 0..self.n {
            e[(a, a)] = Complex64::from(sd(a));
        }
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            let z = Complex64::new(sd(self.n + 2 * i), sd(self.n + 2 * i + 1));
            e[(a, b)] = z;
            e[(b, a)] = z;
        }
        e
    }
}

fn distinct_directions(records: &[&MeasurementRecord]) -> usize {
    let mut seen: Vec<[f64; 3]> = Vec::new();
    for r in records {
        let v = r.moments.direction.to_cartesian();
        if !seen.iter().any(|u| u[0] * v[0] + u[1] * v[1] + u[2] * v[2] > 1.0 - 1e-12) {
            seen.push(v);
        }
    }
    seen.len()
}

/// Measurement uncertainty used as the row weight: the reported standard
/// error floored at `1/shots`, or 1 when neither is available.
fn row_sigma(reported: Option<f64>, shots: Option<u64>) -> f64 {
    match (reported, shots) {
        (Some(e), Some(n)) => e.max(1.0 / n as f64),
        (None, Some(n)) => 1.0 / n as f64,
        (Some(e), None) if e > 0.0 => e,
        _ => 1.0,
    }
}

impl Reconstructor for LeastSquaresReconstructor {
    fn reconstruct(
        &self,
        records: &[MeasurementRecord],
        k: HalfInt,
        opts: &ReconstructOptions,
    ) -> Result<Reconstruction> {
        if !(opts.lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be non-negative, got {}", opts.lambda)));
        }
        let own = records_for(records, k)?;
        let need = k.dim() * k.dim();
        let distinct = distinct_directions(&own);
        if distinct < need {
            return Err(Error::InvalidInput(format!(
                "insufficient directions for K = {k}: {distinct} distinct, least squares needs {need}"
            )));
        }
        let layout = HermitianLayout::new(k.dim());
        let channels: Vec<usize> = match opts.channels {
            Channels::Stretched => vec![0],
            Channels::All => (0..k.dim()).collect(),
        };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs = Vec::new();
        for r in &own {
            let d = wigner_d_matrix(k, r.moments.euler());
            for &c in &channels {
                let w: Vec<Complex64> = d.column(c).iter().copied().collect();
                let sigma = row_sigma(r.moments.std_errors.as_ref().map(|e| e[c]), r.moments.shots);
                rows.push(layout.row(&w).into_iter().map(|x| x / sigma).collect());
                rhs.push(r.moments.values[c] / sigma);
            }
        }
        let p = layout.len();
        let a = DMatrix::from_row_iterator(rows.len(), p, rows.into_iter().flatten());
        let b = DVector::from_vec(rhs);
        let sv = a.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let rank = sv.iter().filter(|&&s| s > smax * 1e-10).count();
        if rank < p {
            return Err(Error::RankDeficient(format!(
                "least-squares design for K = {k} has rank {rank} < {p}"
            )));
        }
        let ata = a.transpose() * &a;
        let m = &ata + DMatrix::<f64>::identity(p, p) * opts.lambda;
        let m_inv = m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::RankDeficient(format!("normal equations for K = {k} are singular")))?
            .inverse();
        let x = &m_inv * (a.transpose() * &b);
        let cov = &m_inv * &ata * &m_inv;
        let chi2 = (&a * &x - &b).norm_squared();
        let mut entries = layout.assemble(&x);
        let mut warnings = Vec::new();
        if opts.psd_project {
            let before = entries.clone();
            entries = project_psd(&entries);
            let shift = crate::fock::max_modulus(&(&entries - before));
            if shift > 0.0 {
                warnings.push(format!("PSD projection moved entries by up to {shift:.3e}"));
            }
        }
        Ok(Reconstruction {
            correlations: CorrelationMatrix::new(k, entries)?,
            diagnostics: Diagnostics {
                k,
                mode: self.name().into(),
                residual: chi2,
                degrees_of_freedom: Some(a.nrows().saturating_sub(p)),
                cond_p: BTreeMap::new(),
                psd_projected: opts.psd_project,
                std_errors: Some(layout.std_errors(&cov)),
                warnings,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::{Direction, EulerAngles};
    use crate::fock::{correlation_matrix, LayerState, TwoModeState};
    use crate::forward::{intensity_moments_direct, simulate_moments};
    use crate::recon::directions::design_directions;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    fn noiseless_records(st: &TwoModeState, k: HalfInt, tagged: bool) -> Vec<MeasurementRecord> {
        let mut out = Vec::new();
        for l in 0..=k.twice() as u32 {
            for d in design_directions(l, 1).directions {
                let v = intensity_moments_direct(st, k, EulerAngles::from_direction(d, 0.0));
                out.push(MeasurementRecord::new(IntensityMomentSet::noiseless(k, d, v), tagged.then_some(l)));
            }
        }
        out
    }

    #[test]
    fn registry_resolves_names() {
        let r = reconstructors();
        assert_eq!(r.names(), vec!["exact", "lsq"]);
        assert_eq!(r.get("least_squares").unwrap().name(), "lsq");
        let err = reconstruct_correlations(&[], h(1), "bayes", &ReconstructOptions::default()).unwrap_err();
        assert!(err.to_string().contains("exact, lsq"));
    }

    #[test]
    fn lsq_row_matches_direct_moment() {
        let k = h(3);
        let st = TwoModeState::single(LayerState::random(h(4), 5, 3).unwrap());
        let g = correlation_matrix(&st, k);
        let layout = HermitianLayout::new(k.dim());
        let mut params = Vec::new();
        for a in 0..k.dim() {
            params.push(g.entries()[(a, a)].re);
        }
        for &(a, b) in &layout.pairs {
            params.push(g.entries()[(a, b)].re);
            params.push(g.entries()[(a, b)].im);
        }
        let x = DVector::from_vec(params);
        assert!(crate::fock::max_modulus(&(layout.assemble(&x) - g.entries())) < 1e-15);
        let e = EulerAngles::new(0.7, 2.1, 0.4);
        let d = wigner_d_matrix(k, e);
        let direct = intensity_moments_direct(&st, k, e);
        for c in 0..k.dim() {
            let w: Vec<Complex64> = d.column(c).iter().copied().collect();
            let pred: f64 = layout.row(&w).iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            assert!((pred - direct[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_round_trip_tagged_and_untagged() {
        let st = TwoModeState::single(LayerState::random(h(4), 3, 8).unwrap());
        for k2 in 0..=4 {
            let k = h(k2);
            let truth = correlation_matrix(&st, k);
            for tagged in [true, false] {
                let recs = noiseless_records(&st, k, tagged);
                let rec = reconstruct_correlations(&recs, k, "exact", &ReconstructOptions::default()).unwrap();
                assert!(rec.correlations.max_abs_diff(&truth) < 1e-10, "K = {k}");
                assert!(rec.diagnostics.residual < 1e-10);
                assert_eq!(rec.diagnostics.cond_p.len(), k2 as usize + 1);
            }
        }
    }

    #[test]
    fn exact_rejects_missing_and_duplicate_directions() {
        let st = TwoModeState::fock(1, 1);
        let k = h(2);
        let mut recs = noiseless_records(&st, k, true);
        recs.retain(|r| r.order != Some(2));
        let err = reconstruct_correlations(&recs, k, "exact", &ReconstructOptions::default()).unwrap_err();
        assert!(err.to_string().contains("L = 2"), "{err}");

        let mut recs = noiseless_records(&st, k, true);
        let first_l1 = recs.iter().position(|r| r.order == Some(1)).unwrap();
        let dup = recs[first_l1].clone();
        recs[first_l1 + 1] = dup;
        let err = reconstruct_correlations(&recs, k, "exact", &ReconstructOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(ref m) if m.contains("L = 1")), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn orders_are_isolated() {
        let st = TwoModeState::single(LayerState::random(h(2), 3, 4).unwrap());
        let mut recs = noiseless_records(&st, h(1), true);
        let base = reconstruct_correlations(&recs, h(1), "exact", &ReconstructOptions::default()).unwrap();
        let mut other = noiseless_records(&st, h(2), true);
        for r in &mut other {
            r.moments.values.iter_mut().for_each(|v| *v += 100.0);
        }
        recs.extend(other);
        let again = reconstruct_correlations(&recs, h(1), "exact", &ReconstructOptions::default()).unwrap();
        assert_eq!(base.correlations, again.correlations);
    }

    #[test]
    fn lsq_noiseless_recovers_truth() {
        let st = TwoModeState::single(LayerState::random(h(3), 4, 6).unwrap());
        for k2 in 1..=3 {
            let k = h(k2);
            let truth = correlation_matrix(&st, k);
            let mut recs = Vec::new();
            for l in 0..=2 * k2 as u32 {
                for d in design_directions(l, 3).directions {
                    let v = intensity_moments_direct(&st, k, EulerAngles::from_direction(d, 0.0));
                    recs.push(MeasurementRecord::new(IntensityMomentSet::noiseless(k, d, v), Some(l)));
                }
            }
            for channels in [Channels::Stretched, Channels::All] {
                let opts = ReconstructOptions { channels, ..Default::default() };
                let rec = reconstruct_correlations(&recs, k, "least_squares", &opts).unwrap();
                assert!(rec.correlations.max_abs_diff(&truth) < 1e-9, "K = {k}");
                assert!(rec.correlations.hermiticity_defect() == 0.0);
                assert!(rec.diagnostics.residual < 1e-16);
            }
        }
    }

    #[test]
    fn lsq_needs_enough_directions() {
        let st = TwoModeState::fock(1, 0);
        let k = h(1);
        let recs: Vec<_> = DirectionSet::axes()
            .directions
            .into_iter()
            .map(|d| {
                let v = intensity_moments_direct(&st, k, EulerAngles::from_direction(d, 0.0));
                MeasurementRecord::new(IntensityMomentSet::noiseless(k, d, v), None)
            })
            .collect();
        let err = reconstruct_correlations(&recs, k, "lsq", &ReconstructOptions::default()).unwrap_err();
        assert!(err.to_string().contains("3 distinct"), "{err}");
    }

    #[test]
    fn lsq_regularization_and_psd_projection() {
        let st = TwoModeState::fock(1, 0);
        let k = h(1);
        let dirs = [
            Direction::new(0.3, 0.0),
            Direction::new(1.4, 0.5),
            Direction::new(2.0, 2.5),
            Direction::new(2.7, 4.4),
            Direction::new(1.0, 3.3),
        ];
        let recs: Vec<_> = dirs
            .iter()
            .enumerate()
            .map(|(i, d)| MeasurementRecord::new(simulate_moments(&st, k, *d, 0.0, 2000, i as u64).unwrap(), None))
            .collect();
        let plain = reconstruct_correlations(&recs, k, "lsq", &ReconstructOptions::default()).unwrap();
        let ridge = ReconstructOptions { lambda: 1e6, ..Default::default() };
        let shrunk = reconstruct_correlations(&recs, k, "lsq", &ridge).unwrap();
        let norm = |g: &CorrelationMatrix| g.entries().iter().map(|c| c.norm_sqr()).sum::<f64>();
        assert!(norm(&shrunk.correlations) < norm(&plain.correlations));
        let psd = ReconstructOptions { psd_project: true, ..Default::default() };
        let projected = reconstruct_correlations(&recs, k, "lsq", &psd).unwrap();
        assert!(projected.correlations.min_eigenvalue() > -1e-12);
        assert!(projected.diagnostics.psd_projected);
        let bad = ReconstructOptions { lambda: -1.0, ..Default::default() };
        assert!(reconstruct_correlations(&recs, k, "lsq", &bad).is_err());
    }

    #[test]
    fn sigma_floor() {
        assert_eq!(row_sigma(Some(0.0), Some(100)), 0.01);
        assert_eq!(row_sigma(Some(0.5), Some(100)), 0.5);
        assert_eq!(row_sigma(Some(0.0), None), 1.0);
        assert_eq!(row_sigma(None, None), 1.0);
        assert_eq!(row_sigma(Some(0.2), None), 0.2);
    }
}
