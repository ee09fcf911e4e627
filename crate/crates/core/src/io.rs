//! JSON file schemas shared by the command-line driver, the run manifest
//! embedded in every output, and atomic file writes.
//!
//! Half-integer labels are written as doubled integers (`spin_x2`, `K_x2`,
//! `q_x2`) and complex numbers as `[re, im]` pairs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::angular::{Direction, HalfInt};
use crate::error::{Error, Result};
use crate::fock::{CoherenceBlock, LayerState, TwoModeState};
use crate::forward::IntensityMomentSet;
use crate::recon::{DirectionSet, MeasurementRecord, Reconstruction};

pub type ComplexMatrixJson = Vec<Vec<[f64; 2]>>;

/// Phase, ordering and angle conventions that outputs depend on.
pub const CONVENTIONS: &str = "rotation=zyz-active;wigner-D=exp(-i m' phi) d(theta) exp(-i m psi);\
cg=condon-shortley;basis-order=m-descending;schur-I-sign=(-1)^(K-q);schur-G-sign=(-1)^(K-q');\
line-angle=cos(phi_j-phi_k);discrete-solve=sqrt(4pi/(2L+1)) Y^T P^-1;detection=counter-rotated-state";

/// First 16 hex digits of the SHA-256 of [`CONVENTIONS`].
pub fn convention_fingerprint() -> String {
    hex::encode(&Sha256::digest(CONVENTIONS.as_bytes())[..8])
}

pub fn matrix_to_json(m: &DMatrix<Complex64>) -> ComplexMatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &ComplexMatrixJson) -> Result<DMatrix<Complex64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput("ragged complex matrix".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

/// Provenance block embedded in every output file. It carries no
/// timestamps, so identical invocations produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub shots: Option<String>,
    #[serde(rename = "K_x2")]
    pub k_x2: Vec<i32>,
    pub flags: BTreeMap<String, String>,
    pub tool_version: String,
    pub convention_fingerprint: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            shots: None,
            k_x2: Vec::new(),
            flags: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            convention_fingerprint: convention_fingerprint(),
        }
    }

    pub fn flag(mut self, key: &str, value: impl ToString) -> Self {
        self.flags.insert(key.into(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerJson {
    pub spin_x2: i32,
    pub weight: f64,
    pub rho: ComplexMatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceJson {
    pub lower_x2: i32,
    pub upper_x2: i32,
    pub block: ComplexMatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub layers: Vec<LayerJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherences: Option<Vec<CoherenceJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<RunManifest>,
}

impl StateFile {
    pub fn from_state(state: &TwoModeState, manifest: Option<RunManifest>) -> Self {
        let layers = state
            .layers()
            .iter()
            .map(|l| LayerJson { spin_x2: l.spin().twice(), weight: l.weight(), rho: matrix_to_json(l.rho()) })
            .collect();
        let coherences = (!state.coherences().is_empty()).then(|| {
            state
                .coherences()
                .iter()
                .map(|c| CoherenceJson {
                    lower_x2: c.lower.twice(),
                    upper_x2: c.upper.twice(),
                    block: matrix_to_json(&c.block),
                })
                .collect()
        });
        StateFile { layers, coherences, manifest }
    }

    pub fn to_state(&self) -> Result<TwoModeState> {
        let layers = self
            .layers
            .iter()
            .map(|l| LayerState::new(HalfInt::from_twice(l.spin_x2), l.weight, matrix_from_json(&l.rho)?))
            .collect::<Result<Vec<_>>>()?;
        let coherences = self
            .coherences
            .iter()
            .flatten()
            .map(|c| {
                Ok(CoherenceBlock {
                    lower: HalfInt::from_twice(c.lower_x2),
                    upper: HalfInt::from_twice(c.upper_x2),
                    block: matrix_from_json(&c.block)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TwoModeState::with_coherences(layers, coherences)
    }
}

/// One measured setting: `values` maps `q_x2` to `[estimate, std_error]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordJson {
    #[serde(rename = "K_x2")]
    pub k_x2: i32,
    pub theta: f64,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub values: BTreeMap<i32, [f64; 2]>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
}

impl RecordJson {
    pub fn from_record(r: &MeasurementRecord) -> Self {
        let m = &r.moments;
        let values = m
            .k
            .projections()
            .enumerate()
            .map(|(i, q)| {
                let err = m.std_errors.as_ref().map_or(0.0, |e| e[i]);
                (q.twice(), [m.values[i], err])
            })
            .collect();
        RecordJson {
            k_x2: m.k.twice(),
            theta: m.direction.theta,
            phi: m.direction.phi,
            psi: m.psi,
            shots: m.shots,
            values,
            order: r.order,
        }
    }

    pub fn to_record(&self) -> Result<MeasurementRecord> {
        if self.k_x2 < 0 {
            return Err(Error::InvalidInput(format!("negative K_x2 = {}", self.k_x2)));
        }
        let k = HalfInt::from_twice(self.k_x2);
        let mut values = Vec::with_capacity(k.dim());
        let mut errors = Vec::with_capacity(k.dim());
        for q in k.projections() {
            let [v, e] = self.values.get(&q.twice()).ok_or_else(|| {
                Error::InvalidInput(format!("record for K_x2 = {} lacks q_x2 = {}", self.k_x2, q.twice()))
            })?;
            values.push(*v);
            errors.push(*e);
        }
        if self.values.len() != k.dim() {
            return Err(Error::InvalidInput(format!("record for K_x2 = {} has extra q entries", self.k_x2)));
        }
        let std_errors = (self.shots.is_some() || errors.iter().any(|e| *e != 0.0)).then_some(errors);
        let moments = IntensityMomentSet {
            k,
            direction: Direction::new(self.theta, self.phi),
            psi: self.psi,
            values,
            std_errors,
            shots: self.shots,
        };
        Ok(MeasurementRecord::new(moments, self.order))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementsFile {
    pub manifest: Option<RunManifest>,
    pub records: Vec<RecordJson>,
}

impl MeasurementsFile {
    /// Accepts either the wrapped form or a bare array of records.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('[') {
            Ok(MeasurementsFile { manifest: None, records: serde_json::from_str(text)? })
        } else {
            Ok(serde_json::from_str(text)?)
        }
    }

    pub fn records(&self) -> Result<Vec<MeasurementRecord>> {
        self.records.iter().map(RecordJson::to_record).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsJson {
    #[serde(rename = "K_x2")]
    pub k_x2: i32,
    pub mode: String,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees_of_freedom: Option<usize>,
    #[serde(rename = "cond_P")]
    pub cond_p: BTreeMap<u32, f64>,
    pub psd_projected: bool,
    #[serde(rename = "G")]
    pub g: ComplexMatrixJson,
    #[serde(rename = "G_std_error", default, skip_serializing_if = "Option::is_none")]
    pub g_std_error: Option<ComplexMatrixJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DiagnosticsJson {
    pub fn from_reconstruction(r: &Reconstruction) -> Self {
        let d = &r.diagnostics;
        DiagnosticsJson {
            k_x2: d.k.twice(),
            mode: d.mode.clone(),
            residual: d.residual,
            degrees_of_freedom: d.degrees_of_freedom,
            cond_p: d.cond_p.clone(),
            psd_projected: d.psd_projected,
            g: matrix_to_json(r.correlations.entries()),
            g_std_error: d.std_errors.as_ref().map(matrix_to_json),
            warnings: d.warnings.clone(),
        }
    }

    pub fn k(&self) -> HalfInt {
        HalfInt::from_twice(self.k_x2)
    }

    pub fn correlations(&self) -> Result<crate::fock::CorrelationMatrix> {
        crate::fock::CorrelationMatrix::new(self.k(), matrix_from_json(&self.g)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionFile {
    pub manifest: Option<RunManifest>,
    pub reconstructions: Vec<DiagnosticsJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionsFile {
    #[serde(rename = "L")]
    pub l: u32,
    pub seed: u64,
    pub directions: Vec<Direction>,
    pub min_angle_deg: f64,
    #[serde(rename = "cond_P")]
    pub cond_p: f64,
    #[serde(rename = "cond_Y")]
    pub cond_y: f64,
    pub manifest: Option<RunManifest>,
}

impl DirectionsFile {
    pub fn from_set(set: &DirectionSet, seed: u64, manifest: Option<RunManifest>) -> Self {
        DirectionsFile {
            l: set.l,
            seed,
            directions: set.directions.clone(),
            min_angle_deg: set.min_angle_deg,
            cond_p: set.cond_p,
            cond_y: set.cond_y,
            manifest,
        }
    }

    pub fn to_set(&self) -> Result<DirectionSet> {
        DirectionSet::new(self.l, self.directions.clone())
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
