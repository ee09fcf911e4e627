//! Batch command-line driver: state generation, direction design,
//! measurement simulation, reconstruction and verification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::angular::{Direction, EulerAngles, HalfInt};
use crate::error::{Error, Result};
use crate::fock::{correlation_matrix, max_modulus, LayerState, TwoModeState};
use crate::forward::{intensity_moments_direct, simulate_moments, IntensityMomentSet};
use crate::io::{
    read_json, write_atomic, write_json, DiagnosticsJson, DirectionsFile, MeasurementsFile, RecordJson,
    ReconstructionFile, RunManifest, StateFile,
};
use crate::recon::{
    design_directions, reconstruct_correlations, schur_multipoles, Channels, DirectionSet, MeasurementRecord,
    ReconstructOptions,
};

#[derive(Debug, Parser)]
#[command(name = "polariscope", version, about = "Polarization multipole simulation and tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a two-mode state file.
    GenState(GenStateArgs),
    /// Design 2L+1 measurement directions for multipole order L.
    Directions(DirectionsArgs),
    /// Simulate intensity-moment measurements of a state.
    Simulate(SimulateArgs),
    /// Reconstruct correlation matrices from measurements.
    Reconstruct(ReconstructArgs),
    /// Compare reconstructions against a state's exact correlations.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    PureLayer,
    Random,
    Noon,
    Manual,
}

#[derive(Debug, Args)]
pub struct GenStateArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Layer spin S (photon number 2S), e.g. 0.5 or 1.
    #[arg(long)]
    pub spin: Option<f64>,
    /// Comma-separated amplitudes for m = S ... -S, e.g. "1,0" or "0.6,0.8i".
    #[arg(long)]
    pub amps: Option<String>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Photon number of the NOON state.
    #[arg(long)]
    pub n: Option<u32>,
    /// State file to validate and re-emit.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DirectionsArgs {
    #[arg(long = "L")]
    pub l: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Direction files; designed sets for every missing order when omitted.
    #[arg(long, num_args = 1..)]
    pub directions: Vec<PathBuf>,
    /// Comma-separated orders K, e.g. "0.5,1".
    #[arg(long = "K")]
    pub k: String,
    /// Shots per setting, or "noiseless".
    #[arg(long, default_value = "noiseless")]
    pub shots: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Third Euler angle of every gadget setting.
    #[arg(long, default_value_t = 0.0)]
    pub psi: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChannelArg {
    Stretched,
    All,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub measurements: PathBuf,
    /// Strategy name: exact or lsq.
    #[arg(long, default_value = "exact")]
    pub mode: String,
    /// Comma-separated orders to reconstruct; all present orders by default.
    #[arg(long = "K")]
    pub k: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long)]
    pub psd_project: bool,
    #[arg(long, value_enum, default_value_t = ChannelArg::Stretched)]
    pub channels: ChannelArg,
    /// Ground-truth state; prints max |dG| when given.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub reconstruction: PathBuf,
    #[arg(long = "K")]
    pub k: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// CSV report of per-(K, L) multipole norms and errors.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenState(a) => cmd_gen_state(&a),
        Command::Directions(a) => cmd_directions(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a),
        Command::Verify(a) => cmd_verify(&a),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn parse_orders(s: &str) -> Result<Vec<HalfInt>> {
    let mut out = BTreeSet::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let x: f64 = tok.parse().map_err(|_| Error::InvalidInput(format!("bad order {tok:?}")))?;
        let k = HalfInt::from_f64(x)?;
        if k.twice() < 0 {
            return Err(Error::InvalidInput(format!("negative order {tok}")));
        }
        out.insert(k);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("no orders given".into()));
    }
    Ok(out.into_iter().collect())
}

/// `None` for the literal `noiseless`, otherwise a shot count of at least 1.
pub fn parse_shots(s: &str) -> Result<Option<u64>> {
    if s.eq_ignore_ascii_case("noiseless") {
        return Ok(None);
    }
    match s.parse::<u64>() {
        Ok(0) => Err(Error::InvalidInput("shots must be at least 1 or \"noiseless\"".into())),
        Ok(n) => Ok(Some(n)),
        Err(_) => Err(Error::InvalidInput(format!("shots must be an integer or \"noiseless\", got {s:?}"))),
    }
}

fn parse_amplitudes(s: &str) -> Result<Vec<Complex64>> {
    s.split(',')
        .map(str::trim)
        .map(|t| t.parse::<Complex64>().map_err(|_| Error::InvalidInput(format!("bad amplitude {t:?}"))))
        .collect()
}

fn require<T: Copy>(v: Option<T>, flag: &str, family: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidInput(format!("--{flag} is required for family {family}")))
}

fn cmd_gen_state(a: &GenStateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("gen-state");
    let (state, family) = match a.family {
        Family::PureLayer => {
            let spin = HalfInt::from_f64(require(a.spin, "spin", "pure-layer")?)?;
            let amps = a.amps.as_deref().ok_or_else(|| Error::InvalidInput("--amps is required".into()))?;
            manifest = manifest.flag("spin", spin).flag("amps", amps);
            (TwoModeState::single(LayerState::pure(spin, &parse_amplitudes(amps)?)?), "pure-layer")
        }
        Family::Random => {
            let spin = HalfInt::from_f64(require(a.spin, "spin", "random")?)?;
            let rank = a.rank.unwrap_or(spin.dim().max(1));
            manifest = manifest.flag("spin", spin).flag("rank", rank);
            manifest.seed = Some(a.seed);
            (TwoModeState::single(LayerState::random(spin, rank, a.seed)?), "random")
        }
        Family::Noon => {
            let n = require(a.n, "n", "noon")?;
            if n == 0 {
                return Err(Error::InvalidInput("NOON state needs n >= 1".into()));
            }
            let spin = HalfInt::from_twice(n as i32);
            let mut amps = vec![Complex64::ZERO; spin.dim()];
            amps[0] = Complex64::ONE;
            amps[spin.dim() - 1] = Complex64::ONE;
            manifest = manifest.flag("n", n);
            (TwoModeState::single(LayerState::pure(spin, &amps)?), "noon")
        }
        Family::Manual => {
            let from = a.from.as_ref().ok_or_else(|| Error::InvalidInput("--from is required for manual".into()))?;
            let file: StateFile = read_json(from)?;
            manifest.inputs.push(path_str(from));
            (file.to_state()?, "manual")
        }
    };
    manifest = manifest.flag("family", family);
    manifest.outputs.push(path_str(&a.out));
    write_json(&a.out, &StateFile::from_state(&state, Some(manifest)))?;
    for l in state.layers() {
        println!("layer S = {}: weight {:.6}", l.spin(), l.weight());
    }
    Ok(())
}

fn cmd_directions(a: &DirectionsArgs) -> Result<()> {
    let set = design_directions(a.l, a.seed);
    let mut manifest = RunManifest::new("directions").flag("L", a.l);
    manifest.seed = Some(a.seed);
    manifest.outputs.push(path_str(&a.out));
    write_json(&a.out, &DirectionsFile::from_set(&set, a.seed, Some(manifest)))?;
    println!(
        "L = {}: {} directions, min line angle {:.6} deg, cond(P_L) = {:.4}",
        set.l,
        set.directions.len(),
        set.min_angle_deg,
        set.cond_p
    );
    Ok(())
}

/// Decorrelated per-record seed.
fn record_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let orders = parse_orders(&a.k)?;
    let shots = parse_shots(&a.shots)?;
    let state_file: StateFile = read_json(&a.state)?;
    let state = state_file.to_state()?;
    let max_l = orders.iter().map(|k| k.twice() as u32).max().unwrap_or(0);

    let mut sets: BTreeMap<u32, DirectionSet> = BTreeMap::new();
    for p in &a.directions {
        let f: DirectionsFile = read_json(p)?;
        sets.insert(f.l, f.to_set()?);
    }
    if a.directions.is_empty() {
        for l in 0..=max_l {
            sets.insert(l, design_directions(l, a.seed));
        }
    }
    let missing: Vec<String> = (0..=max_l).filter(|l| !sets.contains_key(l)).map(|l| l.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::InvalidInput(format!("direction files missing for L = {}", missing.join(", "))));
    }

    let mut jobs: Vec<(HalfInt, u32, Direction)> = Vec::new();
    for &k in &orders {
        for (&l, set) in &sets {
            if l <= k.twice() as u32 || !a.directions.is_empty() {
                jobs.extend(set.directions.iter().map(|&d| (k, l, d)));
            }
        }
    }
    let records = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(k, l, d))| {
            let moments = match shots {
                None => {
                    let v = intensity_moments_direct(&state, k, EulerAngles::from_direction(d, a.psi));
                    IntensityMomentSet { psi: Some(a.psi), ..IntensityMomentSet::noiseless(k, d, v) }
                }
                Some(n) => simulate_moments(&state, k, d, a.psi, n, record_seed(a.seed, i))?,
            };
            Ok(RecordJson::from_record(&MeasurementRecord::new(moments, Some(l))))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = RunManifest::new("simulate").flag("psi", a.psi);
    manifest.inputs.push(path_str(&a.state));
    manifest.inputs.extend(a.directions.iter().map(|p| path_str(p)));
    manifest.outputs.push(path_str(&a.out));
    manifest.seed = Some(a.seed);
    manifest.shots = Some(shots.map_or_else(|| "noiseless".to_string(), |n| n.to_string()));
    manifest.k_x2 = orders.iter().map(|k| k.twice()).collect();
    let n = records.len();
    write_json(&a.out, &MeasurementsFile { manifest: Some(manifest), records })?;
    println!("wrote {n} records for K = {}", orders.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", "));
    Ok(())
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.measurements)?;
    let file = MeasurementsFile::parse(&text)?;
    let records = file.records()?;
    let present: BTreeSet<HalfInt> = records.iter().map(|r| r.k()).collect();
    let orders = match &a.k {
        Some(s) => parse_orders(s)?,
        None => present.iter().copied().collect(),
    };
    let opts = ReconstructOptions {
        lambda: a.lambda,
        psd_project: a.psd_project,
        channels: match a.channels {
            ChannelArg::Stretched => Channels::Stretched,
            ChannelArg::All => Channels::All,
        },
        ..Default::default()
    };
    let truth = a.state.as_ref().map(|p| read_json::<StateFile>(p).and_then(|f| f.to_state())).transpose()?;

    let mut out = Vec::new();
    for &k in &orders {
        let rec = reconstruct_correlations(&records, k, &a.mode, &opts)?;
        let d = &rec.diagnostics;
        match d.degrees_of_freedom {
            Some(dof) => println!("K = {k} [{}]: chi2 = {:.6e} (dof {dof})", d.mode, d.residual),
            None => println!("K = {k} [{}]: rms residual = {:.3e}", d.mode, d.residual),
        }
        if let Some(se) = &d.std_errors {
            for (i, q) in k.projections().enumerate() {
                for (j, qp) in k.projections().enumerate() {
                    let g = rec.correlations.entries()[(i, j)];
                    let e = se[(i, j)];
                    println!(
                        "  G[{q}, {qp}] = {:+.6e} {:+.6e}i  +- ({:.2e}, {:.2e})",
                        g.re, g.im, e.re, e.im
                    );
                }
            }
        }
        for w in &d.warnings {
            eprintln!("warning: K = {k}: {w}");
        }
        if let Some(st) = &truth {
            println!("K = {k}: max |dG| = {:.3e}", rec.correlations.max_abs_diff(&correlation_matrix(st, k)));
        }
        out.push(DiagnosticsJson::from_reconstruction(&rec));
    }

    let mut manifest = RunManifest::new("reconstruct")
        .flag("mode", &a.mode)
        .flag("lambda", a.lambda)
        .flag("psd_project", a.psd_project)
        .flag("channels", format!("{:?}", opts.channels).to_lowercase());
    manifest.inputs.push(path_str(&a.measurements));
    manifest.inputs.extend(a.state.iter().map(|p| path_str(p)));
    manifest.outputs.push(path_str(&a.out));
    manifest.k_x2 = orders.iter().map(|k| k.twice()).collect();
    write_json(&a.out, &ReconstructionFile { manifest: Some(manifest), reconstructions: out })
}

fn cmd_verify(a: &VerifyArgs) -> Result<()> {
    let state = read_json::<StateFile>(&a.state)?.to_state()?;
    let file: ReconstructionFile = read_json(&a.reconstruction)?;
    let wanted = a.k.as_deref().map(parse_orders).transpose()?;
    if let Some(ws) = &wanted {
        let have: BTreeSet<HalfInt> = file.reconstructions.iter().map(DiagnosticsJson::k).collect();
        let absent: Vec<String> = ws.iter().filter(|k| !have.contains(k)).map(|k| k.to_string()).collect();
        if !absent.is_empty() {
            return Err(Error::InvalidInput(format!(
                "K mismatch: reconstruction file has no K = {}",
                absent.join(", ")
            )));
        }
    }
    let mut csv = String::from("K_x2,L,norm_reconstructed,norm_truth,error\n");
    let mut worst = 0.0f64;
    for d in &file.reconstructions {
        let k = d.k();
        if wanted.as_ref().is_some_and(|ws| !ws.contains(&k)) {
            continue;
        }
        let got = d.correlations()?;
        let truth = correlation_matrix(&state, k);
        let err = max_modulus(&(got.entries() - truth.entries()));
        worst = worst.max(err);
        for (mg, mt) in schur_multipoles(&got).iter().zip(schur_multipoles(&truth)) {
            let diff: f64 =
                mg.components.iter().zip(&mt.components).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            writeln!(csv, "{},{},{:.12e},{:.12e},{:.12e}", k.twice(), mg.l, mg.norm(), mt.norm(), diff)
                .expect("string write");
        }
        println!("K = {k}: max |dG| = {err:.3e}");
    }
    if let Some(p) = &a.out {
        write_atomic(p, csv.as_bytes())?;
    } else {
        print!("{csv}");
    }
    if worst >= a.tol {
        return Err(Error::Verification(format!("max |dG| = {worst:.3e} >= tolerance {:.1e}", a.tol)));
    }
    println!("verified: max |dG| = {worst:.3e} < {:.1e}", a.tol);
    Ok(())
}
