//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when a criterion fails that is not listed in `KNOWN_RED`.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use polariscope::angular::{clebsch_gordan, spherical_harmonic, wigner_d, wigner_d_matrix};
use polariscope::fock::{apply_tensor, max_modulus, correlation_matrix, tensor_matrix, tensor_norm_sum};
use polariscope::forward::{
    intensity_moment_direct, intensity_moment_multipole, intensity_moments_direct, simulate_moments,
    IntensityMomentSet,
};
use polariscope::recon::{
    continuous_inversion, design_directions, discrete_inversion, first_order_inversion, min_line_angle,
    reconstruct_correlations, DirectionSet, MeasurementRecord, QuadratureGrid, ReconstructOptions,
};
use polariscope::{Direction, Error, EulerAngles, HalfInt, LayerState, TensorIndex, TwoModeState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Criteria that are expected to fail; see the decisions ledger.
const KNOWN_RED: &[&str] = &["6a"];

type Check = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn h(twice: i32) -> HalfInt {
    HalfInt::from_twice(twice)
}

fn spins(max_twice: i32) -> impl Iterator<Item = HalfInt> {
    (0..=max_twice).map(h)
}

fn random_euler(rng: &mut ChaCha8Rng) -> EulerAngles {
    let z: f64 = rng.random_range(-1.0..1.0);
    EulerAngles::new(rng.random_range(0.0..2.0 * PI), z.acos(), rng.random_range(0.0..2.0 * PI))
}

fn random_direction(rng: &mut ChaCha8Rng) -> Direction {
    let z: f64 = rng.random_range(-1.0..1.0);
    Direction::new(z.acos(), rng.random_range(0.0..2.0 * PI))
}

fn random_amplitudes(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Mixed state over layers `0..=s_max_twice / 2` with random weights, or a
/// single random layer.
fn random_state(s_max: HalfInt, seed: u64, mixed: bool) -> TwoModeState {
    if !mixed {
        let rank = 1 + (seed as usize) % s_max.dim();
        return TwoModeState::single(LayerState::random(s_max, rank, seed).unwrap());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers: Vec<HalfInt> = spins(s_max.twice()).collect();
    let raw: Vec<f64> = layers.iter().map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let parts = layers
        .iter()
        .zip(&raw)
        .enumerate()
        .map(|(i, (s, w))| {
            LayerState::random(*s, 1 + i % s.dim(), seed.wrapping_mul(31).wrapping_add(i as u64))
                .unwrap()
                .with_weight(w / total)
        })
        .collect();
    TwoModeState::from_layers(parts).unwrap()
}

fn noiseless_records(state: &TwoModeState, k: HalfInt, seed: u64) -> Vec<MeasurementRecord> {
    let mut out = Vec::new();
    for l in 0..=k.twice() as u32 {
        for dir in design_directions(l, seed).directions {
            let values = intensity_moments_direct(state, k, EulerAngles::from_direction(dir, 0.0));
            out.push(MeasurementRecord::new(IntensityMomentSet::noiseless(k, dir, values), Some(l)));
        }
    }
    out
}

fn binomial_exact(n: u64, k: u64) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

fn c1_covariance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let rotations: Vec<EulerAngles> = (0..50).map(|_| random_euler(&mut rng)).collect();
    let mut worst = 0.0f64;
    for s in spins(4) {
        for k in spins(3) {
            for g in &rotations {
                let d_target = wigner_d_matrix(s + k, *g);
                let d_source = wigner_d_matrix(s, *g);
                let tensors: Vec<DMatrix<Complex64>> = k
                    .projections()
                    .map(|q| tensor_matrix(TensorIndex::new(k, q).unwrap(), s).map(Complex64::from))
                    .collect();
                for (a, q) in k.projections().enumerate() {
                    let lhs = &d_target * &tensors[a] * d_source.adjoint();
                    let mut rhs = DMatrix::<Complex64>::zeros(lhs.nrows(), lhs.ncols());
                    for (b, qp) in k.projections().enumerate() {
                        rhs += &tensors[b] * wigner_d(k, qp, q, *g);
                    }
                    worst = worst.max(max_modulus(&(lhs - rhs)));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-10 && elapsed < Duration::from_secs(10),
        format!("max deviation {worst:.2e} over S <= 2, K <= 3/2, 50 rotations in {:.2} s", elapsed.as_secs_f64()),
    )
}

fn c2_vacuum_and_trace() -> Outcome {
    let vac = DVector::from_element(1, Complex64::ONE);
    let mut worst_vac = 0.0f64;
    for k in spins(6) {
        for q in k.projections() {
            let image = apply_tensor(TensorIndex::new(k, q).unwrap(), HalfInt::ZERO, &vac).unwrap();
            let mut expect = DVector::<Complex64>::zeros(k.dim());
            expect[k.index_of(q)] = Complex64::ONE;
            worst_vac = worst_vac.max((image - expect).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    let mut mismatches = 0;
    let mut checked = 0;
    for s in spins(8) {
        for k in spins(4) {
            let expected = binomial_exact((s.twice() + k.twice() + 1) as u64, (k.twice() + 1) as u64);
            for q in k.projections() {
                let got = tensor_norm_sum(s, TensorIndex::new(k, q).unwrap()).round() as u128;
                checked += 1;
                if got != expected {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(
        worst_vac < 1e-14 && mismatches == 0,
        format!("vacuum mapping max deviation {worst_vac:.2e}; trace identity {mismatches}/{checked} mismatches"),
    )
}

fn c3_forward_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for n in 0..100u64 {
        let s_max = h(1 + (n as i32) % 6);
        let state = random_state(s_max, 3000 + n, n % 2 == 0);
        let dirs: Vec<Direction> = (0..20).map(|_| random_direction(&mut rng)).collect();
        for k in spins(s_max.twice()) {
            let g = correlation_matrix(&state, k);
            for q in k.projections() {
                let idx = TensorIndex::new(k, q).unwrap();
                for dir in &dirs {
                    let direct = intensity_moment_direct(&state, idx, EulerAngles::from_direction(*dir, 0.0));
                    let multipole = intensity_moment_multipole(&g, q, *dir).unwrap();
                    worst = worst.max((direct - multipole).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-10 && elapsed < Duration::from_secs(60),
        format!("max |direct - multipole| {worst:.2e} over 100 states in {:.2} s", elapsed.as_secs_f64()),
    )
}

fn c4_pure_state_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for n in 0..50 {
        let k = h(1 + n % 6);
        let amps = random_amplitudes(k.dim(), &mut rng);
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<Complex64> = amps.iter().map(|a| a / norm).collect();
        let state = TwoModeState::single(LayerState::pure(k, &psi).unwrap());
        let g = correlation_matrix(&state, k);
        for a in 0..k.dim() {
            for b in 0..k.dim() {
                worst = worst.max((g.entries()[(a, b)] - psi[a].conj() * psi[b]).norm());
            }
        }
    }
    outcome(worst < 1e-12, format!("max deviation {worst:.2e} over 50 pure states"))
}

fn c5_continuous_inversion() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut unexpected = Vec::new();
    for s in spins(3) {
        let state = random_state(s, 500 + s.twice() as u64, true);
        for k in spins(s.twice()) {
            let grid = QuadratureGrid::for_order(k);
            let truth = correlation_matrix(&state, k);
            for q in k.projections() {
                let vanishing = (0..=k.twice())
                    .any(|l| clebsch_gordan(k, q, k, -q, HalfInt::integer(l), HalfInt::ZERO).abs() < 1e-12);
                let sampler = |dir: Direction| {
                    let values = intensity_moments_direct(&state, k, EulerAngles::from_direction(dir, 0.0));
                    IntensityMomentSet::noiseless(k, dir, values)
                };
                match (continuous_inversion(sampler, k, q, &grid), vanishing) {
                    (Ok(g), false) => {
                        cases += 1;
                        worst = worst.max(g.max_abs_diff(&truth));
                    }
                    (Err(Error::VanishingCoefficient { .. }), true) => {}
                    (r, _) => unexpected.push(format!("S={s} K={k} q={q}: {:?}", r.err())),
                }
            }
        }
    }
    let state = random_state(h(2), 555, false);
    let k1_rejected = matches!(
        continuous_inversion(
            |dir: Direction| {
                let values = intensity_moments_direct(&state, HalfInt::ONE, EulerAngles::from_direction(dir, 0.0));
                IntensityMomentSet::noiseless(HalfInt::ONE, dir, values)
            },
            HalfInt::ONE,
            HalfInt::ZERO,
            &QuadratureGrid::for_order(HalfInt::ONE),
        ),
        Err(Error::VanishingCoefficient { .. })
    );
    outcome(
        worst < 1e-8 && unexpected.is_empty() && k1_rejected,
        format!(
            "max round-trip error {worst:.2e} over {cases} admissible (S, K, q); K=1 q=0 rejected: {k1_rejected}{}",
            if unexpected.is_empty() { String::new() } else { format!("; unexpected: {}", unexpected.join(", ")) }
        ),
    )
}

fn c6a_axis_first_order() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let axes = DirectionSet::axes();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let values: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let solved = discrete_inversion(&values, &axes).unwrap().multipole;
        let literal = first_order_inversion(values[0], values[1], values[2]);
        for m in -1..=1 {
            worst = worst.max((solved.get(m) - literal.get(m)).norm());
        }
    }
    outcome(worst < 1e-12, format!("axis solve vs first-order matrix action: max deviation {worst:.2e}"))
}

fn c6b_pipeline_round_trip() -> Outcome {
    let opts = ReconstructOptions::default();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for s in spins(6) {
        let state = random_state(s, 600 + s.twice() as u64, true);
        for k in spins(s.twice()) {
            let records = noiseless_records(&state, k, 1);
            match reconstruct_correlations(&records, k, "exact", &opts) {
                Ok(rec) => worst = worst.max(rec.correlations.max_abs_diff(&correlation_matrix(&state, k))),
                Err(e) => failures.push(format!("S={s} K={k}: {e}")),
            }
        }
    }
    outcome(
        worst < 1e-8 && failures.is_empty(),
        format!("max |dG| {worst:.2e} for S <= 3, K <= S{}", if failures.is_empty() { String::new() } else { format!("; errors: {}", failures.join(", ")) }),
    )
}

fn c7_first_order_column() -> Outcome {
    let v = first_order_inversion(1.0, 0.0, 0.0);
    let r = 1.0 / 3f64.sqrt();
    let expected = [Complex64::from(-r), Complex64::ZERO, Complex64::from(r)];
    let got = [v.get(1), v.get(0), v.get(-1)];
    let worst = got.iter().zip(&expected).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    outcome(worst < 1e-15, format!("(1,0,0) -> ({}, {}, {}), max deviation {worst:.2e}", got[0], got[1], got[2]))
}

fn c8_direction_design() -> Outcome {
    let one = design_directions(1, 0);
    let two = design_directions(2, 0);
    let a1 = min_line_angle(&one.directions).to_degrees();
    let a2 = min_line_angle(&two.directions).to_degrees();
    let conds: Vec<f64> = (0..=4).map(|l| design_directions(l, 0).cond_p).collect();
    let pass = (a1 - 90.0).abs() < 1e-6 && a2 >= 63.43 && conds.iter().all(|c| *c < 100.0);
    outcome(pass, format!("L=1 {a1:.7} deg, L=2 {a2:.5} deg, cond(P_L) for L=0..4: {conds:.2?}"))
}

fn c9_statistical_recovery() -> Outcome {
    let start = Instant::now();
    let state = TwoModeState::fock(1, 0);
    let k = HalfInt::HALF;
    let dirs: Vec<Direction> = (1..=2).flat_map(|l| design_directions(l, 0).directions).collect();
    let total_shots = 1_000_000u64;
    let per_dir = total_shots / dirs.len() as u64;
    let truth = correlation_matrix(&state, k);
    let opts = ReconstructOptions::default();
    let reps = 40;
    let mut covered = 0;
    for rep in 0..reps {
        let records: Vec<MeasurementRecord> = dirs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let seed = 9_000_000 + rep * 100 + i as u64;
                MeasurementRecord::new(simulate_moments(&state, k, *d, 0.0, per_dir, seed).unwrap(), None)
            })
            .collect();
        let rec = reconstruct_correlations(&records, k, "lsq", &opts).unwrap();
        let se = rec.diagnostics.std_errors.clone().unwrap();
        let g = rec.correlations.entries();
        let t = truth.entries();
        let within = (0..2).all(|a| {
            (0..2).all(|b| {
                let d = g[(a, b)] - t[(a, b)];
                d.re.abs() <= 3.0 * se[(a, b)].re && (a == b || d.im.abs() <= 3.0 * se[(a, b)].im)
            })
        });
        if within {
            covered += 1;
        }
    }
    let elapsed = start.elapsed();
    let frac = f64::from(covered) / reps as f64;
    outcome(
        frac >= 0.95 && elapsed < Duration::from_secs(300),
        format!("{covered}/{reps} repetitions within 3 standard errors ({} directions) in {:.2} s", dirs.len(), elapsed.as_secs_f64()),
    )
}

fn c10_quadrature_gram() -> Outcome {
    let grid = QuadratureGrid::for_order(h(6));
    let labels: Vec<(i32, i32)> = (0..=6).flat_map(|l| (-l..=l).map(move |m| (l, m))).collect();
    let mut worst = 0.0f64;
    for (i, &(l1, m1)) in labels.iter().enumerate() {
        for (j, &(l2, m2)) in labels.iter().enumerate() {
            let v = grid.integrate_complex(|d| spherical_harmonic(l1, m1, d) * spherical_harmonic(l2, m2, d).conj());
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).norm());
        }
    }
    outcome(worst < 1e-12, format!("max |Gram - I| {worst:.2e} for L <= 6 ({} x {})", labels.len(), labels.len()))
}

fn run_cli(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_polariscope"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn polariscope");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn cli_script(dir: &Path) -> Result<(f64, Vec<Vec<u8>>), String> {
    let steps: [&[&str]; 4] = [
        &["gen-state", "--family", "random", "--spin", "1", "--rank", "2", "--seed", "7", "--out", "state.json"],
        &["simulate", "--state", "state.json", "--K", "0.5,1", "--out", "meas.json"],
        &["reconstruct", "--measurements", "meas.json", "--mode", "exact", "--out", "recon.json"],
        &["verify", "--state", "state.json", "--reconstruction", "recon.json", "--out", "verify.csv"],
    ];
    let mut last = String::new();
    for step in steps {
        let (code, text) = run_cli(dir, step);
        if code != 0 {
            return Err(format!("`{}` exited {code}: {}", step[0], text.trim()));
        }
        last = text;
    }
    let err = last
        .lines()
        .find_map(|l| l.strip_prefix("verified: max |dG| = "))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| format!("unexpected verify output: {last}"))?;
    let bytes = ["state.json", "meas.json", "recon.json", "verify.csv"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((err, bytes))
}

fn c11_cli_end_to_end() -> Outcome {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    match (cli_script(first.path()), cli_script(second.path())) {
        (Ok((err, a)), Ok((_, b))) => {
            let identical = a == b;
            outcome(err < 1e-8 && identical, format!("verify max |dG| {err:.2e}; rerun byte-identical: {identical}"))
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn main() {
    let criteria: [Check; 12] = [
        ("1", "covariance", c1_covariance),
        ("2", "vacuum mapping and trace identity", c2_vacuum_and_trace),
        ("3", "forward-model equivalence", c3_forward_equivalence),
        ("4", "pure-state correlation law", c4_pure_state_law),
        ("5", "continuous inversion", c5_continuous_inversion),
        ("6a", "axis-direction first-order path", c6a_axis_first_order),
        ("6b", "discrete pipeline round trip", c6b_pipeline_round_trip),
        ("7", "first-order column", c7_first_order_column),
        ("8", "direction design", c8_direction_design),
        ("9", "statistical recovery", c9_statistical_recovery),
        ("10", "quadrature exactness", c10_quadrature_gram),
        ("11", "end-to-end CLI", c11_cli_end_to_end),
    ];
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let o = check();
        let known = KNOWN_RED.contains(&id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known red)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {tag}: {name}: {}", o.detail);
        if o.pass == known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria match their expected status");
    } else {
        println!("acceptance: unexpected status for criteria {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
