//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! ```text
//! cargo test -p candyman --test acceptance            # all criteria
//! cargo test -p candyman --test acceptance -- 1 2 7   # a subset
//! ```
//!
//! The process exits non-zero on a FAIL only when `CANDYMAN_ACCEPTANCE_STRICT=1`;
//! errors and panics inside a criterion count as FAIL. Trained models are cached
//! across criteria, so reruns for determinism reuse the first run.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::rc::Rc;
use std::time::Instant;

use candyman::dynamics::Trajectory;
use candyman::eval::{
    classify_bursting_behavior, classify_bursting_ensemble, estimate_period, mse_sweep, phase_speed_error,
    torus_angle_series, torus_angles, transition_smoothness, travelling_period, ArchPolicy, BurstingOptions,
    BurstingVerdict, Periodicity,
};
use candyman::experiment::{generate_data, train_model, write_dataset_dir, DataBundle, ExperimentConfig, Model};
use candyman::neighbor::{brute_force_k_nearest, KdTree};
use candyman::neuralnet::{backprop, loss_weighted_mse, Activation, Architecture, Mlp};
use candyman::systems::{
    gen_torus_quasiperiodic, ks_initial_condition, ks_series, ks_simulate, shape_phase_series, spatial_grid, torus_point,
    KsConfig, KsSolver,
};
use candyman::{Matrix, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

struct Run {
    config: ExperimentConfig,
    bundle: DataBundle,
    model: Model,
    traj: Trajectory,
}

fn run_preset(preset: &str, seed: u64) -> Result<Run> {
    let config = ExperimentConfig::preset(preset)?.with_overrides(Some(seed), None)?;
    let bundle = generate_data(&config)?;
    let model = train_model(&config, &bundle)?;
    let traj = model.default_rollout()?;
    Ok(Run {
        config,
        bundle,
        model,
        traj,
    })
}

#[derive(Default)]
struct Cache {
    runs: RefCell<HashMap<(String, u64), Rc<Run>>>,
}

impl Cache {
    fn get(&self, preset: &str, seed: u64) -> Result<Rc<Run>> {
        let key = (preset.to_string(), seed);
        if let Some(r) = self.runs.borrow().get(&key) {
            return Ok(r.clone());
        }
        let t = Instant::now();
        let r = Rc::new(run_preset(preset, seed)?);
        eprintln!("  [{preset} seed {seed} trained in {:.0}s]", t.elapsed().as_secs_f64());
        self.runs.borrow_mut().insert(key, r.clone());
        Ok(r)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

fn criterion_1(_: &Cache) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    let (mut worst, mut entries) = (0.0f64, 0usize);
    let n_nets = 120;
    for t in 0..n_nets {
        let depth = rng.random_range(1..=4);
        let mut dims = vec![rng.random_range(1..=4)];
        for _ in 1..depth {
            dims.push(rng.random_range(1..=6));
        }
        dims.push(rng.random_range(1..=3));
        let acts: Vec<Activation> = (0..depth)
            .map(|_| if rng.random_bool(0.7) { Activation::Elu } else { Activation::Linear })
            .collect();
        let mut mlp = Mlp::glorot(&Architecture::new(dims.clone(), acts)?, t);
        for s in mlp.param_slices_mut() {
            for v in s.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let n = rng.random_range(1..=6);
        let rand_matrix = |rng: &mut ChaCha8Rng, cols: usize| {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..cols).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            Matrix::from_rows(&rows)
        };
        let xs = rand_matrix(&mut rng, dims[0])?;
        let ys = rand_matrix(&mut rng, *dims.last().unwrap())?;
        let weights: Option<Vec<f64>> = rng.random_bool(0.5).then(|| (0..n).map(|_| rng.random_range(0.1..2.0)).collect());
        let (grads, _) = backprop(&mlp, &xs, &ys, weights.as_deref())?;
        let analytic: Vec<f64> = grads.slices().into_iter().flatten().copied().collect();
        let loss = |m: &Mlp| -> Result<f64> { loss_weighted_mse(&m.forward_batch(&xs)?, &ys, weights.as_deref()) };
        let mut k = 0;
        for s in 0..mlp.param_slices().len() {
            for j in 0..mlp.param_slices()[s].len() {
                let orig = mlp.param_slices()[s][j];
                mlp.param_slices_mut()[s][j] = orig + h;
                let up = loss(&mlp)?;
                mlp.param_slices_mut()[s][j] = orig - h;
                let down = loss(&mlp)?;
                mlp.param_slices_mut()[s][j] = orig;
                worst = worst.max(rel_err(analytic[k], (up - down) / (2.0 * h)));
                k += 1;
            }
        }
        entries += k;
    }
    Ok(Outcome::new(
        worst < 1e-5,
        format!("{n_nets} networks, {entries} gradient entries, worst relative error {worst:.2e} (limit 1e-5)"),
    ))
}

fn criterion_2(_: &Cache) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mismatches = 0;
    let instances = 1000;
    for _ in 0..instances {
        let n = rng.random_range(1..=300);
        let dim = rng.random_range(1..=6);
        let grid = rng.random_bool(0.5);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..dim)
                .map(|_| if grid { rng.random_range(0..4) as f64 } else { rng.random_range(-1.0..1.0) })
                .collect()
        };
        let rows: Vec<Vec<f64>> = (0..n).map(|_| draw(&mut rng)).collect();
        let points = Matrix::from_rows(&rows)?;
        let tree = KdTree::build(points.clone())?;
        let q = if rng.random_bool(0.3) { rows[rng.random_range(0..n)].clone() } else { draw(&mut rng) };
        let k = rng.random_range(1..=n.min(8));
        if tree.k_nearest(&q, k)? != brute_force_k_nearest(&points, &q, k, None)? {
            mismatches += 1;
        }
        if n > 1 {
            let i = rng.random_range(0..n);
            let k = rng.random_range(1..=(n - 1).min(8));
            if tree.k_nearest_excluding(i, k)? != brute_force_k_nearest(&points, &rows[i], k, Some(i))? {
                mismatches += 1;
            }
        }
    }
    Ok(Outcome::new(
        mismatches == 0,
        format!("{instances} instances (half on an integer grid with ties), {mismatches} mismatches"),
    ))
}

fn criterion_3(cache: &Cache) -> Result<Outcome> {
    let mut pass = true;
    let mut notes = Vec::new();
    for preset in ["s1", "s2", "s3", "s4", "s5", "s6"] {
        let run = cache.get(preset, 1)?;
        let atlas = &run.model.atlas;
        let n = atlas.len();
        let mut interior = vec![0usize; n];
        let mut covered = vec![false; n];
        for c in &atlas.charts {
            for &i in &c.domain.interior {
                interior[i] += 1;
                covered[i] = true;
                pass &= atlas.labels[i] == c.id;
            }
            for &i in &c.domain.border {
                covered[i] = true;
            }
        }
        let partition = interior.iter().all(|&k| k == 1);
        let coverage = covered.iter().all(|&c| c);
        let checks = atlas.overlap_consistency()?;
        let violations = checks
            .iter()
            .filter(|c| c.discrepancy > c.bound * (1.0 + 1e-12) + 1e-15)
            .count();
        pass &= partition && coverage && violations == 0;
        notes.push(format!(
            "{preset}: partition {partition}, coverage {coverage}, {} overlap checks, {violations} violations",
            checks.len()
        ));
    }
    Ok(Outcome::new(pass, notes.join("; ")))
}

fn smoothness_ratio(traj: &Trajectory) -> Option<f64> {
    transition_smoothness(traj).max_first_ratio()
}

fn criterion_4(cache: &Cache) -> Result<Outcome> {
    let run = cache.get("s1", 1)?;
    let traj = &run.traj;
    let states = traj.states()?;
    let radial = states
        .iter_rows()
        .map(|r| (r[0].hypot(r[1]) - 1.0).abs())
        .fold(0.0f64, f64::max);
    let period = estimate_period(&states, 1.0)?;
    let ratio = smoothness_ratio(traj);
    let period_ok = period.period().is_some_and(|p| (p - 40.0).abs() <= 1.0);
    let steps = traj.len() - 1;
    let pass = steps == 1000
        && radial <= 0.05
        && period_ok
        && !traj.transitions.is_empty()
        && ratio.is_some_and(|r| r < 5.0);
    Ok(Outcome::new(
        pass,
        format!(
            "{steps} steps, max |r - 1| {radial:.4} (limit 0.05), period {} (40 ± 1), {} transitions, max transition jump ratio {} (limit 5)",
            describe(&period),
            traj.transitions.len(),
            ratio.map_or("n/a".into(), |r| format!("{r:.2}"))
        ),
    ))
}

fn describe(p: &Periodicity) -> String {
    match p {
        Periodicity::Periodic(e) => format!("{:.3}", e.period),
        Periodicity::Aperiodic {
            best_lag_steps,
            relative_distance,
        } => format!("aperiodic (closest {relative_distance:.1e} at lag {best_lag_steps:.1})"),
        Periodicity::Constant => "constant".into(),
    }
}

fn max_surface_distance(states: &Matrix) -> Result<f64> {
    let mut worst = 0.0f64;
    for r in states.iter_rows() {
        worst = worst.max(torus_angles(r)?.distance);
    }
    Ok(worst)
}

fn criterion_5(cache: &Cache) -> Result<Outcome> {
    let run = cache.get("s2", 1)?;
    let states = run.traj.states()?;
    let dist = max_surface_distance(&states)?;
    let period = estimate_period(&states, 1.0)?;
    let period_ok = period.period().is_some_and(|p| (p - 100.0).abs() <= 2.0);
    let cycles = (run.traj.len() - 1) / 100;
    Ok(Outcome::new(
        cycles >= 10 && dist <= 0.05 && period_ok,
        format!(
            "seed 1, {cycles} cycles, max surface distance {dist:.4} (limit 0.05), period {} (100 ± 2)",
            describe(&period)
        ),
    ))
}

/// Windings over `lag` steps, averaged over several starting points.
fn windings(theta: &[f64], phi: &[f64], lag: usize) -> (f64, f64) {
    let starts: Vec<usize> = (0..8).map(|k| k * (theta.len() - lag - 1) / 8).collect();
    let mean = |a: &[f64]| starts.iter().map(|&s| (a[s + lag] - a[s]) / (2.0 * PI)).sum::<f64>() / starts.len() as f64;
    (mean(theta), mean(phi))
}

/// A periodic verdict is confirmed when both angles wind a whole number of turns
/// over the reported period.
fn lock_confirmed(states: &Matrix, period_steps: f64) -> Result<bool> {
    let (theta, phi, _) = torus_angle_series(states)?;
    let lag = period_steps.round() as usize;
    if lag == 0 || lag + 1 >= theta.len() {
        return Ok(false);
    }
    let (a, b) = windings(&theta, &phi, lag);
    Ok((a - a.round()).abs() < 0.05 && (b - b.round()).abs() < 0.05 && b.round() != 0.0)
}

fn criterion_6(cache: &Cache) -> Result<Outcome> {
    let mut notes = Vec::new();
    let mut best: Option<f64> = None;
    let mut flags_ok = true;

    let exact = gen_torus_quasiperiodic(50_000)?;
    let exact_verdict = estimate_period(exact.points(), 1.0)?;
    let dphi = 2.0 * PI / 150.0;
    let locked_rows: Vec<[f64; 3]> = (0..6000)
        .map(|i| {
            let phi = i as f64 * dphi;
            torus_point(0.3 + 1.75 * phi, phi)
        })
        .collect();
    let locked = Matrix::from_rows(&locked_rows)?;
    let locked_verdict = estimate_period(&locked, 1.0)?;
    let controls = !exact_verdict.is_periodic()
        && locked_verdict.period().is_some_and(|p| (p - 600.0).abs() < 0.5)
        && lock_confirmed(&locked, 600.0)?;
    flags_ok &= controls;
    notes.push(format!(
        "controls: exact data {}, 7:4 locked orbit {}",
        describe(&exact_verdict),
        describe(&locked_verdict)
    ));

    for seed in 1..=5 {
        let run = cache.get("s3", seed)?;
        let states = run.traj.states()?;
        let verdict = estimate_period(&states, 1.0)?;
        match phase_speed_error(&states, run.bundle.data.points()) {
            Ok(e) => {
                let worst = e.poloidal.abs().max(e.toroidal.abs());
                best = Some(best.map_or(worst, |b: f64| b.min(worst)));
                let confirmed = match verdict {
                    Periodicity::Periodic(p) => {
                        let ok = lock_confirmed(&states, p.period_steps)?;
                        flags_ok &= ok;
                        format!(", lock {}", if ok { "confirmed" } else { "NOT confirmed" })
                    }
                    _ => String::new(),
                };
                notes.push(format!(
                    "seed {seed}: poloidal {:+.2}%, toroidal {:+.2}%, {}{confirmed}",
                    100.0 * e.poloidal,
                    100.0 * e.toroidal,
                    describe(&verdict)
                ));
            }
            Err(e) => notes.push(format!("seed {seed}: {e}; {}", describe(&verdict))),
        }
    }
    let pass = best.is_some_and(|b| b <= 0.02) && flags_ok;
    Ok(Outcome::new(
        pass,
        format!(
            "best worst-direction phase-speed error {} (limit 2%); {}",
            best.map_or("n/a".into(), |b| format!("{:.2}%", 100.0 * b)),
            notes.join("; ")
        ),
    ))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_7(_: &Cache) -> Result<Outcome> {
    let nu = 16.0 / 337.0;
    let solver = KsSolver::new(KsConfig::new(nu))?.with_nonlinearity(false);
    let grid = spatial_grid(64);
    let mut linear = 0.0f64;
    for k in 1..=6 {
        let kf = k as f64;
        for shift in [0.0, 0.7] {
            let u0: Vec<f64> = grid.iter().map(|x| (kf * x + shift).cos()).collect();
            let out = solver.simulate(&u0, 100, 100)?;
            let factor = ((kf * kf - nu * kf.powi(4)) * 0.01).exp();
            let want: Vec<f64> = u0.iter().map(|v| factor * v).collect();
            linear = linear.max(max_diff(&out[1], &want) / factor);
        }
    }

    let u0 = ks_initial_condition(64);
    let run = |dt: f64| -> Result<Vec<f64>> {
        let config = KsConfig { nu, n_modes: 64, dt };
        let n = config.steps_for(0.1)?;
        Ok(ks_simulate(config, &u0, n, n)?.pop().unwrap())
    };
    let (a, b, c) = (run(1e-3)?, run(5e-4)?, run(2.5e-4)?);
    let order = (max_diff(&a, &b) / max_diff(&b, &c)).log2();

    let shifted: Vec<f64> = ks_initial_condition(64).iter().map(|v| v + 0.3).collect();
    let mean0 = shifted.iter().sum::<f64>() / 64.0;
    let out = ks_simulate(KsConfig::new(16.0 / 71.0), &shifted, 10_000, 1000)?;
    let drift = out
        .iter()
        .map(|u| (u.iter().sum::<f64>() / 64.0 - mean0).abs())
        .fold(0.0, f64::max);

    Ok(Outcome::new(
        linear < 1e-6 && (1.7..=2.3).contains(&order) && drift < 1e-8,
        format!(
            "linear modes k = 1..6 relative error {linear:.2e} (limit 1e-6), convergence order {order:.3} (1.7..2.3), mean drift over 1e4 steps {drift:.1e} (limit 1e-8)"
        ),
    ))
}

fn criterion_8(cache: &Cache) -> Result<Outcome> {
    let run = cache.get("s4", 1)?;
    let ks = run.config.data.ks.as_ref().expect("KS preset");
    let start = run.config.rollout.start;
    let steps = run.traj.len() - 1;
    let reference = ks_series(ks.solver(), ks.sample_spacing, (start + steps + 1).max(400), ks.transient_time)?;
    let mut sum = 0.0;
    let mut count = 0;
    for (t, rec) in run.traj.records.iter().enumerate() {
        for (a, b) in rec.x.iter().zip(reference.row(start + t)) {
            sum += (a - b) * (a - b);
            count += 1;
        }
    }
    let mse = sum / count as f64;
    let dt = run.model.dt();
    let span = steps as f64 * dt;
    let beat = estimate_period(&reference, dt)?;
    let periods = beat.period().map_or(0.0, |p| span / p);
    Ok(Outcome::new(
        mse < 1e-2 && periods >= 2.0,
        format!(
            "1-D charts, rollout of {steps} steps ({span:.2} tu = {periods:.2} beating periods of {}), field MSE vs simulation {mse:.3e} (limit 1e-2)",
            describe(&beat)
        ),
    ))
}

fn criterion_9(cache: &Cache) -> Result<Outcome> {
    let mut notes = Vec::new();
    let mut any = false;
    for seed in 1..=5 {
        let run = cache.get("s5", seed)?;
        let dt = run.model.dt();
        let states = run.traj.states()?;
        let (shapes, _) = shape_phase_series(&states)?;
        let beat = estimate_period(&shapes, dt)?;
        let phases = run.traj.phases().expect("phase model");
        let travel = travelling_period(&phases, dt)?;
        let beat_ok = beat.period().is_some_and(|p| (p - 0.456).abs() <= 0.005);
        let travel_ok = ((travel - 90.46) / 90.46).abs() <= 0.10;
        any |= beat_ok && travel_ok;
        notes.push(format!("seed {seed}: beating {}, travelling {travel:.2}", describe(&beat)));
    }
    Ok(Outcome::new(
        any,
        format!("best of 5 (beating 0.456 ± 0.005, travelling 90.46 ± 10%): {}", notes.join("; ")),
    ))
}

/// Fields whose `Re û₂` alternates sign with a `û₁` burst in the given quadrants.
fn synthetic_bursts(pattern: &[u8], quiet: usize, burst: usize) -> Result<Matrix> {
    let grid = spatial_grid(64);
    let mut rows = Vec::new();
    let mut level = 1.0;
    for &q in pattern.iter().cycle().take(pattern.len() * 8) {
        let angle = q as f64 * PI / 2.0 + 0.2;
        for _ in 0..quiet {
            rows.push(grid.iter().map(|x| level * (2.0 * x).cos() + 0.01 * (x - 0.3).sin()).collect::<Vec<f64>>());
        }
        for k in 0..burst {
            let s = (k as f64 + 0.5) / burst as f64;
            let a2 = level * (PI * s).cos();
            let amp = 2.0 * (PI * s).sin();
            rows.push(grid.iter().map(|x| a2 * (2.0 * x).cos() + amp * (x + angle).cos()).collect());
        }
        level = -level;
    }
    Matrix::from_rows(&rows)
}

fn bursting_controls() -> Result<(bool, String)> {
    let opts = BurstingOptions::default();
    let grid = spatial_grid(64);
    let fixed: Vec<Vec<f64>> = (0..400)
        .map(|t| {
            let decay = (-(t as f64) / 20.0).exp();
            grid.iter().map(|x| (2.0 * x).cos() + decay * x.sin()).collect()
        })
        .collect();
    let fixed = classify_bursting_behavior(&Matrix::from_rows(&fixed)?, 0.05, &opts)?.verdict;
    let a = classify_bursting_behavior(&synthetic_bursts(&[2, 1], 60, 20)?, 0.05, &opts)?;
    let b = classify_bursting_behavior(&synthetic_bursts(&[0, 3], 60, 20)?, 0.05, &opts)?;
    let one = a.verdict;
    let two = classify_bursting_ensemble(&[a.clone(), b]);
    let ok = fixed == BurstingVerdict::FixedPoint && one == BurstingVerdict::OneCycle && two == Some(BurstingVerdict::TwoCycles);
    Ok((
        ok,
        format!(
            "controls: fixed point -> {}, one cycle -> {}, two cycles -> {}",
            fixed.label(),
            one.label(),
            two.map_or("none", BurstingVerdict::label)
        ),
    ))
}

fn criterion_10(cache: &Cache) -> Result<Outcome> {
    let (controls, control_note) = bursting_controls()?;
    let run = cache.get("s6", 1)?;
    let base = run.config.atlas_config()?;
    let points = run.bundle.data.points();
    let trials = 5;
    let six = mse_sweep(points, &base, &[6], &[3], trials, ArchPolicy::SameAsCharts)?;
    let one = mse_sweep(points, &base, &[1], &[6], trials, ArchPolicy::ParameterMatched { reference_charts: 6 })?;
    let m6 = six.median(6, 3);
    let m1 = one.median(1, 6);
    let params = |r: &candyman::eval::MseSweepResult| r.rows.first().map_or(0, |row| row.params);
    let ordered = matches!((m6, m1), (Some(a), Some(b)) if a < b);
    let fmt = |m: Option<f64>| m.map_or("n/a".into(), |v| format!("{v:.3e}"));
    Ok(Outcome::new(
        ordered && controls,
        format!(
            "median MSE 6 charts d=3 {} ({} params) vs 1 chart d=6 {} ({} params), {trials} trials each, ratio {}; {control_note}",
            fmt(m6),
            params(&six),
            fmt(m1),
            params(&one),
            match (m6, m1) {
                (Some(a), Some(b)) => format!("{:.1}", b / a),
                _ => "n/a".into(),
            }
        ),
    ))
}

fn dir_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p)?);
            }
        }
    }
    Ok(out)
}

fn snapshot(run: &Run, dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    write_dataset_dir(&dir.join("data"), &run.config, &run.bundle, true)?;
    run.model.save(&dir.join("model"), true)?;
    let mut traj = Vec::new();
    run.traj.write_csv(&mut traj)?;
    fs::write(dir.join("trajectory.csv"), traj)?;
    dir_files(dir)
}

fn criterion_11(cache: &Cache) -> Result<Outcome> {
    let tmp = std::env::temp_dir().join(format!("candyman-acceptance-{}", std::process::id()));
    let mut pass = true;
    let mut notes = Vec::new();
    for preset in ["s1", "s2", "s3", "s4", "s5", "s6"] {
        let first = cache.get(preset, 1)?;
        let second = run_preset(preset, 1)?;
        let a = snapshot(&first, &tmp.join(preset).join("a"))?;
        let b = snapshot(&second, &tmp.join(preset).join("b"))?;
        let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        let same = a.len() == b.len() && differing.is_empty();
        pass &= same;
        notes.push(if same {
            format!("{preset}: {} files identical", a.len())
        } else {
            format!("{preset}: differs in {:?}", differing)
        });
    }
    let _ = fs::remove_dir_all(&tmp);
    Ok(Outcome::new(pass, notes.join("; ")))
}

type Criterion = fn(&Cache) -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(u32, &str, Criterion); 11] = [
        (1, "gradient oracle", criterion_1),
        (2, "nearest-neighbour oracle", criterion_2),
        (7, "KS solver", criterion_7),
        (4, "circle", criterion_4),
        (5, "periodic torus", criterion_5),
        (3, "atlas invariants", criterion_3),
        (8, "KS beating", criterion_8),
        (6, "quasiperiodic torus", criterion_6),
        (9, "KS beating-travelling", criterion_9),
        (10, "KS bursting", criterion_10),
        (11, "determinism", criterion_11),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cache = Cache::default();
    let mut results = BTreeMap::new();
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(|| f(&cache))) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => Outcome::new(false, format!("error: {e}")),
            Err(_) => Outcome::new(false, "panicked"),
        };
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        let line = format!(
            "criterion {id:>2} {verdict} [{name}, {:.0}s] {}",
            t.elapsed().as_secs_f64(),
            outcome.detail
        );
        println!("{line}");
        results.insert(id, (outcome.pass, line));
    }
    println!("\nsummary:");
    for (_, line) in results.values() {
        println!("{}", line.split(" [").next().unwrap_or(line));
    }
    let failed = results.values().filter(|(p, _)| !p).count();
    let strict = std::env::var("CANDYMAN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
