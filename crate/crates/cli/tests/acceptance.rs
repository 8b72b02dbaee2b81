//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use switchcert::controller::{self, phi, SontagController};
use switchcert::dynamics::{self, SwitchedSystem};
use switchcert::linalg;
use switchcert::lyapunov;
use switchcert::montecarlo::{self, BoundParams, Dynamics, EnsembleSpec};
use switchcert::rng::stream;
use switchcert::switching::{self, GeneratorMatrix, SwitchingSignal};
use switchcert_cli::commands::{self, Overrides, Status};
use switchcert_cli::config::{self, Scenario, ScenarioConfig};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bundled(name: &str) -> ScenarioConfig {
    ScenarioConfig::from_json(config::bundled(name).expect("bundled")).expect("parses")
}

fn scenario(name: &str) -> Scenario {
    bundled(name).build().expect("builds")
}

fn cli(args: &[&str]) -> u8 {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["switchcert"];
    full.extend_from_slice(args);
    switchcert_cli::run(full, &mut out, &mut err)
}

fn poisson(t: f64, kmax: usize) -> Vec<f64> {
    let mut p = vec![(-t).exp()];
    for k in 1..=kmax {
        p.push(p[k - 1] * t / k as f64);
    }
    p
}

fn pmf_symmetric() -> Check {
    let q = GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let n = 100_000;
    let start = Instant::now();
    let rep = switching::check_markov_pmf_bound(&q, &[1.0, 0.0], &[0.5, 1.0, 2.0], 10, n, 11).unwrap();
    let elapsed = start.elapsed();
    ensure(rep.pass, format!("{} cells above bound + 3 SE", rep.failed_cells().count()))?;
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    // the count is exactly Poisson(t); judge closeness with the standard error
    // under that law so that cells with vanishing mass are handled too
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let oracle = poisson(t, 10);
        for c in rep.cells.iter().filter(|c| c.t == t) {
            let p = oracle[c.k];
            ensure((c.bound - p).abs() <= 1e-12 * p.max(1e-300), format!("bound at t={t}, k={} is {} not {p}", c.k, c.bound))?;
            let se = (p * (1.0 - p) / n as f64).sqrt().max(c.stderr);
            let z = (c.estimate - p).abs() / se;
            worst = worst.max(z);
            ensure(z <= 3.0, format!("t={t}, k={}: estimate {} vs {p} is {z:.2} SE away", c.k, c.estimate))?;
        }
    }
    Ok(format!("33 cells within 3 SE of Poisson(t) (worst {worst:.2} SE), {elapsed:.1?}"))
}

fn pmf_asymmetric() -> Check {
    let q = GeneratorMatrix::new(vec![vec![-2.0, 2.0], vec![1.0, -1.0]]).unwrap();
    let rep = switching::check_markov_pmf_bound(&q, &[1.0, 0.0], &[0.5, 1.0, 2.0], 10, 100_000, 12).unwrap();
    let worst = rep
        .cells
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .expect("cells");
    let msg = format!(
        "{} of {} cells violated; worst t={}, k={}: estimate {:.4} > bound {:.4}",
        rep.failed_cells().count(),
        rep.cells.len(),
        worst.t,
        worst.k,
        worst.estimate,
        worst.bound
    );
    if rep.pass {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn expected_v(name: &str) -> Check {
    let s = scenario(name);
    let start = Instant::now();
    let cert = commands::cmd_certify(&s, &Overrides::default()).map_err(|e| e.to_string())?;
    ensure(cert.status == Status::Pass, format!("certify returned {:?}", cert.status))?;
    let out = commands::cmd_mc(&s, &Overrides::default()).map_err(|e| e.to_string())?;
    let csv = out.file("mc_expected_v.csv").ok_or("no expected-V table")?;
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    ensure(rows.len() == 20, format!("{} grid rows", rows.len()))?;
    // independent restatement of the per-point rule: mean - 3 SE below the bound
    for r in &rows {
        let (t, mean, se, bound): (f64, f64, f64, f64) =
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        ensure(
            mean - 3.0 * se <= bound * (1.0 + montecarlo::INTEGRATION_RTOL),
            format!("t={t}: mean {mean} - 3 SE {se} above bound {bound}"),
        )?;
        ensure(r[4] == "true", format!("t={t} flagged as failing"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!("certify pass, 20 grid points below the bound, {elapsed:.1?}"))
}

fn integrator_order() -> Check {
    let sys = SwitchedSystem::linear(vec![DMatrix::from_element(1, 1, -1.0)]).unwrap();
    let sig = SwitchingSignal::constant(0, 1.0).unwrap();
    let err = |h: f64| {
        let traj = dynamics::integrate_switched(&sys, &sig, &[1.0], h, 1.0).unwrap();
        (traj.final_state()[0] - (-1.0f64).exp()).abs()
    };
    let ratio = err(1e-2) / err(5e-3);
    let fine = err(1e-3);
    ensure((12.0..=20.0).contains(&ratio), format!("ratio {ratio}"))?;
    ensure(fine < 1e-9, format!("error at h=1e-3 is {fine:e}"))?;
    Ok(format!("halving ratio {ratio:.3}, error at h=1e-3 {fine:.2e}"))
}

fn random_matrix<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal))
}

fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n);
    &m * m.transpose() + DMatrix::identity(n, n) * 0.1
}

fn random_unit<R: Rng>(rng: &mut R, n: usize) -> nalgebra::DVector<f64> {
    let v = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let len = v.norm();
    v / len
}

fn quad(p: &DMatrix<f64>, x: &nalgebra::DVector<f64>) -> f64 {
    (x.transpose() * p * x)[(0, 0)]
}

fn mu_oracle() -> Check {
    let mut rng = stream(41, 0);
    let mut worst = 0.0f64;
    for pair in 0..20 {
        let (p1, p2) = (random_spd(&mut rng, 3), random_spd(&mut rng, 3));
        let exact = lyapunov::mu_quadratic(&[p1.clone(), p2.clone()]).map_err(|e| e.to_string())?;
        let mut sampled = 0.0f64;
        for _ in 0..100_000 {
            let x = random_unit(&mut rng, 3);
            let (v1, v2) = (quad(&p1, &x), quad(&p2, &x));
            sampled = sampled.max(v1 / v2).max(v2 / v1);
        }
        let rel = (exact - sampled) / exact;
        worst = worst.max(rel);
        ensure(
            (-1e-10..=0.01).contains(&rel),
            format!("pair {pair}: exact {exact}, sampled {sampled}"),
        )?;
    }
    Ok(format!("20 pairs, sampled max within {:.3}% below exact", 100.0 * worst))
}

fn decay_oracle() -> Check {
    let mut rng = stream(42, 0);
    let mut worst = 0.0f64;
    for pair in 0..20 {
        let b = random_matrix(&mut rng, 3);
        let a = &b - DMatrix::identity(3, 3) * (b.norm() + 0.5);
        let p = linalg::solve_lyapunov(&a, &DMatrix::identity(3, 3)).map_err(|e| e.to_string())?;
        let exact = lyapunov::decay_rate_quadratic(&[a.clone()], &[p.clone()]).map_err(|e| e.to_string())?;
        let s = a.transpose() * &p + &p * &a;
        let mut sampled = f64::INFINITY;
        for _ in 0..100_000 {
            let x = random_unit(&mut rng, 3);
            sampled = sampled.min(-quad(&s, &x) / quad(&p, &x));
        }
        let rel = (sampled - exact) / exact;
        worst = worst.max(rel);
        ensure(
            (-1e-10..=0.01).contains(&rel),
            format!("pair {pair}: exact {exact}, sampled {sampled}"),
        )?;
    }
    Ok(format!("20 stable pairs, sampled infimum within {:.3}% above exact", 100.0 * worst))
}

fn sontag_scalar() -> Check {
    let mut rng = stream(43, 0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let a = scale * rng.random_range(-1.0..1.0);
        let b = loop {
            let b: f64 = scale * rng.random_range(-1.0..1.0);
            if b != 0.0 {
                break b;
            }
        };
        let want = a.hypot(b);
        let rel = ((phi(a, b) * b - a) - want).abs() / want;
        worst = worst.max(rel);
    }
    ensure(worst <= 1e-12, format!("phi identity relative error {worst:e}"))?;

    let s = scenario("ctrl1");
    let family = s.family().unwrap();
    let ctl = SontagController::new(&s.system, family, 1.0).map_err(|e| e.to_string())?;
    let k1 = ctl.feedback(0, &[1.0]).map_err(|e| e.to_string())?[0];
    let want = -(1.5 + 3.25f64.sqrt());
    ensure((k1 - want).abs() <= 1e-9, format!("k(1) = {k1}, expected {want}"))?;

    let out = commands::cmd_stabilize(&s, &Overrides::default()).map_err(|e| e.to_string())?;
    ensure(out.status == Status::Pass, format!("stabilize returned {:?}", out.status))?;
    ensure(out.report.contains("violations = 0"), "decrease violations reported")?;
    let sig = SwitchingSignal::constant(0, 3.0).unwrap();
    let traj = controller::integrate_closed_loop(&ctl, &sig, &[1.0], 1e-3, 3.0).map_err(|e| e.to_string())?;
    let dec = controller::verify_decrease(&traj, &s.system, family, 1.0).map_err(|e| e.to_string())?;
    ensure(dec.pass && dec.checked == traj.len(), format!("{} violations", dec.violations))?;
    let x3 = traj.final_state()[0].abs();
    ensure(x3 <= (-1.5f64).exp() * 1.01, format!("|x(3)| = {x3}"))?;
    Ok(format!(
        "phi identity error {worst:.1e}, k(1) = {k1:.12}, decrease held at {} samples, |x(3)| = {x3:.3e}",
        dec.checked
    ))
}

fn sontag_switched() -> Check {
    let s = scenario("ctrl2");
    let cert = commands::cmd_certify(&s, &Overrides::default()).map_err(|e| e.to_string())?;
    ensure(cert.status != Status::Fail, "gate fails for the switching used")?;
    let family = s.family().unwrap();
    let ctl = SontagController::new(&s.system, family, 1.0).map_err(|e| e.to_string())?;
    let (q, initial) = s.markov().unwrap();
    let spec = EnsembleSpec {
        count: 1000,
        horizon: s.config.run.horizon,
        step: s.config.run.step,
        seed: 17,
        grid: Vec::new(),
        epsilon: 1e-3,
        workers: None,
    };
    let conv = montecarlo::estimate_convergence(Dynamics::Closed(&ctl), q, initial, &s.config.run.x0, &spec)
        .map_err(|e| e.to_string())?;
    ensure(conv.fraction >= 0.99, format!("fraction {}", conv.fraction))?;
    Ok(format!("convergence fraction {} over {} switched closed-loop paths", conv.fraction, conv.count))
}

fn gas_m() -> Check {
    let s = scenario("mjls2");
    let family = s.family().unwrap();
    let (q, initial) = s.markov().unwrap();
    let x0 = s.config.run.x0.clone();
    let cert = commands::certificate(&s, 0).map_err(|e| e.to_string())?;
    let (c1, _) = cert.class_k.ok_or("no class-K bounds")?;
    let bound = BoundParams {
        mu: cert.mu_gate,
        decay_rate: cert.decay_rate,
        switch_decay: cert.switch_decay,
        switch_intensity: cert.switch_intensity,
        onset: cert.onset,
    };
    let v0 = montecarlo::initial_value(family, initial, &x0).map_err(|e| e.to_string())?;
    let eps = 1e-3;
    let target = c1 * eps * eps * 1e-2;
    let ev = |t: f64| montecarlo::expected_v_bound(t, v0, &bound).unwrap();
    // first time the bound drops below the target; the horizon doubles it so
    // the whole tail window [T/2, T] sits past that time
    let (mut lo, mut hi) = (0.0, 1.0);
    while ev(hi) >= target {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ev(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let horizon = 2.0 * hi;
    ensure(ev(horizon) < target, "horizon misses the bound target")?;
    let spec = EnsembleSpec {
        count: 10_000,
        horizon,
        step: 1e-3,
        seed: 23,
        grid: montecarlo::uniform_grid(horizon, 20),
        epsilon: eps,
        workers: None,
    };
    let paths =
        montecarlo::run_ensemble(Dynamics::Open(&s.system), Some(family), q, initial, &x0, &spec).map_err(|e| e.to_string())?;
    let conv = montecarlo::convergence_report(&paths, eps);
    ensure(conv.fraction >= 0.99, format!("fraction {}", conv.fraction))?;
    let mn = montecarlo::mean_norm_report(&paths, &spec.grid, Some((c1, v0, &bound))).map_err(|e| e.to_string())?;
    for r in &mn.rows {
        let b = r.jensen_bound.ok_or("no Jensen bound")?;
        let oracle = (ev(r.t) / c1).sqrt();
        ensure((b - oracle).abs() <= 1e-12 * oracle.max(1e-300), format!("t={}: bound {b} vs {oracle}", r.t))?;
        ensure(
            r.mean <= b * (1.0 + montecarlo::INTEGRATION_RTOL) + 3.0 * r.stderr,
            format!("t={}: mean norm {} above {b} + 3 SE", r.t, r.mean),
        )?;
    }
    ensure(mn.pass, "mean-norm report failed")?;
    Ok(format!(
        "T = {horizon:.3}, convergence fraction {}, mean norm below the Jensen bound at 20 points",
        conv.fraction
    ))
}

fn negative_controls() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().to_str().unwrap();
    let code = cli(&["certify", "--example", "fail1", "--out", out]);
    ensure(code == 1, format!("fail1 certify exit {code}"))?;

    let sys = SwitchedSystem::linear(vec![DMatrix::from_element(1, 1, 1.0); 2]).unwrap();
    let q = GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let spec = EnsembleSpec {
        count: 200,
        horizon: 40.0,
        step: 1e-2,
        seed: 29,
        grid: Vec::new(),
        epsilon: 1e-3,
        workers: None,
    };
    let conv = montecarlo::estimate_convergence(Dynamics::Open(&sys), &q, &[0.5, 0.5], &[1.0], &spec)
        .map_err(|e| e.to_string())?;
    ensure(conv.fraction == 0.0, format!("unstable fraction {}", conv.fraction))?;
    ensure(conv.blown_up == conv.count, format!("{} of {} flagged as blown up", conv.blown_up, conv.count))?;

    let s = scenario("ctrl1");
    let family = s.family().unwrap();
    let ctl = SontagController::new(&s.system, family, 1.0)
        .map_err(|e| e.to_string())?
        .with_gain_scale(0.1);
    let sig = SwitchingSignal::constant(0, 3.0).unwrap();
    let traj = controller::integrate_closed_loop(&ctl, &sig, &[1.0], 1e-3, 3.0).map_err(|e| e.to_string())?;
    let dec = controller::verify_decrease(&traj, &s.system, family, 1.0).map_err(|e| e.to_string())?;
    ensure(!dec.pass && dec.violations > 0, "mis-scaled gain passed the decrease check")?;
    Ok(format!(
        "fail1 exit 1; unstable ensemble fraction 0 with {} blow-ups; gain/10 gives {} decrease violations",
        conv.blown_up, dec.violations
    ))
}

fn csv_files(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn reproducibility() -> Check {
    let runs: &[&[&str]] = &[
        &["certify", "--example", "nl2"],
        &["simulate", "--example", "nl2"],
        &["mc", "--example", "mjls2", "--trajectories", "300"],
        &["ctmc-check", "--example", "mjls2", "--trajectories", "20000"],
        &["stabilize", "--example", "ctrl2", "--trajectories", "100"],
    ];
    let mut compared = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for workers in ["1", "1", "3"] {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut full = args.to_vec();
            full.extend_from_slice(&["--seed", "99", "--workers", workers, "--out", dir.path().to_str().unwrap()]);
            let code = cli(&full);
            ensure(code <= 2, format!("{args:?} exit {code}"))?;
            let report = std::fs::read(dir.path().join("report.txt")).map_err(|e| e.to_string())?;
            outputs.push((csv_files(dir.path()), report));
        }
        ensure(outputs[0] == outputs[1], format!("{args:?} differs between runs"))?;
        ensure(outputs[0] == outputs[2], format!("{args:?} differs across worker counts"))?;
        compared += outputs[0].0.len();
    }
    Ok(format!("{compared} CSV files and 5 reports byte-identical across runs and worker counts"))
}

fn main() {
    let criteria: &[(&str, fn() -> Check)] = &[
        ("1  pmf bound, symmetric generator", pmf_symmetric),
        ("1  pmf bound, asymmetric generator", pmf_asymmetric),
        ("2  expected-V bound, mjls2", || expected_v("mjls2")),
        ("2  expected-V bound, mjls2b", || expected_v("mjls2b")),
        ("3  integrator order", integrator_order),
        ("4  mu oracle", mu_oracle),
        ("4  decay-rate oracle", decay_oracle),
        ("5  universal formula, scalar", sontag_scalar),
        ("5  universal formula, switched", sontag_switched),
        ("6  convergence and mean norm", gas_m),
        ("7  negative controls", negative_controls),
        ("8  reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("PASS  criterion {name}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {name}: {msg} [{secs:.1}s]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
