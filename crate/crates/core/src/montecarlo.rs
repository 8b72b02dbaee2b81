//! Trajectory ensembles and the closed-form bounds they are checked against.
//!
//! With `N(t)` the number of switches on `(0, t]`, the bounds are
//!
//! ```text
//! E[exp(s N(t))]      <= S + exp((e^s intensity - decay) t),  S = sum_{k<M} e^{sk}
//! E[V_{sigma(t)}(x)]  <= E[mu^N(t)] V_{sigma(0)}(x0) exp(-lambda t)
//! ```
//!
//! Ensembles use one random stream per trajectory and reduce in index
//! order, so results do not depend on how many worker threads ran them.

use rayon::prelude::*;
use thiserror::Error;

use crate::controller::SontagController;
use crate::dynamics::{self, norm, DynamicsError, IntegrationOutcome, Observer, SwitchedSystem};
use crate::expr::EvalError;
use crate::lyapunov::LyapunovFamily;
use crate::rng;
use crate::stats::{mean_stderr, proportion_stderr, robust_verdict};
use crate::switching::{self, GeneratorMatrix, SwitchingError, SE_SLACK};

/// Violations larger than this many standard errors always fail a run.
pub const HARD_SE_LIMIT: f64 = 5.0;
/// Relative allowance for RK4 discretization error when an ensemble mean
/// is compared with an analytic bound.
pub const INTEGRATION_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    Switching(#[from] SwitchingError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<EvalError> for MonteCarloError {
    fn from(e: EvalError) -> Self {
        MonteCarloError::Dynamics(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub count: usize,
    pub horizon: f64,
    pub step: f64,
    pub seed: u64,
    /// Statistic times within `[0, horizon]`.
    pub grid: Vec<f64>,
    pub epsilon: f64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl EnsembleSpec {
    fn validate(&self) -> Result<(), MonteCarloError> {
        if self.count == 0 {
            return Err(MonteCarloError::InvalidArgument("trajectory count must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.step > 0.0) {
            return Err(MonteCarloError::InvalidArgument("horizon and step must be positive".into()));
        }
        if self.grid.iter().any(|&t| !(0.0..=self.horizon).contains(&t)) {
            return Err(MonteCarloError::InvalidArgument("grid must lie in [0, horizon]".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MonteCarloError::InvalidArgument("grid must be strictly increasing".into()));
        }
        Ok(())
    }

    fn require_bound_sized(&self) -> Result<(), MonteCarloError> {
        require_bound_sized(self.count)
    }
}

/// Smallest ensemble for which bound comparisons are reported.
pub const MIN_BOUND_ENSEMBLE: usize = 100;

fn require_bound_sized(count: usize) -> Result<(), MonteCarloError> {
    if count < MIN_BOUND_ENSEMBLE {
        return Err(MonteCarloError::InvalidArgument(format!(
            "bound comparisons need at least {MIN_BOUND_ENSEMBLE} trajectories"
        )));
    }
    Ok(())
}

/// `n` evenly spaced points on `[0, horizon]`, endpoints included.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![horizon],
        _ => (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Parameters of the expected-value bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub mu: f64,
    pub decay_rate: f64,
    pub switch_decay: f64,
    pub switch_intensity: f64,
    pub onset: usize,
}

impl BoundParams {
    /// `S = sum_{k=0}^{M-1} e^{s k}`.
    pub fn partial_sum(&self, s: f64) -> f64 {
        (0..self.onset).map(|k| (s * k as f64).exp()).sum()
    }
}

/// `S + exp((e^s intensity - decay) t)`.
pub fn mgf_bound(s: f64, t: f64, p: &BoundParams) -> Result<f64, MonteCarloError> {
    if !(s >= 0.0) {
        return Err(MonteCarloError::InvalidArgument("s must be nonnegative".into()));
    }
    if !(t >= 0.0) {
        return Err(MonteCarloError::InvalidArgument("t must be nonnegative".into()));
    }
    Ok(p.partial_sum(s) + ((s.exp() * p.switch_intensity - p.switch_decay) * t).exp())
}

/// `mgf_bound(ln mu, t) * v0 * exp(-decay_rate t)`.
pub fn expected_v_bound(t: f64, v0: f64, p: &BoundParams) -> Result<f64, MonteCarloError> {
    if !(p.mu >= 1.0) {
        return Err(MonteCarloError::InvalidArgument("mu must be at least 1".into()));
    }
    if !(v0 >= 0.0) {
        return Err(MonteCarloError::InvalidArgument("V0 must be nonnegative".into()));
    }
    Ok(mgf_bound(p.mu.ln(), t, p)? * v0 * (-p.decay_rate * t).exp())
}

/// What the ensemble integrates.
#[derive(Clone, Copy)]
pub enum Dynamics<'a> {
    Open(&'a SwitchedSystem),
    Closed(&'a SontagController<'a>),
}

impl Dynamics<'_> {
    fn system(&self) -> &SwitchedSystem {
        match self {
            Dynamics::Open(s) => s,
            Dynamics::Closed(c) => c.system,
        }
    }

    fn eval(&self, p: usize, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        match self {
            Dynamics::Open(s) => s.drift_into(p, x, out),
            Dynamics::Closed(c) => c.closed_loop_into(p, x, out),
        }
    }
}

/// Per-trajectory summary.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    /// `V_{sigma(t)}(x(t))` at each grid time (empty without a family).
    pub values: Vec<f64>,
    pub norms: Vec<f64>,
    /// Largest state norm over mesh points in `[horizon/2, horizon]`.
    pub tail_sup: f64,
    pub initial_mode: usize,
    pub blown_up: bool,
}

struct SummaryObserver<'a> {
    grid: &'a [f64],
    family: Option<&'a LyapunovFamily>,
    cursor: usize,
    tol: f64,
    tail_start: f64,
    summary: PathSummary,
}

impl Observer for SummaryObserver<'_> {
    fn sample(&mut self, t: f64, mode: usize, x: &[f64]) -> Result<(), EvalError> {
        let r = norm(x);
        if t >= self.tail_start {
            self.summary.tail_sup = self.summary.tail_sup.max(r);
        }
        while self.cursor < self.grid.len() && (self.grid[self.cursor] - t).abs() <= self.tol {
            self.summary.norms.push(r);
            if let Some(v) = self.family {
                self.summary.values.push(v.value(mode, x)?);
            }
            self.cursor += 1;
        }
        Ok(())
    }
}

/// Samples `spec.count` chain paths and integrates each, returning per-path
/// summaries in index order.
pub fn run_ensemble(
    dynamics: Dynamics<'_>,
    family: Option<&LyapunovFamily>,
    q: &GeneratorMatrix,
    initial: &[f64],
    x0: &[f64],
    spec: &EnsembleSpec,
) -> Result<Vec<PathSummary>, MonteCarloError> {
    spec.validate()?;
    let sys = dynamics.system();
    if q.modes() != sys.mode_count() {
        return Err(MonteCarloError::InvalidArgument(format!(
            "generator has {} modes, system has {}",
            q.modes(),
            sys.mode_count()
        )));
    }
    switching::check_distribution(initial, q.modes())?;
    let one = |i: usize| -> Result<PathSummary, MonteCarloError> {
        let mut rng = rng::stream(spec.seed, i as u64);
        let signal = switching::sample_ctmc_with(q, initial, spec.horizon, &mut rng)?;
        let mut observer = SummaryObserver {
            grid: &spec.grid,
            family,
            cursor: 0,
            tol: 1e-12 * spec.horizon.max(1.0),
            tail_start: spec.horizon / 2.0,
            summary: PathSummary {
                values: Vec::with_capacity(spec.grid.len()),
                norms: Vec::with_capacity(spec.grid.len()),
                tail_sup: 0.0,
                initial_mode: signal.initial_mode(),
                blown_up: false,
            },
        };
        let IntegrationOutcome { blown_up, .. } = dynamics::integrate_with(
            |p, x, out| dynamics.eval(p, x, out),
            sys.dimension(),
            &signal,
            x0,
            spec.step,
            spec.horizon,
            &spec.grid,
            &mut observer,
        )?;
        let mut summary = observer.summary;
        summary.blown_up = blown_up;
        if blown_up {
            summary.tail_sup = f64::INFINITY;
        }
        Ok(summary)
    };
    let run = || (0..spec.count).into_par_iter().map(one).collect::<Result<Vec<_>, _>>();
    match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| MonteCarloError::InvalidArgument(e.to_string()))?
            .install(run),
        None => run(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedVReport {
    pub rows: Vec<BoundRow>,
    /// `max_p V_p(x0)` over modes with positive initial probability.
    pub v0: f64,
    pub blown_up: usize,
    pub count: usize,
    pub pass: bool,
}

/// Largest `V_p(x0)` over the modes the chain can start in.
pub fn initial_value(family: &LyapunovFamily, initial: &[f64], x0: &[f64]) -> Result<f64, EvalError> {
    let mut v0 = 0.0f64;
    for (p, &w) in initial.iter().enumerate() {
        if w > 0.0 {
            v0 = v0.max(family.value(p, x0)?);
        }
    }
    Ok(v0)
}

fn column(paths: &[PathSummary], idx: usize, pick: impl Fn(&PathSummary) -> &Vec<f64>) -> Vec<f64> {
    paths.iter().map(|p| pick(p)[idx]).collect()
}

fn bound_rows(
    grid: &[f64],
    paths: &[PathSummary],
    pick: impl Fn(&PathSummary) -> &Vec<f64> + Copy,
    bound: impl Fn(f64) -> Result<f64, MonteCarloError>,
) -> Result<(Vec<BoundRow>, bool), MonteCarloError> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut cells = Vec::with_capacity(grid.len());
    for (i, &t) in grid.iter().enumerate() {
        let est = mean_stderr(&column(paths, i, pick));
        let b = bound(t)?;
        let limit = b * (1.0 + INTEGRATION_RTOL);
        let pass = est.mean - SE_SLACK * est.stderr <= limit;
        let excess = est.mean - limit;
        let in_se = if est.stderr > 0.0 { excess / est.stderr } else if excess > 0.0 { f64::INFINITY } else { 0.0 };
        cells.push((pass, in_se));
        rows.push(BoundRow {
            t,
            mean: est.mean,
            stderr: est.stderr,
            bound: b,
            pass,
        });
    }
    let pass = robust_verdict(cells, HARD_SE_LIMIT);
    Ok((rows, pass))
}

/// Builds the expected-value report from ensemble summaries.
pub fn expected_v_report(
    paths: &[PathSummary],
    grid: &[f64],
    v0: f64,
    bound: &BoundParams,
) -> Result<ExpectedVReport, MonteCarloError> {
    require_bound_sized(paths.len())?;
    let blown_up = paths.iter().filter(|p| p.blown_up).count();
    if blown_up > 0 {
        return Ok(ExpectedVReport {
            rows: Vec::new(),
            v0,
            blown_up,
            count: paths.len(),
            pass: false,
        });
    }
    let (rows, pass) = bound_rows(grid, paths, |p| &p.values, |t| expected_v_bound(t, v0, bound))?;
    Ok(ExpectedVReport {
        rows,
        v0,
        blown_up,
        count: paths.len(),
        pass,
    })
}

/// Ensemble mean of `V_{sigma(t)}(x(t))` on the grid against
/// [`expected_v_bound`]. Any diverged trajectory fails the run.
#[allow(clippy::too_many_arguments)]
pub fn estimate_expected_v(
    sys: &SwitchedSystem,
    family: &LyapunovFamily,
    q: &GeneratorMatrix,
    initial: &[f64],
    x0: &[f64],
    spec: &EnsembleSpec,
    bound: &BoundParams,
) -> Result<ExpectedVReport, MonteCarloError> {
    spec.require_bound_sized()?;
    let paths = run_ensemble(Dynamics::Open(sys), Some(family), q, initial, x0, spec)?;
    expected_v_report(&paths, &spec.grid, initial_value(family, initial, x0)?, bound)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub epsilon: f64,
    pub fraction: f64,
    pub stderr: f64,
    pub blown_up: usize,
    pub count: usize,
}

/// Fraction of paths whose state norm stays below `epsilon` on the mesh
/// points of `[horizon/2, horizon]`. Diverged paths count as failures.
pub fn convergence_report(paths: &[PathSummary], epsilon: f64) -> ConvergenceReport {
    let hits = paths.iter().filter(|p| !p.blown_up && p.tail_sup < epsilon).count();
    let fraction = hits as f64 / paths.len() as f64;
    ConvergenceReport {
        epsilon,
        fraction,
        stderr: proportion_stderr(fraction, paths.len()),
        blown_up: paths.iter().filter(|p| p.blown_up).count(),
        count: paths.len(),
    }
}

pub fn estimate_convergence(
    dynamics: Dynamics<'_>,
    q: &GeneratorMatrix,
    initial: &[f64],
    x0: &[f64],
    spec: &EnsembleSpec,
) -> Result<ConvergenceReport, MonteCarloError> {
    let paths = run_ensemble(dynamics, None, q, initial, x0, spec)?;
    Ok(convergence_report(&paths, spec.epsilon))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanNormRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `sqrt(expected_v_bound(t) / c1)` when a quadratic lower envelope is known.
    pub jensen_bound: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanNormReport {
    pub rows: Vec<MeanNormRow>,
    pub blown_up: usize,
    pub pass: bool,
}

/// Ensemble mean of `|x(t)|`. With `envelope = Some((c1, v0, bound))`, each
/// row is compared with `sqrt(expected_v_bound(t) / c1)`, the mean-norm bound
/// implied by the convex lower envelope `c1 r^2` via Jensen's inequality.
pub fn mean_norm_report(
    paths: &[PathSummary],
    grid: &[f64],
    envelope: Option<(f64, f64, &BoundParams)>,
) -> Result<MeanNormReport, MonteCarloError> {
    let blown_up = paths.iter().filter(|p| p.blown_up).count();
    if let (Some((c1, v0, bound)), 0) = (envelope, blown_up) {
        require_bound_sized(paths.len())?;
        let jensen = |t: f64| Ok((expected_v_bound(t, v0, bound)? / c1).sqrt());
        let (rows, pass) = bound_rows(grid, paths, |p| &p.norms, jensen)?;
        let rows = rows
            .into_iter()
            .map(|r| MeanNormRow {
                t: r.t,
                mean: r.mean,
                stderr: r.stderr,
                jensen_bound: Some(r.bound),
                pass: r.pass,
            })
            .collect();
        return Ok(MeanNormReport { rows, blown_up, pass });
    }
    // diverged paths carry no grid values past the blow-up; average the rest
    let finite: Vec<PathSummary> = paths.iter().filter(|p| !p.blown_up).cloned().collect();
    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let est = mean_stderr(&column(&finite, i, |p| &p.norms));
            MeanNormRow {
                t,
                mean: est.mean,
                stderr: est.stderr,
                jensen_bound: None,
                pass: true,
            }
        })
        .collect();
    Ok(MeanNormReport {
        rows,
        blown_up,
        pass: blown_up == 0,
    })
}

pub fn estimate_mean_norm(
    dynamics: Dynamics<'_>,
    q: &GeneratorMatrix,
    initial: &[f64],
    x0: &[f64],
    spec: &EnsembleSpec,
    envelope: Option<(f64, f64, &BoundParams)>,
) -> Result<MeanNormReport, MonteCarloError> {
    let paths = run_ensemble(dynamics, None, q, initial, x0, spec)?;
    mean_norm_report(&paths, &spec.grid, envelope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Drift, Mode};
    use crate::expr::Expression;
    use nalgebra::{dmatrix, DMatrix};

    fn params(mu: f64, decay_rate: f64, switch_decay: f64, switch_intensity: f64, onset: usize) -> BoundParams {
        BoundParams {
            mu,
            decay_rate,
            switch_decay,
            switch_intensity,
            onset,
        }
    }

    fn spec(count: usize, horizon: f64, grid: Vec<f64>) -> EnsembleSpec {
        EnsembleSpec {
            count,
            horizon,
            step: 1e-3,
            seed: 17,
            grid,
            epsilon: 1e-3,
            workers: None,
        }
    }

    fn symmetric() -> GeneratorMatrix {
        GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap()
    }

    #[test]
    fn mgf_bound_examples() {
        let p = params(1.0, 1.0, 1.0, 1.0, 0);
        for t in [0.0, 0.5, 3.0] {
            assert_eq!(mgf_bound(0.0, t, &p).unwrap(), 1.0);
        }
        let v = mgf_bound(2f64.ln(), 1.0, &p).unwrap();
        assert!((v - std::f64::consts::E).abs() < 1e-14);
        let p2 = params(1.0, 1.0, 1.0, 1.0, 2);
        assert!((p2.partial_sum(1.0) - (1.0 + std::f64::consts::E)).abs() < 1e-14);
        let with_s = mgf_bound(1.0, 0.7, &p2).unwrap();
        let plain = mgf_bound(1.0, 0.7, &p).unwrap();
        assert!((with_s - plain - (1.0 + std::f64::consts::E)).abs() < 1e-12);
        assert!(mgf_bound(-0.1, 1.0, &p).is_err());
    }

    #[test]
    fn expected_v_bound_examples() {
        let p = params(2.0, 3.0, 1.0, 1.0, 0);
        let v = expected_v_bound(1.0, 1.0, &p).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        let p = params(1.0 + 1e-12, 2.0, 1.5, 1.5, 0);
        let v = expected_v_bound(1.0, 3.0, &p).unwrap();
        assert!((v - 3.0 * (-2.0f64).exp()).abs() < 1e-10);
        let p = params(1.5, 2.0, 1.0, 1.0, 3);
        let v = expected_v_bound(0.0, 2.0, &p).unwrap();
        assert!((v - (p.partial_sum(1.5f64.ln()) + 1.0) * 2.0).abs() < 1e-14);
        assert!(expected_v_bound(1.0, 1.0, &params(0.5, 1.0, 1.0, 1.0, 0)).is_err());
    }

    #[test]
    fn switching_invisible_when_modes_coincide() {
        let a = DMatrix::identity(2, 2) * -1.0;
        let sys = SwitchedSystem::linear(vec![a.clone(), a]).unwrap();
        let v = LyapunovFamily::quadratic(vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)]).unwrap();
        let s = spec(200, 2.0, uniform_grid(2.0, 5));
        let bound = params(1.0 + f64::EPSILON, 2.0, 1.0, 1.0, 0);
        let report = estimate_expected_v(&sys, &v, &symmetric(), &[0.5, 0.5], &[1.0, 1.0], &s, &bound).unwrap();
        assert!(report.pass);
        for row in &report.rows {
            assert!((row.mean - 2.0 * (-2.0 * row.t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn absorbing_chain_single_deterministic_path() {
        let sys = SwitchedSystem::linear(vec![dmatrix![-1.0]]).unwrap();
        let v = LyapunovFamily::quadratic(vec![dmatrix![1.0]]).unwrap();
        let q = GeneratorMatrix::new(vec![vec![0.0]]).unwrap();
        let s = spec(100, 1.0, uniform_grid(1.0, 4));
        let bound = params(1.0, 2.0, 0.0, 0.0, 0);
        let report = estimate_expected_v(&sys, &v, &q, &[1.0], &[1.0], &s, &bound).unwrap();
        assert!(report.pass);
        assert!(report.rows.iter().all(|r| r.stderr == 0.0));
    }

    #[test]
    fn convergence_examples() {
        let stable = SwitchedSystem::linear(vec![dmatrix![-2.0], dmatrix![-1.0]]).unwrap();
        let mut s = spec(100, 20.0, vec![]);
        s.step = 0.01;
        let r = estimate_convergence(Dynamics::Open(&stable), &symmetric(), &[1.0, 0.0], &[0.0], &s).unwrap();
        assert_eq!(r.fraction, 1.0);
        let r = estimate_convergence(Dynamics::Open(&stable), &symmetric(), &[1.0, 0.0], &[1.0], &s).unwrap();
        assert_eq!(r.fraction, 1.0);

        let unstable = SwitchedSystem::linear(vec![dmatrix![1.0], dmatrix![1.0]]).unwrap();
        let mut s = spec(100, 40.0, vec![]);
        s.step = 0.01;
        let r = estimate_convergence(Dynamics::Open(&unstable), &symmetric(), &[1.0, 0.0], &[1.0], &s).unwrap();
        assert_eq!(r.fraction, 0.0);
        assert_eq!(r.blown_up, 100);
    }

    #[test]
    fn mean_norm_of_deterministic_decay() {
        let sys = SwitchedSystem::new(
            1,
            vec![Mode::autonomous(Drift::Expressions(vec![Expression::parse("-x1", 1).unwrap()]))],
        )
        .unwrap();
        let q = GeneratorMatrix::new(vec![vec![0.0]]).unwrap();
        let s = spec(100, 2.0, uniform_grid(2.0, 5));
        let r = estimate_mean_norm(Dynamics::Open(&sys), &q, &[1.0], &[1.0], &s, None).unwrap();
        for row in &r.rows {
            assert!((row.mean - (-row.t).exp()).abs() < 1e-12);
        }
        let scaled = estimate_mean_norm(Dynamics::Open(&sys), &q, &[1.0], &[10.0], &s, None).unwrap();
        assert_eq!(scaled.rows[0].mean, 10.0);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let sys = SwitchedSystem::linear(vec![dmatrix![-3.0, 1.0; -1.0, -3.0], dmatrix![-1.0, 0.0; 0.5, -2.0]]).unwrap();
        let v = LyapunovFamily::quadratic(vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 2.0]).unwrap();
        let mut s = spec(300, 1.0, uniform_grid(1.0, 6));
        s.step = 0.01;
        s.workers = Some(1);
        let one = run_ensemble(Dynamics::Open(&sys), Some(&v), &symmetric(), &[0.5, 0.5], &[1.0, -1.0], &s).unwrap();
        s.workers = Some(4);
        let four = run_ensemble(Dynamics::Open(&sys), Some(&v), &symmetric(), &[0.5, 0.5], &[1.0, -1.0], &s).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn small_ensembles_rejected_for_bounds() {
        let sys = SwitchedSystem::linear(vec![dmatrix![-1.0], dmatrix![-1.0]]).unwrap();
        let v = LyapunovFamily::quadratic(vec![dmatrix![1.0], dmatrix![1.0]]).unwrap();
        let s = spec(50, 1.0, vec![0.5]);
        let bound = params(1.0, 2.0, 1.0, 1.0, 0);
        assert!(estimate_expected_v(&sys, &v, &symmetric(), &[1.0, 0.0], &[1.0], &s, &bound).is_err());
    }
}
