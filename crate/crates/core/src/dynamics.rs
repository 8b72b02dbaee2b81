//! Switched vector-field families and their piecewise-deterministic
//! integration along a switching signal.
//!
//! Integration is fixed-step RK4 on a mesh that is the union of the uniform
//! grid `{0, h, 2h, ...}`, every switching instant up to the horizon, and any
//! extra output times. The active mode is therefore constant on every step
//! and the state is carried unchanged across each switch.

use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::rng;
use crate::switching::SwitchingSignal;

/// States with Euclidean norm above this are treated as diverged.
pub const BLOWUP_NORM: f64 = 1e12;
/// Tolerance for `f_p(0) = 0`.
pub const ORIGIN_TOL: f64 = 1e-9;
/// Mesh points closer than this (relative to the horizon) are merged.
const MESH_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("system definition: {0}")]
    Definition(String),
    #[error("mode {mode} drift does not vanish at the origin (|f(0)| = {residual:e})")]
    NonzeroAtOrigin { mode: usize, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Anything that maps a state to a velocity of the same dimension.
pub trait VectorField {
    fn dimension(&self) -> usize;
    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError>;
}

impl<F> VectorField for (usize, F)
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), EvalError>,
{
    fn dimension(&self) -> usize {
        self.0
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.1)(x, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    /// `f(x) = A x`, evaluated without the parser.
    Linear(DMatrix<f64>),
    Expressions(Vec<Expression>),
}

impl Drift {
    pub fn dimension(&self) -> usize {
        match self {
            Drift::Linear(a) => a.nrows(),
            Drift::Expressions(e) => e.len(),
        }
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Drift::Linear(a) => Some(a),
            Drift::Expressions(_) => None,
        }
    }
}

impl VectorField for Drift {
    fn dimension(&self) -> usize {
        Drift::dimension(self)
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        match self {
            Drift::Linear(a) => {
                let n = x.len();
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += a[(i, j)] * x[j];
                    }
                    *o = acc;
                }
                Ok(())
            }
            Drift::Expressions(exprs) => {
                for (o, e) in out.iter_mut().zip(exprs) {
                    *o = e.evaluate(x)?;
                }
                Ok(())
            }
        }
    }
}

/// One mode of a switched system: drift plus optional control fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub drift: Drift,
    /// `controls[i]` is the field `g_{p,i}` multiplying input `u_i`.
    pub controls: Vec<Vec<Expression>>,
}

impl Mode {
    pub fn autonomous(drift: Drift) -> Self {
        Mode {
            drift,
            controls: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedSystem {
    dimension: usize,
    modes: Vec<Mode>,
}

impl SwitchedSystem {
    pub fn new(dimension: usize, modes: Vec<Mode>) -> Result<Self, DynamicsError> {
        if dimension == 0 {
            return Err(DynamicsError::Definition("dimension must be positive".into()));
        }
        if modes.is_empty() {
            return Err(DynamicsError::Definition("at least one mode is required".into()));
        }
        let inputs = modes[0].controls.len();
        for (p, mode) in modes.iter().enumerate() {
            match &mode.drift {
                Drift::Linear(a) if a.nrows() != dimension || a.ncols() != dimension => {
                    return Err(DynamicsError::Definition(format!(
                        "mode {} matrix is {}x{}, expected {dimension}x{dimension}",
                        p + 1,
                        a.nrows(),
                        a.ncols()
                    )));
                }
                Drift::Expressions(e) if e.len() != dimension || e.iter().any(|e| e.dimension() != dimension) => {
                    return Err(DynamicsError::Definition(format!(
                        "mode {} drift needs {dimension} components over x1..x{dimension}",
                        p + 1
                    )));
                }
                _ => {}
            }
            if mode.controls.len() != inputs {
                return Err(DynamicsError::Definition(format!(
                    "mode {} has {} control fields, mode 1 has {inputs}",
                    p + 1,
                    mode.controls.len()
                )));
            }
            if mode
                .controls
                .iter()
                .any(|g| g.len() != dimension || g.iter().any(|e| e.dimension() != dimension))
            {
                return Err(DynamicsError::Definition(format!(
                    "mode {} control field has wrong dimension",
                    p + 1
                )));
            }
        }
        let system = SwitchedSystem { dimension, modes };
        let origin = vec![0.0; dimension];
        let mut out = vec![0.0; dimension];
        for (p, mode) in system.modes.iter().enumerate() {
            mode.drift.eval_into(&origin, &mut out)?;
            let residual = norm(&out);
            if residual > ORIGIN_TOL {
                return Err(DynamicsError::NonzeroAtOrigin { mode: p, residual });
            }
        }
        Ok(system)
    }

    /// All modes linear, given as matrices.
    pub fn linear(matrices: Vec<DMatrix<f64>>) -> Result<Self, DynamicsError> {
        let n = matrices.first().map(|a| a.nrows()).unwrap_or(0);
        SwitchedSystem::new(n, matrices.into_iter().map(|a| Mode::autonomous(Drift::Linear(a))).collect())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, p: usize) -> &Mode {
        &self.modes[p]
    }

    pub fn inputs(&self) -> usize {
        self.modes[0].controls.len()
    }

    /// Matrices of every mode, when all modes are linear.
    pub fn linear_matrices(&self) -> Option<Vec<DMatrix<f64>>> {
        self.modes.iter().map(|m| m.drift.matrix().cloned()).collect()
    }

    /// `(mode, input, |g(0)|)` for control fields that do not vanish at the
    /// origin. Reported, not rejected.
    pub fn control_origin_residuals(&self) -> Vec<(usize, usize, f64)> {
        let origin = vec![0.0; self.dimension];
        let mut found = Vec::new();
        for (p, mode) in self.modes.iter().enumerate() {
            for (i, g) in mode.controls.iter().enumerate() {
                let values: Vec<f64> = g.iter().map(|e| e.evaluate(&origin).unwrap_or(f64::NAN)).collect();
                let r = norm(&values);
                if !(r <= ORIGIN_TOL) {
                    found.push((p, i, r));
                }
            }
        }
        found
    }

    pub fn drift_into(&self, p: usize, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        self.modes[p].drift.eval_into(x, out)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("state norm exceeded the blow-up threshold")]
    BlowUp,
}

/// Scratch buffers for RK4.
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(n: usize) -> Self {
        Rk4Workspace {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            stage: vec![0.0; n],
        }
    }
}

fn diverged(x: &[f64]) -> bool {
    let r = norm(x);
    !(r <= BLOWUP_NORM)
}

/// Classical RK4 update of `x` in place.
pub fn rk4_step_in_place<F: VectorField + ?Sized>(
    f: &F,
    x: &mut [f64],
    h: f64,
    ws: &mut Rk4Workspace,
) -> Result<(), StepError> {
    let n = x.len();
    f.eval_into(x, &mut ws.k1)?;
    for i in 0..n {
        ws.stage[i] = x[i] + 0.5 * h * ws.k1[i];
    }
    if diverged(&ws.stage) {
        return Err(StepError::BlowUp);
    }
    f.eval_into(&ws.stage, &mut ws.k2)?;
    for i in 0..n {
        ws.stage[i] = x[i] + 0.5 * h * ws.k2[i];
    }
    if diverged(&ws.stage) {
        return Err(StepError::BlowUp);
    }
    f.eval_into(&ws.stage, &mut ws.k3)?;
    for i in 0..n {
        ws.stage[i] = x[i] + h * ws.k3[i];
    }
    if diverged(&ws.stage) {
        return Err(StepError::BlowUp);
    }
    f.eval_into(&ws.stage, &mut ws.k4)?;
    for i in 0..n {
        ws.stage[i] = x[i] + h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
    if diverged(&ws.stage) {
        return Err(StepError::BlowUp);
    }
    x.copy_from_slice(&ws.stage);
    Ok(())
}

pub fn rk4_step<F: VectorField + ?Sized>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>, StepError> {
    let mut next = x.to_vec();
    rk4_step_in_place(f, &mut next, h, &mut Rk4Workspace::new(x.len()))?;
    Ok(next)
}

/// Sample times and active modes of the integration mesh on `[0, horizon]`.
pub fn build_mesh(signal: &SwitchingSignal, step: f64, horizon: f64, extra: &[f64]) -> Vec<(f64, usize)> {
    let merge = MESH_MERGE_TOL * horizon.max(1.0);
    // priority: switching instants win over output times, which win over grid points
    let mut points: Vec<(f64, u8)> = Vec::new();
    let steps = (horizon / step).floor() as usize;
    points.extend((0..=steps).map(|k| (k as f64 * step, 2u8)).filter(|(t, _)| *t <= horizon));
    points.push((horizon, 1));
    points.extend(extra.iter().filter(|&&t| (0.0..=horizon).contains(&t)).map(|&t| (t, 1)));
    points.extend(signal.switch_times().iter().filter(|&&t| t <= horizon).map(|&t| (t, 0)));
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut merged: Vec<(f64, u8)> = Vec::with_capacity(points.len());
    for (t, prio) in points {
        match merged.last_mut() {
            // the origin and switching instants are never displaced or dropped
            Some(last) if (t - last.0).abs() <= merge && !(prio == 0 && last.1 == 0) => {
                if prio < last.1 && last.0 != 0.0 {
                    *last = (t, prio);
                } else if prio == 0 {
                    merged.push((t, prio));
                }
            }
            _ => merged.push((t, prio)),
        }
    }

    let switches = signal.instants();
    let modes = signal.modes();
    let mut cursor = 0;
    merged
        .into_iter()
        .map(|(t, _)| {
            while cursor + 1 < switches.len() && switches[cursor + 1] <= t {
                cursor += 1;
            }
            (t, modes[cursor])
        })
        .collect()
}

/// Receives every mesh sample of an integration, in time order.
pub trait Observer {
    fn sample(&mut self, t: f64, mode: usize, x: &[f64]) -> Result<(), EvalError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOutcome {
    pub blown_up: bool,
    /// Time of the last finite sample.
    pub end_time: f64,
}

/// Integrates `x' = field(mode, x)` on the switch-aligned mesh, reporting
/// every sample to `observer`. Divergence truncates the run and sets
/// `blown_up`.
pub fn integrate_with<F, O>(
    field: F,
    dimension: usize,
    signal: &SwitchingSignal,
    x0: &[f64],
    step: f64,
    horizon: f64,
    extra_times: &[f64],
    observer: &mut O,
) -> Result<IntegrationOutcome, DynamicsError>
where
    F: Fn(usize, &[f64], &mut [f64]) -> Result<(), EvalError>,
    O: Observer + ?Sized,
{
    if x0.len() != dimension {
        return Err(DynamicsError::InvalidArgument(format!(
            "initial state has dimension {}, system has {dimension}",
            x0.len()
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(DynamicsError::InvalidArgument("step must be positive".into()));
    }
    if !(horizon > 0.0 && horizon <= signal.horizon()) {
        return Err(DynamicsError::InvalidArgument(format!(
            "horizon {horizon} must lie in (0, {}]",
            signal.horizon()
        )));
    }
    let mesh = build_mesh(signal, step, horizon, extra_times);
    let mut x = x0.to_vec();
    let mut ws = Rk4Workspace::new(dimension);
    observer.sample(mesh[0].0, mesh[0].1, &x)?;
    if diverged(&x) {
        return Ok(IntegrationOutcome {
            blown_up: true,
            end_time: 0.0,
        });
    }
    for w in mesh.windows(2) {
        let (t0, mode) = w[0];
        let (t1, next_mode) = w[1];
        let active = (dimension, |y: &[f64], out: &mut [f64]| field(mode, y, out));
        match rk4_step_in_place(&active, &mut x, t1 - t0, &mut ws) {
            Ok(()) => {}
            Err(StepError::BlowUp) => {
                return Ok(IntegrationOutcome {
                    blown_up: true,
                    end_time: t0,
                })
            }
            Err(StepError::Eval(e)) => return Err(e.into()),
        }
        observer.sample(t1, next_mode, &x)?;
    }
    Ok(IntegrationOutcome {
        blown_up: false,
        end_time: mesh.last().unwrap().0,
    })
}

/// A sampled state path with optional control and Lyapunov logs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub modes: Vec<usize>,
    pub states: Vec<Vec<f64>>,
    pub controls: Option<Vec<Vec<f64>>>,
    pub lyapunov: Option<Vec<f64>>,
    pub blown_up: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(|s| s.as_slice()).unwrap_or(&[])
    }
}

struct Recorder<'a> {
    traj: Trajectory,
    annotate: Option<&'a dyn Fn(usize, &[f64]) -> Result<Vec<f64>, EvalError>>,
}

impl Observer for Recorder<'_> {
    fn sample(&mut self, t: f64, mode: usize, x: &[f64]) -> Result<(), EvalError> {
        self.traj.times.push(t);
        self.traj.modes.push(mode);
        self.traj.states.push(x.to_vec());
        if let Some(annotate) = self.annotate {
            let u = annotate(mode, x)?;
            self.traj.controls.get_or_insert_with(Vec::new).push(u);
        }
        Ok(())
    }
}

/// Integrates a field and records the full trajectory. `annotate`, when
/// given, is evaluated at every sample and logged as the control column.
pub(crate) fn record<F>(
    field: F,
    dimension: usize,
    signal: &SwitchingSignal,
    x0: &[f64],
    step: f64,
    horizon: f64,
    annotate: Option<&dyn Fn(usize, &[f64]) -> Result<Vec<f64>, EvalError>>,
) -> Result<Trajectory, DynamicsError>
where
    F: Fn(usize, &[f64], &mut [f64]) -> Result<(), EvalError>,
{
    let mut recorder = Recorder {
        traj: Trajectory::default(),
        annotate,
    };
    let outcome = integrate_with(field, dimension, signal, x0, step, horizon, &[], &mut recorder)?;
    let mut traj = recorder.traj;
    traj.blown_up = outcome.blown_up;
    Ok(traj)
}

/// Open-loop integration of `x' = f_{sigma(t)}(x)`.
pub fn integrate_switched(
    sys: &SwitchedSystem,
    signal: &SwitchingSignal,
    x0: &[f64],
    step: f64,
    horizon: f64,
) -> Result<Trajectory, DynamicsError> {
    check_signal_modes(sys, signal)?;
    record(
        |p, x, out| sys.drift_into(p, x, out),
        sys.dimension(),
        signal,
        x0,
        step,
        horizon,
        None,
    )
}

pub(crate) fn check_signal_modes(sys: &SwitchedSystem, signal: &SwitchingSignal) -> Result<(), DynamicsError> {
    if let Some(&bad) = signal.modes().iter().find(|&&m| m >= sys.mode_count()) {
        return Err(DynamicsError::InvalidArgument(format!(
            "signal uses mode {} but the system has {} modes",
            bad + 1,
            sys.mode_count()
        )));
    }
    Ok(())
}

fn uniform_in_ball<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let len = norm(&v);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    v.iter_mut().for_each(|c| *c *= r / len);
    v
}

/// Sampled lower estimate of the Lipschitz constant of the drifts on the
/// ball of radius `radius`: the largest `|f_p(x) - f_p(y)| / |x - y|` over
/// sampled pairs and all modes. Diagnostic only.
pub fn lipschitz_estimate(sys: &SwitchedSystem, radius: f64, samples: usize, seed: u64) -> Result<f64, DynamicsError> {
    if samples < 2 {
        return Err(DynamicsError::InvalidArgument("need at least 2 samples".into()));
    }
    let n = sys.dimension();
    let mut rng = rng::stream(seed, 0);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| uniform_in_ball(n, radius, &mut rng)).collect();
    let mut best = 0.0f64;
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    for p in 0..sys.mode_count() {
        for pair in points.chunks_exact(2).chain(points.windows(2)) {
            let (x, y) = (&pair[0], &pair[1]);
            let dist = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dist == 0.0 {
                continue;
            }
            sys.drift_into(p, x, &mut fx)?;
            sys.drift_into(p, y, &mut fy)?;
            let diff = fx.iter().zip(&fy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            best = best.max(diff / dist);
        }
    }
    Ok(best)
}
