//! Universal-formula feedback for control-affine switched systems
//! `x' = f_p(x) + sum_i g_{p,i}(x) u_i`, with the active mode known to the
//! controller.
//!
//! For mode `p` with Lyapunov function `V_p` and target rate `lambda`:
//!
//! ```text
//! W_bar   = L_f V + lambda V
//! W_tilde = sum_i (L_{g_i} V)^2
//! k_i     = -L_{g_i} V * phi(W_bar, W_tilde)
//! phi(a, b) = (a + sqrt(a^2 + b^2)) / b   (b != 0),   0 otherwise
//! ```
//!
//! so that `L_f V + sum_i k_i L_{g_i} V = -lambda V - sqrt(W_bar^2 + W_tilde^2)`.

use rand::Rng;
use thiserror::Error;

use crate::dynamics::{self, norm, DynamicsError, SwitchedSystem, Trajectory};
use crate::expr::{EvalError, Expression, DEFAULT_FD_STEP};
use crate::lyapunov::LyapunovFamily;
use crate::rng;
use crate::switching::SwitchingSignal;

/// Below this state norm the feedback is exactly zero.
pub const ORIGIN_CUTOFF: f64 = 1e-9;
/// Relative slack `tol * (1 + V)` in the decrease check.
pub const DECREASE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("system has no control fields")]
    NoControls,
    #[error("Lyapunov family has {family} functions but the system has {system} modes")]
    ModeCountMismatch { family: usize, system: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `grad V(x) . field(x)` with a finite-difference gradient.
pub fn lie_derivative(v: &Expression, field: &[Expression], x: &[f64]) -> Result<f64, EvalError> {
    let grad = v.gradient(x, DEFAULT_FD_STEP)?;
    field
        .iter()
        .zip(&grad)
        .try_fold(0.0, |acc, (f, g)| Ok(acc + g * f.evaluate(x)?))
}

/// `(a + sqrt(a^2 + b^2)) / b` for `b != 0`, else 0. The root is taken
/// after scaling by `max(|a|, |b|)`.
pub fn phi(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let scale = a.abs().max(b.abs());
    let (sa, sb) = (a / scale, b / scale);
    let root = scale * (sa * sa + sb * sb).sqrt();
    // for a < 0 the sum cancels; use (a + r) = b^2 / (r - a)
    if a < 0.0 {
        b / (root - a)
    } else {
        (a + root) / b
    }
}

/// Feedback quantities at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SontagGains {
    pub w_bar: f64,
    pub w_tilde: f64,
    /// `L_{g_i} V` for each input.
    pub control_lie: Vec<f64>,
    pub drift_lie: f64,
    pub value: f64,
    pub feedback: Vec<f64>,
}

/// The universal-formula feedback for a switched system and a Lyapunov
/// family. `gain_scale` multiplies the synthesized control (1 for the
/// formula itself).
#[derive(Debug, Clone, Copy)]
pub struct SontagController<'a> {
    pub system: &'a SwitchedSystem,
    pub family: &'a LyapunovFamily,
    pub decay_rate: f64,
    pub gain_scale: f64,
}

impl<'a> SontagController<'a> {
    pub fn new(system: &'a SwitchedSystem, family: &'a LyapunovFamily, decay_rate: f64) -> Result<Self, ControlError> {
        if system.inputs() == 0 {
            return Err(ControlError::NoControls);
        }
        if family.modes() != system.mode_count() {
            return Err(ControlError::ModeCountMismatch {
                family: family.modes(),
                system: system.mode_count(),
            });
        }
        if !(decay_rate > 0.0 && decay_rate.is_finite()) {
            return Err(ControlError::InvalidArgument("decay rate must be positive".into()));
        }
        Ok(SontagController {
            system,
            family,
            decay_rate,
            gain_scale: 1.0,
        })
    }

    pub fn with_gain_scale(mut self, scale: f64) -> Self {
        self.gain_scale = scale;
        self
    }

    /// Lie derivatives and `V_p(x)` at a point: `(L_f V, [L_{g_i} V], V)`.
    pub fn lie_terms(&self, p: usize, x: &[f64]) -> Result<(f64, Vec<f64>, f64), EvalError> {
        let n = x.len();
        let mut grad = vec![0.0; n];
        self.family.gradient_into(p, x, &mut grad)?;
        let mut f = vec![0.0; n];
        self.system.drift_into(p, x, &mut f)?;
        let drift_lie = dot(&grad, &f);
        let control_lie = self
            .system
            .mode(p)
            .controls
            .iter()
            .map(|g| {
                g.iter()
                    .zip(&grad)
                    .try_fold(0.0, |acc, (gi, di)| Ok(acc + di * gi.evaluate(x)?))
            })
            .collect::<Result<Vec<f64>, EvalError>>()?;
        Ok((drift_lie, control_lie, self.family.value(p, x)?))
    }

    pub fn gains(&self, p: usize, x: &[f64]) -> Result<SontagGains, EvalError> {
        let (drift_lie, control_lie, value) = self.lie_terms(p, x)?;
        let w_bar = drift_lie + self.decay_rate * value;
        let w_tilde: f64 = control_lie.iter().map(|l| l * l).sum();
        let feedback = if norm(x) < ORIGIN_CUTOFF {
            vec![0.0; control_lie.len()]
        } else {
            let scale = phi(w_bar, w_tilde);
            control_lie.iter().map(|l| -l * scale * self.gain_scale).collect()
        };
        Ok(SontagGains {
            w_bar,
            w_tilde,
            control_lie,
            drift_lie,
            value,
            feedback,
        })
    }

    pub fn feedback(&self, p: usize, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        Ok(self.gains(p, x)?.feedback)
    }

    /// Closed-loop velocity `f_p(x) + sum_i g_{p,i}(x) k_i(x)`.
    pub fn closed_loop_into(&self, p: usize, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let u = self.feedback(p, x)?;
        self.system.drift_into(p, x, out)?;
        for (g, ui) in self.system.mode(p).controls.iter().zip(&u) {
            if *ui == 0.0 {
                continue;
            }
            for (o, gi) in out.iter_mut().zip(g) {
                *o += gi.evaluate(x)? * ui;
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integrates the closed loop along `signal`, logging the applied control
/// and `V_{sigma(t)}(x(t))` at every mesh sample.
pub fn integrate_closed_loop(
    controller: &SontagController<'_>,
    signal: &SwitchingSignal,
    x0: &[f64],
    step: f64,
    horizon: f64,
) -> Result<Trajectory, ControlError> {
    dynamics::check_signal_modes(controller.system, signal)?;
    let log = |p: usize, x: &[f64]| controller.feedback(p, x);
    let mut traj = dynamics::record(
        |p, x, out| controller.closed_loop_into(p, x, out),
        controller.system.dimension(),
        signal,
        x0,
        step,
        horizon,
        Some(&log),
    )?;
    let values = traj
        .modes
        .iter()
        .zip(&traj.states)
        .map(|(&p, x)| controller.family.value(p, x))
        .collect::<Result<Vec<f64>, EvalError>>()?;
    traj.lyapunov = Some(values);
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseReport {
    pub checked: usize,
    pub violations: usize,
    /// Smallest `-lambda V + tol (1 + V) - (L_f V + sum_i u_i L_{g_i} V)`.
    pub worst_margin: f64,
    pub worst_time: Option<f64>,
    pub pass: bool,
}

/// Checks `L_f V + sum_i u_i L_{g_i} V <= -lambda V + tol (1 + V)` at every
/// sample with `x != 0`, using the control values logged in `traj`.
/// Holding at every sample also discharges the pointwise infimum condition
/// there; nothing is claimed between samples.
pub fn verify_decrease(
    traj: &Trajectory,
    system: &SwitchedSystem,
    family: &LyapunovFamily,
    decay_rate: f64,
) -> Result<DecreaseReport, ControlError> {
    let controller = SontagController {
        system,
        family,
        decay_rate,
        gain_scale: 1.0,
    };
    let zeros = vec![0.0; system.inputs()];
    let mut report = DecreaseReport {
        checked: 0,
        violations: 0,
        worst_margin: f64::INFINITY,
        worst_time: None,
        pass: true,
    };
    for (idx, x) in traj.states.iter().enumerate() {
        if norm(x) == 0.0 {
            continue;
        }
        let p = traj.modes[idx];
        let u = traj.controls.as_ref().map(|c| c[idx].as_slice()).unwrap_or(&zeros);
        let (drift_lie, control_lie, value) = controller.lie_terms(p, x)?;
        let rate = drift_lie + dot(u, &control_lie);
        let margin = -decay_rate * value + DECREASE_TOL * (1.0 + value) - rate;
        report.checked += 1;
        if margin < 0.0 {
            report.violations += 1;
        }
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_time = Some(traj.times[idx]);
        }
    }
    report.pass = report.violations == 0;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallControlReport {
    pub mode: usize,
    /// `(radius, sup |k(x)|)` over sampled `|x| = radius`, radii decreasing.
    pub sups: Vec<(f64, f64)>,
    /// Advisory: the sups are nonincreasing and shrink at least like the
    /// square root of the radius.
    pub pass: bool,
}

/// Sampled look at the small control property near the origin.
pub fn check_small_control_property(
    controller: &SontagController<'_>,
    mode: usize,
    radii: &[f64],
    samples_per_radius: usize,
    seed: u64,
) -> Result<SmallControlReport, ControlError> {
    if radii.is_empty() || samples_per_radius == 0 || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(ControlError::InvalidArgument("need positive radii and samples".into()));
    }
    if mode >= controller.system.mode_count() {
        return Err(ControlError::InvalidArgument(format!("no mode {}", mode + 1)));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    let n = controller.system.dimension();
    let mut rng = rng::stream(seed, mode as u64);
    let mut sups = Vec::with_capacity(radii.len());
    for &r in &radii {
        let mut sup = 0.0f64;
        for _ in 0..samples_per_radius {
            let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let len = norm(&x);
            if len == 0.0 {
                continue;
            }
            x.iter_mut().for_each(|c| *c *= r / len);
            sup = sup.max(norm(&controller.feedback(mode, &x)?));
        }
        sups.push((r, sup));
    }
    let nonincreasing = sups.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9) + 1e-300);
    let (r_first, s_first) = sups[0];
    let (r_last, s_last) = *sups.last().unwrap();
    let shrinks = s_first == 0.0 || s_last <= s_first * (r_last / r_first).sqrt();
    Ok(SmallControlReport {
        mode,
        sups,
        pass: nonincreasing && shrinks,
    })
}
