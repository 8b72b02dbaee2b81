//! Certificate quantities for multiple Lyapunov functions: the common decay
//! rate, the pairwise ratio bound `mu`, the quadratic class-K envelopes, and
//! the slow-switching gate `mu < (decay + switch_decay) / switch_intensity`.
//!
//! Quadratic families over linear modes are handled exactly through
//! symmetric-definite pencils. Everything else is sampled, which can only
//! falsify a hypothesis; sampled quantities carry [`Method::Sampled`].

use std::fmt;

use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dynamics::{norm, SwitchedSystem};
use crate::expr::{EvalError, Expression, DEFAULT_FD_STEP};
use crate::linalg::{self, LinalgError};
use crate::rng;

/// Tolerance for `V_p(0) = 0`.
pub const ORIGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("mode {mode}: {source}")]
    Mode { mode: usize, source: LinalgError },
    #[error("V_{mode} does not vanish at the origin (V(0) = {value:e})")]
    NonzeroAtOrigin { mode: usize, value: f64 },
    #[error("V_{mode} is not positive at sample point {point:?} (V = {value:e})")]
    NotPositive { mode: usize, point: Vec<f64>, value: f64 },
    #[error("family has {family} functions but the system has {system} modes")]
    ModeCountMismatch { family: usize, system: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Per-mode Lyapunov functions.
#[derive(Debug, Clone, PartialEq)]
pub enum LyapunovFamily {
    /// `V_p(x) = x^T P_p x` with each `P_p` SPD.
    Quadratic(Vec<DMatrix<f64>>),
    Expressions(Vec<Expression>),
}

impl LyapunovFamily {
    pub fn quadratic(matrices: Vec<DMatrix<f64>>) -> Result<Self, LyapunovError> {
        if matrices.is_empty() {
            return Err(LyapunovError::InvalidArgument("empty family".into()));
        }
        let n = matrices[0].nrows();
        for (mode, p) in matrices.iter().enumerate() {
            if p.nrows() != n {
                return Err(LyapunovError::Mode {
                    mode,
                    source: LinalgError::DimensionMismatch {
                        expected: n,
                        got: p.nrows(),
                    },
                });
            }
            linalg::check_spd(p).map_err(|source| LyapunovError::Mode { mode, source })?;
        }
        Ok(LyapunovFamily::Quadratic(matrices))
    }

    pub fn expressions(exprs: Vec<Expression>) -> Result<Self, LyapunovError> {
        if exprs.is_empty() {
            return Err(LyapunovError::InvalidArgument("empty family".into()));
        }
        for (mode, e) in exprs.iter().enumerate() {
            let value = e.evaluate(&vec![0.0; e.dimension()])?;
            if value.abs() > ORIGIN_TOL {
                return Err(LyapunovError::NonzeroAtOrigin { mode, value });
            }
        }
        Ok(LyapunovFamily::Expressions(exprs))
    }

    pub fn modes(&self) -> usize {
        match self {
            LyapunovFamily::Quadratic(m) => m.len(),
            LyapunovFamily::Expressions(e) => e.len(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            LyapunovFamily::Quadratic(m) => m[0].nrows(),
            LyapunovFamily::Expressions(e) => e[0].dimension(),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, LyapunovFamily::Quadratic(_))
    }

    pub fn value(&self, p: usize, x: &[f64]) -> Result<f64, EvalError> {
        match self {
            LyapunovFamily::Quadratic(m) => Ok(quad_form(&m[p], x)),
            LyapunovFamily::Expressions(e) => e[p].evaluate(x),
        }
    }

    /// Exact `2 P x` for quadratics, central differences otherwise.
    pub fn gradient_into(&self, p: usize, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        match self {
            LyapunovFamily::Quadratic(m) => {
                let pm = &m[p];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = 2.0 * (0..x.len()).map(|j| pm[(i, j)] * x[j]).sum::<f64>();
                }
                Ok(())
            }
            LyapunovFamily::Expressions(e) => e[p].gradient_into(x, DEFAULT_FD_STEP, out),
        }
    }

    pub fn scaled(&self, c: f64) -> LyapunovFamily {
        match self {
            LyapunovFamily::Quadratic(m) => LyapunovFamily::Quadratic(m.iter().map(|p| p * c).collect()),
            LyapunovFamily::Expressions(e) => LyapunovFamily::Expressions(
                e.iter()
                    .map(|v| {
                        Expression::from_node(
                            crate::expr::Node::Binary(
                                crate::expr::BinaryOp::Mul,
                                Box::new(crate::expr::Node::Const(c)),
                                Box::new(v.root().clone()),
                            ),
                            v.dimension(),
                        )
                    })
                    .collect(),
            ),
        }
    }
}

fn quad_form(p: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += x[i] * p[(i, j)] * x[j];
        }
    }
    acc
}

fn check_pairs(a: &[DMatrix<f64>], p: &[DMatrix<f64>]) -> Result<(), LyapunovError> {
    if a.len() != p.len() || a.is_empty() {
        return Err(LyapunovError::ModeCountMismatch {
            family: p.len(),
            system: a.len(),
        });
    }
    for (mode, (am, pm)) in a.iter().zip(p).enumerate() {
        linalg::check_square(am).map_err(|source| LyapunovError::Mode { mode, source })?;
        if am.nrows() != pm.nrows() {
            return Err(LyapunovError::Mode {
                mode,
                source: LinalgError::DimensionMismatch {
                    expected: pm.nrows(),
                    got: am.nrows(),
                },
            });
        }
        linalg::check_spd(pm).map_err(|source| LyapunovError::Mode { mode, source })?;
    }
    Ok(())
}

/// Per-mode largest `lambda` with `A^T P + P A <= -lambda P`, i.e. minus the
/// top eigenvalue of the pencil `(A^T P + P A, P)`.
pub fn decay_rates_quadratic(a: &[DMatrix<f64>], p: &[DMatrix<f64>]) -> Result<Vec<f64>, LyapunovError> {
    check_pairs(a, p)?;
    a.iter()
        .zip(p)
        .map(|(am, pm)| {
            let lyap = am.transpose() * pm + pm * am;
            Ok(-linalg::largest_generalized_eigenvalue(&lyap, pm)?)
        })
        .collect()
}

/// Exact common decay rate: the minimum of [`decay_rates_quadratic`].
pub fn decay_rate_quadratic(a: &[DMatrix<f64>], p: &[DMatrix<f64>]) -> Result<f64, LyapunovError> {
    Ok(decay_rates_quadratic(a, p)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Smallest `mu` with `P_i <= mu P_j` for every ordered pair: the largest
/// generalized eigenvalue over pairs, and 1 for a single mode.
pub fn mu_quadratic(p: &[DMatrix<f64>]) -> Result<f64, LyapunovError> {
    if p.is_empty() {
        return Err(LyapunovError::InvalidArgument("empty family".into()));
    }
    for (mode, m) in p.iter().enumerate() {
        linalg::check_spd(m).map_err(|source| LyapunovError::Mode { mode, source })?;
    }
    let mut mu = 1.0f64;
    for (i, pi) in p.iter().enumerate() {
        for (j, pj) in p.iter().enumerate() {
            if i != j {
                mu = mu.max(linalg::largest_generalized_eigenvalue(pi, pj)?);
            }
        }
    }
    Ok(mu)
}

/// `(c1, c2)` with `c1 |x|^2 <= V_p(x) <= c2 |x|^2` for every mode.
pub fn class_k_bounds_quadratic(p: &[DMatrix<f64>]) -> Result<(f64, f64), LyapunovError> {
    if p.is_empty() {
        return Err(LyapunovError::InvalidArgument("empty family".into()));
    }
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for (mode, m) in p.iter().enumerate() {
        linalg::check_spd(m).map_err(|source| LyapunovError::Mode { mode, source })?;
        let ev = linalg::symmetric_eigenvalues(m);
        c1 = c1.min(ev[0]);
        c2 = c2.max(*ev.last().unwrap());
    }
    Ok((c1, c2))
}

/// Sample points: log-uniform radii in `[min_radius, max_radius]` along
/// uniformly distributed directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    pub count: usize,
    pub min_radius: f64,
    pub max_radius: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: 10_000,
            min_radius: 1e-3,
            max_radius: 1e3,
        }
    }
}

impl SampleSpec {
    fn validate(&self) -> Result<(), LyapunovError> {
        if self.count == 0 || !(self.min_radius > 0.0 && self.max_radius >= self.min_radius) {
            return Err(LyapunovError::InvalidArgument(
                "sample spec needs count > 0 and 0 < min_radius <= max_radius".into(),
            ));
        }
        Ok(())
    }

    pub fn points(&self, dimension: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::stream(seed, 0);
        let (lo, hi) = (self.min_radius.ln(), self.max_radius.ln());
        (0..self.count)
            .map(|_| {
                let r = (lo + (hi - lo) * rng.random::<f64>()).exp();
                let mut v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = norm(&v);
                v.iter_mut().for_each(|c| *c *= r / len);
                v
            })
            .collect()
    }
}

fn positive_value(v: &LyapunovFamily, p: usize, x: &[f64]) -> Result<f64, LyapunovError> {
    let value = v.value(p, x)?;
    if !(value > 0.0) {
        return Err(LyapunovError::NotPositive {
            mode: p,
            point: x.to_vec(),
            value,
        });
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledDecay {
    /// Minimum of `-(grad V_p . f_p) / V_p` over samples and modes. An upper
    /// bound on the true rate.
    pub rate: f64,
    pub worst_mode: usize,
    pub worst_point: Vec<f64>,
    /// False when the per-radius minimum keeps shrinking toward the edge
    /// of the sampled radius range, i.e. no uniform linear rate is visible.
    pub uniform: bool,
}

pub fn decay_rate_sampled(
    sys: &SwitchedSystem,
    v: &LyapunovFamily,
    spec: &SampleSpec,
    seed: u64,
) -> Result<SampledDecay, LyapunovError> {
    spec.validate()?;
    if v.modes() != sys.mode_count() {
        return Err(LyapunovError::ModeCountMismatch {
            family: v.modes(),
            system: sys.mode_count(),
        });
    }
    let n = sys.dimension();
    let points = spec.points(n, seed);
    let decades = ((spec.max_radius / spec.min_radius).log10().ceil() as usize).max(1);
    let mut bucket_min = vec![f64::INFINITY; decades];
    let mut best = SampledDecay {
        rate: f64::INFINITY,
        worst_mode: 0,
        worst_point: vec![0.0; n],
        uniform: true,
    };
    let mut f = vec![0.0; n];
    let mut grad = vec![0.0; n];
    for x in &points {
        let bucket = ((norm(x) / spec.min_radius).log10().floor().max(0.0) as usize).min(decades - 1);
        for p in 0..sys.mode_count() {
            let value = positive_value(v, p, x)?;
            sys.drift_into(p, x, &mut f)?;
            v.gradient_into(p, x, &mut grad)?;
            let lie: f64 = grad.iter().zip(&f).map(|(g, fi)| g * fi).sum();
            let ratio = -lie / value;
            bucket_min[bucket] = bucket_min[bucket].min(ratio);
            if ratio < best.rate {
                best.rate = ratio;
                best.worst_mode = p;
                best.worst_point.clone_from(x);
            }
        }
    }
    let filled: Vec<f64> = bucket_min.into_iter().filter(|m| m.is_finite()).collect();
    if filled.len() >= 2 && best.rate > 0.0 {
        let first_shrinks = filled[0] < 0.1 * filled[1];
        let k = filled.len();
        let last_shrinks = filled[k - 1] < 0.1 * filled[k - 2];
        best.uniform = !(first_shrinks || last_shrinks);
    }
    Ok(best)
}

/// Largest sampled `V_i / V_j` over ordered pairs; a lower bound on `mu`.
pub fn mu_sampled(v: &LyapunovFamily, spec: &SampleSpec, seed: u64) -> Result<f64, LyapunovError> {
    spec.validate()?;
    let modes = v.modes();
    let mut mu = 1.0f64;
    if modes == 1 {
        return Ok(mu);
    }
    let mut values = vec![0.0; modes];
    for x in spec.points(v.dimension(), seed) {
        for (p, slot) in values.iter_mut().enumerate() {
            *slot = positive_value(v, p, &x)?;
        }
        for i in 0..modes {
            for j in 0..modes {
                if i != j {
                    mu = mu.max(values[i] / values[j]);
                }
            }
        }
    }
    Ok(mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactQuadratic,
    Sampled,
    Supplied,
    /// Read off a generator matrix.
    Generator,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactQuadratic => "exact-quadratic",
            Method::Sampled => "sampled",
            Method::Supplied => "supplied",
            Method::Generator => "generator",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub decay_rate: f64,
    /// `mu` as computed.
    pub mu: f64,
    /// `mu` used in the gate: at least the successor of 1.
    pub mu_gate: f64,
    pub switch_decay: f64,
    pub switch_intensity: f64,
    pub onset: usize,
    pub threshold: f64,
    pub verdict: Verdict,
    pub margin: f64,
    pub decay_method: Method,
    pub mu_method: Method,
    pub switching_method: Method,
    pub class_k: Option<(f64, f64)>,
    pub class_k_method: Option<Method>,
    pub notes: Vec<String>,
}

impl CertificateReport {
    /// A pass built on any sampled quantity is advisory only.
    pub fn is_advisory(&self) -> bool {
        self.decay_method == Method::Sampled
            || self.mu_method == Method::Sampled
            || self.class_k_method == Some(Method::Sampled)
    }
}

/// Evaluates the slow-switching gate `mu < (decay + switch_decay) /
/// switch_intensity`. Method tags default to [`Method::Supplied`].
pub fn check_slow_switching(
    mu: f64,
    decay_rate: f64,
    switch_decay: f64,
    switch_intensity: f64,
    onset: usize,
) -> Result<CertificateReport, LyapunovError> {
    if !(mu.is_finite() && decay_rate.is_finite() && switch_decay.is_finite() && switch_intensity.is_finite()) {
        return Err(LyapunovError::InvalidArgument("gate inputs must be finite".into()));
    }
    if switch_intensity < 0.0 {
        return Err(LyapunovError::InvalidArgument(
            "switching intensity must be nonnegative".into(),
        ));
    }
    let mut notes = Vec::new();
    let mut mu_gate = mu;
    if mu < 1.0 {
        notes.push(format!("mu = {mu} < 1 clamped to 1"));
        mu_gate = 1.0;
    }
    if mu_gate == 1.0 {
        mu_gate = 1.0 + f64::EPSILON;
        notes.push("mu = 1 (common Lyapunov function); gate uses 1 + ulp".into());
    }
    let threshold = if switch_intensity == 0.0 {
        notes.push("switching intensity is zero: the gate holds vacuously".into());
        f64::INFINITY
    } else {
        (decay_rate + switch_decay) / switch_intensity
    };
    if decay_rate <= 0.0 {
        notes.push(format!("decay rate {decay_rate} is not positive"));
    }
    let pass = decay_rate > 0.0 && mu_gate < threshold;
    Ok(CertificateReport {
        decay_rate,
        mu,
        mu_gate,
        switch_decay,
        switch_intensity,
        onset,
        threshold,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        margin: threshold - mu_gate,
        decay_method: Method::Supplied,
        mu_method: Method::Supplied,
        switching_method: Method::Supplied,
        class_k: None,
        class_k_method: None,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Drift, Mode};
    use nalgebra::dmatrix;

    fn scalar_sys(srcs: &[&str]) -> SwitchedSystem {
        SwitchedSystem::new(
            1,
            srcs.iter()
                .map(|s| Mode::autonomous(Drift::Expressions(vec![Expression::parse(s, 1).unwrap()])))
                .collect(),
        )
        .unwrap()
    }

    fn exprs(srcs: &[&str], n: usize) -> LyapunovFamily {
        LyapunovFamily::expressions(srcs.iter().map(|s| Expression::parse(s, n).unwrap()).collect()).unwrap()
    }

    #[test]
    fn decay_rate_of_scaled_identity() {
        let a = DMatrix::identity(3, 3) * -1.5;
        let p = DMatrix::identity(3, 3);
        assert!((decay_rate_quadratic(&[a], &[p]).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn decay_rate_minimum_over_modes() {
        let i2 = DMatrix::identity(2, 2);
        let r = decay_rate_quadratic(&[&i2 * -1.0, &i2 * -2.5], &[i2.clone(), i2.clone()]).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decay_rate_with_lyapunov_solution_is_positive() {
        let a = dmatrix![0.0, 1.0; -1.0, -2.0];
        let p = linalg::solve_lyapunov(&a, &(DMatrix::identity(2, 2) * 2.0)).unwrap();
        let rate = decay_rate_quadratic(&[a.clone()], &[p.clone()]).unwrap();
        // oracle: -lambda_max(P^{-1}(A^T P + P A)) via the nonsymmetric route
        let m = p.clone().try_inverse().unwrap() * (a.transpose() * &p + &p * &a);
        let ev = m.complex_eigenvalues();
        let top = ev.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(rate > 0.0);
        assert!((rate + top).abs() < 1e-10, "{rate} vs {}", -top);
    }

    #[test]
    fn mu_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!((mu_quadratic(&[i2.clone(), &i2 * 2.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(mu_quadratic(&[i2.clone(), i2.clone()]).unwrap(), 1.0);
        assert_eq!(mu_quadratic(&[i2.clone()]).unwrap(), 1.0);
        let p1 = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 4.0]);
        let p2 = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 1.0]);
        assert!((mu_quadratic(&[p1, p2]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn non_spd_inputs_are_rejected() {
        let bad = dmatrix![1.0, 0.0; 0.0, -1.0];
        assert!(mu_quadratic(&[bad.clone()]).is_err());
        assert!(class_k_bounds_quadratic(&[bad.clone()]).is_err());
        assert!(decay_rate_quadratic(&[DMatrix::identity(2, 2)], &[bad.clone()]).is_err());
        assert!(LyapunovFamily::quadratic(vec![bad]).is_err());
    }

    #[test]
    fn class_k_examples() {
        assert_eq!(class_k_bounds_quadratic(&[DMatrix::identity(2, 2)]).unwrap(), (1.0, 1.0));
        let p1 = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 4.0]);
        let p2 = DMatrix::from_diagonal(&nalgebra::dvector![2.0, 1.0]);
        let (c1, c2) = class_k_bounds_quadratic(&[p1, p2]).unwrap();
        assert!((c1 - 1.0).abs() < 1e-12 && (c2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_decay_linear_scalar() {
        let d = decay_rate_sampled(&scalar_sys(&["-x1"]), &exprs(&["x1^2"], 1), &SampleSpec::default(), 3).unwrap();
        assert!((d.rate - 2.0).abs() < 1e-6, "{}", d.rate);
        assert!(d.uniform);
    }

    #[test]
    fn sampled_decay_cubic_has_no_uniform_rate() {
        let d = decay_rate_sampled(&scalar_sys(&["-x1^3"]), &exprs(&["x1^2"], 1), &SampleSpec::default(), 3).unwrap();
        assert!(d.rate >= 0.0 && d.rate < 1e-5, "{}", d.rate);
        assert!(!d.uniform);
    }

    #[test]
    fn sampled_decay_detects_growth() {
        let d = decay_rate_sampled(&scalar_sys(&["x1"]), &exprs(&["x1^2"], 1), &SampleSpec::default(), 3).unwrap();
        assert!(d.rate < 0.0);
        let report = check_slow_switching(1.0, d.rate, 1.0, 1.0, 0).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn sampled_nonpositive_v_is_an_error() {
        let v = exprs(&["x1^2 - x1^4"], 1);
        let err = decay_rate_sampled(&scalar_sys(&["-x1"]), &v, &SampleSpec::default(), 1).unwrap_err();
        assert!(matches!(err, LyapunovError::NotPositive { .. }));
    }

    #[test]
    fn sampled_mu_examples() {
        let spec = SampleSpec::default();
        assert_eq!(mu_sampled(&exprs(&["x1^2"], 1), &spec, 1).unwrap(), 1.0);
        let mu = mu_sampled(&exprs(&["x1^2", "2*x1^2"], 1), &spec, 1).unwrap();
        assert!((mu - 2.0).abs() < 1e-12);
        let r = 0.5;
        let spec = SampleSpec {
            count: 10_000,
            min_radius: 1e-3,
            max_radius: r,
        };
        let mu = mu_sampled(&exprs(&["x1^2 + x1^4", "x1^2"], 1), &spec, 1).unwrap();
        assert!(mu <= 1.0 + r * r && mu > 1.0 + r * r - 1e-3, "{mu}");
    }

    #[test]
    fn gate_examples() {
        let r = check_slow_switching(2.0, 3.0, 1.0, 1.0, 0).unwrap();
        assert_eq!((r.threshold, r.verdict, r.margin), (4.0, Verdict::Pass, 2.0));
        let r = check_slow_switching(2.0, 1.0, 1.0, 1.0, 0).unwrap();
        assert_eq!((r.threshold, r.verdict), (2.0, Verdict::Fail));
        let r = check_slow_switching(1.0, 0.01, 3.0, 3.0, 0).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.mu_gate > 1.0);
        let r = check_slow_switching(5.0, 1.0, 0.0, 0.0, 0).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.threshold.is_infinite());
        assert!(check_slow_switching(2.0, 1.0, 1.0, -1.0, 0).is_err());
    }

    #[test]
    fn expression_family_must_vanish_at_origin() {
        let e = Expression::parse("x1^2 + 1", 1).unwrap();
        assert!(matches!(
            LyapunovFamily::expressions(vec![e]),
            Err(LyapunovError::NonzeroAtOrigin { .. })
        ));
    }
}
