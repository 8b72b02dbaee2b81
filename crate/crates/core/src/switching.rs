//! Switching signals driven by continuous-time Markov chains, switch
//! counting, and the Poisson-type bounds on the distribution of the number
//! of switches.

use rand::distr::{Distribution, Open01};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::rng;
use crate::stats::{proportion_stderr, robust_verdict};

/// Row-sum tolerance for generator matrices.
pub const GENERATOR_TOL: f64 = 1e-9;
/// One-sided slack, in standard errors, for statistical comparisons.
pub const SE_SLACK: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwitchingError {
    #[error("generator matrix must be square and nonempty")]
    BadShape,
    #[error("negative off-diagonal rate q[{row}][{col}] = {value}")]
    NegativeRate { row: usize, col: usize, value: f64 },
    #[error("row {row} of the generator does not sum to zero (residual {residual:e})")]
    RowSum { row: usize, residual: f64 },
    #[error("non-finite generator entry at [{row}][{col}]")]
    NonFinite { row: usize, col: usize },
    #[error("initial distribution is invalid: {0}")]
    InvalidDistribution(String),
    #[error("invalid switching signal: {0}")]
    InvalidSignal(String),
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Transition-rate matrix of the switching chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    rates: Vec<Vec<f64>>,
}

impl GeneratorMatrix {
    pub fn new(rates: Vec<Vec<f64>>) -> Result<Self, SwitchingError> {
        let n = rates.len();
        if n == 0 || rates.iter().any(|row| row.len() != n) {
            return Err(SwitchingError::BadShape);
        }
        for (i, row) in rates.iter().enumerate() {
            let mut off = 0.0;
            for (j, &q) in row.iter().enumerate() {
                if !q.is_finite() {
                    return Err(SwitchingError::NonFinite { row: i, col: j });
                }
                if i != j {
                    if q < 0.0 {
                        return Err(SwitchingError::NegativeRate {
                            row: i,
                            col: j,
                            value: q,
                        });
                    }
                    off += q;
                }
            }
            let residual = off + row[i];
            if residual.abs() > GENERATOR_TOL {
                return Err(SwitchingError::RowSum { row: i, residual });
            }
        }
        Ok(GeneratorMatrix { rates })
    }

    pub fn modes(&self) -> usize {
        self.rates.len()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rates
    }

    /// Total exit rate of mode `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.rates[i][i]
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, SwitchingError> {
        GeneratorMatrix::new(
            self.rates
                .iter()
                .map(|row| row.iter().map(|q| q * factor).collect())
                .collect(),
        )
    }
}

/// `(q_bar, q_tilde)`: the largest exit rate `max |q_ii|` and the largest
/// entry `max q_ij` taken over the whole matrix, diagonal included.
pub fn q_params(q: &GeneratorMatrix) -> (f64, f64) {
    let q_bar = (0..q.modes()).map(|i| q.rate(i, i).abs()).fold(0.0, f64::max);
    let q_tilde = q
        .rows()
        .iter()
        .flat_map(|row| row.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    (q_bar, q_tilde)
}

/// Validated probability vector over modes.
pub fn check_distribution(pi: &[f64], modes: usize) -> Result<(), SwitchingError> {
    if pi.len() != modes {
        return Err(SwitchingError::InvalidDistribution(format!(
            "expected {modes} entries, got {}",
            pi.len()
        )));
    }
    if pi.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(SwitchingError::InvalidDistribution(
            "entries must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > GENERATOR_TOL {
        return Err(SwitchingError::InvalidDistribution(format!("entries sum to {total}")));
    }
    Ok(())
}

/// A realized cadlag switching path on `[0, horizon]`.
///
/// `instants[0] == 0`; `modes[i]` is active on `[instants[i], instants[i+1])`.
/// Modes are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSignal {
    instants: Vec<f64>,
    modes: Vec<usize>,
    horizon: f64,
}

impl SwitchingSignal {
    pub fn new(instants: Vec<f64>, modes: Vec<usize>, horizon: f64) -> Result<Self, SwitchingError> {
        let bad = |msg: &str| Err(SwitchingError::InvalidSignal(msg.into()));
        if !(horizon.is_finite() && horizon > 0.0) {
            return bad("horizon must be positive and finite");
        }
        if instants.is_empty() || instants.len() != modes.len() {
            return bad("need one mode per instant and at least one instant");
        }
        if instants[0] != 0.0 {
            return bad("first instant must be 0");
        }
        if instants.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("instants must be strictly increasing");
        }
        if *instants.last().unwrap() > horizon {
            return bad("last instant exceeds the horizon");
        }
        if modes.windows(2).any(|w| w[0] == w[1]) {
            return bad("consecutive modes must differ");
        }
        Ok(SwitchingSignal {
            instants,
            modes,
            horizon,
        })
    }

    /// A signal that never switches.
    pub fn constant(mode: usize, horizon: f64) -> Result<Self, SwitchingError> {
        SwitchingSignal::new(vec![0.0], vec![mode], horizon)
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Genuine switching instants `tau_1, tau_2, ...`.
    pub fn switch_times(&self) -> &[f64] {
        &self.instants[1..]
    }

    pub fn initial_mode(&self) -> usize {
        self.modes[0]
    }

    /// Active mode at `t` (right-continuous).
    pub fn mode_at(&self, t: f64) -> usize {
        let idx = self.instants.partition_point(|&tau| tau <= t);
        self.modes[idx.saturating_sub(1)]
    }

    /// Number of switching instants in `(0, t]`.
    pub fn count_switches(&self, t: f64) -> Result<usize, SwitchingError> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(SwitchingError::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.switch_times().partition_point(|&tau| tau <= t))
    }
}

fn sample_index<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut cumulative = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        cumulative += w;
        last = i;
        if target < cumulative {
            return i;
        }
    }
    last
}

/// Samples a chain path with an explicit generator.
pub fn sample_ctmc_with<R: Rng + ?Sized>(
    q: &GeneratorMatrix,
    initial: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Result<SwitchingSignal, SwitchingError> {
    check_distribution(initial, q.modes())?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(SwitchingError::InvalidArgument("horizon must be positive".into()));
    }
    let mut mode = sample_index(initial, initial.iter().sum(), rng);
    let mut instants = vec![0.0];
    let mut modes = vec![mode];
    let mut t = 0.0;
    loop {
        let rate = q.exit_rate(mode);
        if rate <= 0.0 {
            break;
        }
        let u: f64 = Open01.sample(rng);
        t += -u.ln() / rate;
        if t > horizon {
            break;
        }
        let weights: Vec<f64> = (0..q.modes())
            .map(|j| if j == mode { 0.0 } else { q.rate(mode, j) })
            .collect();
        mode = sample_index(&weights, rate, rng);
        instants.push(t);
        modes.push(mode);
    }
    SwitchingSignal::new(instants, modes, horizon)
}

/// Samples a chain path with the stream derived from `(seed, 0)`.
pub fn sample_ctmc(
    q: &GeneratorMatrix,
    initial: &[f64],
    horizon: f64,
    seed: u64,
) -> Result<SwitchingSignal, SwitchingError> {
    sample_ctmc_with(q, initial, horizon, &mut rng::stream(seed, 0))
}

/// Decay/intensity parameters of the Poisson-type bound on switch counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfBoundParams {
    pub decay: f64,
    pub intensity: f64,
    pub onset: usize,
}

impl PmfBoundParams {
    pub fn new(decay: f64, intensity: f64, onset: usize) -> Result<Self, SwitchingError> {
        if !(decay > 0.0 && intensity > 0.0 && decay.is_finite() && intensity.is_finite()) {
            return Err(SwitchingError::InvalidArgument(
                "decay and intensity must be positive and finite".into(),
            ));
        }
        Ok(PmfBoundParams {
            decay,
            intensity,
            onset,
        })
    }

    /// Parameters implied by a generator (decay `q_tilde`, intensity
    /// `q_bar`, onset 0). Not validated: degenerate chains give zeros.
    pub fn from_generator(q: &GeneratorMatrix) -> Self {
        let (q_bar, q_tilde) = q_params(q);
        PmfBoundParams {
            decay: q_tilde,
            intensity: q_bar,
            onset: 0,
        }
    }
}

/// `ln(exp(-decay t) (intensity t)^k / k!)`, with `ln 0^0 = 0`.
pub fn ln_poisson_kernel(k: usize, t: f64, decay: f64, intensity: f64) -> f64 {
    let rate_t = intensity * t;
    let power = if k == 0 {
        0.0
    } else if rate_t == 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * rate_t.ln()
    };
    -decay * t + power - ln_factorial(k)
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Bound on `P(N(t) = k)`, capped at 1; equal to 1 below the onset index.
pub fn pmf_bound(k: usize, t: f64, p: &PmfBoundParams) -> f64 {
    if k < p.onset {
        return 1.0;
    }
    ln_poisson_kernel(k, t, p.decay, p.intensity).exp().min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfEstimate {
    pub k: usize,
    pub estimate: f64,
    pub stderr: f64,
}

fn switch_counts(
    q: &GeneratorMatrix,
    initial: &[f64],
    times: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, SwitchingError> {
    check_distribution(initial, q.modes())?;
    let horizon = times.iter().copied().fold(0.0, f64::max);
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            let signal = sample_ctmc_with(q, initial, horizon, &mut rng)?;
            times.iter().map(|&t| signal.count_switches(t)).collect()
        })
        .collect()
}

fn tabulate(counts: impl Iterator<Item = usize>, kmax: usize, samples: usize) -> Vec<PmfEstimate> {
    let mut hist = vec![0usize; kmax + 1];
    for c in counts {
        if c <= kmax {
            hist[c] += 1;
        }
    }
    hist.into_iter()
        .enumerate()
        .map(|(k, hits)| {
            let estimate = hits as f64 / samples as f64;
            PmfEstimate {
                k,
                estimate,
                stderr: proportion_stderr(estimate, samples),
            }
        })
        .collect()
}

/// Empirical distribution of `N(t)` over `samples` sampled paths, for
/// `k = 0..=kmax`. Path `i` uses stream `(seed, i)`.
pub fn empirical_switch_pmf(
    q: &GeneratorMatrix,
    initial: &[f64],
    t: f64,
    kmax: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<PmfEstimate>, SwitchingError> {
    if samples < 1000 {
        return Err(SwitchingError::InvalidArgument("need at least 1000 samples".into()));
    }
    if !(t > 0.0) {
        return Err(SwitchingError::InvalidArgument("t must be positive".into()));
    }
    let counts = switch_counts(q, initial, &[t], samples, seed)?;
    Ok(tabulate(counts.iter().map(|c| c[0]), kmax, samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmfCell {
    pub t: f64,
    pub k: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    /// `bound + 3 SE - estimate`; negative means violated.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmfReport {
    pub q_bar: f64,
    pub q_tilde: f64,
    pub samples: usize,
    pub cells: Vec<PmfCell>,
    pub pass: bool,
}

impl PmfReport {
    pub fn failed_cells(&self) -> impl Iterator<Item = &PmfCell> {
        self.cells.iter().filter(|c| !c.pass)
    }
}

/// Compares the empirical law of `N(t)` on a time grid with the
/// generator-derived kernel `exp(-q_tilde t)(q_bar t)^k/k!`. A falsification
/// check: it can expose a violated bound but never prove one.
pub fn check_markov_pmf_bound(
    q: &GeneratorMatrix,
    initial: &[f64],
    times: &[f64],
    kmax: usize,
    samples: usize,
    seed: u64,
) -> Result<PmfReport, SwitchingError> {
    if times.is_empty() || times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(SwitchingError::InvalidArgument("time grid must be positive".into()));
    }
    if samples < 1000 {
        return Err(SwitchingError::InvalidArgument("need at least 1000 samples".into()));
    }
    let (q_bar, q_tilde) = q_params(q);
    let counts = switch_counts(q, initial, times, samples, seed)?;
    let mut cells = Vec::with_capacity(times.len() * (kmax + 1));
    for (ti, &t) in times.iter().enumerate() {
        for est in tabulate(counts.iter().map(|c| c[ti]), kmax, samples) {
            let bound = ln_poisson_kernel(est.k, t, q_tilde, q_bar).exp();
            let margin = bound + SE_SLACK * est.stderr - est.estimate;
            cells.push(PmfCell {
                t,
                k: est.k,
                estimate: est.estimate,
                stderr: est.stderr,
                bound,
                margin,
                pass: margin >= 0.0,
            });
        }
    }
    let pass = robust_verdict(cells.iter().map(|c| (c.pass, f64::INFINITY)), f64::INFINITY);
    Ok(PmfReport {
        q_bar,
        q_tilde,
        samples,
        cells,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(rows: &[&[f64]]) -> GeneratorMatrix {
        GeneratorMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn generator_validation() {
        assert!(matches!(
            GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![2.0, -1.0]]),
            Err(SwitchingError::RowSum { row: 1, .. })
        ));
        assert!(matches!(
            GeneratorMatrix::new(vec![vec![1.0, -1.0], vec![1.0, -1.0]]),
            Err(SwitchingError::NegativeRate { .. })
        ));
        assert!(matches!(GeneratorMatrix::new(vec![]), Err(SwitchingError::BadShape)));
    }

    #[test]
    fn q_params_examples() {
        assert_eq!(q_params(&gen(&[&[-2.0, 2.0], &[1.0, -1.0]])), (2.0, 2.0));
        assert_eq!(q_params(&gen(&[&[0.0]])), (0.0, 0.0));
        assert_eq!(q_params(&gen(&[&[-1.0, 1.0], &[1.0, -1.0]])), (1.0, 1.0));
    }

    #[test]
    fn absorbing_single_mode_never_switches() {
        let s = sample_ctmc(&gen(&[&[0.0]]), &[1.0], 10.0, 3).unwrap();
        assert_eq!(s.instants(), &[0.0]);
        assert_eq!(s.modes(), &[0]);
        assert_eq!(s.count_switches(10.0).unwrap(), 0);
    }

    #[test]
    fn count_switches_half_open() {
        let s = SwitchingSignal::new(vec![0.0, 0.5, 1.2], vec![0, 1, 0], 2.0).unwrap();
        assert_eq!(s.count_switches(1.0).unwrap(), 1);
        assert_eq!(s.count_switches(0.0).unwrap(), 0);
        assert_eq!(s.count_switches(1.2).unwrap(), 2);
        assert!(s.count_switches(2.5).is_err());
        assert!(s.count_switches(-0.1).is_err());
        assert_eq!(s.mode_at(0.5), 1);
        assert_eq!(s.mode_at(0.4999), 0);
        assert_eq!(s.mode_at(1.9), 0);
    }

    #[test]
    fn signal_validation() {
        assert!(SwitchingSignal::new(vec![0.0, 0.5], vec![0, 0], 1.0).is_err());
        assert!(SwitchingSignal::new(vec![0.1], vec![0], 1.0).is_err());
        assert!(SwitchingSignal::new(vec![0.0, 0.5, 0.5], vec![0, 1, 0], 1.0).is_err());
        assert!(SwitchingSignal::new(vec![0.0, 1.5], vec![0, 1], 1.0).is_err());
    }

    #[test]
    fn invalid_initial_distribution() {
        let q = gen(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        assert!(sample_ctmc(&q, &[0.7, 0.7], 1.0, 0).is_err());
        assert!(sample_ctmc(&q, &[1.0], 1.0, 0).is_err());
    }

    #[test]
    fn one_way_chain_switches_once_with_exponential_holding() {
        let q = gen(&[&[-3.0, 3.0], &[0.0, 0.0]]);
        let n = 100_000;
        let mut total = 0.0;
        for i in 0..n {
            let s = sample_ctmc_with(&q, &[1.0, 0.0], 100.0, &mut rng::stream(11, i)).unwrap();
            assert_eq!(s.switch_times().len(), 1);
            total += s.switch_times()[0];
        }
        let mean = total / n as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.01 / 3.0, "mean {mean}");
    }

    #[test]
    fn symmetric_chain_count_is_poisson_mean() {
        let q = gen(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let n = 100_000u64;
        let total: usize = (0..n)
            .map(|i| {
                sample_ctmc_with(&q, &[1.0, 0.0], 1.0, &mut rng::stream(5, i))
                    .unwrap()
                    .count_switches(1.0)
                    .unwrap()
            })
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn embedded_chain_frequencies() {
        // from mode 0 jumps go to 1 w.p. 1/4 and to 2 w.p. 3/4
        let q = gen(&[&[-4.0, 1.0, 3.0], &[2.0, -2.0, 0.0], &[1.0, 1.0, -2.0]]);
        let s = sample_ctmc(&q, &[1.0, 0.0, 0.0], 20_000.0, 9).unwrap();
        let mut from0 = [0usize; 3];
        for w in s.modes().windows(2) {
            if w[0] == 0 {
                from0[w[1]] += 1;
            }
        }
        let jumps = (from0[1] + from0[2]) as f64;
        assert!(jumps > 10_000.0);
        let expected = [0.0, 0.25 * jumps, 0.75 * jumps];
        let chi2: f64 = (1..3).map(|j| (from0[j] as f64 - expected[j]).powi(2) / expected[j]).sum();
        // 1 degree of freedom, 99.9% quantile
        assert!(chi2 < 10.83, "chi2 {chi2}");
    }

    #[test]
    fn pmf_bound_examples() {
        let p = PmfBoundParams::new(1.0, 1.0, 0).unwrap();
        assert!((pmf_bound(0, 2.0, &p) - (-2.0f64).exp()).abs() < 1e-15);
        let p = PmfBoundParams::new(1.0, 1.0, 4).unwrap();
        assert_eq!(pmf_bound(3, 2.0, &p), 1.0);
        let p = PmfBoundParams::new(1.0, 2.0, 0).unwrap();
        let expected = (-1.0f64).exp() * 8.0 / 6.0;
        assert!((pmf_bound(3, 1.0, &p) - expected).abs() < 1e-14);
        assert!((expected - 0.4905).abs() < 1e-4);
        // capped at 1
        let p = PmfBoundParams::new(0.01, 50.0, 0).unwrap();
        assert_eq!(pmf_bound(1, 1.0, &p), 1.0);
        // no overflow for large k
        assert!(pmf_bound(500, 100.0, &PmfBoundParams::new(1.0, 3.0, 0).unwrap()).is_finite());
    }

    #[test]
    fn empirical_pmf_absorbing_is_point_mass() {
        let est = empirical_switch_pmf(&gen(&[&[0.0]]), &[1.0], 1.0, 4, 1000, 1).unwrap();
        assert_eq!(est[0].estimate, 1.0);
        assert!(est[1..].iter().all(|e| e.estimate == 0.0));
    }

    #[test]
    fn empirical_pmf_symmetric_chain_matches_poisson() {
        let q = gen(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let est = empirical_switch_pmf(&q, &[0.5, 0.5], 1.0, 6, 100_000, 21).unwrap();
        let e1 = est[1];
        assert!((e1.estimate - (-1.0f64).exp()).abs() <= 3.0 * e1.stderr);
        let total: f64 = est.iter().map(|e| e.estimate).sum();
        assert!(total <= 1.0 + 1e-12);
    }

    #[test]
    fn empirical_pmf_rejects_small_samples() {
        let q = gen(&[&[0.0]]);
        assert!(empirical_switch_pmf(&q, &[1.0], 1.0, 3, 999, 0).is_err());
    }

    #[test]
    fn markov_check_passes_for_absorbing_and_fast_symmetric_chains() {
        let r = check_markov_pmf_bound(&gen(&[&[0.0]]), &[1.0], &[1.0], 3, 1000, 0).unwrap();
        assert!(r.pass);
        let q = gen(&[&[-5.0, 5.0], &[5.0, -5.0]]);
        let r = check_markov_pmf_bound(&q, &[1.0, 0.0], &[0.2], 8, 20_000, 4).unwrap();
        assert_eq!((r.q_bar, r.q_tilde), (5.0, 5.0));
        assert!(r.pass, "{:?}", r.failed_cells().collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_reproducible() {
        let q = gen(&[&[-2.0, 2.0], &[1.0, -1.0]]);
        let a = sample_ctmc(&q, &[0.5, 0.5], 50.0, 77).unwrap();
        let b = sample_ctmc(&q, &[0.5, 0.5], 50.0, 77).unwrap();
        assert_eq!(a, b);
    }
}
