//! Subcommand implementations. Each returns an [`Outcome`] holding the exit
//! status, the text report and any output files; nothing touches the disk
//! until [`Outcome::write_to`].

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use switchcert::controller::{self, ControlError, DecreaseReport, SontagController};
use switchcert::dynamics::{self, DynamicsError, Trajectory};
use switchcert::lyapunov::{self, CertificateReport, LyapunovError, LyapunovFamily, Method, Verdict};
use switchcert::montecarlo::{
    self, BoundParams, ConvergenceReport, Dynamics, EnsembleSpec, ExpectedVReport, MeanNormReport,
    MonteCarloError,
};
use switchcert::switching::{self, SwitchingError, SwitchingSignal};

use crate::config::{ConfigError, Scenario, SwitchingSource};
use crate::svg::{Plot, Series};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Run(String),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Config(_) => 3,
            CommandError::Run(_) => 1,
        }
    }
}

macro_rules! run_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CommandError {
            fn from(e: $t) -> Self {
                CommandError::Run(e.to_string())
            }
        }
    )*};
}
run_error!(LyapunovError, DynamicsError, MonteCarloError, ControlError, SwitchingError, csv::Error);

fn invalid(msg: impl Into<String>) -> CommandError {
    CommandError::Config(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Advisory,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Advisory => 2,
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub report: String,
    /// `(file name, contents)`, in emission order.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every output file and `report.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        std::fs::write(dir.join("report.txt"), &self.report)
    }
}

/// Command-line overrides of the scenario's run settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub svg: bool,
}

impl Overrides {
    fn seed(&self, s: &Scenario) -> u64 {
        self.seed.unwrap_or(s.config.run.seed)
    }

    fn trajectories(&self, s: &Scenario) -> usize {
        self.trajectories.unwrap_or(s.config.run.trajectories)
    }
}

struct Report(String);

impl Report {
    fn new(command: &str, s: &Scenario) -> Self {
        let mut r = Report(String::new());
        r.kv("command", command);
        r.kv("scenario", &s.config.name);
        r
    }

    fn section(&mut self, name: &str) {
        let _ = writeln!(self.0, "\n[{name}]");
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    fn line(&mut self, text: &str) {
        self.0.push_str(text);
        self.0.push('\n');
    }

    /// Appends CSV text as an indented table.
    fn table(&mut self, csv: &str) {
        for l in csv.lines() {
            let _ = writeln!(self.0, "  {l}");
        }
    }
}

fn csv_text(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<String, CommandError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| CommandError::Run(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Trajectory CSV: `t, mode, x1..xn, [u1..um], [V]` with 1-based modes.
pub fn trajectory_csv(traj: &Trajectory, dimension: usize) -> Result<String, CommandError> {
    let mut header = vec!["t".to_string(), "mode".to_string()];
    header.extend((1..=dimension).map(|i| format!("x{i}")));
    let inputs = traj.controls.as_ref().and_then(|c| c.first()).map_or(0, Vec::len);
    if traj.controls.is_some() {
        header.extend((1..=inputs).map(|i| format!("u{i}")));
    }
    if traj.lyapunov.is_some() {
        header.push("V".into());
    }
    let rows = (0..traj.len()).map(|i| {
        let mut row = vec![num(traj.times[i]), (traj.modes[i] + 1).to_string()];
        row.extend(traj.states[i].iter().copied().map(num));
        if let Some(c) = &traj.controls {
            row.extend(c[i].iter().copied().map(num));
        }
        if let Some(v) = &traj.lyapunov {
            row.push(num(v[i]));
        }
        row
    });
    csv_text(&header, rows)
}

fn trajectory_plot(title: &str, traj: &Trajectory) -> Plot {
    let n = traj.states.first().map_or(0, Vec::len);
    let series = (0..n)
        .map(|j| {
            Series::new(
                format!("x{}", j + 1),
                traj.times.iter().zip(&traj.states).map(|(&t, x)| (t, x[j])).collect(),
            )
        })
        .collect();
    Plot::new(title, "t", "state", false, series)
}

/// Certificate quantities: exact for linear modes with a quadratic family,
/// sampled otherwise.
pub fn certificate(s: &Scenario, seed: u64) -> Result<CertificateReport, CommandError> {
    let family = s.family()?;
    let spec = s.config.certify.sample_spec();
    let mut notes = Vec::new();
    let quad = match family {
        LyapunovFamily::Quadratic(ps) => Some(ps.as_slice()),
        LyapunovFamily::Expressions(_) => None,
    };
    let closed_loop = s.config.controller.as_ref().filter(|_| s.system.inputs() > 0);
    let (decay, decay_method) = match (closed_loop, s.system.linear_matrices(), quad) {
        (Some(cc), _, _) => {
            notes.push("closed loop: the decay rate is the feedback design target; run stabilize to check it".into());
            (cc.decay_rate, Method::Supplied)
        }
        (None, Some(a), Some(p)) => (lyapunov::decay_rate_quadratic(&a, p)?, Method::ExactQuadratic),
        _ => {
            let d = lyapunov::decay_rate_sampled(&s.system, family, &spec, seed)?;
            if !d.uniform {
                notes.push("no uniform linear rate: sampled decay ratios degrade toward the ends of the radius range".into());
            }
            notes.push(format!(
                "smallest decay ratio in mode {} at x = {:?}",
                d.worst_mode + 1,
                d.worst_point
            ));
            (d.rate, Method::Sampled)
        }
    };
    let (mu, mu_method) = match quad {
        Some(p) => (lyapunov::mu_quadratic(p)?, Method::ExactQuadratic),
        None => (lyapunov::mu_sampled(family, &spec, seed)?, Method::Sampled),
    };
    let class_k = match quad {
        Some(p) => Some(lyapunov::class_k_bounds_quadratic(p)?),
        None => {
            notes.push("class-K envelopes are not computed for expression families".into());
            None
        }
    };
    let (switch_decay, intensity, onset, switching_method) = match &s.source {
        SwitchingSource::Markov { generator, .. } => {
            let (q_bar, q_tilde) = switching::q_params(generator);
            if let Some(p) = (0..generator.modes()).find(|&p| generator.exit_rate(p) < q_tilde - switching::GENERATOR_TOL) {
                notes.push(format!(
                    "mode {} leaves at rate {} below q_tilde = {q_tilde}: the generator-derived switch-count bound is not guaranteed for this chain; see ctmc-check",
                    p + 1,
                    generator.exit_rate(p)
                ));
            }
            (q_tilde, q_bar, 0, Method::Generator)
        }
        SwitchingSource::Bounds(b) => (b.decay, b.intensity, b.onset, Method::Supplied),
        SwitchingSource::Signal(_) => {
            return Err(invalid(
                "certify needs a `markov` or `bounds` switching source, not an explicit signal",
            ))
        }
    };
    let mut report = lyapunov::check_slow_switching(mu, decay, switch_decay, intensity, onset)?;
    report.decay_method = decay_method;
    report.mu_method = mu_method;
    report.switching_method = switching_method;
    report.class_k_method = class_k.map(|_| Method::ExactQuadratic);
    report.class_k = class_k;
    report.notes.extend(notes);
    Ok(report)
}

fn write_certificate(r: &mut Report, c: &CertificateReport) {
    r.section("certificate");
    r.kv("verdict", c.verdict);
    r.kv("advisory", c.is_advisory());
    r.kv("decay_rate", c.decay_rate);
    r.kv("decay_method", c.decay_method);
    r.kv("mu", c.mu);
    r.kv("mu_gate", c.mu_gate);
    r.kv("mu_method", c.mu_method);
    r.kv("switch_decay", c.switch_decay);
    r.kv("switch_intensity", c.switch_intensity);
    r.kv("onset", c.onset);
    r.kv("switching_method", c.switching_method);
    r.kv("threshold", c.threshold);
    r.kv("margin", c.margin);
    match (c.class_k, c.class_k_method) {
        (Some((lo, hi)), Some(m)) => {
            r.kv("class_k_lower", lo);
            r.kv("class_k_upper", hi);
            r.kv("class_k_method", m);
        }
        _ => r.kv("class_k_method", "none"),
    }
    for n in &c.notes {
        r.kv("note", n);
    }
}

pub fn cmd_certify(s: &Scenario, o: &Overrides) -> Result<Outcome, CommandError> {
    let c = certificate(s, o.seed(s))?;
    let mut r = Report::new("certify", s);
    write_certificate(&mut r, &c);
    if c.is_advisory() {
        r.line("sampled quantities can expose a failure but cannot certify a pass");
    }
    let status = match (c.verdict, c.is_advisory()) {
        (Verdict::Fail, _) => Status::Fail,
        (Verdict::Pass, true) => Status::Advisory,
        (Verdict::Pass, false) => Status::Pass,
    };
    r.kv("status", status_name(status));
    Ok(Outcome {
        status,
        report: r.0,
        files: Vec::new(),
    })
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "fail",
        Status::Advisory => "advisory-pass",
    }
}

/// The signal for single-run commands: a chain sample or the given signal.
fn single_signal(s: &Scenario, seed: u64) -> Result<(SwitchingSignal, Option<u64>), CommandError> {
    match &s.source {
        SwitchingSource::Markov { generator, initial } => Ok((
            switching::sample_ctmc(generator, initial, s.config.run.horizon, seed)?,
            Some(seed),
        )),
        SwitchingSource::Signal(sig) => Ok((sig.clone(), None)),
        SwitchingSource::Bounds(_) => Err(invalid(
            "simulation needs a `markov` or `signal` switching source",
        )),
    }
}

fn attach_values(traj: &mut Trajectory, family: &LyapunovFamily) -> Result<(), CommandError> {
    let values = traj
        .modes
        .iter()
        .zip(&traj.states)
        .map(|(&p, x)| family.value(p, x))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| CommandError::Run(e.to_string()))?;
    traj.lyapunov = Some(values);
    Ok(())
}

fn write_run(r: &mut Report, signal: &SwitchingSignal, seed: Option<u64>, traj: &Trajectory) {
    r.section("run");
    match seed {
        Some(seed) => r.kv("seed", seed),
        None => r.kv("seed", "none (explicit signal)"),
    }
    r.kv("horizon", signal.horizon());
    r.kv("switches", signal.switch_times().len());
    r.kv(
        "modes",
        signal.modes().iter().map(|m| (m + 1).to_string()).collect::<Vec<_>>().join(" "),
    );
    r.kv("samples", traj.len());
    r.kv("blown_up", traj.blown_up);
    if let Some(&t) = traj.times.last() {
        r.kv("end_time", t);
    }
    r.kv("final_state", format!("{:?}", traj.final_state()));
}

pub fn cmd_simulate(s: &Scenario, o: &Overrides) -> Result<Outcome, CommandError> {
    let x0 = s.x0()?;
    let (signal, seed) = single_signal(s, o.seed(s))?;
    let horizon = signal.horizon();
    let mut traj = dynamics::integrate_switched(&s.system, &signal, &x0, s.config.run.step, horizon)?;
    if let Some(f) = &s.family {
        attach_values(&mut traj, f)?;
    }
    let mut r = Report::new("simulate", s);
    write_run(&mut r, &signal, seed, &traj);
    let status = Status::from_pass(!traj.blown_up);
    if traj.blown_up {
        r.line("trajectory diverged; the CSV stops at the blow-up");
    }
    r.kv("status", status_name(status));
    let mut files = vec![("trajectory.csv".to_string(), trajectory_csv(&traj, s.system.dimension())?)];
    if o.svg {
        files.push(("trajectory.svg".into(), trajectory_plot("trajectory", &traj).render()));
    }
    Ok(Outcome {
        status,
        report: r.0,
        files,
    })
}

fn bound_csv<'a>(rows: impl Iterator<Item = (f64, f64, f64, Option<f64>, bool)> + 'a) -> Result<String, CommandError> {
    let header = ["t", "mean", "stderr", "bound", "pass"].map(String::from);
    csv_text(
        &header,
        rows.map(|(t, m, se, b, p)| vec![num(t), num(m), num(se), opt_num(b), p.to_string()]),
    )
}

pub fn expected_v_csv(r: &ExpectedVReport) -> Result<String, CommandError> {
    bound_csv(r.rows.iter().map(|w| (w.t, w.mean, w.stderr, Some(w.bound), w.pass)))
}

pub fn mean_norm_csv(r: &MeanNormReport) -> Result<String, CommandError> {
    bound_csv(r.rows.iter().map(|w| (w.t, w.mean, w.stderr, w.jensen_bound, w.pass)))
}

fn write_convergence(r: &mut Report, c: &ConvergenceReport, target: Option<f64>) -> bool {
    r.section("convergence");
    r.kv("epsilon", c.epsilon);
    r.kv("trajectories", c.count);
    r.kv("fraction", c.fraction);
    r.kv("stderr", c.stderr);
    r.kv("blown_up", c.blown_up);
    r.line("a finite ensemble bounds the failure probability; it does not verify an almost-sure statement");
    match target {
        Some(t) => {
            let pass = c.fraction >= t;
            r.kv("target", t);
            r.kv("pass", pass);
            pass
        }
        None => true,
    }
}

fn ensemble_spec(s: &Scenario, o: &Overrides) -> EnsembleSpec {
    let run = &s.config.run;
    EnsembleSpec {
        count: o.trajectories(s),
        horizon: run.horizon,
        step: run.step,
        seed: o.seed(s),
        grid: s.grid(),
        epsilon: run.epsilon,
        workers: None,
    }
}

pub fn cmd_mc(s: &Scenario, o: &Overrides) -> Result<Outcome, CommandError> {
    let (q, initial) = s.markov()?;
    let x0 = s.x0()?;
    let spec = ensemble_spec(s, o);
    let paths = montecarlo::run_ensemble(Dynamics::Open(&s.system), s.family.as_ref(), q, initial, &x0, &spec)?;
    let mut r = Report::new("mc", s);
    r.kv("seed", spec.seed);
    r.kv("trajectories", spec.count);
    r.kv("horizon", spec.horizon);
    r.kv("step", spec.step);
    let mut pass = true;
    let mut files = Vec::new();

    let mut envelope = None;
    if let Some(family) = &s.family {
        let c = certificate(s, spec.seed)?;
        write_certificate(&mut r, &c);
        let bound = BoundParams {
            mu: c.mu_gate,
            decay_rate: c.decay_rate,
            switch_decay: c.switch_decay,
            switch_intensity: c.switch_intensity,
            onset: c.onset,
        };
        let v0 = montecarlo::initial_value(family, initial, &x0).map_err(|e| CommandError::Run(e.to_string()))?;
        let ev = montecarlo::expected_v_report(&paths, &spec.grid, v0, &bound)?;
        r.section("expected_v");
        r.kv("v0", v0);
        r.kv("blown_up", ev.blown_up);
        r.kv("pass", ev.pass);
        let table = expected_v_csv(&ev)?;
        r.table(&table);
        pass &= ev.pass;
        if o.svg {
            let plot = Plot::new(
                "expected V",
                "t",
                "V",
                true,
                vec![
                    Series::new("mean", ev.rows.iter().map(|w| (w.t, w.mean)).collect()),
                    Series::new("bound", ev.rows.iter().map(|w| (w.t, w.bound)).collect()),
                ],
            );
            files.push(("mc_expected_v.svg".into(), plot.render()));
        }
        files.push(("mc_expected_v.csv".into(), table));
        envelope = c.class_k.map(|(c1, _)| (c1, v0, bound));
    }

    let conv = montecarlo::convergence_report(&paths, spec.epsilon);
    pass &= write_convergence(&mut r, &conv, s.config.run.convergence_target);

    let mn = montecarlo::mean_norm_report(&paths, &spec.grid, envelope.as_ref().map(|(c1, v0, b)| (*c1, *v0, b)))?;
    r.section("mean_norm");
    r.kv("blown_up", mn.blown_up);
    r.kv("pass", mn.pass);
    let table = mean_norm_csv(&mn)?;
    r.table(&table);
    pass &= mn.pass;
    if o.svg {
        let mut series = vec![Series::new("mean |x|", mn.rows.iter().map(|w| (w.t, w.mean)).collect())];
        if envelope.is_some() {
            series.push(Series::new(
                "bound",
                mn.rows.iter().map(|w| (w.t, w.jensen_bound.unwrap_or(f64::NAN))).collect(),
            ));
        }
        files.push(("mc_mean_norm.svg".into(), Plot::new("mean norm", "t", "|x|", true, series).render()));
    }
    files.push(("mc_mean_norm.csv".into(), table));

    let status = Status::from_pass(pass);
    r.kv("status", status_name(status));
    Ok(Outcome {
        status,
        report: r.0,
        files,
    })
}

pub fn cmd_ctmc_check(s: &Scenario, o: &Overrides) -> Result<Outcome, CommandError> {
    let (q, initial) = s.markov()?;
    let run = &s.config.run;
    let samples = o.trajectories.unwrap_or(run.pmf_samples);
    let seed = o.seed(s);
    let rep = switching::check_markov_pmf_bound(q, initial, &run.pmf_times, run.kmax, samples, seed)?;
    let header = ["t", "k", "estimate", "stderr", "bound", "margin", "pass"].map(String::from);
    let table = csv_text(
        &header,
        rep.cells.iter().map(|c| {
            vec![
                num(c.t),
                c.k.to_string(),
                num(c.estimate),
                num(c.stderr),
                num(c.bound),
                num(c.margin),
                c.pass.to_string(),
            ]
        }),
    )?;
    let mut r = Report::new("ctmc-check", s);
    r.kv("seed", seed);
    r.section("switch_counts");
    r.kv("samples", rep.samples);
    r.kv("q_bar", rep.q_bar);
    r.kv("q_tilde", rep.q_tilde);
    r.kv("failed_cells", rep.failed_cells().count());
    r.kv("pass", rep.pass);
    r.line("a sampled check can expose a violated bound but never prove one");
    r.table(&table);
    let status = Status::from_pass(rep.pass);
    r.kv("status", status_name(status));
    let mut files = vec![("pmf.csv".to_string(), table)];
    if o.svg {
        let mut series = Vec::new();
        for &t in &run.pmf_times {
            let cells: Vec<_> = rep.cells.iter().filter(|c| c.t == t).collect();
            series.push(Series::new(format!("estimate t={t}"), cells.iter().map(|c| (c.k as f64, c.estimate)).collect()));
            series.push(Series::new(format!("bound t={t}"), cells.iter().map(|c| (c.k as f64, c.bound)).collect()));
        }
        files.push(("pmf.svg".into(), Plot::new("switch counts", "k", "probability", true, series).render()));
    }
    Ok(Outcome {
        status,
        report: r.0,
        files,
    })
}

fn write_decrease(r: &mut Report, d: &DecreaseReport) {
    r.section("decrease");
    r.kv("tolerance", format!("{} (1 + V)", controller::DECREASE_TOL));
    r.kv("checked", d.checked);
    r.kv("violations", d.violations);
    r.kv("worst_margin", d.worst_margin);
    r.kv("worst_time", opt_num(d.worst_time));
    r.kv("pass", d.pass);
    r.line("where the decrease holds at a sample the infimum condition holds there too; nothing is claimed between samples");
}

pub fn cmd_stabilize(s: &Scenario, o: &Overrides) -> Result<Outcome, CommandError> {
    let family = s.family()?;
    if s.system.inputs() == 0 {
        return Err(invalid("stabilize needs `controls` on every mode"));
    }
    let zero = |e: &switchcert::Expression| matches!(e.root(), switchcert::expr::Node::Const(c) if *c == 0.0);
    if s.system.modes().iter().all(|m| m.controls.iter().flatten().all(zero)) {
        return Err(invalid("every control field is identically zero"));
    }
    let cc = s
        .config
        .controller
        .as_ref()
        .ok_or_else(|| invalid("stabilize needs a `controller` section"))?;
    let x0 = s.x0()?;
    let ctl = SontagController::new(&s.system, family, cc.decay_rate)?.with_gain_scale(cc.gain_scale);
    let seed = o.seed(s);
    let (signal, used_seed) = single_signal(s, seed)?;
    let traj = controller::integrate_closed_loop(&ctl, &signal, &x0, s.config.run.step, signal.horizon())?;
    let dec = controller::verify_decrease(&traj, &s.system, family, cc.decay_rate)?;

    let mut r = Report::new("stabilize", s);
    r.kv("decay_rate", cc.decay_rate);
    r.kv("gain_scale", cc.gain_scale);
    for (p, i, res) in s.system.control_origin_residuals() {
        r.kv(
            "note",
            format!("control field {} of mode {} is {res} at the origin", i + 1, p + 1),
        );
    }
    write_run(&mut r, &signal, used_seed, &traj);
    write_decrease(&mut r, &dec);
    let mut pass = dec.pass && !traj.blown_up;

    if let SwitchingSource::Markov { generator, initial } = &s.source {
        let spec = ensemble_spec(s, o);
        if spec.count > 1 {
            let paths = montecarlo::run_ensemble(Dynamics::Closed(&ctl), None, generator, initial, &x0, &spec)?;
            let conv = montecarlo::convergence_report(&paths, spec.epsilon);
            pass &= write_convergence(&mut r, &conv, s.config.run.convergence_target);
        }
    }

    if !cc.small_control_radii.is_empty() {
        r.section("small_control");
        r.line("advisory: sampled sups of |k| on spheres of decreasing radius");
        for p in 0..s.system.mode_count() {
            let sc = controller::check_small_control_property(
                &ctl,
                p,
                &cc.small_control_radii,
                cc.small_control_samples,
                seed,
            )?;
            r.kv(&format!("mode_{}_pass", p + 1), sc.pass);
            for (radius, sup) in &sc.sups {
                r.kv(&format!("mode_{}_sup", p + 1), format!("{radius} {sup}"));
            }
        }
    }

    let status = Status::from_pass(pass);
    r.kv("status", status_name(status));
    let mut files = vec![("closed_loop.csv".to_string(), trajectory_csv(&traj, s.system.dimension())?)];
    if o.svg {
        let mut plot = trajectory_plot("closed loop", &traj);
        if let Some(v) = &traj.lyapunov {
            plot.series.push(Series::new("V", traj.times.iter().copied().zip(v.iter().copied()).collect()));
        }
        files.push(("closed_loop.svg".into(), plot.render()));
    }
    Ok(Outcome {
        status,
        report: r.0,
        files,
    })
}
