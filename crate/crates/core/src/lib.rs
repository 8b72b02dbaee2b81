//! Simulation and certification toolkit for randomly switched systems.
//!
//! - [`expr`]: expressions for user-defined vector fields and Lyapunov functions
//! - [`switching`]: Markov switching signals and switch-count bounds
//! - [`dynamics`]: switched vector fields and switch-aligned RK4 integration
//! - [`lyapunov`]: certificate quantities and the slow-switching gate
//! - [`controller`]: universal-formula feedback for control-affine modes
//! - [`montecarlo`]: ensembles checked against the expected-value bounds

pub mod controller;
pub mod dynamics;
pub mod expr;
pub mod linalg;
pub mod lyapunov;
pub mod montecarlo;
pub mod rng;
pub mod stats;
pub mod switching;

pub use controller::{SontagController, SontagGains};
pub use dynamics::{Drift, Mode, SwitchedSystem, Trajectory};
pub use expr::Expression;
pub use lyapunov::{CertificateReport, LyapunovFamily, Method, Verdict};
pub use switching::{GeneratorMatrix, SwitchingSignal};
