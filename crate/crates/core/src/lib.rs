//! Competitive rumor and refutation spreading on a well-mixed population.
//!
//! Nodes are Susceptible, spreading the rumor (`I_A`), spreading the
//! refutation (`I_B`) or Removed. The crate provides the ODE right-hand
//! side, fixed-step integrators, an exact stochastic simulator, sweep
//! metrics and file I/O used by the `rumorsim` binary.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod integrator;
pub mod model;
pub mod output;
pub mod scenario;
pub mod stochastic;

pub use analysis::{compute_metrics, sweep, Direction, Metric, SimMetrics, SweepParam, SweepReport};
pub use error::{Error, Result, Violation};
pub use integrator::{integrate, integrate_with_injection, step, Injection, IntegrationControls, Method, Trajectory};
pub use model::{rhs, validate_params, ModelParams, RhsMode, StateVec};
pub use scenario::{expand_preset, load_scenario, save_scenario, PresetId, Scenario};
pub use stochastic::{ensemble_stats, gillespie_run, run_ensemble, EnsembleStats, StochasticRun};
