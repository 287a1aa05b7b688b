//! Elastic resource control for parallel simulations.
//!
//! Runtime efficiency metrics ([`metrics`]), a closed-form estimate of the
//! core count that reaches a target communication efficiency
//! ([`estimator`]), and a feedback [`controller`] that resizes a simulated
//! malleable job ([`scheduler`]) running a synthetic application
//! ([`workload`]). Runs are recorded by [`trace`] and driven by [`runner`].

pub mod cli;
pub mod config;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod runner;
pub mod scheduler;
pub mod trace;
pub mod workload;

pub use config::ScenarioConfig;
pub use controller::{Controller, ControllerConfig, ControllerEvent, ElasticityDecision, Phase};
pub use error::{Error, Result};
pub use estimator::{clamp_and_round, estimate_cores, predict_ce, target_ce, ClampPolicy, TargetRange};
pub use metrics::{compute_metrics, merge_windows, EfficiencyMetrics, ProcessTiming, StepSpan, TimingWindow};
pub use runner::{run_scenario, run_scenario_to_files, RunOutcome};
pub use trace::{RunSummary, TraceRecord};
pub use workload::{IterationSchedule, Scheme, WorkloadProfile};
