//! Elastic control loop.
//!
//! The controller accumulates per-step timings into an averaging window,
//! evaluates the communication efficiency when the window is full, and asks
//! for a new core count when it falls outside the target range. While a
//! request is outstanding the application keeps running and measurements are
//! dropped. A grant moves the controller through a restart into a fresh
//! window on the new core count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{clamp_and_round, estimate_cores, sanitize_measured_ce, ClampPolicy, TargetRange};
use crate::metrics::{compute_metrics, merge_windows, EfficiencyMetrics, TimingWindow};

/// Steps dropped right after a restart so checkpoint reads stay out of the window.
pub const POST_RESTART_SKIP_STEPS: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub target_range: TargetRange,
    pub averaging_period: u64,
    pub clamp: ClampPolicy,
    pub initial_cores: u32,
    pub starting_step: u64,
    pub total_steps: u64,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        self.clamp.validate()?;
        TargetRange::new(self.target_range.ce_min(), self.target_range.ce_max())?;
        if self.averaging_period < 1 {
            return Err(Error::InvalidInput("averaging period must be at least one step".into()));
        }
        if self.initial_cores < self.clamp.min_cores || self.initial_cores > self.clamp.max_cores {
            return Err(Error::InvalidInput(format!(
                "initial cores {} outside [{}, {}]",
                self.initial_cores, self.clamp.min_cores, self.clamp.max_cores
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Warmup,
    Measuring,
    AwaitingResources,
    Restarting,
    Done,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Measuring => "measuring",
            Phase::AwaitingResources => "awaiting_resources",
            Phase::Restarting => "restarting",
            Phase::Done => "done",
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "warmup" => Phase::Warmup,
            "measuring" => Phase::Measuring,
            "awaiting_resources" => Phase::AwaitingResources,
            "restarting" => Phase::Restarting,
            "done" => Phase::Done,
            other => return Err(Error::TraceFormat(format!("unknown phase `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeReason {
    /// CE under the range: too many cores.
    BelowRange,
    /// CE over the range: room to add cores.
    AboveRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceRequest {
    pub requested_cores: u32,
    pub issued_at_step: u64,
    pub reason: ResizeReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElasticityDecision {
    Stay,
    Resize { cores: u32, reason: ResizeReason },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerEvent {
    WindowEvaluated {
        step: u64,
        cores: u32,
        metrics: EfficiencyMetrics,
        in_range: bool,
    },
    /// A measured CE at or above one was pulled below one before estimating.
    CeClamped { step: u64, measured: f64 },
    ResizeRequested(ResourceRequest),
    Granted {
        step: u64,
        cores: u32,
        latency_steps: u64,
    },
    Restarted { step: u64, cores: u32 },
    Denied { step: u64, request: ResourceRequest },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub phase: Phase,
    pub current_cores: u32,
    pub window: Option<TimingWindow>,
    pub pending_request: Option<ResourceRequest>,
    pub optimization_step_count: u32,
    skip_steps: u32,
}

/// Decides whether a full window calls for a resize. Ties with the range bounds stay.
pub fn evaluate_window(metrics: &EfficiencyMetrics, current_cores: u32, cfg: &ControllerConfig) -> ElasticityDecision {
    let range = &cfg.target_range;
    if range.contains(metrics.ce) {
        return ElasticityDecision::Stay;
    }
    let reason = if metrics.ce < range.ce_min() {
        ResizeReason::BelowRange
    } else {
        ResizeReason::AboveRange
    };
    let (ce, _) = sanitize_measured_ce(metrics.ce);
    let cores = match estimate_cores(current_cores, ce, range.target()) {
        Ok(raw) => clamp_and_round(raw, current_cores, &cfg.clamp),
        // Only reachable for a non-positive CE, which a valid window never yields.
        Err(_) => return ElasticityDecision::Stay,
    };
    if cores == current_cores {
        ElasticityDecision::Stay
    } else {
        ElasticityDecision::Resize { cores, reason }
    }
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    state: ControllerState,
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            state: ControllerState {
                phase: Phase::Warmup,
                current_cores: cfg.initial_cores,
                window: None,
                pending_request: None,
                optimization_step_count: 0,
                skip_steps: 0,
            },
            cfg,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn on_step_complete(&mut self, step_timing: &TimingWindow) -> Result<Vec<ControllerEvent>> {
        let cores = step_timing.processes();
        if cores != self.state.current_cores as usize {
            return Err(Error::Consistency(format!(
                "step timing covers {cores} processes but the job runs on {}",
                self.state.current_cores
            )));
        }
        let step = step_timing.step_span().last;

        match self.state.phase {
            Phase::Done => return Err(Error::Protocol("step reported after the run finished".into())),
            Phase::Restarting => return Err(Error::Protocol("step reported while restarting".into())),
            Phase::AwaitingResources => return Ok(Vec::new()),
            Phase::Warmup if step < self.cfg.starting_step => return Ok(Vec::new()),
            Phase::Warmup => self.state.phase = Phase::Measuring,
            Phase::Measuring => {}
        }

        if self.state.skip_steps > 0 {
            self.state.skip_steps -= 1;
            return Ok(Vec::new());
        }

        let window = match self.state.window.take() {
            None => step_timing.clone(),
            Some(acc) => merge_windows(&acc, step_timing).map_err(|e| Error::Consistency(e.to_string()))?,
        };
        if window.steps() < self.cfg.averaging_period {
            self.state.window = Some(window);
            return Ok(Vec::new());
        }

        let metrics = compute_metrics(&window)?;
        self.evaluate(step, metrics)
    }

    fn evaluate(&mut self, step: u64, metrics: EfficiencyMetrics) -> Result<Vec<ControllerEvent>> {
        let current = self.state.current_cores;
        let in_range = self.cfg.target_range.contains(metrics.ce);
        let mut events = vec![ControllerEvent::WindowEvaluated {
            step,
            cores: current,
            metrics,
            in_range,
        }];
        if in_range {
            return Ok(events);
        }
        if sanitize_measured_ce(metrics.ce).1 {
            events.push(ControllerEvent::CeClamped {
                step,
                measured: metrics.ce,
            });
        }
        if let ElasticityDecision::Resize { cores, reason } = evaluate_window(&metrics, current, &self.cfg) {
            let request = ResourceRequest {
                requested_cores: cores,
                issued_at_step: step,
                reason,
            };
            self.state.pending_request = Some(request);
            self.state.phase = Phase::AwaitingResources;
            events.push(ControllerEvent::ResizeRequested(request));
        }
        Ok(events)
    }

    /// Accepts the grant for the pending request and enters the restart.
    pub fn on_resources_granted(&mut self, granted_cores: u32, step: u64) -> Result<ControllerEvent> {
        let request = match (self.state.phase, self.state.pending_request) {
            (Phase::AwaitingResources, Some(r)) => r,
            _ => {
                return Err(Error::Protocol(format!(
                    "grant of {granted_cores} cores without a pending request (phase {})",
                    self.state.phase.as_str()
                )))
            }
        };
        if granted_cores != request.requested_cores {
            return Err(Error::Protocol(format!(
                "granted {granted_cores} cores but {} were requested",
                request.requested_cores
            )));
        }
        self.state.phase = Phase::Restarting;
        Ok(ControllerEvent::Granted {
            step,
            cores: granted_cores,
            latency_steps: step.saturating_sub(request.issued_at_step),
        })
    }

    /// Finishes the restart: the job now runs on the granted cores with an empty window.
    pub fn on_restart_complete(&mut self, step: u64) -> Result<ControllerEvent> {
        if self.state.phase != Phase::Restarting {
            return Err(Error::Protocol(format!(
                "restart completed in phase {}",
                self.state.phase.as_str()
            )));
        }
        let request = self
            .state
            .pending_request
            .take()
            .ok_or_else(|| Error::Consistency("restarting without a request".into()))?;
        self.state.current_cores = request.requested_cores;
        self.state.window = None;
        self.state.skip_steps = POST_RESTART_SKIP_STEPS;
        self.state.optimization_step_count += 1;
        self.state.phase = Phase::Measuring;
        Ok(ControllerEvent::Restarted {
            step,
            cores: request.requested_cores,
        })
    }

    /// The resource manager refused the request; measuring resumes on the current cores.
    pub fn on_resources_denied(&mut self, step: u64) -> Result<ControllerEvent> {
        match (self.state.phase, self.state.pending_request.take()) {
            (Phase::AwaitingResources, Some(request)) => {
                self.state.phase = Phase::Measuring;
                self.state.window = None;
                Ok(ControllerEvent::Denied { step, request })
            }
            (phase, pending) => {
                self.state.pending_request = pending;
                Err(Error::Protocol(format!(
                    "denial without a pending request (phase {})",
                    phase.as_str()
                )))
            }
        }
    }

    pub fn finish(&mut self) {
        self.state.phase = Phase::Done;
    }
}
