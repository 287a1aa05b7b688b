//! C ABI for `elastic-core`.
//!
//! Every fallible function returns an [`ElasticStatus`] and writes its result
//! through an out-pointer. On failure, [`elastic_last_error_message`] describes
//! the most recent error on the calling thread. Scenarios and controllers are
//! opaque handles released with their `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use elastic_core::controller::Phase;
use elastic_core::estimator::{self, ClampPolicy, TargetRange};
use elastic_core::metrics::{self, ProcessTiming, StepSpan, TimingWindow};
use elastic_core::workload::iterations_at;
use elastic_core::{Controller, ControllerConfig, ControllerEvent, Error, RunSummary, ScenarioConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElasticStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    DegenerateWindow = 4,
    Singularity = 5,
    OutOfModel = 6,
    Protocol = 7,
    Consistency = 8,
    Capacity = 9,
    Sequencing = 10,
    Config = 11,
    TraceFormat = 12,
    Io = 13,
    Panic = 14,
}

impl From<&Error> for ElasticStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::InvalidMerge(_) => ElasticStatus::InvalidInput,
            Error::DegenerateWindow(_) => ElasticStatus::DegenerateWindow,
            Error::Singularity(_) => ElasticStatus::Singularity,
            Error::OutOfModel(_) => ElasticStatus::OutOfModel,
            Error::Protocol(_) => ElasticStatus::Protocol,
            Error::Consistency(_) => ElasticStatus::Consistency,
            Error::Capacity { .. } => ElasticStatus::Capacity,
            Error::Sequencing { .. } => ElasticStatus::Sequencing,
            Error::Config { .. } => ElasticStatus::Config,
            Error::TraceFormat(_) => ElasticStatus::TraceFormat,
            Error::Io { .. } => ElasticStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElasticPhase {
    Warmup = 0,
    Measuring = 1,
    AwaitingResources = 2,
    Restarting = 3,
    Done = 4,
}

impl From<Phase> for ElasticPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Warmup => ElasticPhase::Warmup,
            Phase::Measuring => ElasticPhase::Measuring,
            Phase::AwaitingResources => ElasticPhase::AwaitingResources,
            Phase::Restarting => ElasticPhase::Restarting,
            Phase::Done => ElasticPhase::Done,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElasticMetrics {
    pub elapsed_time: f64,
    pub total_work: f64,
    pub max_work: f64,
    pub max_comm: f64,
    pub ce: f64,
    pub lb: f64,
    pub pe: f64,
}

impl From<metrics::EfficiencyMetrics> for ElasticMetrics {
    fn from(m: metrics::EfficiencyMetrics) -> Self {
        Self {
            elapsed_time: m.elapsed_time,
            total_work: m.total_work,
            max_work: m.max_work,
            max_comm: m.max_comm,
            ce: m.ce,
            lb: m.lb,
            pe: m.pe,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticControllerConfig {
    pub ce_min: f64,
    pub ce_max: f64,
    pub averaging_period: u64,
    pub rate_of_change: f64,
    pub min_cores: u32,
    pub max_cores: u32,
    pub initial_cores: u32,
    pub starting_step: u64,
    pub total_steps: u64,
}

/// Outcome of reporting one step to a controller.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElasticStepResult {
    /// The step closed an averaging window; `metrics` and `in_range` are set.
    pub window_evaluated: bool,
    pub metrics: ElasticMetrics,
    pub in_range: bool,
    /// The window CE was at or above one and was pulled below one before estimating.
    pub ce_clamped: bool,
    pub resize_requested: bool,
    pub requested_cores: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElasticSummary {
    pub total_steps: u64,
    pub optimization_steps: u32,
    pub final_cores: u32,
    /// NaN when no window was evaluated.
    pub final_window_ce: f64,
    pub converged: bool,
    pub windows_evaluated: u64,
    pub overshoots: u32,
    pub simulated_time: f64,
    pub core_seconds: f64,
    pub baseline_core_seconds: f64,
    pub restart_overhead_total: f64,
}

impl From<&RunSummary> for ElasticSummary {
    fn from(s: &RunSummary) -> Self {
        Self {
            total_steps: s.total_steps,
            optimization_steps: s.optimization_steps,
            final_cores: s.final_cores,
            final_window_ce: s.final_window_ce.unwrap_or(f64::NAN),
            converged: s.converged,
            windows_evaluated: s.windows_evaluated as u64,
            overshoots: s.overshoots,
            simulated_time: s.simulated_time,
            core_seconds: s.core_seconds,
            baseline_core_seconds: s.baseline_core_seconds,
            restart_overhead_total: s.restart_overhead_total,
        }
    }
}

/// Opaque scenario handle.
pub struct ElasticScenario {
    config: ScenarioConfig,
}

/// Opaque controller handle.
pub struct ElasticController {
    inner: Controller,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message).unwrap_or_else(|e| {
        let end = e.nul_position();
        CString::new(&e.into_vec()[..end]).expect("prefix has no NUL")
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(ElasticStatus);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = ElasticStatus::from(&e);
        set_last_error(e.to_string());
        Failure(status)
    }
}

fn fail(status: ElasticStatus, message: &str) -> Failure {
    set_last_error(message.to_owned());
    Failure(status)
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ElasticStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ElasticStatus::Ok,
        Ok(Err(Failure(status))) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            ElasticStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(ElasticStatus::NullPointer, &format!("`{name}` is null")))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(ElasticStatus::NullPointer, &format!("`{name}` is null")))
}

unsafe fn in_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ElasticStatus::NullPointer, &format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ElasticStatus::InvalidUtf8, &format!("`{name}` is not valid UTF-8")))
}

unsafe fn timing_window(
    work: *const f64,
    comm: *const f64,
    processes: usize,
    span: StepSpan,
) -> Result<TimingWindow, Failure> {
    if work.is_null() || comm.is_null() {
        return Err(fail(ElasticStatus::NullPointer, "timing arrays are null"));
    }
    let work = std::slice::from_raw_parts(work, processes);
    let comm = std::slice::from_raw_parts(comm, processes);
    let timings = work
        .iter()
        .zip(comm)
        .map(|(&w, &c)| ProcessTiming::new(w, c))
        .collect();
    Ok(TimingWindow::new(timings, span)?)
}

/// Message for the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn elastic_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// CE, LB and PE of one window given per-process work and communication times.
///
/// # Safety
/// `work` and `comm` must point to `processes` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_compute_metrics(
    work: *const f64,
    comm: *const f64,
    processes: usize,
    out: *mut ElasticMetrics,
) -> ElasticStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let window = timing_window(work, comm, processes, StepSpan::single(0))?;
        *out = metrics::compute_metrics(&window)?.into();
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_target_ce(ce_min: f64, ce_max: f64, out: *mut f64) -> ElasticStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = estimator::target_ce(&TargetRange::new(ce_min, ce_max)?);
        Ok(())
    })
}

/// Raw core count expected to reach `ce_target` from `ce` measured on `cores`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_estimate_cores(cores: u32, ce: f64, ce_target: f64, out: *mut f64) -> ElasticStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = estimator::estimate_cores(cores, ce, ce_target)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_predict_ce(cores: u32, ce: f64, n_star: f64, out: *mut f64) -> ElasticStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = estimator::predict_ce(cores, ce, n_star)?;
        Ok(())
    })
}

/// Rounds a raw estimate and clamps it by rate of change and core bounds.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_clamp_and_round(
    estimate: f64,
    current_cores: u32,
    rate_of_change: f64,
    min_cores: u32,
    max_cores: u32,
    out: *mut u32,
) -> ElasticStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let policy = ClampPolicy::new(rate_of_change, min_cores, max_cores)?;
        *out = estimator::clamp_and_round(estimate, current_cores, &policy);
        Ok(())
    })
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_scenario_from_str(text: *const c_char, out: *mut *mut ElasticScenario) -> ElasticStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let config = ScenarioConfig::from_toml_str(in_str(text, "text")?)?;
        *out = Box::into_raw(Box::new(ElasticScenario { config }));
        Ok(())
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_scenario_load(path: *const c_char, out: *mut *mut ElasticScenario) -> ElasticStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let config = ScenarioConfig::load(in_str(path, "path")?)?;
        *out = Box::into_raw(Box::new(ElasticScenario { config }));
        Ok(())
    })
}

/// Re-seeds the workload and cluster streams.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn elastic_scenario_set_seed(scenario: *mut ElasticScenario, seed: u64) -> ElasticStatus {
    guard(|| {
        let s = out_ref(scenario, "scenario")?;
        s.config = s.config.clone().with_seed(seed);
        Ok(())
    })
}

/// Solver iterations the scenario's schedule prescribes at `step`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_scenario_iterations_at(
    scenario: *const ElasticScenario,
    step: u64,
    out: *mut u64,
) -> ElasticStatus {
    guard(|| {
        let s = in_ref(scenario, "scenario")?;
        *out_ref(out, "out")? = iterations_at(&s.config.workload.iterations, step);
        Ok(())
    })
}

/// Runs the scenario in memory.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_scenario_run(scenario: *const ElasticScenario, out: *mut ElasticSummary) -> ElasticStatus {
    guard(|| {
        let s = in_ref(scenario, "scenario")?;
        let out = out_ref(out, "out")?;
        *out = (&elastic_core::run_scenario(&s.config)?.summary).into();
        Ok(())
    })
}

/// Runs the scenario, writing the CSV trace and key-value summary. `out` may be null.
///
/// # Safety
/// `scenario` must be a live handle; paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn elastic_scenario_run_to_files(
    scenario: *const ElasticScenario,
    trace_path: *const c_char,
    summary_path: *const c_char,
    out: *mut ElasticSummary,
) -> ElasticStatus {
    guard(|| {
        let s = in_ref(scenario, "scenario")?;
        let trace = Path::new(in_str(trace_path, "trace_path")?);
        let summary_path = Path::new(in_str(summary_path, "summary_path")?);
        let summary = elastic_core::run_scenario_to_files(&s.config, trace, summary_path)?;
        if let Some(out) = out.as_mut() {
            *out = (&summary).into();
        }
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn elastic_scenario_free(scenario: *mut ElasticScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `config` must be readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_controller_new(
    config: *const ElasticControllerConfig,
    out: *mut *mut ElasticController,
) -> ElasticStatus {
    guard(|| {
        let c = in_ref(config, "config")?;
        let out = out_ref(out, "out")?;
        let cfg = ControllerConfig {
            target_range: TargetRange::new(c.ce_min, c.ce_max)?,
            averaging_period: c.averaging_period,
            clamp: ClampPolicy::new(c.rate_of_change, c.min_cores, c.max_cores)?,
            initial_cores: c.initial_cores,
            starting_step: c.starting_step,
            total_steps: c.total_steps,
        };
        *out = Box::into_raw(Box::new(ElasticController {
            inner: Controller::new(cfg)?,
        }));
        Ok(())
    })
}

/// Reports one completed step. `processes` must equal the current core count.
///
/// # Safety
/// `controller` must be a live handle; `work` and `comm` must point to `processes`
/// readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_controller_on_step(
    controller: *mut ElasticController,
    step: u64,
    work: *const f64,
    comm: *const f64,
    processes: usize,
    out: *mut ElasticStepResult,
) -> ElasticStatus {
    guard(|| {
        let c = out_ref(controller, "controller")?;
        let out = out_ref(out, "out")?;
        let window = timing_window(work, comm, processes, StepSpan::single(step))?;
        let mut result = ElasticStepResult::default();
        for event in c.inner.on_step_complete(&window)? {
            match event {
                ControllerEvent::WindowEvaluated { metrics, in_range, .. } => {
                    result.window_evaluated = true;
                    result.metrics = metrics.into();
                    result.in_range = in_range;
                }
                ControllerEvent::CeClamped { .. } => result.ce_clamped = true,
                ControllerEvent::ResizeRequested(request) => {
                    result.resize_requested = true;
                    result.requested_cores = request.requested_cores;
                }
                _ => {}
            }
        }
        *out = result;
        Ok(())
    })
}

/// # Safety
/// `controller` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn elastic_controller_grant(controller: *mut ElasticController, cores: u32, step: u64) -> ElasticStatus {
    guard(|| {
        out_ref(controller, "controller")?.inner.on_resources_granted(cores, step)?;
        Ok(())
    })
}

/// # Safety
/// `controller` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn elastic_controller_restart_complete(controller: *mut ElasticController, step: u64) -> ElasticStatus {
    guard(|| {
        out_ref(controller, "controller")?.inner.on_restart_complete(step)?;
        Ok(())
    })
}

/// # Safety
/// `controller` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn elastic_controller_deny(controller: *mut ElasticController, step: u64) -> ElasticStatus {
    guard(|| {
        out_ref(controller, "controller")?.inner.on_resources_denied(step)?;
        Ok(())
    })
}

/// # Safety
/// `controller` must be a live handle; both out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn elastic_controller_state(
    controller: *const ElasticController,
    phase: *mut ElasticPhase,
    current_cores: *mut u32,
) -> ElasticStatus {
    guard(|| {
        let state = in_ref(controller, "controller")?.inner.state();
        *out_ref(phase, "phase")? = state.phase.into();
        *out_ref(current_cores, "current_cores")? = state.current_cores;
        Ok(())
    })
}

/// # Safety
/// `controller` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn elastic_controller_free(controller: *mut ElasticController) {
    if !controller.is_null() {
        drop(Box::from_raw(controller));
    }
}
