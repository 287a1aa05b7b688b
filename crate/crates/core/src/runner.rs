//! Scenario driver: workload, controller and scheduler advanced step by step
//! on a simulated clock, with every step recorded in the trace.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::{debug, info};

use crate::config::ScenarioConfig;
use crate::controller::{Controller, ControllerEvent};
use crate::error::{Error, Result};
use crate::metrics::compute_metrics;
use crate::scheduler::Scheduler;
use crate::trace::{summarize, RunSummary, TraceEvent, TraceRecord, TraceRecorder};
use crate::workload::{restart_cost, WorkloadGenerator, WorkloadProfile};

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub records: Vec<TraceRecord>,
}

/// Runs a scenario keeping the trace in memory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutcome> {
    let mut recorder = TraceRecorder::in_memory();
    let summary = run_scenario_with(config, &mut recorder)?;
    Ok(RunOutcome {
        summary,
        records: recorder.into_records(),
    })
}

/// Runs a scenario and writes the CSV trace and key-value summary to the given paths.
pub fn run_scenario_to_files(config: &ScenarioConfig, trace_path: &Path, summary_path: &Path) -> Result<RunSummary> {
    let file = File::create(trace_path).map_err(|e| Error::io(trace_path, e))?;
    let mut recorder = TraceRecorder::streaming(BufWriter::new(file)).map_err(|e| Error::io(trace_path, e))?;
    let summary = run_scenario_with(config, &mut recorder)?;
    std::fs::write(summary_path, summary.to_key_values()).map_err(|e| Error::io(summary_path, e))?;
    Ok(summary)
}

pub fn run_scenario_with<W: Write>(config: &ScenarioConfig, recorder: &mut TraceRecorder<W>) -> Result<RunSummary> {
    let cfg = &config.controller;
    let mut generator = WorkloadGenerator::new(config.workload.clone())?;
    let mut controller = Controller::new(*cfg)?;
    let mut scheduler = Scheduler::new(config.cluster.clone(), cfg.initial_cores)?;
    let mut now = 0.0_f64;

    for step in 0..cfg.total_steps {
        let cores = controller.state().current_cores;
        let timing = generator.generate_step(step, cores)?;
        let step_metrics = compute_metrics(&timing)?;
        now += step_metrics.elapsed_time;

        let events = controller.on_step_complete(&timing)?;
        let phase = controller.state().phase;
        let mut base = TraceRecord {
            step,
            simulated_time: now,
            cores,
            instantaneous_ce: Some(step_metrics.ce),
            window_ce: None,
            lb: None,
            pe: None,
            phase,
            event: None,
        };
        let bare = move |event| TraceRecord {
            step,
            simulated_time: now,
            cores,
            instantaneous_ce: None,
            window_ce: None,
            lb: None,
            pe: None,
            phase,
            event: Some(event),
        };

        let mut extra = Vec::new();
        for event in events {
            match event {
                ControllerEvent::WindowEvaluated { metrics, in_range, .. } => {
                    debug!("step {step}: window CE {:.4} on {cores} cores (in range: {in_range})", metrics.ce);
                    base.window_ce = Some(metrics.ce);
                    base.lb = Some(metrics.lb);
                    base.pe = Some(metrics.pe);
                    base.event = Some(TraceEvent::WindowEvaluated);
                }
                ControllerEvent::CeClamped { measured, .. } => {
                    info!("step {step}: measured CE {measured} clamped below 1");
                    extra.push(bare(TraceEvent::CeClamped));
                }
                ControllerEvent::ResizeRequested(request) => {
                    info!("step {step}: requesting {} cores ({:?})", request.requested_cores, request.reason);
                    scheduler.request_resize(request.requested_cores, now)?;
                    extra.push(bare(TraceEvent::ResizeRequested));
                }
                other => {
                    return Err(Error::Consistency(format!(
                        "unexpected controller event on step completion: {other:?}"
                    )))
                }
            }
        }
        recorder.record(base)?;
        for record in extra {
            recorder.record(record)?;
        }

        if let Some(grant) = scheduler.poll(now) {
            let granted = controller.on_resources_granted(grant.cores, step)?;
            if let ControllerEvent::Granted { latency_steps, .. } = granted {
                info!(
                    "step {step}: granted {} cores after {latency_steps} steps ({:.3} s)",
                    grant.cores,
                    grant.granted_at - grant.requested_at
                );
            }
            recorder.record(TraceRecord {
                step,
                simulated_time: now,
                cores: grant.cores,
                instantaneous_ce: None,
                window_ce: None,
                lb: None,
                pe: None,
                phase: controller.state().phase,
                event: Some(TraceEvent::Granted),
            })?;

            now += restart_cost(&config.workload, cores, grant.cores);
            controller.on_restart_complete(step)?;
            recorder.record(TraceRecord {
                step,
                simulated_time: now,
                cores: grant.cores,
                instantaneous_ce: None,
                window_ce: None,
                lb: None,
                pe: None,
                phase: controller.state().phase,
                event: Some(TraceEvent::Restarted),
            })?;
        }
    }
    controller.finish();

    if recorder.records().is_empty() {
        return Ok(RunSummary::empty(cfg, config.convergence_windows));
    }
    summarize(recorder.records(), cfg, config.convergence_windows)
}

/// Core-seconds spent running `steps` steps on a fixed allocation of `cores`.
pub fn fixed_allocation_core_seconds(profile: &WorkloadProfile, cores: u32, steps: u64) -> Result<f64> {
    let mut generator = WorkloadGenerator::new(profile.clone())?;
    let mut total = 0.0;
    for step in 0..steps {
        let m = compute_metrics(&generator.generate_step(step, cores)?)?;
        total += f64::from(cores) * m.elapsed_time;
    }
    Ok(total)
}
