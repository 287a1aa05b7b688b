//! One-shot commands behind the `estimate` and `sweep` subcommands.

use std::fmt;

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::estimator::{clamp_and_round, estimate_cores, predict_ce, sanitize_measured_ce, ClampPolicy, TargetRange};
use crate::metrics::EfficiencyMetrics;
use crate::trace::format_float;
use crate::workload::sweep_ce;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRequest {
    pub cores: u32,
    pub ce: f64,
    pub ce_min: f64,
    pub ce_max: f64,
    pub rate_of_change: f64,
    pub min_cores: u32,
    pub max_cores: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateReport {
    pub target_ce: f64,
    pub raw_estimate: f64,
    pub in_range: bool,
    /// The measured CE was at or above one and had to be pulled into the estimator domain.
    pub ce_clamped: bool,
    pub cores: u32,
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "target_ce = {}", format_float(self.target_ce))?;
        writeln!(f, "raw_estimate = {}", format_float(self.raw_estimate))?;
        writeln!(f, "in_range = {}", self.in_range)?;
        writeln!(f, "ce_clamped = {}", self.ce_clamped)?;
        writeln!(f, "cores = {}", self.cores)
    }
}

pub fn cmd_estimate(req: &EstimateRequest) -> Result<EstimateReport> {
    let range = TargetRange::new(req.ce_min, req.ce_max)?;
    let policy = ClampPolicy::new(req.rate_of_change, req.min_cores, req.max_cores)?;
    let (ce, ce_clamped) = sanitize_measured_ce(req.ce);
    let target_ce = range.target();
    let raw_estimate = estimate_cores(req.cores, ce, target_ce)?;
    let in_range = range.contains(req.ce);
    let cores = if in_range {
        req.cores
    } else {
        clamp_and_round(raw_estimate, req.cores, &policy)
    };
    Ok(EstimateReport {
        target_ce,
        raw_estimate,
        in_range,
        ce_clamped,
        cores,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub cores: Vec<u32>,
    pub noiseless: bool,
    /// Defaults to the scenario's starting step.
    pub first_step: Option<u64>,
    /// Defaults to the scenario's averaging period.
    pub steps_per_point: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<(u32, EfficiencyMetrics)>,
}

impl SweepTable {
    /// CE the closed-form model predicts on `n` cores, anchored at the measurement on `anchor`.
    pub fn anchored_prediction(&self, anchor: usize, n: u32) -> Option<f64> {
        let (anchor_cores, m) = self.rows[anchor];
        predict_ce(anchor_cores, m.ce, f64::from(n)).ok()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,ce,lb,pe");
        for (anchor, _) in &self.rows {
            out.push_str(&format!(",pred_from_{anchor}"));
        }
        out.push('\n');
        for (n, m) in &self.rows {
            out.push_str(&format!(
                "{n},{},{},{}",
                format_float(m.ce),
                format_float(m.lb),
                format_float(m.pe)
            ));
            for anchor in 0..self.rows.len() {
                out.push(',');
                if let Some(p) = self.anchored_prediction(anchor, *n) {
                    out.push_str(&format_float(p));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn cmd_sweep(config: &ScenarioConfig, options: &SweepOptions) -> Result<SweepTable> {
    let profile = if options.noiseless {
        config.workload.noiseless()
    } else {
        config.workload.clone()
    };
    let first = options.first_step.unwrap_or(config.controller.starting_step);
    let steps = options
        .steps_per_point
        .unwrap_or(config.controller.averaging_period);
    Ok(SweepTable {
        rows: sweep_ce(&profile, &options.cores, first, steps)?,
    })
}
