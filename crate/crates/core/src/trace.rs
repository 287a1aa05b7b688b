//! Per-step trace records, the CSV trace format and run summaries.
//!
//! Floating-point fields are quantized to 9 significant digits when they are
//! recorded, so the in-memory trace and a trace read back from disk are
//! identical and summarize to the same values.

use std::io::{BufRead, Write};

use crate::controller::{ControllerConfig, Phase};
use crate::error::{Error, Result};
use crate::estimator::TargetRange;

pub const CSV_HEADER: &str = "step,simulated_time,cores,instantaneous_ce,window_ce,lb,pe,phase,event";
pub const DEFAULT_CONVERGENCE_WINDOWS: usize = 3;
const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    WindowEvaluated,
    ResizeRequested,
    Granted,
    Restarted,
    CeClamped,
    Denied,
}

impl TraceEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceEvent::WindowEvaluated => "window_evaluated",
            TraceEvent::ResizeRequested => "resize_requested",
            TraceEvent::Granted => "granted",
            TraceEvent::Restarted => "restarted",
            TraceEvent::CeClamped => "ce_clamped",
            TraceEvent::Denied => "denied",
        }
    }
}

impl std::str::FromStr for TraceEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "window_evaluated" => TraceEvent::WindowEvaluated,
            "resize_requested" => TraceEvent::ResizeRequested,
            "granted" => TraceEvent::Granted,
            "restarted" => TraceEvent::Restarted,
            "ce_clamped" => TraceEvent::CeClamped,
            "denied" => TraceEvent::Denied,
            other => return Err(Error::TraceFormat(format!("unknown event `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub simulated_time: f64,
    pub cores: u32,
    pub instantaneous_ce: Option<f64>,
    /// Present only on records that close an averaging window.
    pub window_ce: Option<f64>,
    pub lb: Option<f64>,
    pub pe: Option<f64>,
    pub phase: Phase,
    pub event: Option<TraceEvent>,
}

impl TraceRecord {
    fn quantized(mut self) -> Self {
        self.simulated_time = quantize(self.simulated_time);
        for v in [&mut self.instantaneous_ce, &mut self.window_ce, &mut self.lb, &mut self.pe] {
            *v = v.map(quantize);
        }
        self
    }

    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            format_float(self.simulated_time),
            self.cores,
            opt(self.instantaneous_ce),
            opt(self.window_ce),
            opt(self.lb),
            opt(self.pe),
            self.phase.as_str(),
            self.event.map(|e| e.as_str()).unwrap_or_default(),
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::TraceFormat(format!(
                "expected 9 fields, found {} in `{line}`",
                fields.len()
            )));
        }
        let float = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::TraceFormat(format!("bad number `{s}`")))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                float(s).map(Some)
            }
        };
        Ok(Self {
            step: fields[0]
                .parse()
                .map_err(|_| Error::TraceFormat(format!("bad step `{}`", fields[0])))?,
            simulated_time: float(fields[1])?,
            cores: fields[2]
                .parse()
                .map_err(|_| Error::TraceFormat(format!("bad core count `{}`", fields[2])))?,
            instantaneous_ce: opt(fields[3])?,
            window_ce: opt(fields[4])?,
            lb: opt(fields[5])?,
            pe: opt(fields[6])?,
            phase: fields[7].parse()?,
            event: if fields[8].is_empty() {
                None
            } else {
                Some(fields[8].parse()?)
            },
        })
    }
}

/// Rounds to 9 significant digits.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal form of `x` after rounding to 9 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{}", quantize(x))
}

/// Appends records in step order, optionally streaming them as CSV.
pub struct TraceRecorder<W: Write> {
    sink: Option<W>,
    records: Vec<TraceRecord>,
}

impl<W: Write> std::fmt::Debug for TraceRecorder<W> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceRecorder")
            .field("records", &self.records.len())
            .field("streaming", &self.sink.is_some())
            .finish()
    }
}

impl TraceRecorder<std::io::Sink> {
    pub fn in_memory() -> Self {
        Self {
            sink: None,
            records: Vec::new(),
        }
    }
}

impl<W: Write> TraceRecorder<W> {
    pub fn streaming(mut sink: W) -> std::io::Result<Self> {
        writeln!(sink, "{CSV_HEADER}")?;
        sink.flush()?;
        Ok(Self {
            sink: Some(sink),
            records: Vec::new(),
        })
    }

    pub fn record(&mut self, record: TraceRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step < last.step {
                return Err(Error::Sequencing {
                    step: record.step,
                    last: last.step,
                });
            }
        }
        let record = record.quantized();
        if let Some(sink) = self.sink.as_mut() {
            writeln!(sink, "{}", record.to_csv_line())
                .and_then(|_| sink.flush())
                .map_err(|e| Error::io("<trace>", e))?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }
}

pub fn read_trace(reader: impl BufRead) -> Result<Vec<TraceRecord>> {
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(header)) if header == CSV_HEADER => {}
        Some(Ok(header)) => return Err(Error::TraceFormat(format!("unexpected header `{header}`"))),
        Some(Err(e)) => return Err(Error::io("<trace>", e)),
        None => return Err(Error::TraceFormat("missing header".into())),
    }
    lines
        .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
        .map(|l| {
            l.map_err(|e| Error::io("<trace>", e))
                .and_then(|l| TraceRecord::from_csv_line(&l))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub total_steps: u64,
    pub optimization_steps: u32,
    pub final_cores: u32,
    pub final_window_ce: Option<f64>,
    pub converged: bool,
    pub convergence_windows: usize,
    pub windows_evaluated: usize,
    pub overshoots: u32,
    pub simulated_time: f64,
    pub core_seconds: f64,
    pub baseline_core_seconds: f64,
    pub restart_overhead_total: f64,
}

impl RunSummary {
    /// Summary of a run that produced no steps.
    pub fn empty(cfg: &ControllerConfig, k: usize) -> Self {
        Self {
            total_steps: 0,
            optimization_steps: 0,
            final_cores: cfg.initial_cores,
            final_window_ce: None,
            converged: false,
            convergence_windows: k,
            windows_evaluated: 0,
            overshoots: 0,
            simulated_time: 0.0,
            core_seconds: 0.0,
            baseline_core_seconds: 0.0,
            restart_overhead_total: 0.0,
        }
    }

    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("total_steps", self.total_steps.to_string());
        put("optimization_steps", self.optimization_steps.to_string());
        put("final_cores", self.final_cores.to_string());
        put(
            "final_window_ce",
            self.final_window_ce.map(format_float).unwrap_or_default(),
        );
        put("converged", self.converged.to_string());
        put("convergence_windows", self.convergence_windows.to_string());
        put("windows_evaluated", self.windows_evaluated.to_string());
        put("overshoots", self.overshoots.to_string());
        put("simulated_time_s", format_float(self.simulated_time));
        put("core_seconds", format_float(self.core_seconds));
        put("baseline_core_seconds", format_float(self.baseline_core_seconds));
        put("restart_overhead_total_s", format_float(self.restart_overhead_total));
        out
    }

    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::TraceFormat(format!("summary line `{line}` has no `=`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&str> {
            map.get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::TraceFormat(format!("summary lacks `{k}`")))
        };
        fn parse<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::TraceFormat(format!("summary `{k}` has bad value `{v}`")))
        }
        let final_ce = get("final_window_ce")?;
        Ok(Self {
            total_steps: parse("total_steps", get("total_steps")?)?,
            optimization_steps: parse("optimization_steps", get("optimization_steps")?)?,
            final_cores: parse("final_cores", get("final_cores")?)?,
            final_window_ce: if final_ce.is_empty() {
                None
            } else {
                Some(parse("final_window_ce", final_ce)?)
            },
            converged: parse("converged", get("converged")?)?,
            convergence_windows: parse("convergence_windows", get("convergence_windows")?)?,
            windows_evaluated: parse("windows_evaluated", get("windows_evaluated")?)?,
            overshoots: parse("overshoots", get("overshoots")?)?,
            simulated_time: parse("simulated_time_s", get("simulated_time_s")?)?,
            core_seconds: parse("core_seconds", get("core_seconds")?)?,
            baseline_core_seconds: parse("baseline_core_seconds", get("baseline_core_seconds")?)?,
            restart_overhead_total: parse("restart_overhead_total_s", get("restart_overhead_total_s")?)?,
        })
    }
}

/// Window CEs in trace order.
pub fn window_ces(records: &[TraceRecord]) -> impl Iterator<Item = (u64, u32, f64)> + '_ {
    records
        .iter()
        .filter_map(|r| r.window_ce.map(|ce| (r.step, r.cores, ce)))
}

/// `(step, cores)` of every grant in trace order.
pub fn granted_cores(records: &[TraceRecord]) -> Vec<(u64, u32)> {
    records
        .iter()
        .filter(|r| r.event == Some(TraceEvent::Granted))
        .map(|r| (r.step, r.cores))
        .collect()
}

/// Times an out-of-range window lands on the opposite side of the range from the
/// previous out-of-range window.
pub fn count_overshoots(records: &[TraceRecord], range: &TargetRange) -> u32 {
    let mut last_side: Option<bool> = None;
    let mut overshoots = 0;
    for (_, _, ce) in window_ces(records) {
        if range.contains(ce) {
            continue;
        }
        let above = ce > range.ce_max();
        if last_side.is_some_and(|prev| prev != above) {
            overshoots += 1;
        }
        last_side = Some(above);
    }
    overshoots
}

/// Convergence means the last `k` evaluated windows all fell in the target range.
pub fn summarize(records: &[TraceRecord], cfg: &ControllerConfig, k: usize) -> Result<RunSummary> {
    let last = records
        .last()
        .ok_or_else(|| Error::InvalidInput("cannot summarize an empty trace".into()))?;
    let range = &cfg.target_range;

    let windows: Vec<f64> = window_ces(records).map(|(_, _, ce)| ce).collect();
    let converged = k > 0 && windows.len() >= k && windows[windows.len() - k..].iter().all(|&ce| range.contains(ce));

    let mut core_seconds = 0.0;
    let mut restart_overhead_total = 0.0;
    let mut previous_time = 0.0;
    for r in records {
        let dt = r.simulated_time - previous_time;
        core_seconds += f64::from(r.cores) * dt;
        if r.event == Some(TraceEvent::Restarted) {
            restart_overhead_total += dt;
        }
        previous_time = r.simulated_time;
    }

    Ok(RunSummary {
        total_steps: last.step + 1,
        optimization_steps: granted_cores(records).len() as u32,
        final_cores: last.cores,
        final_window_ce: windows.last().copied(),
        converged,
        convergence_windows: k,
        windows_evaluated: windows.len(),
        overshoots: count_overshoots(records, range),
        simulated_time: last.simulated_time,
        core_seconds: quantize(core_seconds),
        baseline_core_seconds: quantize(f64::from(cfg.initial_cores) * last.simulated_time),
        restart_overhead_total: quantize(restart_overhead_total),
    })
}
