//! PoP-style efficiency metrics computed from per-process timing accumulators.
//!
//! Every process spends its time in one of two states, useful work or
//! communication. From the accumulated times of a measurement window:
//!
//! ```text
//! t_e = max_i(t_w^i + t_c^i)          elapsed time
//! t_w = sum_i t_w^i                   total useful work
//! CE  = max_i(t_w^i) / t_e            communication efficiency
//! LB  = t_w / (max_i(t_w^i) * P)      load balance
//! PE  = t_w / (t_e * P) = LB * CE     parallel efficiency
//! ```
//!
//! Metrics are always taken over accumulated times, one value per window,
//! never as an average of per-step ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking the metric identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Accumulated useful-work and communication time of one process, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProcessTiming {
    pub work_time: f64,
    pub comm_time: f64,
}

impl ProcessTiming {
    pub fn new(work_time: f64, comm_time: f64) -> Self {
        Self {
            work_time,
            comm_time,
        }
    }

    pub fn total(&self) -> f64 {
        self.work_time + self.comm_time
    }
}

/// Inclusive range of time-step indices covered by a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpan {
    pub first: u64,
    pub last: u64,
}

impl StepSpan {
    pub fn new(first: u64, last: u64) -> Result<Self> {
        if last < first {
            return Err(Error::InvalidInput(format!(
                "step span [{first}, {last}] is empty"
            )));
        }
        Ok(Self { first, last })
    }

    pub fn single(step: u64) -> Self {
        Self {
            first: step,
            last: step,
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u64 {
        self.last - self.first + 1
    }

    fn adjacent_to(&self, other: &StepSpan) -> bool {
        self.last.checked_add(1) == Some(other.first) || other.last.checked_add(1) == Some(self.first)
    }
}

/// Per-process accumulators for a run of consecutive time steps at a fixed core count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingWindow {
    per_process: Vec<ProcessTiming>,
    step_span: StepSpan,
}

impl TimingWindow {
    pub fn new(per_process: Vec<ProcessTiming>, step_span: StepSpan) -> Result<Self> {
        if per_process.is_empty() {
            return Err(Error::InvalidInput(
                "timing window holds no processes".into(),
            ));
        }
        for (rank, t) in per_process.iter().enumerate() {
            if !(t.work_time.is_finite() && t.comm_time.is_finite())
                || t.work_time < 0.0
                || t.comm_time < 0.0
            {
                return Err(Error::InvalidInput(format!(
                    "process {rank} has invalid timing (work={}, comm={})",
                    t.work_time, t.comm_time
                )));
            }
        }
        Ok(Self {
            per_process,
            step_span,
        })
    }

    /// A window of `processes` zeroed accumulators.
    pub fn zeroed(processes: usize, step_span: StepSpan) -> Result<Self> {
        Self::new(vec![ProcessTiming::default(); processes], step_span)
    }

    pub fn processes(&self) -> usize {
        self.per_process.len()
    }

    pub fn per_process(&self) -> &[ProcessTiming] {
        &self.per_process
    }

    pub fn step_span(&self) -> StepSpan {
        self.step_span
    }

    pub fn steps(&self) -> u64 {
        self.step_span.len()
    }
}

/// Efficiency metrics of one window together with the aggregates they derive from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMetrics {
    pub elapsed_time: f64,
    pub total_work: f64,
    pub max_work: f64,
    pub max_comm: f64,
    pub ce: f64,
    pub lb: f64,
    pub pe: f64,
}

pub fn compute_metrics(window: &TimingWindow) -> Result<EfficiencyMetrics> {
    compute_from_timings(&window.per_process)
}

pub(crate) fn compute_from_timings(timings: &[ProcessTiming]) -> Result<EfficiencyMetrics> {
    if timings.is_empty() {
        return Err(Error::InvalidInput("timing window holds no processes".into()));
    }
    let processes = timings.len() as f64;

    let mut elapsed_time = 0.0_f64;
    let mut total_work = 0.0_f64;
    let mut max_work = 0.0_f64;
    let mut max_comm = 0.0_f64;
    for t in timings {
        elapsed_time = elapsed_time.max(t.total());
        total_work += t.work_time;
        max_work = max_work.max(t.work_time);
        max_comm = max_comm.max(t.comm_time);
    }

    if max_work <= 0.0 {
        return Err(Error::DegenerateWindow(format!(
            "no process recorded useful work across {} processes",
            timings.len()
        )));
    }
    if elapsed_time <= 0.0 {
        return Err(Error::DegenerateWindow("elapsed time is zero".into()));
    }

    let ce = max_work / elapsed_time;
    // Rounded summation can push the ratio a few ulp past one.
    let lb = (total_work / (max_work * processes)).min(1.0);
    let pe = (total_work / (elapsed_time * processes)).min(1.0);

    Ok(EfficiencyMetrics {
        elapsed_time,
        total_work,
        max_work,
        max_comm,
        ce,
        lb,
        pe,
    })
}

/// Element-wise sum of two windows over adjacent step spans at the same core count.
pub fn merge_windows(a: &TimingWindow, b: &TimingWindow) -> Result<TimingWindow> {
    if a.processes() != b.processes() {
        return Err(Error::InvalidMerge(format!(
            "process counts differ ({} vs {})",
            a.processes(),
            b.processes()
        )));
    }
    if !a.step_span.adjacent_to(&b.step_span) {
        return Err(Error::InvalidMerge(format!(
            "step spans [{}, {}] and [{}, {}] are not adjacent",
            a.step_span.first, a.step_span.last, b.step_span.first, b.step_span.last
        )));
    }
    let per_process = a
        .per_process
        .iter()
        .zip(&b.per_process)
        .map(|(x, y)| ProcessTiming::new(x.work_time + y.work_time, x.comm_time + y.comm_time))
        .collect();
    let step_span = StepSpan {
        first: a.step_span.first.min(b.step_span.first),
        last: a.step_span.last.max(b.step_span.last),
    };
    Ok(TimingWindow {
        per_process,
        step_span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(pairs: &[(f64, f64)], first: u64, last: u64) -> TimingWindow {
        TimingWindow::new(
            pairs.iter().map(|&(w, c)| ProcessTiming::new(w, c)).collect(),
            StepSpan::new(first, last).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn no_communication_perfect_balance() {
        let m = compute_metrics(&window(&[(1.0, 0.0), (1.0, 0.0)], 0, 0)).unwrap();
        assert_eq!((m.ce, m.lb, m.pe), (1.0, 1.0, 1.0));
    }

    #[test]
    fn unbalanced_pair() {
        let m = compute_metrics(&window(&[(1.0, 0.5), (1.5, 0.0)], 0, 0)).unwrap();
        assert_eq!(m.elapsed_time, 1.5);
        assert_eq!(m.total_work, 2.5);
        assert_eq!(m.ce, 1.0);
        assert!((m.lb - 2.5 / 3.0).abs() < 1e-15);
        assert!((m.pe - 0.833_333_333_333).abs() < 1e-12);
    }

    #[test]
    fn symmetric_half_communication() {
        let m = compute_metrics(&window(&[(1.0, 1.0); 4], 0, 0)).unwrap();
        assert_eq!(m.elapsed_time, 2.0);
        assert_eq!((m.ce, m.lb, m.pe), (0.5, 1.0, 0.5));
        assert_eq!(m.max_comm, 1.0);
    }

    #[test]
    fn empty_window_is_rejected() {
        assert!(matches!(
            TimingWindow::new(vec![], StepSpan::single(0)),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(compute_from_timings(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn zero_work_is_degenerate() {
        let w = window(&[(0.0, 1.0), (0.0, 2.0)], 0, 3);
        assert!(matches!(compute_metrics(&w), Err(Error::DegenerateWindow(_))));
        let w = window(&[(0.0, 0.0)], 0, 0);
        assert!(matches!(compute_metrics(&w), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn negative_or_nan_timing_rejected() {
        let bad = TimingWindow::new(vec![ProcessTiming::new(-1.0, 0.0)], StepSpan::single(0));
        assert!(bad.is_err());
        let bad = TimingWindow::new(vec![ProcessTiming::new(f64::NAN, 0.0)], StepSpan::single(0));
        assert!(bad.is_err());
        assert!(StepSpan::new(3, 2).is_err());
    }

    #[test]
    fn merge_with_zero_window_keeps_timings() {
        let x = window(&[(1.0, 2.0), (3.0, 4.0)], 0, 4);
        let zero = TimingWindow::zeroed(2, StepSpan::new(5, 9).unwrap()).unwrap();
        let merged = merge_windows(&x, &zero).unwrap();
        assert_eq!(merged.per_process(), x.per_process());
        assert_eq!(merged.step_span(), StepSpan::new(0, 9).unwrap());
    }

    #[test]
    fn merge_sums_elementwise() {
        let merged = merge_windows(&window(&[(1.0, 1.0)], 0, 0), &window(&[(2.0, 0.0)], 1, 1)).unwrap();
        assert_eq!(merged.per_process(), &[ProcessTiming::new(3.0, 1.0)]);
        assert_eq!(merged.steps(), 2);
    }

    #[test]
    fn merge_accepts_either_order() {
        let merged = merge_windows(&window(&[(1.0, 0.0)], 5, 6), &window(&[(1.0, 0.0)], 3, 4)).unwrap();
        assert_eq!(merged.step_span(), StepSpan::new(3, 6).unwrap());
    }

    #[test]
    fn merge_rejects_mismatched_core_count() {
        let a = window(&[(1.0, 0.0); 2], 0, 0);
        let b = window(&[(1.0, 0.0); 3], 1, 1);
        assert!(matches!(merge_windows(&a, &b), Err(Error::InvalidMerge(_))));
    }

    #[test]
    fn merge_rejects_gaps_and_overlaps() {
        let a = window(&[(1.0, 0.0)], 0, 2);
        assert!(merge_windows(&a, &window(&[(1.0, 0.0)], 4, 4)).is_err());
        assert!(merge_windows(&a, &window(&[(1.0, 0.0)], 2, 3)).is_err());
    }

    fn timings_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((1e-3f64..10.0, 0.0f64..10.0), 1..64)
    }

    proptest! {
        #[test]
        fn pe_is_ce_times_lb(pairs in timings_strategy()) {
            let m = compute_metrics(&window(&pairs, 0, 0)).unwrap();
            let product = m.ce * m.lb;
            prop_assert!((m.pe - product).abs() <= IDENTITY_TOLERANCE * m.pe.abs());
            for v in [m.ce, m.lb, m.pe] {
                prop_assert!(v > 0.0 && v <= 1.0);
            }
            prop_assert!(m.elapsed_time >= m.max_work);
        }

        #[test]
        fn metrics_are_scale_invariant(pairs in timings_strategy(), k in 1e-3f64..1e3) {
            let base = compute_metrics(&window(&pairs, 0, 0)).unwrap();
            let scaled: Vec<_> = pairs.iter().map(|&(w, c)| (w * k, c * k)).collect();
            let s = compute_metrics(&window(&scaled, 0, 0)).unwrap();
            for (a, b) in [(base.ce, s.ce), (base.lb, s.lb), (base.pe, s.pe)] {
                prop_assert!((a - b).abs() <= 1e-12 * a);
            }
        }

        #[test]
        fn merge_then_compute_matches_summed_timings(
            pairs in prop::collection::vec((1e-3f64..10.0, 0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0), 1..32)
        ) {
            let a: Vec<_> = pairs.iter().map(|p| (p.0, p.1)).collect();
            let b: Vec<_> = pairs.iter().map(|p| (p.2, p.3)).collect();
            let summed: Vec<_> = pairs.iter().map(|p| (p.0 + p.2, p.1 + p.3)).collect();
            let merged = merge_windows(&window(&a, 0, 4), &window(&b, 5, 9)).unwrap();
            prop_assert_eq!(
                compute_metrics(&merged).unwrap(),
                compute_metrics(&window(&summed, 0, 9)).unwrap()
            );
        }
    }
}
