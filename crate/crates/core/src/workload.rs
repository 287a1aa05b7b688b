//! Synthetic parallel application.
//!
//! Each time step on `n` cores produces, for process `i`,
//!
//! ```text
//! work_i = (W / n) (1 + beta u_i)
//! comm_i = kappa iters(step) max(0, 1 + alpha log2(n / n_ref)) (1 + sigma v_i)
//! ```
//!
//! `u_i` is fixed for a partition (it is redrawn only when the core count
//! changes) and `v_i` is redrawn every step. Both are uniform on `[-1, 1]`
//! and derived from the seed, so a stream is reproducible bit for bit.
//! With `beta = sigma = 0` work scales exactly as `1/n`; with
//! `alpha = sigma = 0` the maximum communication time does not depend on `n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, merge_windows, EfficiencyMetrics, ProcessTiming, StepSpan, TimingWindow};

const STREAM_IMBALANCE: u64 = 0x696d_6261_6c61_6e63;
const STREAM_NOISE: u64 = 0x6e6f_6973_6500_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Implicit,
    Explicit,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Implicit => "implicit",
            Scheme::Explicit => "explicit",
        })
    }
}

/// Solver iterations per time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IterationSchedule {
    Constant { iterations: u32 },
    /// `plateau` iterations before `jump_step`, then `offset + step`.
    HeavisideRamp {
        plateau: u32,
        jump_step: u64,
        offset: u32,
    },
}

impl IterationSchedule {
    /// `20 (1 - H(x - 50)) + (10 + x) H(x - 50)` with `H(0) = 1`.
    pub fn heaviside_ramp() -> Self {
        IterationSchedule::HeavisideRamp {
            plateau: 20,
            jump_step: 50,
            offset: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            IterationSchedule::Constant { iterations } if iterations < 1 => Err(Error::InvalidInput(
                "constant iteration count must be at least 1".into(),
            )),
            IterationSchedule::HeavisideRamp { plateau, jump_step, offset }
                if plateau < 1 || (u64::from(offset) + jump_step) < 1 =>
            {
                Err(Error::InvalidInput(
                    "heaviside ramp must yield at least one iteration per step".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

pub fn iterations_at(schedule: &IterationSchedule, step: u64) -> u64 {
    match *schedule {
        IterationSchedule::Constant { iterations } => u64::from(iterations),
        IterationSchedule::HeavisideRamp {
            plateau,
            jump_step,
            offset,
        } => {
            if step < jump_step {
                u64::from(plateau)
            } else {
                u64::from(offset) + step
            }
        }
    }
}

/// Checkpoint write, read and repartition time: `fixed + size / min(old, new)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartCostModel {
    pub fixed_s: f64,
    pub size_core_s: f64,
}

impl Default for RestartCostModel {
    fn default() -> Self {
        Self {
            fixed_s: 1.0,
            size_core_s: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    /// Core-seconds of useful work per time step (W).
    pub total_work_per_step: f64,
    /// Seconds of communication per solver iteration on the most exposed process (kappa).
    pub comm_per_iteration: f64,
    /// Growth of the maximum communication time with `log2(n / comm_ref_cores)` (alpha).
    pub comm_log_slope: f64,
    pub comm_ref_cores: u32,
    /// Static per-partition work imbalance (beta).
    pub imbalance_amplitude: f64,
    /// Per-step communication noise (sigma).
    pub noise_amplitude: f64,
    pub iterations: IterationSchedule,
    pub scheme: Scheme,
    pub rng_seed: u64,
    pub restart: RestartCostModel,
}

/// Reference calibration point shared by both presets.
pub const CALIBRATION_CORES: u32 = 15;
pub const CALIBRATION_ITERATIONS: u32 = 20;
pub const DEFAULT_TOTAL_WORK: f64 = 15.0;
pub const DEFAULT_LOG_SLOPE: f64 = 0.05;
/// Noiseless CE the implicit preset reaches on 15 cores.
pub const IMPLICIT_CE_AT_CALIBRATION: f64 = 0.98;
/// Explicit steps spend relatively less time communicating.
pub const EXPLICIT_CE_AT_CALIBRATION: f64 = 0.995;

/// Communication time per iteration that makes the noiseless model hit `target_ce`
/// on `cores` cores with `iterations` solver iterations per step.
///
/// From `CE = (W/n) / (W/n + kappa iters g(n))`, `kappa = W (1/CE - 1) / (n iters g(n))`.
pub fn calibrate_comm_per_iteration(
    total_work: f64,
    cores: u32,
    iterations: u32,
    target_ce: f64,
    log_slope: f64,
    ref_cores: u32,
) -> f64 {
    let growth = comm_growth(cores, log_slope, ref_cores);
    total_work * (1.0 / target_ce - 1.0) / (f64::from(cores) * f64::from(iterations) * growth)
}

fn comm_growth(cores: u32, log_slope: f64, ref_cores: u32) -> f64 {
    (1.0 + log_slope * (f64::from(cores) / f64::from(ref_cores)).log2()).max(0.0)
}

impl WorkloadProfile {
    pub fn preset(scheme: Scheme) -> Self {
        let (target_ce, imbalance, noise) = match scheme {
            Scheme::Implicit => (IMPLICIT_CE_AT_CALIBRATION, 0.02, 0.05),
            Scheme::Explicit => (EXPLICIT_CE_AT_CALIBRATION, 0.02, 0.2),
        };
        Self {
            total_work_per_step: DEFAULT_TOTAL_WORK,
            comm_per_iteration: calibrate_comm_per_iteration(
                DEFAULT_TOTAL_WORK,
                CALIBRATION_CORES,
                CALIBRATION_ITERATIONS,
                target_ce,
                DEFAULT_LOG_SLOPE,
                CALIBRATION_CORES,
            ),
            comm_log_slope: DEFAULT_LOG_SLOPE,
            comm_ref_cores: CALIBRATION_CORES,
            imbalance_amplitude: imbalance,
            noise_amplitude: noise,
            iterations: IterationSchedule::Constant {
                iterations: CALIBRATION_ITERATIONS,
            },
            scheme,
            rng_seed: 0,
            restart: RestartCostModel::default(),
        }
    }

    /// Same profile with imbalance and noise switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            imbalance_amplitude: 0.0,
            noise_amplitude: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidInput(what.to_string()))
            }
        };
        check(
            self.total_work_per_step > 0.0 && self.total_work_per_step.is_finite(),
            "total work per step must be positive",
        )?;
        check(
            self.comm_per_iteration >= 0.0 && self.comm_per_iteration.is_finite(),
            "communication per iteration must be non-negative",
        )?;
        check(self.comm_log_slope.is_finite(), "communication log slope must be finite")?;
        check(self.comm_ref_cores >= 1, "communication reference cores must be at least 1")?;
        check(
            (0.0..=0.5).contains(&self.imbalance_amplitude),
            "imbalance amplitude must lie in [0, 0.5]",
        )?;
        check(
            (0.0..=0.5).contains(&self.noise_amplitude),
            "noise amplitude must lie in [0, 0.5]",
        )?;
        check(
            self.restart.fixed_s >= 0.0 && self.restart.size_core_s >= 0.0,
            "restart cost constants must be non-negative",
        )?;
        self.iterations.validate()
    }

    /// Noiseless communication time of one process in one step.
    pub fn nominal_comm(&self, step: u64, cores: u32) -> f64 {
        self.comm_per_iteration
            * iterations_at(&self.iterations, step) as f64
            * comm_growth(cores, self.comm_log_slope, self.comm_ref_cores)
    }
}

pub fn restart_cost(profile: &WorkloadProfile, cores_old: u32, cores_new: u32) -> f64 {
    let smaller = cores_old.min(cores_new).max(1);
    profile.restart.fixed_s + profile.restart.size_core_s / f64::from(smaller)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, stream: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed ^ stream) ^ a) ^ b))
}

fn unit_draws(rng: &mut ChaCha8Rng, count: usize) -> impl Iterator<Item = f64> + '_ {
    (0..count).map(move |_| rng.random_range(-1.0..=1.0))
}

/// Stateful generator: tracks the partition epoch so imbalance stays fixed per partition.
#[derive(Debug, Clone)]
pub struct WorkloadGenerator {
    profile: WorkloadProfile,
    epoch: u64,
    cores: Option<u32>,
    imbalance: Vec<f64>,
}

impl WorkloadGenerator {
    pub fn new(profile: WorkloadProfile) -> Result<Self> {
        profile.validate()?;
        Ok(Self {
            profile,
            epoch: 0,
            cores: None,
            imbalance: Vec::new(),
        })
    }

    pub fn profile(&self) -> &WorkloadProfile {
        &self.profile
    }

    /// Number of partitions seen so far; the first partition is epoch 0.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    fn repartition(&mut self, cores: u32) {
        if self.cores.is_some() {
            self.epoch += 1;
        }
        self.cores = Some(cores);
        let mut rng = stream_rng(self.profile.rng_seed, STREAM_IMBALANCE, self.epoch, u64::from(cores));
        self.imbalance = unit_draws(&mut rng, cores as usize).collect();
    }

    pub fn generate_step(&mut self, step: u64, cores: u32) -> Result<TimingWindow> {
        if cores < 1 {
            return Err(Error::InvalidInput("cannot generate a step on zero cores".into()));
        }
        if self.cores != Some(cores) {
            self.repartition(cores);
        }
        let p = &self.profile;
        let work = p.total_work_per_step / f64::from(cores);
        let comm = p.nominal_comm(step, cores);
        let mut rng = stream_rng(p.rng_seed, STREAM_NOISE, self.epoch, step);
        let per_process = self
            .imbalance
            .iter()
            .zip(unit_draws(&mut rng, cores as usize))
            .map(|(&u, v)| {
                ProcessTiming::new(
                    (work * (1.0 + p.imbalance_amplitude * u)).max(0.0),
                    (comm * (1.0 + p.noise_amplitude * v)).max(0.0),
                )
            })
            .collect();
        TimingWindow::new(per_process, StepSpan::single(step))
    }
}

/// Accumulated metrics of `steps_per_point` steps starting at `first_step`, for each core count.
pub fn sweep_ce(
    profile: &WorkloadProfile,
    core_counts: &[u32],
    first_step: u64,
    steps_per_point: u64,
) -> Result<Vec<(u32, EfficiencyMetrics)>> {
    if core_counts.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one core count".into()));
    }
    if steps_per_point < 1 {
        return Err(Error::InvalidInput("sweep needs at least one step per point".into()));
    }
    core_counts
        .iter()
        .map(|&cores| {
            let mut generator = WorkloadGenerator::new(profile.clone())?;
            let mut window = generator.generate_step(first_step, cores)?;
            for step in first_step + 1..first_step + steps_per_point {
                window = merge_windows(&window, &generator.generate_step(step, cores)?)?;
            }
            Ok((cores, compute_metrics(&window)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(kappa: f64, alpha: f64) -> WorkloadProfile {
        WorkloadProfile {
            comm_per_iteration: kappa,
            comm_log_slope: alpha,
            imbalance_amplitude: 0.0,
            noise_amplitude: 0.0,
            ..WorkloadProfile::preset(Scheme::Implicit)
        }
    }

    #[test]
    fn heaviside_schedule() {
        let s = IterationSchedule::heaviside_ramp();
        assert_eq!(iterations_at(&s, 10), 20);
        assert_eq!(iterations_at(&s, 49), 20);
        assert_eq!(iterations_at(&s, 50), 60);
        assert_eq!(iterations_at(&s, 80), 90);
        assert_eq!(iterations_at(&IterationSchedule::Constant { iterations: 7 }, 1000), 7);
    }

    #[test]
    fn communication_free_limit_is_perfect() {
        let mut g = WorkloadGenerator::new(flat(0.0, 0.0)).unwrap();
        let w = g.generate_step(3, 16).unwrap();
        assert!(w.per_process().windows(2).all(|p| p[0] == p[1]));
        let m = compute_metrics(&w).unwrap();
        assert_eq!((m.ce, m.lb), (1.0, 1.0));
    }

    #[test]
    fn doubling_cores_halves_work() {
        let mut g = WorkloadGenerator::new(flat(1e-3, 0.05)).unwrap();
        let a = g.generate_step(0, 24).unwrap();
        let b = g.generate_step(0, 48).unwrap();
        for (x, y) in a.per_process().iter().zip(b.per_process()) {
            assert_eq!(x.work_time, 2.0 * y.work_time);
        }
    }

    #[test]
    fn max_comm_independent_of_cores_without_log_growth() {
        let mut g = WorkloadGenerator::new(flat(1e-3, 0.0)).unwrap();
        let a = compute_metrics(&g.generate_step(4, 30).unwrap()).unwrap();
        let b = compute_metrics(&g.generate_step(4, 60).unwrap()).unwrap();
        assert_eq!(a.max_comm, b.max_comm);
    }

    #[test]
    fn imbalance_fixed_within_partition_and_redrawn_after() {
        let mut p = WorkloadProfile::preset(Scheme::Implicit);
        p.noise_amplitude = 0.0;
        let mut g = WorkloadGenerator::new(p).unwrap();
        let a = g.generate_step(0, 20).unwrap();
        let b = g.generate_step(1, 20).unwrap();
        let works = |w: &TimingWindow| w.per_process().iter().map(|t| t.work_time).collect::<Vec<_>>();
        assert_eq!(works(&a), works(&b));
        assert_eq!(g.epoch(), 0);
        g.generate_step(2, 40).unwrap();
        let c = g.generate_step(3, 20).unwrap();
        assert_eq!(g.epoch(), 2);
        assert_ne!(works(&a), works(&c));
    }

    #[test]
    fn same_seed_same_stream() {
        let p = WorkloadProfile::preset(Scheme::Explicit);
        let mut g1 = WorkloadGenerator::new(p.clone()).unwrap();
        let mut g2 = WorkloadGenerator::new(p.clone()).unwrap();
        for step in 0..20 {
            let cores = if step < 10 { 56 } else { 120 };
            assert_eq!(g1.generate_step(step, cores).unwrap(), g2.generate_step(step, cores).unwrap());
        }
        let mut g3 = WorkloadGenerator::new(WorkloadProfile { rng_seed: 99, ..p }).unwrap();
        assert_ne!(g1.generate_step(20, 56).unwrap(), g3.generate_step(20, 56).unwrap());
    }

    #[test]
    fn noise_draws_have_zero_mean() {
        let mut rng = stream_rng(7, STREAM_NOISE, 0, 0);
        let n = 20_000usize;
        let mean = unit_draws(&mut rng, n).sum::<f64>() / n as f64;
        let sigma = 1.0 / 3.0_f64.sqrt();
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn restart_cost_model() {
        let mut p = WorkloadProfile::preset(Scheme::Implicit);
        p.restart = RestartCostModel { fixed_s: 0.0, size_core_s: 0.0 };
        assert_eq!(restart_cost(&p, 15, 30), 0.0);
        p.restart = RestartCostModel { fixed_s: 1.0, size_core_s: 100.0 };
        assert_eq!(restart_cost(&p, 50, 90), 3.0);
        assert_eq!(restart_cost(&p, 90, 50), restart_cost(&p, 50, 90));
    }

    #[test]
    fn single_core_ce_without_log_growth() {
        let kappa = 2e-3;
        let p = flat(kappa, 0.0);
        let m = sweep_ce(&p, &[1], 0, 5).unwrap()[0].1;
        let comm = kappa * 20.0;
        let expected = p.total_work_per_step / (p.total_work_per_step + comm);
        assert!((m.ce - expected).abs() < 1e-12);
    }

    #[test]
    fn sweep_without_communication_is_flat() {
        let sweep = sweep_ce(&flat(0.0, 0.05), &[1, 15, 100, 240], 0, 10).unwrap();
        assert!(sweep.iter().all(|(_, m)| m.ce == 1.0));
    }

    #[test]
    fn calibration_hits_reference_ce() {
        for scheme in [Scheme::Implicit, Scheme::Explicit] {
            let p = WorkloadProfile::preset(scheme).noiseless();
            let target = match scheme {
                Scheme::Implicit => IMPLICIT_CE_AT_CALIBRATION,
                Scheme::Explicit => EXPLICIT_CE_AT_CALIBRATION,
            };
            let m = sweep_ce(&p, &[CALIBRATION_CORES], 0, 10).unwrap()[0].1;
            assert!((m.ce - target).abs() < 1e-12, "{scheme}: {}", m.ce);
        }
    }

    #[test]
    fn implicit_noiseless_curve_strictly_decreasing() {
        let p = WorkloadProfile::preset(Scheme::Implicit).noiseless();
        let cores: Vec<u32> = (15..=240).collect();
        let sweep = sweep_ce(&p, &cores, 0, 1).unwrap();
        for pair in sweep.windows(2) {
            assert!(pair[1].1.ce < pair[0].1.ce);
            // Neighbouring counts stay close: no jumps in the curve.
            assert!(pair[0].1.ce - pair[1].1.ce < 2e-3);
        }
    }

    #[test]
    fn validation_rejects_out_of_range_parameters() {
        let base = WorkloadProfile::preset(Scheme::Implicit);
        for bad in [
            WorkloadProfile { total_work_per_step: 0.0, ..base.clone() },
            WorkloadProfile { comm_per_iteration: -1.0, ..base.clone() },
            WorkloadProfile { imbalance_amplitude: 0.6, ..base.clone() },
            WorkloadProfile { noise_amplitude: -0.1, ..base.clone() },
            WorkloadProfile { iterations: IterationSchedule::Constant { iterations: 0 }, ..base.clone() },
        ] {
            assert!(WorkloadGenerator::new(bad).is_err());
        }
    }
}
