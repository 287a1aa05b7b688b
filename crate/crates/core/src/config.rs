//! Scenario files.
//!
//! A scenario is a sectioned key-value document (TOML) with units spelled out
//! in the key names:
//!
//! ```toml
//! name = "test1"
//!
//! [controller]
//! ce_min = 0.9
//! ce_max = 0.92
//! averaging_period_steps = 10
//! rate_of_change = 2.0
//! min_cores = 15
//! max_cores = 240
//! initial_cores = 15
//! starting_step = 5
//! total_steps = 150
//!
//! [workload]
//! preset = "implicit"
//! seed = 1
//!
//! [workload.iterations]
//! kind = "constant"
//! iterations = 20
//!
//! [cluster]
//! cores_per_node = 15
//! total_nodes = 16
//! grow_latency_s = 2.0
//! ```
//!
//! Workload keys left out fall back to the preset's calibration.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::estimator::{ClampPolicy, TargetRange};
use crate::scheduler::{ClusterModel, GrowLatency};
use crate::trace::DEFAULT_CONVERGENCE_WINDOWS;
use crate::workload::{IterationSchedule, RestartCostModel, Scheme, WorkloadProfile};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    description: Option<String>,
    controller: RawController,
    #[serde(default)]
    workload: RawWorkload,
    #[serde(default)]
    cluster: RawCluster,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    ce_min: f64,
    ce_max: f64,
    averaging_period_steps: u64,
    rate_of_change: f64,
    #[serde(default = "default_min_cores")]
    min_cores: u32,
    #[serde(default = "default_max_cores")]
    max_cores: u32,
    initial_cores: u32,
    starting_step: u64,
    total_steps: u64,
    #[serde(default)]
    snap_to_nodes: bool,
    #[serde(default = "default_convergence_windows")]
    convergence_windows: usize,
}

fn default_min_cores() -> u32 {
    15
}

fn default_max_cores() -> u32 {
    240
}

fn default_convergence_windows() -> usize {
    DEFAULT_CONVERGENCE_WINDOWS
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    preset: Option<Scheme>,
    total_work_per_step_core_s: Option<f64>,
    comm_per_iteration_s: Option<f64>,
    comm_log_slope: Option<f64>,
    comm_ref_cores: Option<u32>,
    imbalance_amplitude: Option<f64>,
    noise_amplitude: Option<f64>,
    seed: Option<u64>,
    restart_fixed_s: Option<f64>,
    restart_size_core_s: Option<f64>,
    iterations: Option<IterationSchedule>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCluster {
    cores_per_node: Option<u32>,
    total_nodes: Option<u32>,
    grow_latency_s: Option<f64>,
    grow_latency_min_s: Option<f64>,
    grow_latency_max_s: Option<f64>,
    contention_probability: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    trace: Option<PathBuf>,
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputPaths {
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: Option<String>,
    pub controller: ControllerConfig,
    pub workload: WorkloadProfile,
    pub cluster: ClusterModel,
    pub convergence_windows: usize,
    pub output: OutputPaths,
}

fn ensure(ok: bool, path: &str, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, message()))
    }
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml_str(&text)?;
        if config.name.is_empty() {
            config.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start].lines().count().max(1);
                    format!("line {line}")
                })
                .unwrap_or_else(|| "<document>".into());
            Error::config(location, message)
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawScenario) -> Result<Self> {
        let c = &raw.controller;
        ensure(c.ce_min > 0.0 && c.ce_min < 1.0, "controller.ce_min", || {
            format!("{} must lie in (0, 1)", c.ce_min)
        })?;
        ensure(c.ce_max > c.ce_min && c.ce_max < 1.0, "controller.ce_max", || {
            format!("{} must lie in (ce_min, 1)", c.ce_max)
        })?;
        ensure(c.averaging_period_steps >= 1, "controller.averaging_period_steps", || {
            "must be at least 1".into()
        })?;
        ensure(
            c.rate_of_change > 1.0 && c.rate_of_change.is_finite(),
            "controller.rate_of_change",
            || format!("{} must be above 1", c.rate_of_change),
        )?;
        ensure(c.min_cores >= 1, "controller.min_cores", || "must be at least 1".into())?;
        ensure(c.max_cores >= c.min_cores, "controller.max_cores", || {
            format!("{} is below min_cores {}", c.max_cores, c.min_cores)
        })?;
        ensure(
            (c.min_cores..=c.max_cores).contains(&c.initial_cores),
            "controller.initial_cores",
            || format!("{} outside [{}, {}]", c.initial_cores, c.min_cores, c.max_cores),
        )?;

        let cluster = build_cluster(&raw.cluster)?;
        ensure(c.max_cores <= cluster.capacity(), "controller.max_cores", || {
            format!("{} exceeds cluster capacity {}", c.max_cores, cluster.capacity())
        })?;

        let mut clamp = ClampPolicy {
            rate_of_change: c.rate_of_change,
            min_cores: c.min_cores,
            max_cores: c.max_cores,
            node_granularity: 1,
            snap_to_nodes: false,
        };
        if c.snap_to_nodes {
            clamp.node_granularity = cluster.cores_per_node;
            clamp.snap_to_nodes = true;
        }
        let controller = ControllerConfig {
            target_range: TargetRange::new(c.ce_min, c.ce_max)
                .map_err(|e| Error::config("controller.ce_min", e.to_string()))?,
            averaging_period: c.averaging_period_steps,
            clamp,
            initial_cores: c.initial_cores,
            starting_step: c.starting_step,
            total_steps: c.total_steps,
        };

        Ok(Self {
            name: raw.name.unwrap_or_default(),
            description: raw.description,
            controller,
            workload: build_workload(&raw.workload)?,
            cluster,
            convergence_windows: c.convergence_windows,
            output: OutputPaths {
                trace: raw.output.trace,
                summary: raw.output.summary,
            },
        })
    }

    /// Re-seeds the workload and cluster streams.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.workload.rng_seed = seed;
        self.cluster.rng_seed = seed;
        self
    }
}

fn build_workload(raw: &RawWorkload) -> Result<WorkloadProfile> {
    let mut p = WorkloadProfile::preset(raw.preset.unwrap_or(Scheme::Implicit));
    if let Some(v) = raw.total_work_per_step_core_s {
        ensure(v > 0.0 && v.is_finite(), "workload.total_work_per_step_core_s", || {
            format!("{v} must be positive")
        })?;
        p.total_work_per_step = v;
    }
    if let Some(v) = raw.comm_per_iteration_s {
        ensure(v >= 0.0 && v.is_finite(), "workload.comm_per_iteration_s", || {
            format!("{v} must be non-negative")
        })?;
        p.comm_per_iteration = v;
    }
    if let Some(v) = raw.comm_log_slope {
        ensure(v.is_finite(), "workload.comm_log_slope", || format!("{v} must be finite"))?;
        p.comm_log_slope = v;
    }
    if let Some(v) = raw.comm_ref_cores {
        ensure(v >= 1, "workload.comm_ref_cores", || "must be at least 1".into())?;
        p.comm_ref_cores = v;
    }
    if let Some(v) = raw.imbalance_amplitude {
        ensure((0.0..=0.5).contains(&v), "workload.imbalance_amplitude", || {
            format!("{v} must lie in [0, 0.5]")
        })?;
        p.imbalance_amplitude = v;
    }
    if let Some(v) = raw.noise_amplitude {
        ensure((0.0..=0.5).contains(&v), "workload.noise_amplitude", || {
            format!("{v} must lie in [0, 0.5]")
        })?;
        p.noise_amplitude = v;
    }
    if let Some(v) = raw.seed {
        p.rng_seed = v;
    }
    let mut restart = RestartCostModel::default();
    if let Some(v) = raw.restart_fixed_s {
        ensure(v >= 0.0, "workload.restart_fixed_s", || format!("{v} must be non-negative"))?;
        restart.fixed_s = v;
    }
    if let Some(v) = raw.restart_size_core_s {
        ensure(v >= 0.0, "workload.restart_size_core_s", || format!("{v} must be non-negative"))?;
        restart.size_core_s = v;
    }
    p.restart = restart;
    if let Some(schedule) = raw.iterations {
        p.iterations = schedule;
    }
    p.validate()
        .map_err(|e| Error::config("workload.iterations", e.to_string()))?;
    Ok(p)
}

fn build_cluster(raw: &RawCluster) -> Result<ClusterModel> {
    let mut cluster = ClusterModel::default();
    if let Some(v) = raw.cores_per_node {
        ensure(v >= 1, "cluster.cores_per_node", || "must be at least 1".into())?;
        cluster.cores_per_node = v;
    }
    if let Some(v) = raw.total_nodes {
        ensure(v >= 1, "cluster.total_nodes", || "must be at least 1".into())?;
        cluster.total_nodes = v;
    }
    match (raw.grow_latency_s, raw.grow_latency_min_s, raw.grow_latency_max_s) {
        (None, None, None) => {}
        (Some(s), None, None) => {
            ensure(s >= 0.0 && s.is_finite(), "cluster.grow_latency_s", || {
                format!("{s} must be non-negative")
            })?;
            cluster.grow_latency = GrowLatency::Fixed { seconds: s };
        }
        (None, Some(lo), Some(hi)) => {
            ensure(lo >= 0.0, "cluster.grow_latency_min_s", || format!("{lo} must be non-negative"))?;
            ensure(hi >= lo && hi.is_finite(), "cluster.grow_latency_max_s", || {
                format!("{hi} must be at least grow_latency_min_s")
            })?;
            cluster.grow_latency = GrowLatency::Uniform { min_s: lo, max_s: hi };
        }
        _ => {
            return Err(Error::config(
                "cluster.grow_latency_s",
                "give either grow_latency_s or both grow_latency_min_s and grow_latency_max_s",
            ))
        }
    }
    if let Some(v) = raw.contention_probability {
        ensure((0.0..1.0).contains(&v), "cluster.contention_probability", || {
            format!("{v} must lie in [0, 1)")
        })?;
        cluster.contention_probability = v;
    }
    if let Some(v) = raw.seed {
        cluster.rng_seed = v;
    }
    Ok(cluster)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [controller]
        ce_min = 0.9
        ce_max = 0.92
        averaging_period_steps = 10
        rate_of_change = 2.0
        initial_cores = 15
        starting_step = 5
        total_steps = 100
    "#;

    fn config_error_path(text: &str) -> String {
        match ScenarioConfig::from_toml_str(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_scenario_uses_defaults() {
        let c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.controller.clamp.min_cores, 15);
        assert_eq!(c.controller.clamp.max_cores, 240);
        assert_eq!(c.cluster, ClusterModel::default());
        assert_eq!(c.workload, WorkloadProfile::preset(Scheme::Implicit));
        assert_eq!(c.convergence_windows, 3);
        assert!((c.controller.target_range.target() - 0.91).abs() < 1e-15);
    }

    #[test]
    fn overrides_apply() {
        let text = format!(
            "{MINIMAL}\n[workload]\npreset = \"explicit\"\nnoise_amplitude = 0.1\nseed = 9\n\
             [workload.iterations]\nkind = \"heaviside_ramp\"\nplateau = 20\njump_step = 50\noffset = 10\n\
             [cluster]\ngrow_latency_min_s = 1.0\ngrow_latency_max_s = 3.0\nseed = 4\n"
        );
        let c = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.workload.scheme, Scheme::Explicit);
        assert_eq!(c.workload.noise_amplitude, 0.1);
        assert_eq!(c.workload.rng_seed, 9);
        assert_eq!(c.workload.iterations, IterationSchedule::heaviside_ramp());
        assert_eq!(c.cluster.grow_latency, GrowLatency::Uniform { min_s: 1.0, max_s: 3.0 });
        let c = c.with_seed(77);
        assert_eq!((c.workload.rng_seed, c.cluster.rng_seed), (77, 77));
    }

    #[test]
    fn errors_carry_field_paths() {
        assert_eq!(config_error_path(&MINIMAL.replace("ce_max = 0.92", "ce_max = 0.85")), "controller.ce_max");
        assert_eq!(
            config_error_path(&MINIMAL.replace("rate_of_change = 2.0", "rate_of_change = 1.0")),
            "controller.rate_of_change"
        );
        assert_eq!(
            config_error_path(&MINIMAL.replace("initial_cores = 15", "initial_cores = 10")),
            "controller.initial_cores"
        );
        assert_eq!(
            config_error_path(&format!("{MINIMAL}\n[workload]\nnoise_amplitude = 0.9\n")),
            "workload.noise_amplitude"
        );
        assert_eq!(
            config_error_path(&format!("{MINIMAL}\n[cluster]\ntotal_nodes = 4\n")),
            "controller.max_cores"
        );
        assert_eq!(
            config_error_path(&format!("{MINIMAL}\n[cluster]\ngrow_latency_s = 1.0\ngrow_latency_min_s = 1.0\n")),
            "cluster.grow_latency_s"
        );
    }

    #[test]
    fn unknown_keys_are_reported() {
        let err = ScenarioConfig::from_toml_str(&format!("{MINIMAL}\n[workload]\nnoize = 0.1\n")).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("noize"), "{text}");
        assert!(text.contains("line"), "{text}");
    }

    #[test]
    fn snapping_uses_node_size() {
        let text = MINIMAL.replace("total_steps = 100", "total_steps = 100\nsnap_to_nodes = true");
        let c = ScenarioConfig::from_toml_str(&text).unwrap();
        assert!(c.controller.clamp.snap_to_nodes);
        assert_eq!(c.controller.clamp.node_granularity, 15);
    }
}
