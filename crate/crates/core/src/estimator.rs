//! Closed-form target-core estimation.
//!
//! Assuming work scales perfectly with the core count, the maximum
//! communication time stays put, and the elapsed time is close to
//! `max(work) + max(comm)`, the core count that reaches a target
//! communication efficiency `ce*` from a measurement `ce` on `n` cores is
//!
//! ```text
//! n* = n (1 - 1/ce*) / (1 - 1/ce)
//! ```
//!
//! and, inverted, the efficiency expected on `n*` cores is
//! `[1 - (n*/n)(1 - 1/ce)]^-1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured efficiencies at or above one are pulled down to this value before estimating.
pub const CE_CEILING: f64 = 1.0 - 1e-9;

/// Closed interval of acceptable communication efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRange {
    ce_min: f64,
    ce_max: f64,
}

impl TargetRange {
    pub fn new(ce_min: f64, ce_max: f64) -> Result<Self> {
        if !(ce_min > 0.0 && ce_min < ce_max && ce_max < 1.0) {
            return Err(Error::InvalidInput(format!(
                "target range [{ce_min}, {ce_max}] must satisfy 0 < min < max < 1"
            )));
        }
        Ok(Self { ce_min, ce_max })
    }

    pub fn ce_min(&self) -> f64 {
        self.ce_min
    }

    pub fn ce_max(&self) -> f64 {
        self.ce_max
    }

    /// Closed on both ends.
    pub fn contains(&self, ce: f64) -> bool {
        ce >= self.ce_min && ce <= self.ce_max
    }

    pub fn target(&self) -> f64 {
        target_ce(self)
    }
}

/// Bounds applied to a raw estimate before it becomes a resource request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampPolicy {
    pub rate_of_change: f64,
    pub min_cores: u32,
    pub max_cores: u32,
    pub node_granularity: u32,
    pub snap_to_nodes: bool,
}

impl ClampPolicy {
    pub fn new(rate_of_change: f64, min_cores: u32, max_cores: u32) -> Result<Self> {
        let policy = Self {
            rate_of_change,
            min_cores,
            max_cores,
            node_granularity: 1,
            snap_to_nodes: false,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn with_node_snapping(mut self, node_granularity: u32) -> Result<Self> {
        self.node_granularity = node_granularity;
        self.snap_to_nodes = true;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_of_change > 1.0 && self.rate_of_change.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "rate of change must be a finite value above 1, got {}",
                self.rate_of_change
            )));
        }
        if self.min_cores < 1 || self.min_cores > self.max_cores {
            return Err(Error::InvalidInput(format!(
                "core bounds [{}, {}] must satisfy 1 <= min <= max",
                self.min_cores, self.max_cores
            )));
        }
        if self.node_granularity < 1 {
            return Err(Error::InvalidInput("node granularity must be at least 1".into()));
        }
        Ok(())
    }

    /// Inclusive rate-of-change bounds around `n_current`, rounded outward.
    pub fn rate_bounds(&self, n_current: u32) -> (u32, u32) {
        let n = f64::from(n_current);
        let lo = (n / self.rate_of_change).floor().max(1.0);
        let hi = (n * self.rate_of_change).ceil().min(f64::from(u32::MAX));
        (lo as u32, hi as u32)
    }
}

/// Midpoint of the target range.
pub fn target_ce(range: &TargetRange) -> f64 {
    0.5 * (range.ce_min + range.ce_max)
}

fn check_efficiency(name: &str, ce: f64) -> Result<()> {
    if ce.is_nan() || ce <= 0.0 {
        return Err(Error::InvalidInput(format!("{name} must be positive, got {ce}")));
    }
    if ce >= 1.0 {
        return Err(Error::Singularity(format!(
            "{name} = {ce}; the factor 1 - 1/CE vanishes at CE >= 1"
        )));
    }
    Ok(())
}

/// Raw (un-rounded, un-clamped) core count expected to reach `ce_target`.
pub fn estimate_cores(n: u32, ce_measured: f64, ce_target: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidInput("core count must be at least 1".into()));
    }
    check_efficiency("measured CE", ce_measured)?;
    check_efficiency("target CE", ce_target)?;
    // Ratio first so that ce_measured == ce_target returns n exactly.
    let ratio = (1.0 - 1.0 / ce_target) / (1.0 - 1.0 / ce_measured);
    Ok(f64::from(n) * ratio)
}

/// Efficiency the model predicts on `n_star` cores given `ce_measured` on `n`.
pub fn predict_ce(n: u32, ce_measured: f64, n_star: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidInput("core count must be at least 1".into()));
    }
    if !(n_star >= 1.0 && n_star.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "target core count must be at least 1, got {n_star}"
        )));
    }
    check_efficiency("measured CE", ce_measured)?;
    if n_star == f64::from(n) {
        return Ok(ce_measured);
    }
    let denominator = 1.0 - (n_star / f64::from(n)) * (1.0 - 1.0 / ce_measured);
    if denominator <= 0.0 {
        return Err(Error::OutOfModel(format!(
            "denominator {denominator} is not positive"
        )));
    }
    Ok(1.0 / denominator)
}

/// Pulls a measured CE into the estimator's domain. The flag reports whether it moved.
pub fn sanitize_measured_ce(ce: f64) -> (f64, bool) {
    if ce >= 1.0 {
        (CE_CEILING, true)
    } else {
        (ce, false)
    }
}

/// Rounds a raw estimate and applies, in order: the rate clamp around `n_current`,
/// the `[min_cores, max_cores]` clamp, and optional node snapping.
pub fn clamp_and_round(n_estimated: f64, n_current: u32, policy: &ClampPolicy) -> u32 {
    let rounded = if n_estimated.is_finite() {
        n_estimated.round().clamp(1.0, f64::from(u32::MAX)) as u32
    } else {
        u32::MAX
    };

    let (rate_lo, rate_hi) = policy.rate_bounds(n_current);
    let rate_clamped = rounded.clamp(rate_lo, rate_hi);
    let lo = rate_lo.max(policy.min_cores);
    let hi = rate_hi.min(policy.max_cores);
    let mut result = rate_clamped.clamp(policy.min_cores, policy.max_cores);

    if policy.snap_to_nodes && policy.node_granularity > 1 {
        let g = policy.node_granularity;
        let down = result / g * g;
        let up = result.div_ceil(g).saturating_mul(g);
        if down >= lo.max(1) && down <= hi {
            result = down;
        } else if up >= lo && up <= hi {
            result = up;
        }
    }
    result.max(1)
}
