//! Resource-manager model for a malleable job.
//!
//! Shrinking releases cores at once. Growing is a job extension that becomes
//! usable after a provisioning latency, optionally stretched by a random
//! contention delay. Requests are never denied and at most one is pending.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowLatency {
    Fixed { seconds: f64 },
    Uniform { min_s: f64, max_s: f64 },
}

impl GrowLatency {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            GrowLatency::Fixed { seconds } => seconds,
            GrowLatency::Uniform { min_s, max_s } if max_s > min_s => rng.random_range(min_s..=max_s),
            GrowLatency::Uniform { min_s, .. } => min_s,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            GrowLatency::Fixed { seconds } => seconds >= 0.0 && seconds.is_finite(),
            GrowLatency::Uniform { min_s, max_s } => min_s >= 0.0 && max_s >= min_s && max_s.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid grow latency {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub cores_per_node: u32,
    pub total_nodes: u32,
    pub grow_latency: GrowLatency,
    pub contention_probability: f64,
    pub rng_seed: u64,
}

impl Default for ClusterModel {
    /// Sixteen 15-core nodes; growing takes 2 s, two steps of the 15-core baseline.
    fn default() -> Self {
        Self {
            cores_per_node: 15,
            total_nodes: 16,
            grow_latency: GrowLatency::Fixed { seconds: 2.0 },
            contention_probability: 0.0,
            rng_seed: 0,
        }
    }
}

impl ClusterModel {
    pub fn capacity(&self) -> u32 {
        self.cores_per_node.saturating_mul(self.total_nodes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cores_per_node < 1 || self.total_nodes < 1 {
            return Err(Error::InvalidInput(
                "cluster needs at least one node of at least one core".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.contention_probability) {
            return Err(Error::InvalidInput(format!(
                "contention probability {} must lie in [0, 1)",
                self.contention_probability
            )));
        }
        self.grow_latency.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendingGrant {
    pub requested_cores: u32,
    pub requested_at: f64,
    pub ready_at: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    pub allocated_cores: u32,
    pub pending: Option<PendingGrant>,
}

impl AllocationState {
    pub fn allocated_nodes(&self, cluster: &ClusterModel) -> u32 {
        self.allocated_cores.div_ceil(cluster.cores_per_node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrantEvent {
    pub cores: u32,
    pub requested_at: f64,
    pub granted_at: f64,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    cluster: ClusterModel,
    state: AllocationState,
    rng: ChaCha8Rng,
}

impl Scheduler {
    pub fn new(cluster: ClusterModel, initial_cores: u32) -> Result<Self> {
        cluster.validate()?;
        if initial_cores < 1 {
            return Err(Error::InvalidInput("a running job holds at least one core".into()));
        }
        if initial_cores > cluster.capacity() {
            return Err(Error::Capacity {
                requested: initial_cores,
                capacity: cluster.capacity(),
            });
        }
        let rng = ChaCha8Rng::seed_from_u64(cluster.rng_seed);
        Ok(Self {
            cluster,
            state: AllocationState {
                allocated_cores: initial_cores,
                pending: None,
            },
            rng,
        })
    }

    pub fn cluster(&self) -> &ClusterModel {
        &self.cluster
    }

    pub fn state(&self) -> &AllocationState {
        &self.state
    }

    pub fn request_resize(&mut self, target_cores: u32, now: f64) -> Result<()> {
        if target_cores < 1 {
            return Err(Error::InvalidInput("cannot resize to zero cores".into()));
        }
        if target_cores > self.cluster.capacity() {
            return Err(Error::Capacity {
                requested: target_cores,
                capacity: self.cluster.capacity(),
            });
        }
        if let Some(p) = self.state.pending {
            return Err(Error::Protocol(format!(
                "request for {target_cores} cores while {} are still pending",
                p.requested_cores
            )));
        }
        if target_cores == self.state.allocated_cores {
            return Err(Error::InvalidInput(format!(
                "job already holds {target_cores} cores"
            )));
        }

        let ready_at = if target_cores < self.state.allocated_cores {
            now
        } else {
            let mut delay = self.cluster.grow_latency.sample(&mut self.rng);
            if self.cluster.contention_probability > 0.0
                && self.rng.random_bool(self.cluster.contention_probability)
            {
                delay += self.cluster.grow_latency.sample(&mut self.rng);
            }
            now + delay
        };
        self.state.pending = Some(PendingGrant {
            requested_cores: target_cores,
            requested_at: now,
            ready_at,
        });
        Ok(())
    }

    /// Delivers the pending grant once `now` reaches its ready time.
    pub fn poll(&mut self, now: f64) -> Option<GrantEvent> {
        let pending = self.state.pending?;
        if pending.ready_at > now {
            return None;
        }
        self.state.pending = None;
        self.state.allocated_cores = pending.requested_cores;
        Some(GrantEvent {
            cores: pending.requested_cores,
            requested_at: pending.requested_at,
            granted_at: now,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed(seconds: f64) -> ClusterModel {
        ClusterModel {
            grow_latency: GrowLatency::Fixed { seconds },
            ..ClusterModel::default()
        }
    }

    #[test]
    fn shrink_is_granted_immediately() {
        let mut s = Scheduler::new(fixed(5.0), 90).unwrap();
        s.request_resize(45, 12.5).unwrap();
        let g = s.poll(12.5).unwrap();
        assert_eq!((g.cores, g.requested_at, g.granted_at), (45, 12.5, 12.5));
        assert_eq!(s.state().allocated_cores, 45);
        assert_eq!(s.state().allocated_nodes(s.cluster()), 3);
    }

    #[test]
    fn grow_waits_for_latency() {
        let mut s = Scheduler::new(fixed(5.0), 15).unwrap();
        s.request_resize(30, 100.0).unwrap();
        assert_eq!(s.state().pending.unwrap().ready_at, 105.0);
        assert!(s.poll(104.9).is_none());
        assert_eq!(s.state().allocated_cores, 15);
        assert_eq!(s.poll(105.0).unwrap().cores, 30);
        assert!(s.poll(106.0).is_none(), "grants are delivered once");
    }

    #[test]
    fn poll_boundaries() {
        let mut s = Scheduler::new(fixed(10.0), 15).unwrap();
        assert!(s.poll(0.0).is_none());
        s.request_resize(30, 0.0).unwrap();
        assert!(s.poll(9.0).is_none());
        assert!(s.poll(10.0).is_some());
    }

    #[test]
    fn capacity_is_enforced() {
        let mut s = Scheduler::new(ClusterModel::default(), 15).unwrap();
        assert!(matches!(
            s.request_resize(241, 0.0),
            Err(Error::Capacity { requested: 241, capacity: 240 })
        ));
        assert!(Scheduler::new(ClusterModel::default(), 300).is_err());
    }

    #[test]
    fn one_request_at_a_time() {
        let mut s = Scheduler::new(fixed(1.0), 15).unwrap();
        s.request_resize(30, 0.0).unwrap();
        assert!(matches!(s.request_resize(60, 0.5), Err(Error::Protocol(_))));
    }

    #[test]
    fn contention_only_delays() {
        let cluster = ClusterModel {
            grow_latency: GrowLatency::Uniform { min_s: 1.0, max_s: 3.0 },
            contention_probability: 0.9,
            rng_seed: 11,
            ..ClusterModel::default()
        };
        let mut s = Scheduler::new(cluster, 15).unwrap();
        let mut now = 0.0;
        let mut cores = 15;
        for _ in 0..50 {
            cores = if cores == 15 { 30 } else { 15 };
            s.request_resize(cores, now).unwrap();
            let ready = s.state().pending.unwrap().ready_at;
            let wait = ready - now;
            if cores == 30 {
                assert!((1.0..=6.0).contains(&wait), "wait {wait}");
            } else {
                assert_eq!(wait, 0.0);
            }
            now = ready;
            assert_eq!(s.poll(now).unwrap().cores, cores);
        }
    }

    #[test]
    fn latency_draws_are_seeded() {
        let cluster = ClusterModel {
            grow_latency: GrowLatency::Uniform { min_s: 0.0, max_s: 10.0 },
            rng_seed: 5,
            ..ClusterModel::default()
        };
        let mut a = Scheduler::new(cluster.clone(), 15).unwrap();
        let mut b = Scheduler::new(cluster, 15).unwrap();
        a.request_resize(60, 0.0).unwrap();
        b.request_resize(60, 0.0).unwrap();
        assert_eq!(a.state().pending, b.state().pending);
    }

    #[test]
    fn invalid_cluster_rejected() {
        assert!(ClusterModel { contention_probability: 1.0, ..ClusterModel::default() }.validate().is_err());
        assert!(ClusterModel { cores_per_node: 0, ..ClusterModel::default() }.validate().is_err());
        assert!(fixed(-1.0).validate().is_err());
    }
}
