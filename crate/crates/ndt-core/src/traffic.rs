//! Traffic description: packet-level distributions, phased schedules with
//! abrupt distribution changes, and flow generation.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::topology::TopologyGraph;

/// Rate multiplier applied to flows generated in a congestion-flagged phase.
pub const CONGESTION_RATE_FACTOR: f64 = 1.5;
/// Every generated flow stays active for this long.
pub const DEFAULT_FLOW_DURATION_S: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// Continuous uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
    Exponential { mean: f64 },
    Poisson { mean: f64 },
    Deterministic { value: f64 },
}

#[derive(Debug, thiserror::Error)]
pub enum TrafficError {
    #[error("uniform bounds must satisfy 0 < low < high, got [{low}, {high}]")]
    BadUniform { low: f64, high: f64 },
    #[error("{kind} parameter must be positive and finite, got {value}")]
    BadParam { kind: &'static str, value: f64 },
    #[error("schedule has no phases")]
    EmptySchedule,
    #[error("phase {0} has non-positive duration")]
    BadPhaseDuration(usize),
    #[error("flow rate must be positive, got {0}")]
    BadFlowRate(f64),
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            DistributionSpec::Uniform { low, high } => {
                if !(ok(low) && ok(high) && low < high) {
                    return Err(TrafficError::BadUniform { low, high });
                }
            }
            DistributionSpec::Exponential { mean } if !ok(mean) => {
                return Err(TrafficError::BadParam { kind: "exponential mean", value: mean });
            }
            DistributionSpec::Poisson { mean } if !ok(mean) => {
                return Err(TrafficError::BadParam { kind: "poisson mean", value: mean });
            }
            DistributionSpec::Deterministic { value } if !ok(value) => {
                return Err(TrafficError::BadParam { kind: "deterministic value", value });
            }
            _ => {}
        }
        Ok(())
    }

    /// Mean of the distribution, used for load budgeting in schedules.
    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Uniform { low, high } => 0.5 * (low + high),
            DistributionSpec::Exponential { mean } => mean,
            DistributionSpec::Poisson { mean } => mean,
            DistributionSpec::Deterministic { value } => value,
        }
    }

    /// Same distribution with every draw scaled by `factor`. A scaled Poisson
    /// keeps its Poisson parameter scaled instead, so draws stay integral.
    pub fn scaled(&self, factor: f64) -> DistributionSpec {
        match *self {
            DistributionSpec::Uniform { low, high } => {
                DistributionSpec::Uniform { low: low * factor, high: high * factor }
            }
            DistributionSpec::Exponential { mean } => {
                DistributionSpec::Exponential { mean: mean * factor }
            }
            DistributionSpec::Poisson { mean } => DistributionSpec::Poisson { mean: mean * factor },
            DistributionSpec::Deterministic { value } => {
                DistributionSpec::Deterministic { value: value * factor }
            }
        }
    }

    fn sample_raw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            DistributionSpec::Uniform { low, high } => {
                Uniform::new_inclusive(low, high).expect("validated bounds").sample(rng)
            }
            DistributionSpec::Exponential { mean } => {
                Exp::new(1.0 / mean).expect("validated mean").sample(rng)
            }
            DistributionSpec::Poisson { mean } => {
                Poisson::new(mean).expect("validated mean").sample(rng)
            }
            DistributionSpec::Deterministic { value } => value,
        }
    }
}

/// One draw in bytes (packet sizes) or packets/s (packet rates). Continuous
/// draws are rounded up and floored at 1.
pub fn sample_packet_size(spec: &DistributionSpec, rng: &mut impl Rng) -> u64 {
    (spec.sample_raw(rng).ceil().max(1.0)) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub packet_size: DistributionSpec,
    pub packet_rate: DistributionSpec,
    pub duration_s: f64,
    pub congestion: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSchedule {
    pub phases: Vec<PhaseSpec>,
}

impl ScenarioSchedule {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.phases.is_empty() {
            return Err(TrafficError::EmptySchedule);
        }
        for (i, p) in self.phases.iter().enumerate() {
            p.packet_size.validate()?;
            p.packet_rate.validate()?;
            if !(p.duration_s > 0.0 && p.duration_s.is_finite()) {
                return Err(TrafficError::BadPhaseDuration(i));
            }
        }
        Ok(())
    }

    pub fn total_duration_s(&self) -> f64 {
        self.phases.iter().map(|p| p.duration_s).sum()
    }

    /// Start time of phase `i`.
    pub fn phase_start_s(&self, i: usize) -> f64 {
        self.phases[..i].iter().map(|p| p.duration_s).sum()
    }

    /// Index of the phase containing time `t`. A time exactly on a boundary
    /// belongs to the later phase; times past the end clamp to the last one.
    pub fn phase_at(&self, t: f64) -> usize {
        let mut acc = 0.0;
        for (i, p) in self.phases.iter().enumerate() {
            acc += p.duration_s;
            if t < acc {
                return i;
            }
        }
        self.phases.len() - 1
    }
}

/// Four equal-duration phases that change the packet-size distribution
/// abruptly: exponential, then Poisson, then uniform, then constant-size with
/// congestion. Packet-rate distributions follow the same family per phase;
/// their parameters are budgeted so that on the default 8-node topology the
/// bottleneck runs at roughly 0.45/0.70/0.55 of capacity in the first three
/// phases, and the congestion flag on the last phase pushes offered load past
/// capacity via [`CONGESTION_RATE_FACTOR`].
pub fn default_drift_schedule(total_duration_s: f64) -> ScenarioSchedule {
    let d = total_duration_s / 4.0;
    let phase = |size, rate, congestion| PhaseSpec {
        packet_size: size,
        packet_rate: rate,
        duration_s: d,
        congestion,
    };
    ScenarioSchedule {
        phases: vec![
            phase(
                DistributionSpec::Exponential { mean: 1024.0 },
                DistributionSpec::Exponential { mean: 77.0 },
                false,
            ),
            phase(
                DistributionSpec::Poisson { mean: 2048.0 },
                DistributionSpec::Poisson { mean: 60.0 },
                false,
            ),
            phase(
                DistributionSpec::Uniform { low: 512.0, high: 1024.0 },
                DistributionSpec::Uniform { low: 110.0, high: 130.0 },
                false,
            ),
            phase(
                DistributionSpec::Deterministic { value: 512.0 },
                DistributionSpec::Deterministic { value: 273.0 },
                true,
            ),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub flow_id: u64,
    pub src: usize,
    pub dst: usize,
    pub start_s: f64,
    pub duration_s: f64,
    pub packet_size: DistributionSpec,
    pub packet_rate: DistributionSpec,
}

/// Generate `floor(total_duration * flows_per_second)` flows with evenly
/// spaced start times and origin/destination drawn uniformly over ordered
/// distinct node pairs. Each flow takes its distributions from the phase
/// containing its start time; congestion-flagged phases get their packet
/// rate pre-scaled by [`CONGESTION_RATE_FACTOR`].
pub fn generate_flows(
    g: &TopologyGraph,
    sched: &ScenarioSchedule,
    flows_per_second: f64,
    rng: &mut impl Rng,
) -> Result<Vec<FlowSpec>, TrafficError> {
    sched.validate()?;
    if !(flows_per_second > 0.0 && flows_per_second.is_finite()) {
        return Err(TrafficError::BadFlowRate(flows_per_second));
    }
    let n = g.node_count();
    let total = sched.total_duration_s();
    let count = (total * flows_per_second).floor() as u64;
    let mut flows = Vec::with_capacity(count as usize);
    for i in 0..count {
        let start = i as f64 / flows_per_second;
        let phase = &sched.phases[sched.phase_at(start)];
        let src = rng.random_range(0..n);
        let mut dst = rng.random_range(0..n - 1);
        if dst >= src {
            dst += 1;
        }
        let rate = if phase.congestion {
            phase.packet_rate.scaled(CONGESTION_RATE_FACTOR)
        } else {
            phase.packet_rate
        };
        flows.push(FlowSpec {
            flow_id: i,
            src,
            dst,
            start_s: start,
            duration_s: DEFAULT_FLOW_DURATION_S,
            packet_size: phase.packet_size,
            packet_rate: rate,
        });
    }
    Ok(flows)
}
