//! Message-delay, clock and processing-time models.
//!
//! All times are in global time units. The network only promises a bound on
//! the *mean* delay, so every delay model reports its exact mean and the
//! simulator checks it against the configured bound.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{ElectionError, Result};

/// Distribution of the time a message spends on a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DelayModel {
    Deterministic(f64),
    Exponential { mean: f64 },
    UniformRange { lo: f64, hi: f64 },
    /// Lossy link with retransmission: each attempt takes `unit` and
    /// succeeds with probability `p`.
    Retransmission { p: f64, unit: f64 },
}

impl DelayModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DelayModel::Deterministic(d) => d.is_finite() && d > 0.0,
            DelayModel::Exponential { mean } => mean.is_finite() && mean > 0.0,
            DelayModel::UniformRange { lo, hi } => lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi,
            DelayModel::Retransmission { p, unit } => {
                p > 0.0 && p <= 1.0 && unit.is_finite() && unit > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ElectionError::InvalidParameter(format!("invalid delay model {self}")))
        }
    }

    /// Scales the model so that its mean becomes `mean`, keeping its shape.
    /// Retransmission keeps `p` and rescales the attempt duration.
    pub fn with_mean(self, mean: f64) -> Self {
        match self {
            DelayModel::Deterministic(_) => DelayModel::Deterministic(mean),
            DelayModel::Exponential { .. } => DelayModel::Exponential { mean },
            DelayModel::UniformRange { lo, hi } => {
                let scale = mean / ((lo + hi) / 2.0);
                DelayModel::UniformRange {
                    lo: lo * scale,
                    hi: hi * scale,
                }
            }
            DelayModel::Retransmission { p, .. } => DelayModel::Retransmission { p, unit: mean * p },
        }
    }
}

impl fmt::Display for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DelayModel::Deterministic(d) => write!(f, "det:{d}"),
            DelayModel::Exponential { mean } => write!(f, "exp:{mean}"),
            DelayModel::UniformRange { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            DelayModel::Retransmission { p, unit } => write!(f, "retx:{p}:{unit}"),
        }
    }
}

impl FromStr for DelayModel {
    type Err = ElectionError;

    /// Accepts `det:D`, `exp:MEAN`, `uniform:LO:HI` and `retx:P[:UNIT]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || ElectionError::InvalidParameter(format!("cannot parse delay model '{s}'"));
        let mut parts = s.split(':');
        let kind = parts.next().ok_or_else(bad)?;
        let nums = parts
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let model = match (kind.trim(), nums.as_slice()) {
            ("det" | "deterministic", [d]) => DelayModel::Deterministic(*d),
            ("exp" | "exponential", [mean]) => DelayModel::Exponential { mean: *mean },
            ("uniform", [lo, hi]) => DelayModel::UniformRange { lo: *lo, hi: *hi },
            ("retx" | "retransmission", [p]) => DelayModel::Retransmission { p: *p, unit: 1.0 },
            ("retx" | "retransmission", [p, unit]) => DelayModel::Retransmission { p: *p, unit: *unit },
            _ => return Err(bad()),
        };
        model.validate()?;
        Ok(model)
    }
}

/// Exact mean of the delay model.
pub fn mean_delay(model: &DelayModel) -> Result<f64> {
    model.validate()?;
    Ok(match *model {
        DelayModel::Deterministic(d) => d,
        DelayModel::Exponential { mean } => mean,
        DelayModel::UniformRange { lo, hi } => (lo + hi) / 2.0,
        DelayModel::Retransmission { p, unit } => unit / p,
    })
}

/// Draws one strictly positive delay. The model must already be validated.
pub fn sample_delay<R: Rng + ?Sized>(model: &DelayModel, rng: &mut R) -> f64 {
    match *model {
        DelayModel::Deterministic(d) => d,
        DelayModel::Exponential { mean } => {
            let exp = Exp::new(1.0 / mean).expect("validated mean");
            loop {
                let x = exp.sample(rng);
                if x > 0.0 {
                    return x;
                }
            }
        }
        DelayModel::UniformRange { lo, hi } => {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        }
        DelayModel::Retransmission { p, unit } => {
            // failed attempts before the first success
            let failures = if p >= 1.0 {
                0
            } else {
                Geometric::new(p).expect("validated p").sample(rng)
            };
            (failures as f64 + 1.0) * unit
        }
    }
}

/// Markov-inequality lower bound on the probability that a message with mean
/// delay at most `delta` has arrived within time `t`.
pub fn delivery_probability_lower_bound(delta: f64, t: f64) -> f64 {
    (1.0 - delta / t).max(0.0)
}

/// How per-node clock speeds are chosen for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClockAssignment {
    Constant(f64),
    UniformPerNode,
}

/// Bounded-speed local clocks. A node with speed `s` ticks every `1/s`
/// global time units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    pub s_low: f64,
    pub s_high: f64,
    pub assignment: ClockAssignment,
}

impl ClockModel {
    pub fn unit() -> Self {
        ClockModel {
            s_low: 1.0,
            s_high: 1.0,
            assignment: ClockAssignment::Constant(1.0),
        }
    }

    /// Constant speed `s_low` when the bounds coincide, per-node uniform
    /// draws otherwise.
    pub fn bounded(s_low: f64, s_high: f64) -> Self {
        let assignment = if s_low == s_high {
            ClockAssignment::Constant(s_low)
        } else {
            ClockAssignment::UniformPerNode
        };
        ClockModel {
            s_low,
            s_high,
            assignment,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bounds_ok = self.s_low.is_finite() && self.s_high.is_finite() && self.s_low > 0.0 && self.s_low <= self.s_high;
        let assignment_ok = match self.assignment {
            ClockAssignment::Constant(s) => self.contains(s),
            ClockAssignment::UniformPerNode => true,
        };
        if bounds_ok && assignment_ok {
            Ok(())
        } else {
            Err(ElectionError::InvalidParameter(format!("invalid clock model {self:?}")))
        }
    }

    pub fn contains(&self, speed: f64) -> bool {
        self.s_low <= speed && speed <= self.s_high
    }

    /// One speed per node, held for the whole run.
    pub fn realize_speeds<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self.assignment {
            ClockAssignment::Constant(s) => vec![s; n],
            ClockAssignment::UniformPerNode if self.s_low == self.s_high => vec![self.s_low; n],
            ClockAssignment::UniformPerNode => (0..n)
                .map(|_| rng.random_range(self.s_low..=self.s_high))
                .collect(),
        }
    }
}

/// Global times of the ticks of a clock running at `node_speed`, up to and
/// including `horizon`.
pub fn tick_times(clock: &ClockModel, node_speed: f64, horizon: f64) -> Result<Vec<f64>> {
    if !clock.contains(node_speed) {
        return Err(ElectionError::InvalidParameter(format!(
            "speed {node_speed} outside [{}, {}]",
            clock.s_low, clock.s_high
        )));
    }
    Ok((1u64..)
        .map(|k| tick_time(k, node_speed))
        .take_while(|&t| t <= horizon)
        .collect())
}

/// Global time of the `k`-th tick. Computed from `k` directly so that long
/// runs do not accumulate rounding error.
pub(crate) fn tick_time(k: u64, speed: f64) -> f64 {
    k as f64 / speed
}

/// Expected local processing latency per event. Zero means instantaneous.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ProcessingModel {
    pub gamma: f64,
}

impl ProcessingModel {
    pub fn validate(&self) -> Result<()> {
        if self.gamma.is_finite() && self.gamma >= 0.0 {
            Ok(())
        } else {
            Err(ElectionError::InvalidParameter(format!("gamma must be >= 0, got {}", self.gamma)))
        }
    }
}
