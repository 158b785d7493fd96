//! Independent repetitions of a run and their summary statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ElectionError, Result};
use crate::sim::{run_with, RunOptions, RunStats, SimConfig};

/// z-value of a two-sided 95% normal interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Streaming mean and variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Summary {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines two summaries as if all samples had been pushed into one.
    pub fn merge(&self, other: &Summary) -> Summary {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.count as f64 * other.count as f64) / count as f64;
        Summary { count, mean, m2 }
    }

    /// Sample standard deviation; zero for fewer than two samples.
    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.std() / (self.count as f64).sqrt()
        }
    }

    /// Half-width of the normal 95% confidence interval of the mean.
    pub fn ci95(&self) -> f64 {
        Z95 * self.std_error()
    }
}

impl FromIterator<f64> for Summary {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Summary::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BatchAggregate {
    pub runs: u64,
    pub time: Summary,
    pub messages: Summary,
    pub hops: Summary,
    pub wakeups: Summary,
    pub ticks: Summary,
    pub bits: Summary,
}

impl BatchAggregate {
    pub fn push(&mut self, s: &RunStats) {
        self.runs += 1;
        self.time.push(s.time_to_election);
        self.messages.push(s.messages_sent as f64);
        self.hops.push(s.message_hops as f64);
        self.wakeups.push(s.wakeups as f64);
        self.ticks.push(s.ticks as f64);
        self.bits.push(s.bits as f64);
    }

    pub fn merge(&self, o: &BatchAggregate) -> BatchAggregate {
        BatchAggregate {
            runs: self.runs + o.runs,
            time: self.time.merge(&o.time),
            messages: self.messages.merge(&o.messages),
            hops: self.hops.merge(&o.hops),
            wakeups: self.wakeups.merge(&o.wakeups),
            ticks: self.ticks.merge(&o.ticks),
            bits: self.bits.merge(&o.bits),
        }
    }

    /// `(name, summary)` pairs in CSV column order.
    pub fn metrics(&self) -> [(&'static str, &Summary); 6] {
        [
            ("time", &self.time),
            ("messages", &self.messages),
            ("hops", &self.hops),
            ("wakeups", &self.wakeups),
            ("ticks", &self.ticks),
            ("bits", &self.bits),
        ]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub stats: RunStats,
    pub trace_hash: String,
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub config: SimConfig,
    pub base_seed: u64,
    pub records: Vec<RunRecord>,
    pub aggregate: BatchAggregate,
}

/// Runs `num_runs` independent elections with seeds `base_seed + i`.
///
/// Runs execute in parallel; records come back in run order and the
/// aggregate is folded sequentially, so the result does not depend on the
/// thread count.
pub fn run_batch(config: &SimConfig, num_runs: usize, base_seed: u64, options: &RunOptions) -> Result<Batch> {
    if num_runs == 0 {
        return Err(ElectionError::InvalidParameter("num_runs must be at least 1".into()));
    }
    config.validate()?;
    let results: Vec<Result<RunRecord>> = (0..num_runs)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let cfg = SimConfig {
                seed,
                ..config.clone()
            };
            run_with(&cfg, options)
                .map(|out| RunRecord {
                    run_id: i,
                    seed,
                    stats: out.stats,
                    trace_hash: out.trace_hash,
                    violations: out.violations.len(),
                })
                .map_err(|e| ElectionError::RunFailed {
                    run_index: i,
                    seed,
                    source: Box::new(e),
                })
        })
        .collect();

    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut aggregate = BatchAggregate::default();
    for r in &records {
        aggregate.push(&r.stats);
    }
    Ok(Batch {
        config: SimConfig {
            seed: base_seed,
            ..config.clone()
        },
        base_seed,
        records,
        aggregate,
    })
}

/// Ordinary least squares `y = slope x + intercept` with its R².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LinearFit { slope, intercept, r2 })
}
