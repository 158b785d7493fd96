//! Experiment drivers and their CSV output.
//!
//! Every table starts with `#` comment lines naming the schema version and
//! echoing the resolved settings, followed by one header line and the data
//! rows. Numbers are printed in Rust's shortest round-trip form, so equal
//! inputs give byte-identical files.

use std::fmt::{self, Display};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    average_election_time, compute_optimal_activation, expected_termination_upper_bound, first_wakeup_time_bounds,
    interference_probability, round_trip_time, ComplexityParams,
};
use crate::batch::{linear_fit, run_batch, Batch, BatchAggregate, LinearFit, RunRecord};
use crate::checks::{check_suite, CheckOptions, CheckReport, Scale};
use crate::dtmc::{build_dtmc_with, expected_rounds, termination_probability, DtmcOptions};
use crate::error::{ElectionError, Result};
use crate::protocol::ForwardRule;
use crate::sim::{run_with, Activation, RunOptions, SimConfig, TieBreak};
use crate::timing::{ClockModel, DelayModel, ProcessingModel};

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const RUN_COLUMNS: [&str; 16] = [
    "run_id",
    "n",
    "a0",
    "delta",
    "s_low",
    "s_high",
    "delay_model",
    "gamma",
    "seed",
    "elected",
    "time",
    "messages",
    "hops",
    "wakeups",
    "ticks",
    "bits",
];

/// Configuration columns shared by every aggregate row.
const AGGREGATE_PREFIX: [&str; 9] = [
    "n",
    "a0",
    "delta",
    "s_low",
    "s_high",
    "delay_model",
    "gamma",
    "base_seed",
    "runs",
];

const METRICS: [&str; 6] = ["time", "messages", "hops", "wakeups", "ticks", "bits"];

pub fn aggregate_columns() -> Vec<String> {
    let mut cols: Vec<String> = AGGREGATE_PREFIX.iter().map(|c| c.to_string()).collect();
    for stat in ["mean", "std", "ci95"] {
        cols.extend(METRICS.iter().map(|m| format!("{stat}_{m}")));
    }
    cols
}

pub const FORMULA_COLUMNS: [&str; 11] = [
    "n", "a0", "delta", "s_low", "s_high", "F", "F_low", "R", "W", "bound", "avg_time",
];

pub const DTMC_COLUMNS: [&str; 6] = [
    "n",
    "a0",
    "states",
    "transitions",
    "termination_probability",
    "expected_rounds",
];

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub kind: String,
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Comment lines written after the rows (fits, argmins).
    pub trailer: Vec<String>,
}

impl CsvTable {
    fn new<S: ToString>(kind: &str, columns: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            kind: kind.to_string(),
            columns: columns.into_iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of column `name` parsed as numbers.
    pub fn numeric_column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!("# abe-election csv schema v{CSV_SCHEMA_VERSION}\n# table: {}\n", self.kind);
        for c in &self.comments {
            out.push_str(&format!("# {c}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        for c in &self.trailer {
            out.push_str(&format!("# {c}\n"));
        }
        out
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn config_cells(cfg: &SimConfig, a0: f64) -> Vec<String> {
    vec![
        cfg.n.to_string(),
        num(a0),
        num(cfg.delta),
        num(cfg.clock.s_low),
        num(cfg.clock.s_high),
        cfg.delay_model.to_string(),
        num(cfg.processing.gamma),
    ]
}

pub fn run_row(cfg: &SimConfig, a0: f64, record: &RunRecord) -> Vec<String> {
    let s = &record.stats;
    let mut row = vec![record.run_id.to_string()];
    row.extend(config_cells(cfg, a0));
    row.extend([
        record.seed.to_string(),
        s.elected.to_string(),
        num(s.time_to_election),
        s.messages_sent.to_string(),
        s.message_hops.to_string(),
        s.wakeups.to_string(),
        s.ticks.to_string(),
        s.bits.to_string(),
    ]);
    row
}

pub fn aggregate_row(cfg: &SimConfig, a0: f64, base_seed: u64, agg: &BatchAggregate) -> Vec<String> {
    let mut row = config_cells(cfg, a0);
    row.push(base_seed.to_string());
    row.push(agg.runs.to_string());
    let metrics = agg.metrics();
    row.extend(metrics.iter().map(|(_, s)| num(s.mean)));
    row.extend(metrics.iter().map(|(_, s)| num(s.std())));
    row.extend(metrics.iter().map(|(_, s)| num(s.ci95())));
    row
}

pub fn runs_table(batch: &Batch) -> Result<CsvTable> {
    let a0 = batch.config.activation()?;
    let mut t = CsvTable::new("runs", RUN_COLUMNS);
    t.rows = batch.records.iter().map(|r| run_row(&batch.config, a0, r)).collect();
    Ok(t)
}

/// Sorted, de-duplicated activation values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<(f64, BatchAggregate)>,
}

impl SweepResult {
    /// Grid point with the smallest mean election time.
    pub fn argmin(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .map(|(a0, agg)| (*a0, agg.time.mean))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Runs a batch at every activation value in `grid`. Every point uses the
/// same seeds, which keeps the comparison between neighbouring points sharp.
pub fn sweep_activation(
    config: &SimConfig,
    grid: &[f64],
    runs_per_point: usize,
    base_seed: u64,
    options: &RunOptions,
) -> Result<SweepResult> {
    let mut grid = grid.to_vec();
    if grid.is_empty() {
        return Err(ElectionError::InvalidParameter("activation grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|a| !(a.is_finite() && **a > 0.0 && **a < 1.0)) {
        return Err(ElectionError::InvalidParameter(format!("grid value {bad} outside (0, 1)")));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let points = grid
        .into_iter()
        .map(|a0| {
            let cfg = SimConfig {
                a0: Activation::Fixed(a0),
                ..config.clone()
            };
            run_batch(&cfg, runs_per_point, base_seed, options).map(|b| (a0, b.aggregate))
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult { points })
}

pub fn sweep_table(config: &SimConfig, base_seed: u64, sweep: &SweepResult) -> CsvTable {
    let mut t = CsvTable::new("sweep-activation", aggregate_columns());
    t.rows = sweep
        .points
        .iter()
        .map(|(a0, agg)| aggregate_row(config, *a0, base_seed, agg))
        .collect();
    if let Some((a0, time)) = sweep.argmin() {
        t.trailer.push(format!("argmin a0={} mean_time={}", num(a0), num(time)));
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    /// `(n, a0, aggregate)` in the order of the requested sizes.
    pub points: Vec<(usize, f64, BatchAggregate)>,
    pub time_fit: Option<LinearFit>,
    pub message_fit: Option<LinearFit>,
    /// `max / min - 1` of mean messages per node.
    pub messages_per_node_spread: f64,
}

/// Batches at each ring size with the closed-form optimal activation.
pub fn scaling_study(
    config: &SimConfig,
    sizes: &[usize],
    runs_per_point: usize,
    base_seed: u64,
    options: &RunOptions,
) -> Result<ScalingResult> {
    if sizes.is_empty() {
        return Err(ElectionError::InvalidParameter("no ring sizes given".into()));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let a0 = compute_optimal_activation(n)?;
        let cfg = SimConfig {
            n,
            a0: Activation::Fixed(a0),
            ..config.clone()
        };
        let batch = run_batch(&cfg, runs_per_point, base_seed, options)?;
        points.push((n, a0, batch.aggregate));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let times: Vec<f64> = points.iter().map(|p| p.2.time.mean).collect();
    let messages: Vec<f64> = points.iter().map(|p| p.2.messages.mean).collect();
    let per_node: Vec<f64> = points.iter().map(|p| p.2.messages.mean / p.0 as f64).collect();
    let max = per_node.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = per_node.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ScalingResult {
        time_fit: linear_fit(&xs, &times),
        message_fit: linear_fit(&xs, &messages),
        messages_per_node_spread: max / min - 1.0,
        points,
    })
}

pub fn scaling_table(config: &SimConfig, base_seed: u64, study: &ScalingResult) -> CsvTable {
    let mut t = CsvTable::new("scaling", aggregate_columns());
    t.rows = study
        .points
        .iter()
        .map(|(n, a0, agg)| {
            let cfg = SimConfig { n: *n, ..config.clone() };
            aggregate_row(&cfg, *a0, base_seed, agg)
        })
        .collect();
    for (name, fit) in [("time", study.time_fit), ("messages", study.message_fit)] {
        match fit {
            Some(f) => t.trailer.push(format!(
                "fit {name}_vs_n slope={} intercept={} r2={}",
                num(f.slope),
                num(f.intercept),
                num(f.r2)
            )),
            None => t.trailer.push(format!("fit {name}_vs_n unavailable (fewer than two sizes)")),
        }
    }
    t.trailer
        .push(format!("messages_per_node spread={}", num(study.messages_per_node_spread)));
    t
}

/// Closed-form quantities for each `n` in `n_range`.
pub fn formulas_table(
    n_range: NRange,
    a0: Activation,
    delta: f64,
    s_low: f64,
    s_high: f64,
) -> Result<CsvTable> {
    let mut t = CsvTable::new("formulas", FORMULA_COLUMNS);
    for n in n_range.lo..=n_range.hi {
        let a = a0.resolve(n)?;
        let p = ComplexityParams {
            n,
            a0: a,
            delta,
            s_low,
            s_high,
        };
        p.validate()?;
        let (f, f_low) = first_wakeup_time_bounds(&p);
        let bound = expected_termination_upper_bound(&p).map_or(f64::INFINITY, |b| b);
        t.rows.push(vec![
            n.to_string(),
            num(a),
            num(delta),
            num(s_low),
            num(s_high),
            num(f),
            num(f_low),
            num(round_trip_time(&p)),
            num(interference_probability(&p)),
            num(bound),
            num(average_election_time(n, a)?),
        ]);
    }
    Ok(t)
}

/// Exact analysis of the synchronous chain at each activation value.
pub fn dtmc_table(n: usize, a0s: &[f64], options: &DtmcOptions) -> Result<CsvTable> {
    let mut t = CsvTable::new("dtmc", DTMC_COLUMNS);
    for &a0 in a0s {
        let model = build_dtmc_with(n, a0, options)?;
        let p = termination_probability(&model)?;
        let rounds = if p >= 1.0 - 1e-9 {
            expected_rounds(&model)?
        } else {
            f64::INFINITY
        };
        t.rows.push(vec![
            n.to_string(),
            num(a0),
            model.num_states().to_string(),
            model.num_transitions().to_string(),
            num(p),
            num(rounds),
        ]);
    }
    Ok(t)
}

/// Inclusive range of ring sizes, written `LO:HI`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NRange {
    pub lo: usize,
    pub hi: usize,
}

impl Display for NRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for NRange {
    type Err = ElectionError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || ElectionError::InvalidParameter(format!("ring-size range must be LO:HI with 2 <= LO <= HI, got {s:?}"));
        let (lo, hi) = match s.split_once(':') {
            Some((lo, hi)) => (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?),
            None => {
                let n = s.trim().parse().map_err(|_| bad())?;
                (n, n)
            }
        };
        if lo < 2 || lo > hi {
            return Err(bad());
        }
        Ok(NRange { lo, hi })
    }
}

/// Activation grid: `a,b,c`, `lin:START:STOP:STEP` or `log:START:STOP:POINTS`.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    List(Vec<f64>),
    Linear { start: f64, stop: f64, step: f64 },
    Log { start: f64, stop: f64, points: usize },
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Linear { start, stop, step } => {
                // Index-based so that the end point is not lost to rounding,
                // then trimmed to 12 decimals so 0.1 * 3 prints as 0.3.
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count)
                    .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
            Grid::Log { start, stop, points } => {
                if points == 1 {
                    return vec![start];
                }
                let (l0, l1) = (start.ln(), stop.ln());
                (0..points)
                    .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
                    .collect()
            }
        }
    }
}

impl Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| num(*x)).collect();
                f.write_str(&parts.join(","))
            }
            Grid::Linear { start, stop, step } => write!(f, "lin:{start}:{stop}:{step}"),
            Grid::Log { start, stop, points } => write!(f, "log:{start}:{stop}:{points}"),
        }
    }
}

impl FromStr for Grid {
    type Err = ElectionError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| ElectionError::InvalidParameter(format!("bad grid {s:?}: {why}"));
        let float = |x: &str| x.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let s = s.trim();
        let grid = if let Some(rest) = s.strip_prefix("lin:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let [a, b, c] = parts[..] else {
                return Err(bad("expected lin:START:STOP:STEP"));
            };
            let (start, stop, step) = (float(a)?, float(b)?, float(c)?);
            if !(step > 0.0 && stop >= start) {
                return Err(bad("need STEP > 0 and STOP >= START"));
            }
            Grid::Linear { start, stop, step }
        } else if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let [a, b, c] = parts[..] else {
                return Err(bad("expected log:START:STOP:POINTS"));
            };
            let (start, stop) = (float(a)?, float(b)?);
            let points: usize = c.trim().parse().map_err(|_| bad("POINTS must be an integer"))?;
            if !(start > 0.0 && stop >= start && points >= 1) {
                return Err(bad("need 0 < START <= STOP and POINTS >= 1"));
            }
            Grid::Log { start, stop, points }
        } else {
            Grid::List(s.split(',').map(float).collect::<Result<_>>()?)
        };
        Ok(grid)
    }
}

/// Serde adapter for types with a textual form.
mod as_string {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Float(f64),
            Int(i64),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Float(x) => x.to_string(),
            Raw::Int(x) => x.to_string(),
        };
        text.parse().map_err(de::Error::custom)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<T: Display, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.collect_str(v),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
        where
            T: FromStr,
            T::Err: Display,
            D: Deserializer<'de>,
        {
            super::deserialize(d).map(Some)
        }
    }
}

/// All tunables of an experiment. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub n: usize,
    #[serde(with = "as_string")]
    pub a0: Activation,
    pub delta: f64,
    /// Defaults to exponential delays with mean `delta`.
    #[serde(with = "as_string::opt", skip_serializing_if = "Option::is_none")]
    pub delay_model: Option<DelayModel>,
    pub s_low: f64,
    pub s_high: f64,
    pub gamma: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_global_time: Option<f64>,
    pub forward_rule: ForwardRule,
    pub tie_break: TieBreak,
    pub monitors: bool,
    pub runs: usize,
    /// Activation grid of `sweep-activation` and `dtmc --sweep`; a default
    /// around the optimum is used when absent.
    #[serde(with = "as_string::opt", skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    pub sizes: Vec<usize>,
    #[serde(with = "as_string")]
    pub n_range: NRange,
    pub sweep: bool,
    pub trace: bool,
    pub scale: Scale,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            n: 100,
            a0: Activation::Optimal,
            delta: 1.0,
            delay_model: None,
            s_low: 1.0,
            s_high: 1.0,
            gamma: 0.0,
            seed: 0,
            max_global_time: None,
            forward_rule: ForwardRule::DeadPlusOne,
            tie_break: TieBreak::Sequence,
            monitors: false,
            runs: 5000,
            grid: None,
            sizes: vec![40, 100, 200, 400, 620],
            n_range: NRange { lo: 2, hi: 100 },
            sweep: false,
            trace: false,
            scale: Scale::Small,
        }
    }
}

impl Settings {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            n: self.n,
            a0: self.a0,
            delta: self.delta,
            delay_model: self
                .delay_model
                .unwrap_or(DelayModel::Exponential { mean: self.delta }),
            clock: ClockModel::bounded(self.s_low, self.s_high),
            processing: ProcessingModel { gamma: self.gamma },
            seed: self.seed,
            max_global_time: self.max_global_time,
            forward_rule: self.forward_rule,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        let mut opts = if self.monitors {
            RunOptions::monitored()
        } else {
            RunOptions::default()
        };
        opts.tie_break = self.tie_break;
        opts.record_trace = self.trace;
        opts
    }

    fn sweep_grid(&self) -> Result<Vec<f64>> {
        match &self.grid {
            Some(g) => Ok(g.points()),
            None => {
                let opt = compute_optimal_activation(self.n)?;
                Ok(Grid::Log {
                    start: opt / 4.0,
                    stop: (opt * 4.0).min(0.99),
                    points: 13,
                }
                .points())
            }
        }
    }

    fn dtmc_grid(&self) -> Vec<f64> {
        match &self.grid {
            Some(g) => g.points(),
            None => Grid::Linear {
                start: 0.1,
                stop: 0.9,
                step: 0.1,
            }
            .points(),
        }
    }

    /// `key = value` lines describing these settings.
    pub fn describe(&self) -> Vec<String> {
        let value = serde_json::to_value(self).expect("settings serialize");
        let mut lines = Vec::new();
        if let serde_json::Value::Object(map) = value {
            for (k, v) in map {
                let v = match v {
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                lines.push(format!("{k} = {v}"));
            }
        }
        lines
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Batch,
    SweepActivation,
    Scaling,
    Formulas,
    Dtmc,
    Check,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Batch => "batch",
            Command::SweepActivation => "sweep-activation",
            Command::Scaling => "scaling",
            Command::Formulas => "formulas",
            Command::Dtmc => "dtmc",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(default)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    /// The main CSV table. Absent for `check`, whose result is the report.
    pub table: Option<CsvTable>,
    /// Per-run rows of a batch.
    pub records: Option<CsvTable>,
    /// Event trace of a single run, one line per event.
    pub trace: Option<String>,
    pub report: Option<CheckReport>,
    /// Invariant violations seen by the monitors (collected, not aborted).
    pub violations: usize,
}

impl ExperimentOutput {
    /// Whether the experiment found a problem that should fail the command.
    pub fn failed(&self) -> bool {
        self.violations > 0 || self.report.as_ref().is_some_and(|r| !r.passed)
    }
}

/// Runs the experiment described by `spec`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let s = &spec.settings;
    let cfg = s.sim_config();
    let mut opts = s.run_options();
    opts.abort_on_violation = false;
    let header = |table: &mut CsvTable, extra: Vec<String>| {
        table.comments.push(format!("command = {}", spec.command.as_str()));
        table.comments.extend(s.describe());
        table.comments.extend(extra);
    };
    let mut out = ExperimentOutput::default();

    match spec.command {
        Command::Simulate => {
            let a0 = cfg.activation()?;
            let outcome = run_with(&cfg, &opts)?;
            let record = RunRecord {
                run_id: 0,
                seed: cfg.seed,
                stats: outcome.stats,
                trace_hash: outcome.trace_hash.clone(),
                violations: outcome.violations.len(),
            };
            let mut t = CsvTable::new("runs", RUN_COLUMNS);
            header(
                &mut t,
                vec![
                    format!("resolved a0 = {}", num(a0)),
                    format!("trace_hash = {}", outcome.trace_hash),
                ],
            );
            t.rows.push(run_row(&cfg, a0, &record));
            for v in &outcome.violations {
                t.trailer.push(format!("violation seq={} {}: {}", v.event_seq, v.check.as_str(), v.detail));
            }
            out.violations = outcome.violations.len();
            if s.trace {
                let mut text = String::from("time,seq,kind,node,hop\n");
                for r in &outcome.trace {
                    text.push_str(&r.to_line());
                    text.push('\n');
                }
                out.trace = Some(text);
            }
            out.table = Some(t);
        }
        Command::Batch => {
            let a0 = cfg.activation()?;
            let batch = run_batch(&cfg, s.runs, s.seed, &opts)?;
            let mut t = CsvTable::new("aggregate", aggregate_columns());
            header(&mut t, vec![format!("resolved a0 = {}", num(a0))]);
            t.rows.push(aggregate_row(&cfg, a0, s.seed, &batch.aggregate));
            let mut records = runs_table(&batch)?;
            header(&mut records, vec![format!("resolved a0 = {}", num(a0))]);
            out.violations = batch.records.iter().map(|r| r.violations).sum();
            out.table = Some(t);
            out.records = Some(records);
        }
        Command::SweepActivation => {
            let grid = s.sweep_grid()?;
            let sweep = sweep_activation(&cfg, &grid, s.runs, s.seed, &opts)?;
            let mut t = sweep_table(&cfg, s.seed, &sweep);
            header(&mut t, Vec::new());
            out.table = Some(t);
        }
        Command::Scaling => {
            let study = scaling_study(&cfg, &s.sizes, s.runs, s.seed, &opts)?;
            let mut t = scaling_table(&cfg, s.seed, &study);
            header(&mut t, Vec::new());
            out.table = Some(t);
        }
        Command::Formulas => {
            let mut t = formulas_table(s.n_range, s.a0, s.delta, s.s_low, s.s_high)?;
            header(&mut t, Vec::new());
            out.table = Some(t);
        }
        Command::Dtmc => {
            let a0s = if s.sweep {
                s.dtmc_grid()
            } else {
                vec![cfg.activation()?]
            };
            let options = DtmcOptions {
                forward_rule: s.forward_rule,
                ..DtmcOptions::lean()
            };
            let mut t = dtmc_table(s.n, &a0s, &options)?;
            header(&mut t, Vec::new());
            out.table = Some(t);
        }
        Command::Check => {
            let report = check_suite(&CheckOptions {
                scale: s.scale,
                forward_rule: s.forward_rule,
                tie_break: s.tie_break,
                base_seed: s.seed,
            });
            out.report = Some(report);
        }
    }
    Ok(out)
}
