//! `abe-elect`: simulations, sweeps, closed-form tables and exact Markov-chain
//! analyses of the ABE ring election protocol, all written as CSV.
//!
//! Settings come from built-in defaults, then an optional TOML file
//! (`--config`), then command-line flags, each overriding the previous.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abe_election::checks::Scale;
use abe_election::experiment::{run_experiment, Command, ExperimentSpec, Grid, NRange, Settings};
use abe_election::protocol::ForwardRule;
use abe_election::sim::{Activation, TieBreak};
use abe_election::timing::DelayModel;
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status when the experiment ran but found violations or failed checks.
const EXIT_FINDINGS: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "abe-elect", version, about = "Leader election on anonymous ABE rings")]
struct Cli {
    /// TOML file with settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Print the resolved experiment spec as TOML and exit.
    #[arg(long, global = true)]
    print_spec: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// One election; writes a single run-level row.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Record the event trace.
        #[arg(long)]
        trace: bool,
        /// Where the trace goes (default: after the CSV on the main output).
        #[arg(long, requires = "trace")]
        trace_file: Option<PathBuf>,
    },
    /// Independent runs with seeds base_seed + i; writes the aggregate row.
    Batch {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        runs: RunArgs,
        /// Also write one row per run to this file.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Batches over a grid of activation parameters.
    SweepActivation {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        runs: RunArgs,
        /// `a,b,c`, `lin:START:STOP:STEP` or `log:START:STOP:POINTS`.
        #[arg(long)]
        grid: Option<Grid>,
    },
    /// Batches over ring sizes at the optimal activation, with linear fits.
    Scaling {
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        runs: RunArgs,
        /// Comma-separated ring sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Closed-form bounds and times for a range of ring sizes.
    Formulas {
        #[command(flatten)]
        sim: SimArgs,
        /// `LO:HI`, inclusive.
        #[arg(long)]
        n_range: Option<NRange>,
    },
    /// Exact termination probability and expected rounds of the synchronous chain.
    Dtmc {
        #[command(flatten)]
        sim: SimArgs,
        /// Evaluate every point of `--grid` (default 0.1..0.9) instead of `--a0`.
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        grid: Option<Grid>,
    },
    /// The acceptance suite; writes a JSON report.
    Check {
        #[arg(long, value_enum)]
        scale: Option<ScaleArg>,
        #[arg(long)]
        base_seed: Option<u64>,
        #[arg(long, value_enum)]
        forward_rule: Option<ForwardRuleArg>,
        #[arg(long, value_enum)]
        tie_break: Option<TieBreakArg>,
    },
}

#[derive(Args, Debug, Default)]
struct SimArgs {
    /// Ring size.
    #[arg(long)]
    n: Option<usize>,
    /// Activation parameter in (0, 1), or `optimal`.
    #[arg(long, conflicts_with = "optimal")]
    a0: Option<Activation>,
    /// Use the closed-form optimal activation for the ring size.
    #[arg(long)]
    optimal: bool,
    /// Bound on the expected message delay.
    #[arg(long)]
    delta: Option<f64>,
    /// `det:D`, `exp:MEAN`, `uniform:LO:HI` or `retx:P[:UNIT]`.
    #[arg(long)]
    delay_model: Option<DelayModel>,
    #[arg(long)]
    s_low: Option<f64>,
    #[arg(long)]
    s_high: Option<f64>,
    /// Expected local processing time.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Abort a run that passes this global time.
    #[arg(long)]
    max_global_time: Option<f64>,
    #[arg(long, value_enum)]
    forward_rule: Option<ForwardRuleArg>,
    #[arg(long, value_enum)]
    tie_break: Option<TieBreakArg>,
    /// Run every invariant monitor and count violations.
    #[arg(long)]
    monitors: bool,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Runs per point.
    #[arg(long)]
    runs: Option<usize>,
    /// Seed of run 0; run i uses base_seed + i.
    #[arg(long)]
    base_seed: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScaleArg {
    Small,
    Full,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ForwardRuleArg {
    DeadPlusOne,
    HopPlusOne,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum TieBreakArg {
    Sequence,
    Unstable,
}

impl From<ForwardRuleArg> for ForwardRule {
    fn from(a: ForwardRuleArg) -> Self {
        match a {
            ForwardRuleArg::DeadPlusOne => ForwardRule::DeadPlusOne,
            ForwardRuleArg::HopPlusOne => ForwardRule::HopPlusOne,
        }
    }
}

impl From<TieBreakArg> for TieBreak {
    fn from(a: TieBreakArg) -> Self {
        match a {
            TieBreakArg::Sequence => TieBreak::Sequence,
            TieBreakArg::Unstable => TieBreak::Unstable,
        }
    }
}

impl SimArgs {
    fn apply(&self, s: &mut Settings) {
        if let Some(n) = self.n {
            s.n = n;
        }
        if let Some(a0) = self.a0 {
            s.a0 = a0;
        }
        if self.optimal {
            s.a0 = Activation::Optimal;
        }
        if let Some(d) = self.delta {
            s.delta = d;
        }
        if let Some(m) = self.delay_model {
            s.delay_model = Some(m);
        }
        if let Some(x) = self.s_low {
            s.s_low = x;
        }
        if let Some(x) = self.s_high {
            s.s_high = x;
        }
        if let Some(g) = self.gamma {
            s.gamma = g;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(t) = self.max_global_time {
            s.max_global_time = Some(t);
        }
        if let Some(r) = self.forward_rule {
            s.forward_rule = r.into();
        }
        if let Some(t) = self.tie_break {
            s.tie_break = t.into();
        }
        s.monitors |= self.monitors;
    }
}

impl RunArgs {
    fn apply(&self, s: &mut Settings) {
        if let Some(r) = self.runs {
            s.runs = r;
        }
        if let Some(seed) = self.base_seed {
            s.seed = seed;
        }
    }
}

/// Reads settings from a TOML file: either bare settings keys or a full spec
/// as printed by `--print-spec`, whose `command` is then ignored.
fn load_settings(path: Option<&Path>) -> Result<Settings> {
    let Some(path) = path else {
        return Ok(Settings::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(toml::Value::Table(settings)) = table.remove("settings") {
        table = settings;
    } else {
        table.remove("command");
    }
    table
        .try_into()
        .with_context(|| format!("invalid settings in {}", path.display()))
}

/// Resolves the spec and names the optional side files it writes.
fn resolve(cli: &Cli) -> Result<(ExperimentSpec, Option<PathBuf>, Option<PathBuf>)> {
    let mut s = load_settings(cli.config.as_deref())?;
    let mut trace_file = None;
    let mut records = None;
    let command = match &cli.command {
        Cmd::Simulate {
            sim,
            trace,
            trace_file: tf,
        } => {
            sim.apply(&mut s);
            s.trace |= *trace;
            trace_file = tf.clone();
            Command::Simulate
        }
        Cmd::Batch { sim, runs, records: r } => {
            sim.apply(&mut s);
            runs.apply(&mut s);
            records = r.clone();
            Command::Batch
        }
        Cmd::SweepActivation { sim, runs, grid } => {
            sim.apply(&mut s);
            runs.apply(&mut s);
            if let Some(g) = grid {
                s.grid = Some(g.clone());
            }
            Command::SweepActivation
        }
        Cmd::Scaling { sim, runs, sizes } => {
            sim.apply(&mut s);
            runs.apply(&mut s);
            if let Some(sz) = sizes {
                s.sizes = sz.clone();
            }
            Command::Scaling
        }
        Cmd::Formulas { sim, n_range } => {
            sim.apply(&mut s);
            if let Some(r) = n_range {
                s.n_range = *r;
            }
            Command::Formulas
        }
        Cmd::Dtmc { sim, sweep, grid } => {
            sim.apply(&mut s);
            s.sweep |= *sweep;
            if let Some(g) = grid {
                s.grid = Some(g.clone());
            }
            Command::Dtmc
        }
        Cmd::Check {
            scale,
            base_seed,
            forward_rule,
            tie_break,
        } => {
            if let Some(sc) = scale {
                s.scale = match sc {
                    ScaleArg::Small => Scale::Small,
                    ScaleArg::Full => Scale::Full,
                };
            }
            if let Some(seed) = base_seed {
                s.seed = *seed;
            }
            if let Some(r) = forward_rule {
                s.forward_rule = (*r).into();
            }
            if let Some(t) = tie_break {
                s.tie_break = (*t).into();
            }
            Command::Check
        }
    };
    Ok((ExperimentSpec { command, settings: s }, trace_file, records))
}

fn write_to(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let (spec, trace_file, records_file) = resolve(cli)?;
    if cli.print_spec {
        write_to(cli.output.as_deref(), &toml::to_string(&spec)?)?;
        return Ok(true);
    }
    let out = run_experiment(&spec)?;

    let mut main = String::new();
    if let Some(t) = &out.table {
        main.push_str(&t.render());
    }
    if let Some(report) = &out.report {
        for c in &report.criteria {
            eprintln!("{}", c.line());
            for d in &c.details {
                eprintln!("    {d}");
            }
            if !c.replay_seeds.is_empty() {
                eprintln!("    replay seeds: {:?}", c.replay_seeds);
            }
        }
        main.push_str(&report.to_json());
        main.push('\n');
    }
    if let Some(trace) = &out.trace {
        match &trace_file {
            Some(p) => write_to(Some(p), trace)?,
            None => main.push_str(trace),
        }
    }
    write_to(cli.output.as_deref(), &main)?;
    if let (Some(path), Some(records)) = (&records_file, &out.records) {
        write_to(Some(path), &records.render())?;
    }
    if out.violations > 0 {
        eprintln!("{} invariant violation(s) observed", out.violations);
    }
    if spec.command == Command::Check && out.failed() {
        eprintln!("acceptance suite failed");
    }
    Ok(!out.failed())
}

fn main() -> ExitCode {
    // clap's own usage exit code would collide with EXIT_FINDINGS
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FINDINGS),
        Err(e) => {
            eprintln!("error: {e:#}");
            if cli.config.is_some() && e.chain().any(|c| c.is::<toml::de::Error>()) {
                eprintln!("hint: config keys are the snake_case names shown by --print-spec");
            }
            ExitCode::FAILURE
        }
    }
}
