use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stfair_core::channel::{drop_users, write_channel_csv};
use stfair_core::feasibility::inequality_feasible;
use stfair_core::harness::config::DemandSection;
use stfair_core::harness::experiment::calibrate_for_config;
use stfair_core::harness::{oracle_optimal_utility, run_experiment, ExperimentConfig};
use stfair_core::Rational;

/// Short-term temporally fair opportunistic scheduling toolkit.
#[derive(Parser, Debug)]
#[command(name = "stfair", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Feasibility of each window length, with the minimal-count witness.
    Feasible(FeasibleArgs),
    /// Calibrate TBS thresholds for a config and print the report.
    Calibrate(CalibrateArgs),
    /// Run the utility-versus-window-length study and write CSV.
    Run(RunArgs),
    /// Exact optimal window utility for deterministic rates.
    Oracle(OracleArgs),
    /// Drop users in the cell and print their mean SNRs.
    DumpChannel(DumpChannelArgs),
}

#[derive(Args, Debug)]
struct WindowRange {
    /// First window length.
    #[arg(long, default_value_t = 1)]
    from: u64,
    /// Last window length (inclusive).
    #[arg(long)]
    to: u64,
}

#[derive(Args, Debug)]
struct FeasibleArgs {
    /// TOML file with `n_max`, `lower`, `upper` (top level or under `[demand]`).
    #[arg(long)]
    demand: PathBuf,
    #[command(flatten)]
    range: WindowRange,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; stdout when neither this nor the config sets one.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the number of trials per window length.
    #[arg(long)]
    trials: Option<usize>,
    /// Dump the first trial's schedule per (s, strategy) here.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// TOML file with `n_max`, `lower`, `upper` (top level or under `[demand]`).
    #[arg(long)]
    demand: PathBuf,
    /// Comma-separated rate per virtual user in catalog order, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    rates: Vec<Rational>,
    #[command(flatten)]
    range: WindowRange,
}

#[derive(Args, Debug)]
struct DumpChannelArgs {
    /// Experiment config with a `cell` sampler.
    #[arg(long)]
    config: PathBuf,
    /// Override the drop seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `Ok(false)` when the command ran but an invariant check failed.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Feasible(a) => feasible(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Run(a) => run(a),
        Command::Oracle(a) => oracle(a),
        Command::DumpChannel(a) => dump_channel(a),
    }
}

fn load_demand(path: &Path) -> Result<DemandSection> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    let section = match table.get("demand") {
        Some(inner) => inner.clone(),
        None => toml::Value::Table(table),
    };
    section.try_into().with_context(|| format!("demand section of {}", path.display()))
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn check_range(range: &WindowRange) -> Result<()> {
    if range.from == 0 || range.from > range.to {
        bail!("need 1 <= --from <= --to");
    }
    Ok(())
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn feasible(args: FeasibleArgs) -> Result<bool> {
    check_range(&args.range)?;
    let section = load_demand(&args.demand)?;
    let demand = section.demand()?;
    let mut out = String::from("s,feasible");
    for i in 1..=demand.n() {
        out.push_str(&format!(",count_{i}"));
    }
    out.push('\n');
    for s in args.range.from..=args.range.to {
        let res = inequality_feasible(s, &demand, section.n_max)?;
        out.push_str(&format!("{s},{}", res.feasible));
        match &res.witness_counts {
            Some(counts) => counts.iter().for_each(|c| out.push_str(&format!(",{c}"))),
            None => out.push_str(&",".repeat(demand.n())),
        }
        out.push('\n');
    }
    emit(None, &out)?;
    Ok(true)
}

fn calibrate(args: CalibrateArgs) -> Result<bool> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let report = calibrate_for_config(&cfg)?;
    emit(args.output.as_deref(), &report.to_kv())?;
    if !report.converged {
        eprintln!(
            "warning: calibration did not converge after {} iterations{}",
            report.iterations,
            if report.oscillating { " (oscillating; shares are ergodic averages)" } else { "" }
        );
    }
    Ok(true)
}

fn run(args: RunArgs) -> Result<bool> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.output.is_some() {
        cfg.output = args.output;
    }
    if args.trace_dir.is_some() {
        cfg.trace_dir = args.trace_dir;
    }
    let to_stdout = cfg.output.is_none();
    let out = run_experiment(&cfg)?;
    if to_stdout {
        emit(None, &out.to_csv_string())?;
    }
    let mut ok = true;
    let violations = out.fair_strategy_violations();
    if violations > 0 {
        eprintln!("invariant failed: {violations} fairness violations in ATBS/ORR windows");
        ok = false;
    }
    let bad_bound = out
        .rows
        .iter()
        .flat_map(|r| [r.thm4_lb, r.stop_frac])
        .flatten()
        .any(|b| !(0.0..=1.0).contains(&b));
    if bad_bound {
        eprintln!("invariant failed: a bound or stopping fraction lies outside [0, 1]");
        ok = false;
    }
    Ok(ok)
}

fn oracle(args: OracleArgs) -> Result<bool> {
    check_range(&args.range)?;
    let section = load_demand(&args.demand)?;
    let demand = section.demand()?;
    let catalog = section.catalog()?;
    if args.rates.len() != catalog.len() {
        bail!("{} rates given for {} virtual users", args.rates.len(), catalog.len());
    }
    let mut out = String::from("s,u_star,u_star_decimal\n");
    for s in args.range.from..=args.range.to {
        if !inequality_feasible(s, &demand, catalog.n_max())?.feasible {
            out.push_str(&format!("{s},infeasible,\n"));
            continue;
        }
        let u = oracle_optimal_utility(s, &demand, &catalog, &args.rates)?;
        out.push_str(&format!("{s},{u},{:.6}\n", u.to_f64()));
    }
    emit(None, &out)?;
    Ok(true)
}

fn dump_channel(args: DumpChannelArgs) -> Result<bool> {
    let cfg = load_config(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.sampler.drop_seed);
    let users = drop_users(&cfg.sampler.cell, seed)?;
    let mut buf = Vec::new();
    write_channel_csv(&users, &mut buf)?;
    emit(args.output.as_deref(), &String::from_utf8(buf)?)?;
    Ok(true)
}
