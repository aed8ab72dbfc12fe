//! `ollp` command line: `run`, `validate` and `oracle`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::adversary::{khintchine_regret_oracle, rademacher_abs_sum_asymptotic, rademacher_abs_sum_exact};
use crate::error::{invalid, Result};
use crate::harness::config::{parse_window_spec, ConfigFile};
use crate::harness::csv_io::{emit_report, trace_rows, write_aggregate, write_traces};
use crate::harness::{run_experiment, ExperimentConfig, ExperimentKind, GeometryChoice};
use crate::rng::{substream, Component};
use crate::validate;

#[derive(Debug, Parser)]
#[command(name = "ollp", version, about = "Delayed permuted mirror descent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write its CSV.
    Run(Box<RunArgs>),
    /// Run the randomized property suites.
    Validate(ValidateArgs),
    /// Monte-Carlo estimate of the block-sign lower bound.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// dpmd_vs_M, dpmd_trace, ogd_small_window or lower_bound_check.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long = "T")]
    horizon: Option<usize>,
    #[arg(long)]
    tau: Option<usize>,
    /// Window size; repeat it or give a range `a:b:step`.
    #[arg(long = "M")]
    windows: Vec<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["euclidean", "entropy"])]
    geometry: Option<String>,
    /// Step size of w_f, or of the baseline's single iterate.
    #[arg(long = "eta-f")]
    eta_f: Option<f64>,
    #[arg(long = "eta-s")]
    eta_s: Option<f64>,
    /// Adversary block length (default tau).
    #[arg(long)]
    block: Option<usize>,
    /// Majority minus minority block count of the adversary.
    #[arg(long)]
    gap: Option<usize>,
    #[arg(long = "trace-stride")]
    trace_stride: Option<usize>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random draws per lemma suite.
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    /// Seeded permutation plans to check.
    #[arg(long, default_value_t = 1000)]
    plans: usize,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long = "T")]
    horizon: usize,
    #[arg(long)]
    block: usize,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn build_config(args: RunArgs) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let (base, file_out) = match &args.config {
        Some(path) => {
            let (c, o) = ConfigFile::load(path)?.into_config()?;
            (Some(c), o)
        }
        None => (None, None),
    };
    let kind = match (&args.experiment, &base) {
        (Some(e), _) => e.parse::<ExperimentKind>()?,
        (None, Some(b)) => b.experiment,
        (None, None) => return Err(invalid("--experiment is required")),
    };
    let horizon = args
        .horizon
        .or(base.as_ref().map(|b| b.horizon))
        .ok_or_else(|| invalid("--T is required"))?;
    let tau = args
        .tau
        .or(base.as_ref().map(|b| b.tau))
        .ok_or_else(|| invalid("--tau is required"))?;

    let mut cfg = match base {
        Some(b) if b.experiment == kind && b.horizon == horizon && b.tau == tau => b,
        Some(b) => ExperimentConfig {
            experiment: kind,
            horizon,
            tau,
            windows: kind.default_windows(horizon, tau),
            keep_traces: kind == ExperimentKind::DpmdTrace,
            ..b
        },
        None => ExperimentConfig::new(kind, horizon, tau),
    };
    if !args.windows.is_empty() {
        let mut windows = Vec::new();
        for spec in &args.windows {
            windows.extend(parse_window_spec(spec)?);
        }
        cfg.windows = windows;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(g) = &args.geometry {
        cfg.geometry = g.parse::<GeometryChoice>()?;
    }
    cfg.eta_first = args.eta_f.or(cfg.eta_first);
    cfg.eta_second = args.eta_s.or(cfg.eta_second);
    cfg.block_size = args.block.or(cfg.block_size);
    cfg.gap = args.gap.or(cfg.gap);
    if let Some(s) = args.trace_stride {
        cfg.trace_stride = s;
    }
    if cfg.eta_second.is_some() && !cfg.experiment.uses_dpmd() {
        return Err(invalid("--eta-s only applies to DPMD experiments"));
    }
    cfg.validate()?;
    Ok((cfg, args.out.or(file_out)))
}

fn run(args: RunArgs) -> Result<i32> {
    let (cfg, out) = build_config(args)?;
    let report = run_experiment(&cfg)?;
    for w in &report.windows {
        if let Some(msg) = &w.warning {
            eprintln!("warning: M = {}: {msg}", w.row.window);
        }
    }
    match &out {
        Some(path) => emit_report(&report, path)?,
        None => {
            let stdout = std::io::stdout().lock();
            let mut sink = if cfg.keep_traces {
                write_traces(stdout, &trace_rows(&report))?
            } else {
                write_aggregate(stdout, &report.rows())?
            };
            if let Some(msg) = &report.failure {
                let _ = writeln!(sink, "# failed: {}", msg.replace('\n', " "));
            }
        }
    }
    match report.failure {
        Some(msg) => {
            eprintln!("ollp: run failed: {msg}");
            Ok(1)
        }
        None => Ok(0),
    }
}

fn run_validate(args: ValidateArgs) -> Result<i32> {
    if args.draws == 0 || args.plans == 0 {
        return Err(invalid("--draws and --plans must be positive"));
    }
    let mut reports = validate::lemma_suites(args.draws, args.seed);
    reports.push(validate::expected_gradient_equality());
    reports.extend(validate::structural_suites(args.plans, args.seed));
    let mut ok = true;
    for r in &reports {
        ok &= r.passed;
        println!(
            "{} {:<26} {:>6} cases  {}",
            if r.passed { "ok  " } else { "FAIL" },
            r.name,
            r.cases,
            r.detail
        );
    }
    Ok(if ok { 0 } else { 1 })
}

fn run_oracle(args: OracleArgs) -> Result<i32> {
    let mut rng = substream(args.seed, Component::Oracle, 0);
    let est = khintchine_regret_oracle(args.horizon, args.block, args.reps, &mut rng)?;
    let k = args.horizon / args.block;
    println!("mean {:.3}", est.mean);
    println!("stderr {:.3}", est.stderr);
    println!("reps {}", est.reps);
    println!("exact {:.3}", args.block as f64 * rademacher_abs_sum_exact(k));
    println!("asymptotic {:.3}", args.block as f64 * rademacher_abs_sum_asymptotic(k));
    Ok(0)
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(*a),
        Command::Validate(a) => run_validate(a),
        Command::Oracle(a) => run_oracle(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ollp: error: {e}");
            1
        }
    }
}
