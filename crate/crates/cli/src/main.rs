//! `ppc`: verification suites, seed-paired episode batches, parameter sweeps
//! and overhead benchmarks for the pace-and-path correction wrapper.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ppc_core::experiment::{self, parse_values, BenchStats, Command, RunSpec, SweepAxis};
use ppc_core::sim::parse_regime_list;
use ppc_core::verify::{run_suite, VerifyOptions};
use ppc_core::PpcError;
use serde_json::json;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "ppc", version, about = "Pace-and-path correction experiment harness")]
struct Cli {
    /// Flat key=value file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for episode batches (0 = all cores).
    #[arg(long, global = true, env = "PPC_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Oracle-equivalence and closed-form identity suite.
    Verify(VerifyArgs),
    /// Seed-paired episode batches with per-episode CSV and a JSON summary.
    Run(RunArgs),
    /// Grid evaluation along one axis.
    Sweep(SweepArgs),
    /// Per-call latency of the chunk correction.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Largest window in the oracle and profile families.
    #[arg(long)]
    k_max: Option<usize>,
    /// Random instances per oracle family.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Negative control: perturbs the closed form so the suite must fail.
    #[arg(long)]
    inject_fault: bool,
    /// Writes the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct EpisodeArgs {
    /// Comma-separated regimes, or `all`.
    #[arg(long)]
    regimes: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed_base: Option<u64>,
    /// Multiplicative magnitude noise on the velocity signal.
    #[arg(long)]
    noise_sv: Option<f64>,
    /// Angular noise on the velocity signal, degrees.
    #[arg(long)]
    noise_st: Option<f64>,
    #[arg(long)]
    beta_in: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Pins α instead of the closed form.
    #[arg(long)]
    fixed_alpha: Option<f64>,
    /// Overrides the derived outer EMA rate.
    #[arg(long)]
    beta_out: Option<f64>,
    /// Disables the latch stabilizer.
    #[arg(long)]
    no_latch: bool,
    /// Drops the acceleration term.
    #[arg(long)]
    first_order: bool,
    /// Follower per-step cap in meters.
    #[arg(long)]
    max_policy_step: Option<f64>,
    #[arg(long)]
    planning_latency_ticks: Option<u64>,
    #[arg(long)]
    max_ticks: Option<u64>,
    /// CSV destination; the summary goes next to it as `.summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    episodes: EpisodeArgs,
    /// Runs only the PPC arm.
    #[arg(long)]
    no_ppc_pair: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_parser = ["beta_out", "fixed_alpha", "noise"])]
    axis: Option<String>,
    /// Comma-separated grid values.
    #[arg(long)]
    values: Option<String>,
    #[command(flatten)]
    episodes: EpisodeArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    calls: Option<usize>,
    /// Step floor K used by the timed calls.
    #[arg(long)]
    k: Option<usize>,
    /// P99 budget in milliseconds; exceeding it fails the run.
    #[arg(long, default_value_t = 0.5)]
    budget_ms: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Distinguishes usage errors (exit 2) from runtime failures (exit 1).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    Usage(e.to_string()).into()
}

fn to_usage(e: PpcError) -> anyhow::Error {
    match e {
        PpcError::InvalidConfig(_) | PpcError::InvalidLambda(_) => usage(e),
        other => other.into(),
    }
}

fn base_spec(cli: &Cli, command: Command) -> Result<RunSpec> {
    let mut spec = RunSpec::new(command);
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        spec.apply_config_text(&text).map_err(to_usage)?;
    }
    if let Some(j) = cli.jobs {
        spec.jobs = j;
    }
    Ok(spec)
}

fn apply_episode_args(spec: &mut RunSpec, a: &EpisodeArgs) -> Result<()> {
    if let Some(r) = &a.regimes {
        spec.regimes = parse_regime_list(r).map_err(to_usage)?;
    }
    macro_rules! set {
        ($($field:ident => $target:ident),* $(,)?) => {
            $(if let Some(v) = a.$field { spec.$target = v; })*
        };
    }
    set!(
        trials => trials,
        seed_base => seed_base,
        noise_sv => noise_sv,
        noise_st => noise_st,
        beta_in => beta_in,
        lambda => lambda,
        max_policy_step => max_policy_step,
        planning_latency_ticks => planning_latency_ticks,
        max_ticks => max_ticks,
    );
    if a.fixed_alpha.is_some() {
        spec.fixed_alpha = a.fixed_alpha;
    }
    if a.beta_out.is_some() {
        spec.beta_out = a.beta_out;
    }
    if a.no_latch {
        spec.latch = false;
    }
    if a.first_order {
        spec.second_order = false;
    }
    if let Some(out) = &a.out {
        spec.out = Some(out.display().to_string());
    }
    Ok(())
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

/// CSV to `--out` (or stdout) and the JSON summary beside it (or stderr).
fn emit(spec: &RunSpec, csv: &str, summary: &serde_json::Value) -> Result<()> {
    let pretty = serde_json::to_string_pretty(summary)?;
    match &spec.out {
        Some(out) => {
            let path = PathBuf::from(out);
            write_file(&path, csv)?;
            write_file(&summary_path(&path), &(pretty + "\n"))?;
            eprintln!("wrote {} and {}", path.display(), summary_path(&path).display());
        }
        None => {
            std::io::stdout().write_all(csv.as_bytes())?;
            eprintln!("{pretty}");
        }
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Result<bool> {
    let mut spec = base_spec(cli, Command::Verify)?;
    if let Some(k) = a.k_max {
        spec.k_max = k;
    }
    if let Some(out) = &a.out {
        spec.out = Some(out.display().to_string());
    }
    if !(1..=ppc_core::path::MAX_PROFILE_K).contains(&spec.k_max) {
        return Err(usage(format!("--k-max must lie in 1..={}", ppc_core::path::MAX_PROFILE_K)));
    }
    let opts = VerifyOptions {
        k_max: spec.k_max,
        instances: a.instances,
        seed: a.seed,
        inject_fault: a.inject_fault,
    };
    let report = run_suite(&opts)?;
    for f in &report.families {
        let verdict = match (f.passed, f.informational) {
            (true, _) => "PASS",
            (false, true) => "INFO",
            (false, false) => "FAIL",
        };
        println!(
            "{verdict} {:<44} cases={:<5} max_dev={:.3e} tol={:.1e}",
            f.name, f.cases, f.max_deviation, f.tolerance
        );
    }
    for f in report.failing() {
        eprintln!("failing property: {}", f.name);
    }
    if let Some(out) = &spec.out {
        let body = json!({ "runspec": spec, "report": report, "passed": report.passed() });
        write_file(Path::new(out), &(serde_json::to_string_pretty(&body)? + "\n"))?;
    }
    Ok(report.passed())
}

fn print_run_table(results: &experiment::RunResults) {
    eprintln!("{:<14} {:>8} {:>8} {:>8}", "regime", "baseline", "ppc", "delta");
    for s in results.summarize() {
        let base = s.baseline.map(|b| format!("{:.3}", b.rate)).unwrap_or_else(|| "-".into());
        let delta = s.paired_delta.map(|d| format!("{d:+.3}")).unwrap_or_else(|| "-".into());
        eprintln!("{:<14} {:>8} {:>8.3} {:>8}", s.regime.name(), base, s.ppc.rate, delta);
    }
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> Result<bool> {
    let mut spec = base_spec(cli, Command::Run)?;
    apply_episode_args(&mut spec, &a.episodes)?;
    if a.no_ppc_pair {
        spec.ppc_pair = false;
    }
    spec.validate().map_err(to_usage)?;
    let results = experiment::run(&spec)?;
    print_run_table(&results);
    emit(&spec, &results.to_csv(), &results.summary_json(now_unix()))?;
    Ok(true)
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<bool> {
    let mut spec = base_spec(cli, Command::Sweep)?;
    apply_episode_args(&mut spec, &a.episodes)?;
    if let Some(axis) = &a.axis {
        spec.sweep_axis = Some(axis.parse::<SweepAxis>().map_err(to_usage)?);
    }
    if let Some(v) = &a.values {
        spec.sweep_values = parse_values(v).map_err(to_usage)?;
    }
    spec.validate().map_err(to_usage)?;
    let results = experiment::sweep(&spec)?;
    emit(&spec, &results.to_csv(), &results.summary_json(now_unix()))?;
    Ok(true)
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<bool> {
    let mut spec = base_spec(cli, Command::Bench)?;
    if let Some(c) = a.calls {
        spec.calls = c;
    }
    if let Some(k) = a.k {
        spec.bench_k = k;
    }
    if let Some(out) = &a.out {
        spec.out = Some(out.display().to_string());
    }
    if spec.calls == 0 {
        return Err(usage("--calls must be positive"));
    }
    let stats: BenchStats = experiment::bench_correct_chunk(spec.calls, spec.bench_k, a.seed).map_err(to_usage)?;
    let within = stats.p99_ms <= a.budget_ms;
    println!(
        "k={} calls={} warmup={} mean={:.4}ms median={:.4}ms p90={:.4}ms p99={:.4}ms max={:.4}ms budget={}ms {}",
        stats.k,
        stats.calls,
        stats.warmup,
        stats.mean_ms,
        stats.median_ms,
        stats.p90_ms,
        stats.p99_ms,
        stats.max_ms,
        a.budget_ms,
        if within { "PASS" } else { "FAIL" }
    );
    if let Some(out) = &spec.out {
        let body = json!({ "runspec": spec, "stats": stats, "budget_ms": a.budget_ms, "within_budget": within });
        write_file(Path::new(out), &(serde_json::to_string_pretty(&body)? + "\n"))?;
    }
    Ok(within)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Cmd::Verify(a) => cmd_verify(&cli, a),
        Cmd::Run(a) => cmd_run(&cli, a),
        Cmd::Sweep(a) => cmd_sweep(&cli, a),
        Cmd::Bench(a) => cmd_bench(&cli, a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
