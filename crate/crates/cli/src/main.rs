use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use vhip::simulator::{compare_pair, find_threshold};
use vhip::{run_scenario, ControllerRegistry, Outcome};
use vhip_cli::output::{write_json, write_trajectory, ComparisonRecord, RunRecord, SweepRecord};
use vhip_cli::{selftest, RunConfig};

const EXIT_ERROR: u8 = 1;
const EXIT_FAILED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "vhip", version, about = "Push-recovery simulator for variable-height inverted pendulum controllers")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Override a configuration entry, e.g. `impulse.magnitude=4.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output file; overrides `output.path`.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Seed for randomized checks; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trajectory.
    Simulate,
    /// Bisect the largest impulse a controller recovers from.
    Sweep {
        /// Controller to sweep; defaults to `scenario.controller`.
        #[arg(long)]
        controller: Option<String>,
        /// Impulse known to be recovered, N·s.
        #[arg(long, default_value_t = 0.0)]
        lo: f64,
        /// Impulse known to fail, N·s.
        #[arg(long, default_value_t = 20.0)]
        hi: f64,
        /// Bracket width at which bisection stops, N·s.
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
    },
    /// Run two controllers on the same impulses.
    Compare {
        /// Comma-separated impulse magnitudes, N·s.
        #[arg(long, allow_hyphen_values = true)]
        magnitudes: String,
        #[arg(long, default_value = "fip")]
        baseline: String,
        #[arg(long, default_value = "vhip")]
        candidate: String,
    },
    /// Quick end-to-end checks of the solver and controllers.
    Selftest,
}

fn load_config(args: &GlobalArgs) -> Result<RunConfig> {
    let base = match (&args.config, &args.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    let mut config = base.with_overrides(&args.overrides)?;
    if let Some(path) = &args.output {
        config.output.path = path.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn exit_for(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Recovered => 0,
        Outcome::Failed | Outcome::Timeout => EXIT_FAILED,
    }
}

fn simulate(config: &RunConfig, registry: &ControllerRegistry) -> Result<u8> {
    let trajectory = run_scenario(&config.scenario, registry)?;
    let path = &config.output.path;
    write_trajectory(path, &trajectory, config.output.format)?;
    let summary_path = config.output.sibling("summary.json");
    write_json(&summary_path, &RunRecord::new(&trajectory, &config.scenario))?;
    let s = &trajectory.summary;
    println!(
        "{} at {} N·s: {}{}",
        s.controller,
        s.impulse,
        s.outcome.as_str(),
        s.failure_reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default()
    );
    println!(
        "peak omega {:.4} 1/s, peak xi_z {:.4} m (excursion {:.4} m), saturated ticks: zmp {}, height {}",
        s.peak_omega, s.peak_xi_z, s.peak_xi_z_excursion, s.zmp_saturated_ticks, s.height_saturated_ticks
    );
    println!("wrote {} and {}", path.display(), summary_path.display());
    Ok(exit_for(s.outcome))
}

fn sweep(
    config: &RunConfig,
    registry: &ControllerRegistry,
    controller: Option<&str>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<u8> {
    let controller = controller.unwrap_or(&config.scenario.controller);
    let result = find_threshold(&config.scenario, controller, bracket, tol, registry)?;
    for step in &result.trace {
        println!("  {:>10.5} N·s  {}", step.magnitude, step.outcome.as_str());
    }
    println!(
        "{controller}: threshold {:.4} N·s (fails at {:.4}, tolerance {})",
        result.threshold, result.upper, result.tolerance
    );
    let path = config.output.sibling("sweep.json");
    write_json(&path, &SweepRecord { result: &result, scenario: &config.scenario })?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn parse_magnitudes(list: &str) -> Result<Vec<f64>> {
    let magnitudes = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("invalid magnitude `{s}`")))
        .collect::<Result<Vec<_>>>()?;
    if magnitudes.is_empty() {
        bail!("--magnitudes: need at least one impulse magnitude");
    }
    if let Some(m) = magnitudes.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
        bail!("--magnitudes: magnitudes must be non-negative, got {m}");
    }
    Ok(magnitudes)
}

fn compare(
    config: &RunConfig,
    registry: &ControllerRegistry,
    magnitudes: &str,
    baseline: &str,
    candidate: &str,
) -> Result<u8> {
    let magnitudes = parse_magnitudes(magnitudes)?;
    let report = compare_pair(&config.scenario, &magnitudes, baseline, candidate, registry)?;
    let ext = config.output.format.extension();
    let stem = config.output.path.with_extension("");
    let mut files = Vec::with_capacity(report.entries.len());
    for entry in &report.entries {
        let name = |controller: &str| format!("{}_{controller}_{}.{ext}", stem.display(), entry.magnitude);
        let pair = (name(baseline), name(candidate));
        write_trajectory(pair.0.as_ref(), &entry.baseline, config.output.format)?;
        write_trajectory(pair.1.as_ref(), &entry.candidate, config.output.format)?;
        println!(
            "{:>7} N·s  {baseline} {:<9} {candidate} {:<9} max |dz| {:.3e} m  max |dxi| {:.3e} m  max |domega| {:.3e} 1/s",
            entry.magnitude,
            entry.baseline.outcome().as_str(),
            entry.candidate.outcome().as_str(),
            entry.max_zmp_difference,
            entry.max_dcm_difference,
            entry.max_candidate_delta_omega,
        );
        files.push(pair);
    }
    let path = config.output.sibling("compare.json");
    write_json(&path, &ComparisonRecord::new(&report, &files))?;
    println!("wrote {} trajectory files and {}", 2 * files.len(), path.display());
    Ok(0)
}

fn run_selftest(config: &RunConfig, registry: &ControllerRegistry) -> u8 {
    let checks = selftest::run(config.seed, registry);
    for check in &checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {}: {}", check.name, check.detail);
    }
    if checks.iter().all(|c| c.passed) {
        0
    } else {
        EXIT_FAILED
    }
}

fn run(cli: Cli) -> Result<u8> {
    let config = load_config(&cli.global)?;
    if cli.global.dump_config {
        print!("{}", config.to_toml()?);
        return Ok(0);
    }
    let registry = ControllerRegistry::with_builtins();
    match cli.command {
        Command::Simulate => simulate(&config, &registry),
        Command::Sweep { controller, lo, hi, tol } => sweep(&config, &registry, controller.as_deref(), (lo, hi), tol),
        Command::Compare {
            magnitudes,
            baseline,
            candidate,
        } => compare(&config, &registry, &magnitudes, &baseline, &candidate),
        Command::Selftest => Ok(run_selftest(&config, &registry)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_ERROR),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
