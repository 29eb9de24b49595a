use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use savg::scenario::{aggregate_reports, load_config, run_suites, RunReport, ScenarioConfig, Suite};

#[derive(Parser)]
#[command(name = "savg", version, about = "Stochastic averaging on simplices: simulation and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boundary compatibility, zero-set scan and declared constants
    Validate(RunArgs),
    /// Law convergence to the limit jump chain (plus configured oracle, coupling and variation checks)
    Run(RunArgs),
    /// Uniform ergodic errors and hitting probabilities
    Ergodic(RunArgs),
    /// Finite-dimensional distributions of the limit chain
    Fdd(RunArgs),
    /// The four-zero counterexample
    Counterexample(RunArgs),
    /// Aggregate pass/fail over the JSON reports in a directory
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; the config's `output`, else `out`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured number of paths
    #[arg(long)]
    paths: Option<usize>,
}

fn load(args: &RunArgs) -> Result<ScenarioConfig, String> {
    let mut config = load_config(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        config.integrator.seed = seed;
    }
    if let Some(paths) = args.paths {
        config.integrator.n_paths = paths;
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn summarize(report: &RunReport) {
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let ok = report.checks.iter().filter(|c| c.passed).count();
    println!("{}: {ok}/{} checks passed", report.scenario, report.checks.len());
}

fn execute(args: &RunArgs, suite: Suite) -> Result<bool, String> {
    let config = load(args)?;
    let out = args.out.clone().or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let report = run_suites(&config, &[suite]).map_err(|e| e.to_string())?;
    let (csv, json) = report.emit(&out, suite.name()).map_err(|e| format!("writing to {}: {e}", out.display()))?;
    summarize(&report);
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(report.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(a) => execute(a, Suite::Validate),
        Command::Run(a) => execute(a, Suite::Law),
        Command::Ergodic(a) => execute(a, Suite::Ergodic),
        Command::Fdd(a) => execute(a, Suite::Fdd),
        Command::Counterexample(a) => execute(a, Suite::Counterexample),
        Command::Report { out } => aggregate_reports(out)
            .map(|agg| {
                print!("{}", agg.render());
                agg.passed
            })
            .map_err(|e| format!("reading {}: {e}", out.display())),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
