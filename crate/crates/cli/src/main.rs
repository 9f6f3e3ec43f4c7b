//! `ggred`: runs geometric check scenarios from a JSON config or from the
//! built-in registry and prints a JSON or plain-text report.
//!
//! Exit codes: 0 pass, 1 check failure, 2 config error, 3 scenario setup error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ggred_core::runner::{self, RunError, ScenarioConfig, CHECKS, SCENARIOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "ggred", version, about = "Numeric checks for generalized geometry reductions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format for reports and listings.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Also write the output to this file.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for check evaluation; never changes results.
    #[arg(long, global = true, env = "GGRED_JOBS")]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario from a config file or from the registry.
    Run {
        /// JSON scenario config.
        #[arg(conflicts_with = "scenario", required_unless_present = "scenario")]
        config: Option<PathBuf>,
        /// Built-in scenario name (see `list`).
        #[arg(long)]
        scenario: Option<String>,
        /// Parameter override, repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Check id to run, repeatable; default is the scenario's list.
        #[arg(long = "check", value_name = "ID")]
        checks: Vec<String>,
    },
    /// List the scenarios, their parameters and the check ids.
    List,
    /// Validate a config and dry-run the scenario setup.
    Validate { config: PathBuf },
}

fn read_config(path: &Path) -> Result<ScenarioConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text).map_err(|e| match e {
        RunError::Config(m) => RunError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn apply_sets(cfg: &mut ScenarioConfig, sets: &[String]) -> Result<(), RunError> {
    for s in sets {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| RunError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| RunError::Config(format!("--set {key}: `{value}` is not a number")))?;
        cfg.parameters.insert(key.trim().to_string(), value);
    }
    Ok(())
}

fn listing(format: Format) -> String {
    if format == Format::Json {
        let v = serde_json::json!({ "scenarios": SCENARIOS, "checks": CHECKS });
        return serde_json::to_string_pretty(&v).expect("listing serializes") + "\n";
    }
    let mut s = String::from("scenarios\n");
    for sc in SCENARIOS {
        let _ = writeln!(s, "  {:<16} {}", sc.name, sc.description);
        for p in sc.parameters {
            let _ = writeln!(s, "      {:<16} default {:<6} {}", p.name, p.default, p.help);
        }
        let _ = writeln!(s, "      checks: {}", sc.checks.join(", "));
    }
    s.push_str("checks\n");
    for c in CHECKS {
        let _ = writeln!(s, "  {:<16} {}", c.id, c.description);
    }
    s
}

fn emit(out: &str, report: Option<&Path>) -> Result<(), RunError> {
    print!("{out}");
    if let Some(path) = report {
        std::fs::write(path, out).map_err(|e| RunError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool, RunError> {
    if let Some(jobs) = cli.jobs {
        runner::configure_jobs(jobs.max(1));
    }
    match &cli.command {
        Command::List => {
            emit(&listing(cli.format), cli.report.as_deref())?;
            Ok(true)
        }
        Command::Validate { config } => {
            let mut cfg = read_config(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            runner::validate(&cfg)?;
            emit("ok\n", cli.report.as_deref())?;
            Ok(true)
        }
        Command::Run { config, scenario, set, checks } => {
            let mut cfg = match (config, scenario) {
                (Some(path), _) => read_config(path)?,
                (None, Some(name)) => ScenarioConfig::new(name.clone()),
                (None, None) => unreachable!("clap requires one of them"),
            };
            apply_sets(&mut cfg, set)?;
            if !checks.is_empty() {
                cfg.checks = checks.clone();
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let report = runner::run(&cfg)?;
            let text = match cli.format {
                Format::Json => report.to_json() + "\n",
                Format::Text => report.to_text(),
            };
            emit(&text, cli.report.as_deref())?;
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("ggred: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
