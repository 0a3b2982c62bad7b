use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use iiot_scenario::{
    list_scenarios, load_scenario, run_scenario, validate, ScenarioError, EXIT_ASSERTION, EXIT_INVALID, EXIT_PASS,
};

#[derive(Parser)]
#[command(name = "iiotsim", version, about = "Deterministic industrial IoT scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and check its assertions.
    Run {
        file: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated duration in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Override a scenario value, e.g. `--set placement=CLOUD`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Parse and validate a scenario without running it.
    Validate { file: String },
    /// Print the built-in scenario names.
    ListScenarios,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn fail(e: &ScenarioError) -> ExitCode {
    eprintln!("error: {e}");
    exit(EXIT_INVALID)
}

fn write(path: &PathBuf, text: &str) -> Result<(), ExitCode> {
    std::fs::write(path, text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        exit(EXIT_INVALID)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for name in list_scenarios() {
                println!("{name}");
            }
            exit(EXIT_PASS)
        }
        Command::Validate { file } => {
            let s = match load_scenario(&file, &[]) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            let violations = validate(&s);
            if violations.is_empty() {
                println!("{}: ok", s.name);
                exit(EXIT_PASS)
            } else {
                fail(&ScenarioError::Invalid(violations))
            }
        }
        Command::Run {
            file,
            seed,
            duration,
            mut set,
            metrics_out,
            report,
        } => {
            if let Some(seed) = seed {
                set.push(format!("seed={seed}"));
            }
            if let Some(d) = duration {
                set.push(format!("duration_s={d:?}"));
            }
            let s = match load_scenario(&file, &set) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            let out = match run_scenario(&s) {
                Ok(o) => o,
                Err(e) => return fail(&e),
            };
            if let Some(path) = &metrics_out {
                if let Err(code) = write(path, &out.csv) {
                    return code;
                }
            }
            match &report {
                Some(path) => {
                    if let Err(code) = write(path, &out.report) {
                        return code;
                    }
                }
                None => print!("{}", out.report),
            }
            exit(if out.passed { EXIT_PASS } else { EXIT_ASSERTION })
        }
    }
}
