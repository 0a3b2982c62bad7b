//! Scenario files, the deterministic runner behind `iiotsim`, and the
//! metrics CSV and report it writes.

pub mod build;
pub mod load;
pub mod metrics;
pub mod run;
pub mod schema;
pub mod validate;

use std::fmt;

use thiserror::Error;

pub use load::{list_scenarios, load_scenario, parse_scenario};
pub use metrics::{render_report, Metrics};
pub use run::{run_scenario, RunOutcome};
pub use schema::Scenario;
pub use validate::validate;

/// One failed check, located by a dotted path into the scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("bad override: {0}")]
    Override(String),
    #[error("validation failed:\n{}", fmt_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("run failed: {0}")]
    Run(String),
}

fn fmt_violations(vs: &[Violation]) -> String {
    vs.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n")
}

impl From<Violation> for ScenarioError {
    fn from(v: Violation) -> Self {
        ScenarioError::Invalid(vec![v])
    }
}

/// Process exit status for the CLI.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
