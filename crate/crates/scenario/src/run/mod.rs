mod e2e;
mod fleet;
mod lpwan;
mod paint;
mod plant;

use crate::metrics::{render_report, Metrics};
use crate::schema::{Scenario, ScenarioKind};
use crate::{validate, ScenarioError};

pub use fleet::{run_fleet, FleetRun};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub csv: String,
    pub report: String,
    pub passed: bool,
}

/// Validates, runs, checks the declared assertions and renders the report.
pub fn run_scenario(s: &Scenario) -> Result<RunOutcome, ScenarioError> {
    let violations = validate(s);
    if !violations.is_empty() {
        return Err(ScenarioError::Invalid(violations));
    }
    let mut m = Metrics::new();
    m.meta("scenario", &s.name);
    m.meta("kind", s.kind.as_str());
    m.meta("seed", s.seed);
    match s.kind {
        ScenarioKind::PaintStation => paint::run(s, &mut m)?,
        ScenarioKind::CompressorFleet => {
            run_fleet(s, &mut m)?;
        }
        ScenarioKind::PlantScale => plant::run(s, &mut m)?,
        ScenarioKind::LpwanFleet => lpwan::run(s, &mut m)?,
        ScenarioKind::E2eFull => e2e::run(s, &mut m)?,
    }
    let passed = m.check_all(&s.assertions);
    let csv = m.into_csv();
    let report = render_report(&csv);
    Ok(RunOutcome { csv, report, passed })
}

fn run_err(e: impl ToString) -> ScenarioError {
    ScenarioError::Run(e.to_string())
}
