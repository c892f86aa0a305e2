//! Scenario runner behind the `affgeo` command.

pub mod bundled;
pub mod run;
pub mod scenario;

pub use bundled::{bundled, find_bundled, Bundled};
pub use run::{run, write_outcome, Artifact, Comparison, Outcome, Report};
pub use scenario::{Kind, Scenario};

/// Exit status for a run whose checks all pass.
pub const EXIT_PASS: i32 = 0;
/// Exit status when at least one check fails.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for unreadable or malformed scenarios.
pub const EXIT_PARSE: i32 = 2;
/// Exit status for numerical or domain errors while running.
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("scenario error: {0}")]
    Parse(String),
    #[error("runtime error: {0}")]
    Domain(String),
    #[error("output error: {0}")]
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Parse(_) => EXIT_PARSE,
            RunError::Domain(_) | RunError::Output(_) => EXIT_DOMAIN,
        }
    }
}

/// Reads a scenario from a file path, falling back to a bundled name.
pub fn load(target: &str) -> Result<Scenario, RunError> {
    let path = std::path::Path::new(target);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Parse(format!("cannot read {target}: {e}")))?;
        return Scenario::from_toml(&text);
    }
    match find_bundled(target) {
        Some(b) => Scenario::from_toml(b.source),
        None => Err(RunError::Parse(format!("{target}: no such file or bundled scenario"))),
    }
}
