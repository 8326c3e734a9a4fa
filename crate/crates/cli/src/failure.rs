use std::path::{Path, PathBuf};

use flightcell::Error;
use serde::Serialize;

/// A failed command: exit status plus the JSON line written to stderr.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip)]
    pub exit: i32,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: "config",
            message: message.into(),
            path: None,
            exit: 2,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    }

    pub fn json_line(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"code\":\"{}\"}}", self.code))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (code, exit, path) = match &e {
            Error::InvalidParameter { .. } => ("invalid_parameter", 2, None),
            Error::UnknownParameter(_) => ("unknown_parameter", 2, None),
            Error::InvalidMesh(_) => ("invalid_mesh", 2, None),
            Error::Input(_) => ("input", 2, None),
            Error::Parse { .. } => ("parse", 2, None),
            Error::Json(_) => ("json", 2, None),
            Error::Csv(_) => ("csv", 2, None),
            Error::Io { path, source } => {
                let exit = match source.kind() {
                    std::io::ErrorKind::NotFound => 2,
                    _ => 1,
                };
                ("io", exit, Some(path.clone()))
            }
            Error::Domain { .. } => ("domain", 1, None),
            Error::Kinetics(_) => ("kinetics", 1, None),
            Error::StepFailure { .. } => ("step_failure", 1, None),
            Error::Simulation { .. } => ("simulation", 1, None),
            Error::Calibration(_) => ("calibration", 1, None),
            Error::Normalization { .. } => ("normalization", 1, None),
        };
        Self {
            code,
            message,
            path,
            exit,
        }
    }
}
