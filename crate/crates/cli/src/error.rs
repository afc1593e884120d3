use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

/// Exit codes. Parse failures get one code per cause.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const RAGGED: i32 = 2;
    pub const NON_NUMERIC: i32 = 3;
    pub const EMPTY: i32 = 4;
    pub const USAGE: i32 = 64;
    pub const DATA: i32 = 65;
    pub const NUMERICAL: i32 = 70;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseKind {
    Ragged,
    NonNumeric,
    Empty,
    /// Well-formed row that does not describe a point of the requested space.
    InvalidPoint,
    Malformed,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("{}line {line}: {message}", path.as_deref().map(|p| format!("{p}: ")).unwrap_or_default())]
    Parse {
        kind: ParseKind,
        path: Option<String>,
        line: u64,
        message: String,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] bernergy::Error),
}

impl CliError {
    pub fn with_path(self, p: &Path) -> Self {
        match self {
            CliError::Parse {
                kind, line, message, ..
            } => CliError::Parse {
                kind,
                path: Some(p.display().to_string()),
                line,
                message,
            },
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use bernergy::Error as E;
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Parse { kind, .. } => match kind {
                ParseKind::Ragged | ParseKind::Malformed | ParseKind::InvalidPoint => exit::RAGGED,
                ParseKind::NonNumeric => exit::NON_NUMERIC,
                ParseKind::Empty => exit::EMPTY,
            },
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(e) => match e {
                E::Constraint { .. } | E::SpaceMismatch { .. } | E::DimensionMismatch { .. } | E::NonFinite(_) => {
                    exit::DATA
                }
                E::Quadrature { .. } => exit::NUMERICAL,
                E::Domain(_)
                | E::InvalidInput(_)
                | E::Contract(_)
                | E::DegenerateBasis { .. }
                | E::UnknownPsi(_)
                | E::UnknownKernel(_) => exit::USAGE,
            },
        }
    }

    fn kind(&self) -> &'static str {
        use bernergy::Error as E;
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                E::Constraint { .. } => "constraint",
                E::SpaceMismatch { .. } | E::DimensionMismatch { .. } => "mismatch",
                E::NonFinite(_) => "non_finite",
                E::Quadrature { .. } => "quadrature",
                E::Domain(_) => "domain",
                E::InvalidInput(_) => "invalid_input",
                E::Contract(_) => "contract",
                E::DegenerateBasis { .. } => "degenerate_basis",
                E::UnknownPsi(_) => "unknown_psi",
                E::UnknownKernel(_) => "unknown_kernel",
            },
        }
    }

    /// Machine-readable description used in the error envelope.
    pub fn to_json(&self) -> Value {
        let mut details = match self {
            CliError::Parse { kind, path, line, .. } => json!({ "cause": kind, "path": path, "line": line }),
            CliError::Io { path, .. } => json!({ "path": path }),
            CliError::Core(bernergy::Error::Constraint {
                condition,
                magnitude,
                tolerance,
            }) => json!({ "condition": condition, "magnitude": magnitude, "tolerance": tolerance }),
            CliError::Core(bernergy::Error::Quadrature {
                estimate,
                error_bound,
                tol,
            }) => json!({ "estimate": estimate, "error_bound": error_bound, "tol": tol }),
            _ => json!({}),
        };
        details["exit_code"] = json!(self.exit_code());
        json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "details": details,
        })
    }
}
