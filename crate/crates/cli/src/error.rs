use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Domain(#[from] bdspectral::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("verification failed: {}", .0.join(", "))]
    VerifyFailed(Vec<String>),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Domain(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    fn kind(&self) -> &'static str {
        use bdspectral::Error as E;
        match self {
            CliError::Domain(e) => match e {
                E::Param { .. } => "param",
                E::Pole(_) => "pole",
                E::InvolutionUndefined(_) => "involution_undefined",
                E::StepTooLarge { .. } => "step_too_large",
                E::Unbounded { .. } => "unbounded",
                E::DivisionByZero { .. } => "division_by_zero",
                E::NotMirrorSymmetric { .. } => "not_mirror_symmetric",
                E::ParityViolation { .. } => "parity_violation",
                E::Convergence { .. } => "convergence",
                E::DegenerateBins { .. } => "degenerate_bins",
                E::Invalid(_) => "invalid",
            },
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::VerifyFailed(_) => "verify_failed",
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::VerifyFailed(names) = self {
            v["failed_checks"] = json!(names);
        }
        v
    }
}
