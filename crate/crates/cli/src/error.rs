use std::path::PathBuf;

use thiserror::Error;

/// Exit status for validation failures (bad files, schema, ids, budgets).
pub const EXIT_VALIDATION: u8 = 1;
/// Exit status for violated numerical invariants.
pub const EXIT_INVARIANT: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] qinstrument::Error),
    #[error("invariant violated: {0}")]
    Violation(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Engine errors are attributed to the field they arose from.
    pub(crate) fn at(path: impl Into<String>, e: qinstrument::Error) -> Self {
        if is_numerical(&e) {
            CliError::Engine(e)
        } else {
            CliError::schema(path, e.to_string())
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine(e) if is_numerical(e) => EXIT_INVARIANT,
            CliError::Violation(_) => EXIT_INVARIANT,
            _ => EXIT_VALIDATION,
        }
    }
}

fn is_numerical(e: &qinstrument::Error) -> bool {
    use qinstrument::Error as E;
    matches!(
        e,
        E::ZeroNormalization { .. } | E::Incompleteness { .. } | E::ZeroOverlap { .. }
    )
}
