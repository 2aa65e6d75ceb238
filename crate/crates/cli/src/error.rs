use std::fmt;
use std::path::Path;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    pub fn missing(path: &Path, hint: &str) -> Self {
        CliError {
            code: EXIT_MISSING,
            message: format!("missing artifact {}; {hint}", path.display()),
        }
    }

    pub fn stale(what: &str, hint: &str) -> Self {
        CliError {
            code: EXIT_MISSING,
            message: format!("{what} was produced with different settings; {hint}"),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError {
            code: 1,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<fex_sde::Error> for CliError {
    fn from(e: fex_sde::Error) -> Self {
        use fex_sde::Error as E;
        let code = match &e {
            E::Config(_) | E::Shape { .. } | E::Parse(_) => EXIT_CONFIG,
            E::Numerical(_) | E::Domain(_) => EXIT_NUMERICAL,
            E::Io(_) | E::Json(_) => 1,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}
