//! Error type of the driver and its total mapping onto process exit codes.

use qpm_core::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 1;
pub const EXIT_NO_ROOT: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_VALIDITY: u8 = 4;
pub const EXIT_AMBIGUOUS: u8 = 5;
pub const EXIT_NUMERICAL: u8 = 6;
pub const EXIT_SPECTRUM: u8 = 7;
pub const EXIT_METROLOGY: u8 = 8;
pub const EXIT_NON_PHYSICAL: u8 = 9;

/// Code and meaning, in the order printed by `--help`.
pub const EXIT_CODES: &[(u8, &str)] = &[
    (EXIT_OK, "success"),
    (EXIT_IO, "file could not be read or written"),
    (EXIT_NO_ROOT, "no root in a solver bracket"),
    (
        EXIT_CONFIG,
        "invalid configuration, model file or input file",
    ),
    (
        EXIT_VALIDITY,
        "wavelength or temperature outside the model validity range",
    ),
    (EXIT_AMBIGUOUS, "multiple, non-unique or degenerate roots"),
    (EXIT_NUMERICAL, "numerical method did not converge"),
    (
        EXIT_SPECTRUM,
        "spectrum could not be normalized or measured",
    ),
    (EXIT_METROLOGY, "fringe or brightness analysis failed"),
    (
        EXIT_NON_PHYSICAL,
        "non-physical index, wavelength or phase mismatch",
    ),
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} fringe scans could not be analyzed (see loss_report.csv flags)")]
    ScansFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::ScansFailed { .. } => EXIT_METROLOGY,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::NoRootInBracket { .. } => EXIT_NO_ROOT,
        Error::InvalidConfig(_)
        | Error::ModelParse { .. }
        | Error::UnknownPolarization(_)
        | Error::UnknownWidth { .. }
        | Error::InvalidOrder(_) => EXIT_CONFIG,
        Error::OutOfValidityRange { .. } | Error::StencilOutOfRange { .. } => EXIT_VALIDITY,
        Error::MultipleRoots { .. } | Error::NonUnique { .. } | Error::DegenerateRoot { .. } => {
            EXIT_AMBIGUOUS
        }
        Error::NonConverged { .. } => EXIT_NUMERICAL,
        Error::Normalization(_)
        | Error::DegenerateSpectrum(_)
        | Error::EmptySpectrum
        | Error::FractionOutOfRange(_)
        | Error::InsufficientRange(_) => EXIT_SPECTRUM,
        Error::NoFringeFound(_)
        | Error::GainImplied { .. }
        | Error::InvalidReflectivity(_)
        | Error::InvalidContrast(_)
        | Error::InvalidIndex(_)
        | Error::NegativeNetRate { .. } => EXIT_METROLOGY,
        Error::NonPhysical(_)
        | Error::NonPhysicalIndex { .. }
        | Error::NonPositiveMismatch { .. } => EXIT_NON_PHYSICAL,
    }
}

pub fn exit_code_table() -> String {
    let mut s = String::from("Exit codes:\n");
    for (code, what) in EXIT_CODES {
        s.push_str(&format!("  {code}  {what}\n"));
    }
    s
}
