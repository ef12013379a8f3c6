use std::fmt;

/// Which stage of a nested solve failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveLevel {
    /// Signal frequency where the group-velocity term crosses zero.
    GroupVelocity,
    /// Signal frequency where the group-velocity-dispersion term crosses zero.
    Dispersion,
    /// Pump wavelength.
    Pump,
    /// Temperature.
    Temperature,
}

impl fmt::Display for SolveLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveLevel::GroupVelocity => "group-velocity matching (signal)",
            SolveLevel::Dispersion => "dispersion cancellation (signal)",
            SolveLevel::Pump => "pump wavelength",
            SolveLevel::Temperature => "temperature",
        };
        f.write_str(s)
    }
}

/// A residual curve sampled during a coarse bracket scan, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScanTrace {
    pub parameter: Vec<f64>,
    /// `None` where the residual could not be evaluated.
    pub residual: Vec<Option<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(
        "{quantity} = {value} is outside the validity range [{min}, {max}] of model '{model}'"
    )]
    OutOfValidityRange {
        model: String,
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("unknown polarization '{0}' (expected ordinary/o/te or extraordinary/e/tm)")]
    UnknownPolarization(String),
    #[error("model '{model}' has no waveguide correction for width {width_um} um")]
    UnknownWidth { model: String, width_um: f64 },
    #[error(
        "model '{model}' gives non-physical index {index} at {wavelength_nm} nm, {temperature_c} C"
    )]
    NonPhysicalIndex {
        model: String,
        index: f64,
        wavelength_nm: f64,
        temperature_c: f64,
    },
    #[error("finite-difference stencil of order {order} at omega = {omega:e} rad/s leaves the validity range")]
    StencilOutOfRange { order: u8, omega: f64 },
    #[error("{what} did not converge (last disagreement {residual:e})")]
    NonConverged { what: String, residual: f64 },
    #[error("invalid derivative order {0} (expected 1, 2 or 3)")]
    InvalidOrder(u8),

    #[error("pump minus signal and idler propagation constants is {mismatch:e} rad/m; first-order forward QPM needs a positive value")]
    NonPositiveMismatch { mismatch: f64 },

    #[error("no root of the {level} residual in [{lo}, {hi}]{}", cause.as_ref().map(|c| format!(" (first failed sample: {c})")).unwrap_or_default())]
    NoRootInBracket {
        level: SolveLevel,
        lo: f64,
        hi: f64,
        scan: ScanTrace,
        /// First evaluation failure seen during the scan, if any.
        cause: Option<String>,
    },
    #[error("{} sign changes of the {level} residual; brackets: {brackets:?}", brackets.len())]
    MultipleRoots {
        level: SolveLevel,
        brackets: Vec<(f64, f64)>,
    },
    #[error("the {level} residual vanishes on the whole bracket (degenerate root)")]
    DegenerateRoot { level: SolveLevel },
    #[error("{} design solutions found in the {level} scan; brackets: {brackets:?}", brackets.len())]
    NonUnique {
        level: SolveLevel,
        brackets: Vec<(f64, f64)>,
    },

    #[error("non-physical wavelengths: {0}")]
    NonPhysical(String),
    #[error("cannot normalize: {0}")]
    Normalization(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("empty spectrum")]
    EmptySpectrum,
    #[error("level fraction {0} must lie strictly between 0 and 1")]
    FractionOutOfRange(f64),
    #[error("tuning map does not cover a broadband region: {0}")]
    InsufficientRange(String),

    #[error("no fringe found in scan: {0}")]
    NoFringeFound(String),
    #[error("contrast {contrast} exceeds the lossless bound {bound} for R = {reflectivity}")]
    GainImplied {
        contrast: f64,
        bound: f64,
        reflectivity: f64,
    },
    #[error("facet reflectivity {0} must lie strictly between 0 and 1")]
    InvalidReflectivity(f64),
    #[error("invalid fringe contrast {0}")]
    InvalidContrast(f64),
    #[error("refractive index {0} must be finite and >= 1")]
    InvalidIndex(f64),
    #[error("detected rate {detected} is below the background rate {background}")]
    NegativeNetRate { detected: f64, background: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}:{line}: {message}")]
    ModelParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
