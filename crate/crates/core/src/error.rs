use std::path::PathBuf;

use thiserror::Error;

use crate::dispersion::OpticalAxis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("validation error in {record}/{field}: {message}")]
    Validation {
        record: String,
        field: String,
        message: String,
    },

    #[error("unknown crystal `{0}`")]
    UnknownCrystal(String),

    #[error("crystal {crystal} has no dispersion model for axis {axis}")]
    UnknownAxis { crystal: String, axis: OpticalAxis },

    #[error(
        "wavelength {wavelength_nm} nm is outside the valid range [{min_nm}, {max_nm}] nm of {crystal}/{axis}"
    )]
    OutOfRange {
        crystal: String,
        axis: OpticalAxis,
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("phase matching is impossible for {crystal} {pm_type} at {lambda0_nm} nm (k_p - k_s + k_i = {denominator} rad/um)")]
    PhaseMatchImpossible {
        crystal: String,
        pm_type: String,
        lambda0_nm: f64,
        denominator: f64,
    },

    #[error("no sign change of the group-velocity mismatch in [{lo_nm}, {hi_nm}] nm")]
    NoSignChange { lo_nm: f64, hi_nm: f64 },

    #[error("root refinement did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("{axis} marginal peak or half-maximum crossing lies on the grid boundary; enlarge the span")]
    PeakOnBoundary { axis: &'static str },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("JSA is not normalized (sum |f|^2 = {0})")]
    NotNormalized(f64),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("grid of {n} points exceeds the brute-force limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(
        record: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            record: record.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 4,
            Error::NoSignChange { .. }
            | Error::NoConvergence { .. }
            | Error::PhaseMatchImpossible { .. } => 3,
            _ => 2,
        }
    }
}
