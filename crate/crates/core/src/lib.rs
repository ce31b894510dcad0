//! Counter-propagating SPDC source design: dispersion, phase matching,
//! joint spectral amplitudes, Schmidt purity, HOM interference and sweeps.

pub mod cli;
pub mod dispersion;
pub mod error;
pub mod hom;
pub mod jsa;
pub mod phasematch;
pub mod schmidt;
pub mod sweep;

pub use dispersion::{CrystalDatabase, CrystalRecord, OpticalAxis, SellmeierForm, SellmeierModel};
pub use error::{Error, Result};
pub use hom::{HomCurve, InterferingPair};
pub use jsa::{JsaMatrix, MarginalSpectrum, PumpSpec, SpectralGrid};
pub use phasematch::{PhaseMatchConfig, PmType, QpmVector};
pub use schmidt::SchmidtDecomposition;

/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT_NM_PER_PS: f64 = 299_792.458;
