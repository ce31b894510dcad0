//! Counter-propagating phase matching.
//!
//! The idler travels against the pump, so its wavevector enters the
//! mismatch with a minus sign and the required grating vector is large
//! (sub-micron poling periods).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dispersion::{CrystalDatabase, OpticalAxis};
use crate::error::{Error, Result};

const BISECTION_CAP: usize = 200;
const BISECTION_RTOL: f64 = 1e-12;

/// Polarization configuration as (pump, signal, idler) axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PmType {
    /// z → z + z
    #[serde(rename = "type0")]
    Type0,
    /// y → z + y
    #[serde(rename = "type2a")]
    Type2A,
    /// y → y + z
    #[serde(rename = "type2b")]
    Type2B,
}

impl PmType {
    pub const ALL: [PmType; 3] = [PmType::Type0, PmType::Type2A, PmType::Type2B];

    pub fn axes(self) -> (OpticalAxis, OpticalAxis, OpticalAxis) {
        use OpticalAxis::{Y, Z};
        match self {
            PmType::Type0 => (Z, Z, Z),
            PmType::Type2A => (Y, Z, Y),
            PmType::Type2B => (Y, Y, Z),
        }
    }

    pub fn pump_axis(self) -> OpticalAxis {
        self.axes().0
    }

    pub fn signal_axis(self) -> OpticalAxis {
        self.axes().1
    }

    pub fn idler_axis(self) -> OpticalAxis {
        self.axes().2
    }

    /// Search interval that contains the GVM root for the KTP family.
    pub fn default_gvm_bracket(self) -> [f64; 2] {
        match self {
            PmType::Type0 => [2000.0, 3200.0],
            PmType::Type2A => [1000.0, 2000.0],
            PmType::Type2B => [2000.0, 3000.0],
        }
    }
}

impl fmt::Display for PmType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PmType::Type0 => "type0",
            PmType::Type2A => "type2a",
            PmType::Type2B => "type2b",
        })
    }
}

impl FromStr for PmType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "type0" | "0" => Ok(PmType::Type0),
            "type2a" | "type2" | "typeii" | "typeiia" | "2a" | "ii" => Ok(PmType::Type2A),
            "type2b" | "typeiib" | "2b" => Ok(PmType::Type2B),
            _ => Err(Error::validation(
                "pm_type",
                "value",
                format!("unknown phase-matching type `{s}` (expected type0, type2a or type2b)"),
            )),
        }
    }
}

/// Grating vector of a poled crystal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpmVector {
    /// 2π/Λ in rad/µm.
    pub k_qpm: f64,
}

impl QpmVector {
    pub fn from_period_nm(period_nm: f64) -> Self {
        Self {
            k_qpm: 2.0 * std::f64::consts::PI / (period_nm * 1e-3),
        }
    }

    pub fn period_nm(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k_qpm * 1e3
    }
}

/// A poled crystal in a given configuration, degenerate at `lambda0_nm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchConfig {
    pub crystal: String,
    pub pm_type: PmType,
    /// Degenerate signal/idler wavelength; the pump is centred at half of it.
    pub lambda0_nm: f64,
    pub period_nm: f64,
    pub length_mm: f64,
}

impl PhaseMatchConfig {
    /// Configuration with the poling period solved for degeneracy at `lambda0_nm`.
    pub fn solved(
        db: &CrystalDatabase,
        crystal: &str,
        pm_type: PmType,
        lambda0_nm: f64,
        length_mm: f64,
    ) -> Result<Self> {
        let period_nm = poling_period(db, crystal, pm_type, lambda0_nm)?;
        let config = Self {
            crystal: crystal.to_string(),
            pm_type,
            lambda0_nm,
            period_nm,
            length_mm,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(&self.crystal, field, format!("{v} must be positive")))
            }
        };
        positive("lambda0_nm", self.lambda0_nm)?;
        positive("period_nm", self.period_nm)?;
        positive("length_mm", self.length_mm)
    }

    pub fn qpm(&self) -> QpmVector {
        QpmVector::from_period_nm(self.period_nm)
    }

    pub fn pump_center_nm(&self) -> f64 {
        self.lambda0_nm / 2.0
    }
}

/// Δk = k_s(λs) − k_i(λi) + 2π/Λ − k_p(λp) in rad/µm with 1/λp = 1/λs + 1/λi.
pub fn delta_k(db: &CrystalDatabase, config: &PhaseMatchConfig, lambda_s: f64, lambda_i: f64) -> Result<f64> {
    let rec = db.crystal(&config.crystal)?;
    let (p, s, i) = config.pm_type.axes();
    let lambda_p = 1.0 / (1.0 / lambda_s + 1.0 / lambda_i);
    let ks = rec.wavevector(s, lambda_s)?;
    let ki = rec.wavevector(i, lambda_i)?;
    let kp = rec.wavevector(p, lambda_p)?;
    Ok(ks - ki + config.qpm().k_qpm - kp)
}

/// Δk without a grating (Λ → ∞).
pub fn delta_k_unpoled(
    db: &CrystalDatabase,
    crystal: &str,
    pm_type: PmType,
    lambda_s: f64,
    lambda_i: f64,
) -> Result<f64> {
    let rec = db.crystal(crystal)?;
    let (p, s, i) = pm_type.axes();
    let lambda_p = 1.0 / (1.0 / lambda_s + 1.0 / lambda_i);
    Ok(rec.wavevector(s, lambda_s)? - rec.wavevector(i, lambda_i)? - rec.wavevector(p, lambda_p)?)
}

/// Poling period (nm) that phase-matches the degenerate pair at `lambda0_nm`.
pub fn poling_period(db: &CrystalDatabase, crystal: &str, pm_type: PmType, lambda0_nm: f64) -> Result<f64> {
    let denominator = -delta_k_unpoled(db, crystal, pm_type, lambda0_nm, lambda0_nm)?;
    if !(denominator > 0.0) {
        return Err(Error::PhaseMatchImpossible {
            crystal: crystal.to_string(),
            pm_type: pm_type.to_string(),
            lambda0_nm,
            denominator,
        });
    }
    Ok(2.0 * std::f64::consts::PI / denominator * 1e3)
}

/// Group-velocity mismatch n_g,p(λ/2) − n_g,s(λ); proportional to k′_p − k′_s.
pub fn gvm_mismatch(db: &CrystalDatabase, crystal: &str, pm_type: PmType, lambda0_nm: f64) -> Result<f64> {
    let rec = db.crystal(crystal)?;
    let ngp = rec.group_index(pm_type.pump_axis(), lambda0_nm / 2.0)?;
    let ngs = rec.group_index(pm_type.signal_axis(), lambda0_nm)?;
    Ok(ngp - ngs)
}

/// Degenerate wavelength where pump and signal group velocities match.
pub fn gvm_wavelength(db: &CrystalDatabase, crystal: &str, pm_type: PmType, bracket: [f64; 2]) -> Result<f64> {
    let g = |l: f64| gvm_mismatch(db, crystal, pm_type, l);
    let (mut lo, mut hi) = (bracket[0].min(bracket[1]), bracket[0].max(bracket[1]));
    let (mut glo, ghi) = (g(lo)?, g(hi)?);
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    if glo.signum() == ghi.signum() || !glo.is_finite() || !ghi.is_finite() {
        return Err(Error::NoSignChange { lo_nm: lo, hi_nm: hi });
    }
    let tol = BISECTION_RTOL * glo.abs().max(ghi.abs());
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid)?;
        if gm.abs() < tol || hi - lo <= 4.0 * f64::EPSILON * mid {
            return Ok(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        iterations: BISECTION_CAP,
    })
}

/// Signed JSA ridge tilt in degrees at the degenerate point:
/// tan θ = −(n_g,p − n_g,s)/(n_g,p + n_g,i).
pub fn tilt_angle(db: &CrystalDatabase, crystal: &str, pm_type: PmType, lambda0_nm: f64) -> Result<f64> {
    let rec = db.crystal(crystal)?;
    let (p, s, i) = pm_type.axes();
    let ngp = rec.group_index(p, lambda0_nm / 2.0)?;
    let ngs = rec.group_index(s, lambda0_nm)?;
    let ngi = rec.group_index(i, lambda0_nm)?;
    Ok((-(ngp - ngs) / (ngp + ngi)).atan().to_degrees())
}
