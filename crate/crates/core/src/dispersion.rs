//! Crystal database and dispersion evaluation.
//!
//! Every crystal carries one Sellmeier model per polarization axis. Models
//! are data driven: the `form` string of a database entry selects the
//! algebraic expression and the coefficient list fills it in, so adding a
//! crystal never requires a code change. Wavelengths are in nanometres at the
//! API boundary; the Sellmeier expressions themselves use micrometres.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// The packaged default database (five KTP-family crystals).
pub const DEFAULT_DATABASE: &str = include_str!("../data/crystals.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpticalAxis {
    Y,
    Z,
}

impl OpticalAxis {
    pub const ALL: [OpticalAxis; 2] = [OpticalAxis::Y, OpticalAxis::Z];
}

impl fmt::Display for OpticalAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpticalAxis::Y => f.write_str("y"),
            OpticalAxis::Z => f.write_str("z"),
        }
    }
}

impl FromStr for OpticalAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "y" => Ok(OpticalAxis::Y),
            "z" => Ok(OpticalAxis::Z),
            other => Err(Error::validation("axis", "name", format!("unknown axis `{other}`"))),
        }
    }
}

/// Algebraic Sellmeier forms understood by the database loader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SellmeierForm {
    /// `n² = A + B/(λ² − C) + D/(λ² − E)`
    #[serde(rename = "two-pole")]
    TwoPole,
    /// `n² = A + B/(1 − (λ₀/λ)²) − Dλ²`
    #[serde(rename = "single-pole-ir")]
    SinglePoleIr,
    /// `n² = A + B/(1 − C/λᵖ) + D/(1 − E/λ^q)`
    #[serde(rename = "generalized")]
    Generalized,
}

impl SellmeierForm {
    pub fn arity(self) -> usize {
        match self {
            SellmeierForm::TwoPole => 5,
            SellmeierForm::SinglePoleIr => 4,
            SellmeierForm::Generalized => 7,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            SellmeierForm::TwoPole => "two-pole",
            SellmeierForm::SinglePoleIr => "single-pole-ir",
            SellmeierForm::Generalized => "generalized",
        }
    }

    /// n² at `x` micrometres.
    fn n_squared(self, c: &[f64], x: f64) -> f64 {
        match self {
            SellmeierForm::TwoPole => {
                let x2 = x * x;
                c[0] + c[1] / (x2 - c[2]) + c[3] / (x2 - c[4])
            }
            SellmeierForm::SinglePoleIr => {
                let r = c[2] / x;
                c[0] + c[1] / (1.0 - r * r) - c[3] * x * x
            }
            SellmeierForm::Generalized => {
                c[0] + c[1] / (1.0 - c[2] * x.powf(-c[3])) + c[4] / (1.0 - c[5] * x.powf(-c[6]))
            }
        }
    }

    /// d(n²)/dx at `x` micrometres, when a closed form is available.
    fn n_squared_derivative(self, c: &[f64], x: f64) -> Option<f64> {
        let d = match self {
            SellmeierForm::TwoPole => {
                let x2 = x * x;
                let u = x2 - c[2];
                let v = x2 - c[4];
                -2.0 * x * (c[1] / (u * u) + c[3] / (v * v))
            }
            SellmeierForm::SinglePoleIr => {
                let l0sq = c[2] * c[2];
                let u = 1.0 - l0sq / (x * x);
                -c[1] * (2.0 * l0sq / (x * x * x)) / (u * u) - 2.0 * c[3] * x
            }
            SellmeierForm::Generalized => {
                let (b, cc, p, d, e, q) = (c[1], c[2], c[3], c[4], c[5], c[6]);
                let u = 1.0 - cc * x.powf(-p);
                let v = 1.0 - e * x.powf(-q);
                -b * cc * p * x.powf(-p - 1.0) / (u * u) - d * e * q * x.powf(-q - 1.0) / (v * v)
            }
        };
        Some(d)
    }
}

/// One axis' dispersion: a Sellmeier form, its coefficients and validity range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellmeierModel {
    pub form: SellmeierForm,
    pub coefficients: Vec<f64>,
    /// Validity range `[min, max]` in nm.
    pub valid_range_nm: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl SellmeierModel {
    pub fn new(form: SellmeierForm, coefficients: Vec<f64>, valid_range_nm: [f64; 2]) -> Self {
        Self {
            form,
            coefficients,
            valid_range_nm,
            source: None,
        }
    }

    pub fn contains(&self, lambda_nm: f64) -> bool {
        lambda_nm >= self.valid_range_nm[0] && lambda_nm <= self.valid_range_nm[1]
    }

    pub fn contains_strictly(&self, lambda_nm: f64) -> bool {
        lambda_nm > self.valid_range_nm[0] && lambda_nm < self.valid_range_nm[1]
    }

    /// Refractive index without range checks.
    pub fn index_unchecked(&self, lambda_nm: f64) -> f64 {
        self.form
            .n_squared(&self.coefficients, lambda_nm * 1e-3)
            .sqrt()
    }

    /// dn/dλ in nm⁻¹; analytic where the form has a closed-form derivative,
    /// Richardson-extrapolated central differences otherwise.
    pub fn dn_dlambda_unchecked(&self, lambda_nm: f64) -> f64 {
        let x = lambda_nm * 1e-3;
        match self.form.n_squared_derivative(&self.coefficients, x) {
            Some(ds) => ds / (2.0 * self.index_unchecked(lambda_nm)) * 1e-3,
            None => self.dn_dlambda_numeric(lambda_nm),
        }
    }

    /// Central-difference dn/dλ with one Richardson step (h and h/2).
    pub fn dn_dlambda_numeric(&self, lambda_nm: f64) -> f64 {
        let h = 1e-2 * lambda_nm.max(1.0).sqrt();
        let central = |h: f64| {
            (self.index_unchecked(lambda_nm + h) - self.index_unchecked(lambda_nm - h)) / (2.0 * h)
        };
        let d1 = central(h);
        let d2 = central(h / 2.0);
        (4.0 * d2 - d1) / 3.0
    }

    fn validate(&self, record: &str, axis: OpticalAxis) -> Result<()> {
        let field = format!("{axis}");
        if self.coefficients.len() != self.form.arity() {
            return Err(Error::validation(
                record,
                format!("{field}.coefficients"),
                format!(
                    "form `{}` takes {} coefficients, found {}",
                    self.form.id(),
                    self.form.arity(),
                    self.coefficients.len()
                ),
            ));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation(record, format!("{field}.coefficients"), "non-finite coefficient"));
        }
        let [lo, hi] = self.valid_range_nm;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(Error::validation(
                record,
                format!("{field}.valid_range_nm"),
                format!("range [{lo}, {hi}] is empty or not positive"),
            ));
        }
        const SAMPLES: usize = 128;
        for k in 0..=SAMPLES {
            let lambda = lo + (hi - lo) * k as f64 / SAMPLES as f64;
            let n = self.index_unchecked(lambda);
            if !(n.is_finite() && n > 1.0) {
                return Err(Error::validation(
                    record,
                    format!("{field}.coefficients"),
                    format!("n({lambda:.1} nm) = {n} is not a physical index"),
                ));
            }
        }
        Ok(())
    }
}

/// A named crystal with its per-axis dispersion and d_eff metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalRecord {
    pub name: String,
    pub composition: String,
    pub models: BTreeMap<OpticalAxis, SellmeierModel>,
    /// d_eff for type-0 interaction in pm/V (metadata only).
    pub d_eff_type0: f64,
    /// d_eff for type-II interaction in pm/V (metadata only).
    pub d_eff_type2: f64,
    pub source: String,
}

impl CrystalRecord {
    pub fn model(&self, axis: OpticalAxis) -> Result<&SellmeierModel> {
        self.models.get(&axis).ok_or_else(|| Error::UnknownAxis {
            crystal: self.name.clone(),
            axis,
        })
    }

    fn checked(&self, axis: OpticalAxis, lambda_nm: f64, strict: bool) -> Result<&SellmeierModel> {
        let model = self.model(axis)?;
        let inside = if strict {
            model.contains_strictly(lambda_nm)
        } else {
            model.contains(lambda_nm)
        };
        if !inside || !lambda_nm.is_finite() {
            return Err(Error::OutOfRange {
                crystal: self.name.clone(),
                axis,
                wavelength_nm: lambda_nm,
                min_nm: model.valid_range_nm[0],
                max_nm: model.valid_range_nm[1],
            });
        }
        Ok(model)
    }

    pub fn refractive_index(&self, axis: OpticalAxis, lambda_nm: f64) -> Result<f64> {
        Ok(self.checked(axis, lambda_nm, false)?.index_unchecked(lambda_nm))
    }

    /// Group index n_g = n − λ dn/dλ = c·k′(ω).
    pub fn group_index(&self, axis: OpticalAxis, lambda_nm: f64) -> Result<f64> {
        let model = self.checked(axis, lambda_nm, true)?;
        Ok(model.index_unchecked(lambda_nm) - lambda_nm * model.dn_dlambda_unchecked(lambda_nm))
    }

    /// k = 2πn/λ in rad/µm.
    pub fn wavevector(&self, axis: OpticalAxis, lambda_nm: f64) -> Result<f64> {
        let n = self.refractive_index(axis, lambda_nm)?;
        Ok(wavevector_from_index(n, lambda_nm))
    }

    /// Valid range shared by both axes.
    pub fn common_range(&self) -> [f64; 2] {
        self.models.values().fold([0.0, f64::INFINITY], |acc, m| {
            [acc[0].max(m.valid_range_nm[0]), acc[1].min(m.valid_range_nm[1])]
        })
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("<unnamed>", "name", "empty crystal name"));
        }
        for axis in OpticalAxis::ALL {
            match self.models.get(&axis) {
                Some(model) => model.validate(&self.name, axis)?,
                None => {
                    return Err(Error::validation(&self.name, axis.to_string(), "missing dispersion model"))
                }
            }
        }
        for (field, value) in [
            ("d_eff_type0_pm_per_v", self.d_eff_type0),
            ("d_eff_type2_pm_per_v", self.d_eff_type2),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::validation(&self.name, field, format!("{value} is negative or not finite")));
            }
        }
        Ok(())
    }
}

pub fn wavevector_from_index(n: f64, lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * n / (lambda_nm * 1e-3)
}

// On-disk layout of the database file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatabaseFile {
    #[serde(default)]
    crystal: Vec<CrystalEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrystalEntry {
    name: String,
    composition: String,
    source: String,
    d_eff_type0_pm_per_v: f64,
    d_eff_type2_pm_per_v: f64,
    #[serde(default)]
    axes: AxisEntries,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisEntries {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<SellmeierModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z: Option<SellmeierModel>,
}

/// Read-only collection of validated crystal records.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalDatabase {
    records: BTreeMap<String, CrystalRecord>,
    checksum: String,
}

impl CrystalDatabase {
    /// The packaged five-crystal database.
    pub fn packaged() -> Self {
        Self::from_toml_str(DEFAULT_DATABASE, "<packaged>").expect("packaged crystal database is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let file: DatabaseFile = toml::from_str(text).map_err(|e| Error::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        if file.crystal.is_empty() {
            return Err(Error::Parse {
                origin: origin.to_string(),
                message: "no [[crystal]] records".to_string(),
            });
        }
        let mut records = BTreeMap::new();
        for entry in file.crystal {
            let mut models = BTreeMap::new();
            if let Some(m) = entry.axes.y {
                models.insert(OpticalAxis::Y, m);
            }
            if let Some(m) = entry.axes.z {
                models.insert(OpticalAxis::Z, m);
            }
            let record = CrystalRecord {
                name: entry.name,
                composition: entry.composition,
                models,
                d_eff_type0: entry.d_eff_type0_pm_per_v,
                d_eff_type2: entry.d_eff_type2_pm_per_v,
                source: entry.source,
            };
            record.validate()?;
            if records.contains_key(&record.name) {
                return Err(Error::validation(&record.name, "name", "duplicate crystal name"));
            }
            records.insert(record.name.clone(), record);
        }
        Ok(Self {
            records,
            checksum: sha256_hex(text.as_bytes()),
        })
    }

    /// Serializes back to the database file format.
    pub fn to_toml_string(&self) -> String {
        let file = DatabaseFile {
            crystal: self
                .records
                .values()
                .map(|r| CrystalEntry {
                    name: r.name.clone(),
                    composition: r.composition.clone(),
                    source: r.source.clone(),
                    d_eff_type0_pm_per_v: r.d_eff_type0,
                    d_eff_type2_pm_per_v: r.d_eff_type2,
                    axes: AxisEntries {
                        y: r.models.get(&OpticalAxis::Y).cloned(),
                        z: r.models.get(&OpticalAxis::Z).cloned(),
                    },
                })
                .collect(),
        };
        toml::to_string_pretty(&file).expect("database serializes")
    }

    /// SHA-256 of the text the database was parsed from.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn records(&self) -> impl Iterator<Item = &CrystalRecord> {
        self.records.values()
    }

    pub fn crystal(&self, name: &str) -> Result<&CrystalRecord> {
        self.records
            .get(name)
            .ok_or_else(|| Error::UnknownCrystal(name.to_string()))
    }

    pub fn refractive_index(&self, crystal: &str, axis: OpticalAxis, lambda_nm: f64) -> Result<f64> {
        self.crystal(crystal)?.refractive_index(axis, lambda_nm)
    }

    pub fn group_index(&self, crystal: &str, axis: OpticalAxis, lambda_nm: f64) -> Result<f64> {
        self.crystal(crystal)?.group_index(axis, lambda_nm)
    }

    pub fn wavevector(&self, crystal: &str, axis: OpticalAxis, lambda_nm: f64) -> Result<f64> {
        self.crystal(crystal)?.wavevector(axis, lambda_nm)
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
