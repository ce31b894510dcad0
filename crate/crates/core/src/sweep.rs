//! Parameter scans and the purity optimizer.
//!
//! Every sweep point is computed independently (the poling period is
//! re-solved at each wavelength), so points are evaluated in parallel and
//! emitted in input order.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::sig6;
use crate::dispersion::CrystalDatabase;
use crate::error::{Error, Result};
use crate::jsa::{self, bandwidth_nm_to_ghz, GridSpan, PumpSpec, DEFAULT_GRID_POINTS};
use crate::phasematch::{self, PhaseMatchConfig, PmType};
use crate::schmidt;

/// Points evaluated together before rows are emitted.
const CHUNK: usize = 16;

/// Default optimizer grid per axis.
pub const OPTIMIZER_GRID: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Lambda0,
    Length,
    DeltaLambda,
}

impl SweepVariable {
    pub fn column(self) -> &'static str {
        match self {
            SweepVariable::Lambda0 => "lambda0_nm",
            SweepVariable::Length => "length_mm",
            SweepVariable::DeltaLambda => "delta_lambda_nm",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Lambda0 => "lambda0",
            SweepVariable::Length => "length",
            SweepVariable::DeltaLambda => "delta_lambda",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutput {
    Period,
    Tilt,
    Purity,
    IdlerFwhm,
}

impl FromStr for SweepOutput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "period" => Ok(SweepOutput::Period),
            "tilt" => Ok(SweepOutput::Tilt),
            "purity" => Ok(SweepOutput::Purity),
            "idler_fwhm" => Ok(SweepOutput::IdlerFwhm),
            _ => Err(Error::validation("sweep", "outputs", format!("unknown output `{s}`"))),
        }
    }
}

/// Per-crystal fixed parameters; missing fields fall back to the spec-wide ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParameters {
    pub lambda0_nm: Option<f64>,
    pub length_mm: Option<f64>,
    pub delta_lambda_nm: Option<f64>,
}

impl FixedParameters {
    fn or(&self, fallback: &FixedParameters) -> FixedParameters {
        FixedParameters {
            lambda0_nm: self.lambda0_nm.or(fallback.lambda0_nm),
            length_mm: self.length_mm.or(fallback.length_mm),
            delta_lambda_nm: self.delta_lambda_nm.or(fallback.delta_lambda_nm),
        }
    }
}

/// A one-dimensional scan, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub crystals: Vec<String>,
    pub pm_type: PmType,
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    #[serde(default)]
    pub fixed: FixedParameters,
    /// Overrides of `fixed` per crystal name.
    #[serde(default)]
    pub per_crystal: std::collections::BTreeMap<String, FixedParameters>,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<SweepOutput>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Fixed JSA half-window in nm; the length-scaled default when absent.
    #[serde(default)]
    pub half_span_nm: Option<f64>,
}

fn default_outputs() -> Vec<SweepOutput> {
    vec![SweepOutput::Period, SweepOutput::Tilt, SweepOutput::Purity]
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl SweepSpec {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Scan values from start to stop inclusive.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.start + self.step * k as f64).collect()
    }

    fn span(&self) -> GridSpan {
        self.half_span_nm.map_or(GridSpan::Auto, GridSpan::HalfWidthNm)
    }

    fn fixed_for(&self, crystal: &str) -> FixedParameters {
        self.per_crystal
            .get(crystal)
            .map_or_else(|| self.fixed.clone(), |p| p.or(&self.fixed))
    }

    pub fn validate(&self, db: &CrystalDatabase) -> Result<()> {
        let err = |field: &str, msg: String| Err(Error::validation("sweep", field, msg));
        if self.crystals.is_empty() {
            return err("crystals", "no crystals listed".into());
        }
        for name in &self.crystals {
            db.crystal(name)?;
        }
        for name in self.per_crystal.keys() {
            if !self.crystals.contains(name) {
                return err("per_crystal", format!("`{name}` is not in crystals"));
            }
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.stop < self.start {
            return err("stop", format!("range [{}, {}] is empty", self.start, self.stop));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return err("step", format!("{} must be positive", self.step));
        }
        if self.start <= 0.0 {
            return err("start", format!("{} must be positive", self.start));
        }
        if self.outputs.is_empty() {
            return err("outputs", "no outputs requested".into());
        }
        if self.grid_points < 2 {
            return err("grid_points", format!("{} is below 2", self.grid_points));
        }
        if let Some(w) = self.half_span_nm {
            if !(w.is_finite() && w > 0.0) {
                return err("half_span_nm", format!("{w} must be positive"));
            }
        }
        for name in &self.crystals {
            let fixed = self.fixed_for(name);
            let needs = [
                (SweepVariable::Lambda0, "fixed.lambda0_nm", fixed.lambda0_nm),
                (SweepVariable::Length, "fixed.length_mm", fixed.length_mm),
                (SweepVariable::DeltaLambda, "fixed.delta_lambda_nm", fixed.delta_lambda_nm),
            ];
            for (var, field, value) in needs {
                let needed = var != self.variable
                    && (var == SweepVariable::Lambda0 || self.needs_jsa());
                match value {
                    Some(v) if !(v.is_finite() && v > 0.0) => {
                        return err(field, format!("{v} must be positive for {name}"))
                    }
                    None if needed => return err(field, format!("missing for {name}")),
                    _ => {}
                }
            }
            if self.variable == SweepVariable::Lambda0 {
                let rec = db.crystal(name)?;
                let [lo, hi] = rec.common_range();
                if self.start / 2.0 <= lo || self.stop >= hi {
                    return err(
                        "start",
                        format!(
                            "[{}, {}] nm (pump at half) leaves the {name} validity range [{lo}, {hi}] nm",
                            self.start, self.stop
                        ),
                    );
                }
            }
        }
        Ok(())
    }

    fn needs_jsa(&self) -> bool {
        self.outputs
            .iter()
            .any(|o| matches!(o, SweepOutput::Purity | SweepOutput::IdlerFwhm))
    }
}

/// One evaluated point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub crystal: String,
    pub lambda0_nm: f64,
    pub length_mm: Option<f64>,
    pub delta_lambda_nm: Option<f64>,
    pub period_nm: Option<f64>,
    pub tilt_deg: Option<f64>,
    pub purity: Option<f64>,
    pub idler_fwhm_nm: Option<f64>,
    pub idler_fwhm_ghz: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Point<'a> {
    crystal: &'a str,
    lambda0_nm: f64,
    length_mm: Option<f64>,
    delta_lambda_nm: Option<f64>,
}

fn evaluate(
    db: &CrystalDatabase,
    pm_type: PmType,
    point: Point<'_>,
    outputs: &[SweepOutput],
    span: GridSpan,
    n: usize,
) -> Result<SweepRow> {
    let want = |o| outputs.contains(&o);
    let mut row = SweepRow {
        crystal: point.crystal.to_string(),
        lambda0_nm: point.lambda0_nm,
        length_mm: point.length_mm,
        delta_lambda_nm: point.delta_lambda_nm,
        period_nm: None,
        tilt_deg: None,
        purity: None,
        idler_fwhm_nm: None,
        idler_fwhm_ghz: None,
    };
    let period = phasematch::poling_period(db, point.crystal, pm_type, point.lambda0_nm)?;
    if want(SweepOutput::Period) {
        row.period_nm = Some(period);
    }
    if want(SweepOutput::Tilt) {
        row.tilt_deg = Some(phasematch::tilt_angle(db, point.crystal, pm_type, point.lambda0_nm)?);
    }
    if want(SweepOutput::Purity) || want(SweepOutput::IdlerFwhm) {
        let (length_mm, delta) = match (point.length_mm, point.delta_lambda_nm) {
            (Some(l), Some(d)) => (l, d),
            _ => return Err(Error::validation("sweep", "fixed", "length and pump width are required")),
        };
        let config = PhaseMatchConfig {
            crystal: point.crystal.to_string(),
            pm_type,
            lambda0_nm: point.lambda0_nm,
            period_nm: period,
            length_mm,
        };
        let pump = PumpSpec::new(point.lambda0_nm, delta)?;
        let jsa = jsa::compute_jsa(db, &config, &pump, span, n)?;
        if want(SweepOutput::Purity) {
            row.purity = Some(schmidt::purity_of(&jsa));
        }
        if want(SweepOutput::IdlerFwhm) {
            let idler = jsa::idler_marginal(&jsa)?;
            row.idler_fwhm_nm = Some(idler.fwhm_nm);
            row.idler_fwhm_ghz = Some(bandwidth_nm_to_ghz(point.lambda0_nm, idler.fwhm_nm));
        }
    }
    Ok(row)
}

fn run_points<F>(
    db: &CrystalDatabase,
    pm_type: PmType,
    points: &[Point<'_>],
    outputs: &[SweepOutput],
    span: GridSpan,
    n: usize,
    mut emit: F,
) -> Result<()>
where
    F: FnMut(SweepRow) -> Result<()>,
{
    for chunk in points.chunks(CHUNK) {
        let rows: Vec<Result<SweepRow>> = chunk
            .par_iter()
            .map(|p| evaluate(db, pm_type, *p, outputs, span, n))
            .collect();
        for row in rows {
            emit(row?)?;
        }
    }
    Ok(())
}

/// Runs `spec`, handing rows to `emit` in scan order (crystal-major).
pub fn run_sweep<F>(db: &CrystalDatabase, spec: &SweepSpec, emit: F) -> Result<()>
where
    F: FnMut(SweepRow) -> Result<()>,
{
    spec.validate(db)?;
    let values = spec.values();
    let mut points = Vec::with_capacity(values.len() * spec.crystals.len());
    for name in &spec.crystals {
        let fixed = spec.fixed_for(name);
        for &v in &values {
            let mut p = Point {
                crystal: name,
                lambda0_nm: fixed.lambda0_nm.unwrap_or(f64::NAN),
                length_mm: fixed.length_mm,
                delta_lambda_nm: fixed.delta_lambda_nm,
            };
            match spec.variable {
                SweepVariable::Lambda0 => p.lambda0_nm = v,
                SweepVariable::Length => p.length_mm = Some(v),
                SweepVariable::DeltaLambda => p.delta_lambda_nm = Some(v),
            }
            points.push(p);
        }
    }
    run_points(db, spec.pm_type, &points, &spec.outputs, spec.span(), spec.grid_points, emit)
}

/// Rows of (λ0, Λ, θ, purity) with the period re-solved at each wavelength.
pub fn purity_vs_wavelength(
    db: &CrystalDatabase,
    crystal: &str,
    pm_type: PmType,
    length_mm: f64,
    delta_lambda_nm: f64,
    wavelengths_nm: &[f64],
) -> Result<Vec<SweepRow>> {
    let points: Vec<Point<'_>> = wavelengths_nm
        .iter()
        .map(|&l| Point {
            crystal,
            lambda0_nm: l,
            length_mm: Some(length_mm),
            delta_lambda_nm: Some(delta_lambda_nm),
        })
        .collect();
    let outputs = [SweepOutput::Period, SweepOutput::Tilt, SweepOutput::Purity];
    let mut rows = Vec::with_capacity(points.len());
    run_points(db, pm_type, &points, &outputs, GridSpan::Auto, DEFAULT_GRID_POINTS, |r| {
        rows.push(r);
        Ok(())
    })?;
    Ok(rows)
}

/// Rows of (L, idler FWHM in nm and GHz).
pub fn idler_bandwidth_vs_length(
    db: &CrystalDatabase,
    crystal: &str,
    pm_type: PmType,
    lambda0_nm: f64,
    delta_lambda_nm: f64,
    lengths_mm: &[f64],
) -> Result<Vec<SweepRow>> {
    let points: Vec<Point<'_>> = lengths_mm
        .iter()
        .map(|&l| Point {
            crystal,
            lambda0_nm,
            length_mm: Some(l),
            delta_lambda_nm: Some(delta_lambda_nm),
        })
        .collect();
    let mut rows = Vec::with_capacity(points.len());
    run_points(
        db,
        pm_type,
        &points,
        &[SweepOutput::IdlerFwhm],
        GridSpan::Auto,
        DEFAULT_GRID_POINTS,
        |r| {
            rows.push(r);
            Ok(())
        },
    )?;
    Ok(rows)
}

/// Search box and resolution of [`optimize_purity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub length_range_mm: [f64; 2],
    pub delta_lambda_range_nm: [f64; 2],
    pub grid: usize,
    pub grid_points: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            length_range_mm: [1.0, 20.0],
            delta_lambda_range_nm: [0.05, 0.5],
            grid: OPTIMIZER_GRID,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub length_mm: f64,
    pub delta_lambda_nm: f64,
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_length_mm: f64,
    pub best_delta_lambda_nm: f64,
    pub best_purity: f64,
    /// Every evaluated point, coarse grid first, then the refinement stencil.
    pub evaluations: Vec<Evaluation>,
}

fn log_axis(range: [f64; 2], n: usize) -> Result<Vec<f64>> {
    let [lo, hi] = range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(Error::validation("optimize", "range", format!("[{lo}, {hi}] is empty or not positive")));
    }
    if lo == hi || n < 2 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| {
            if k == n - 1 {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// Incumbent under the tie-break: higher purity, then smaller L, then smaller Δλ.
fn better(candidate: &Evaluation, incumbent: &Evaluation) -> bool {
    use std::cmp::Ordering;
    match candidate.purity.total_cmp(&incumbent.purity) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (candidate.length_mm, candidate.delta_lambda_nm) < (incumbent.length_mm, incumbent.delta_lambda_nm),
    }
}

/// Log-uniform grid search over (L, Δλ) followed by one refinement pass at
/// half the grid step around the incumbent.
pub fn optimize_purity(
    db: &CrystalDatabase,
    crystal: &str,
    pm_type: PmType,
    lambda0_nm: f64,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    let lengths = log_axis(settings.length_range_mm, settings.grid)?;
    let deltas = log_axis(settings.delta_lambda_range_nm, settings.grid)?;
    let period = phasematch::poling_period(db, crystal, pm_type, lambda0_nm)?;
    let evaluate = |length_mm: f64, delta_lambda_nm: f64| -> Option<Evaluation> {
        let config = PhaseMatchConfig {
            crystal: crystal.to_string(),
            pm_type,
            lambda0_nm,
            period_nm: period,
            length_mm,
        };
        let pump = PumpSpec::new(lambda0_nm, delta_lambda_nm).ok()?;
        let jsa = jsa::compute_jsa(db, &config, &pump, GridSpan::Auto, settings.grid_points).ok()?;
        Some(Evaluation {
            length_mm,
            delta_lambda_nm,
            purity: schmidt::purity_of(&jsa),
        })
    };
    let coarse: Vec<(f64, f64)> = lengths
        .iter()
        .flat_map(|&l| deltas.iter().map(move |&d| (l, d)))
        .collect();
    let mut evaluations: Vec<Evaluation> = coarse
        .par_iter()
        .map(|&(l, d)| evaluate(l, d))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let pick = |evals: &[Evaluation]| {
        evals.iter().fold(None::<Evaluation>, |best, e| match best {
            Some(b) if !better(e, &b) => Some(b),
            _ => Some(*e),
        })
    };
    let incumbent = pick(&evaluations).ok_or_else(|| {
        Error::validation(crystal, "optimize", "every grid point failed to evaluate")
    })?;

    let ratio = |axis: &[f64]| if axis.len() > 1 { (axis[1] / axis[0]).sqrt() } else { 1.0 };
    let (rl, rd) = (ratio(&lengths), ratio(&deltas));
    let clamp = |v: f64, r: [f64; 2]| v.clamp(r[0], r[1]);
    let mut stencil = Vec::new();
    for fl in [1.0 / rl, 1.0, rl] {
        for fd in [1.0 / rd, 1.0, rd] {
            if fl == 1.0 && fd == 1.0 {
                continue;
            }
            let p = (
                clamp(incumbent.length_mm * fl, settings.length_range_mm),
                clamp(incumbent.delta_lambda_nm * fd, settings.delta_lambda_range_nm),
            );
            if !stencil.contains(&p) && !coarse.contains(&p) {
                stencil.push(p);
            }
        }
    }
    let refined: Vec<Evaluation> = stencil
        .par_iter()
        .map(|&(l, d)| evaluate(l, d))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    evaluations.extend(refined);
    let best = pick(&evaluations).expect("incumbent exists");
    Ok(OptimizationResult {
        best_length_mm: best.length_mm,
        best_delta_lambda_nm: best.delta_lambda_nm,
        best_purity: best.purity,
        evaluations,
    })
}

/// `# key = value` provenance lines.
pub fn write_header<W: Write>(out: &mut W, entries: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in entries {
        writeln!(out, "# {k} = {v}")?;
    }
    Ok(())
}

/// Column names for the requested outputs.
pub fn csv_columns(outputs: &[SweepOutput]) -> Vec<&'static str> {
    let mut cols = vec!["crystal", "lambda0_nm", "length_mm", "delta_lambda_nm"];
    for o in [SweepOutput::Period, SweepOutput::Tilt, SweepOutput::Purity, SweepOutput::IdlerFwhm] {
        if outputs.contains(&o) {
            match o {
                SweepOutput::Period => cols.push("period_nm"),
                SweepOutput::Tilt => cols.push("tilt_deg"),
                SweepOutput::Purity => cols.push("purity"),
                SweepOutput::IdlerFwhm => cols.extend(["idler_fwhm_nm", "idler_fwhm_ghz"]),
            }
        }
    }
    cols
}

/// One CSV line for `row` restricted to `outputs`.
pub fn csv_row(row: &SweepRow, outputs: &[SweepOutput]) -> String {
    let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    let mut fields = vec![
        row.crystal.clone(),
        sig6(row.lambda0_nm),
        opt(row.length_mm),
        opt(row.delta_lambda_nm),
    ];
    for o in [SweepOutput::Period, SweepOutput::Tilt, SweepOutput::Purity, SweepOutput::IdlerFwhm] {
        if outputs.contains(&o) {
            match o {
                SweepOutput::Period => fields.push(opt(row.period_nm)),
                SweepOutput::Tilt => fields.push(opt(row.tilt_deg)),
                SweepOutput::Purity => fields.push(opt(row.purity)),
                SweepOutput::IdlerFwhm => {
                    fields.push(opt(row.idler_fwhm_nm));
                    fields.push(opt(row.idler_fwhm_ghz));
                }
            }
        }
    }
    fields.join(",")
}
