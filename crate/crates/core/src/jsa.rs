//! Joint spectral amplitudes on uniform wavelength grids.
//!
//! Rows index the signal wavelength and columns the idler wavelength. The
//! amplitude is the Gaussian pump envelope times the sinc phase-matching
//! function, sampled uniformly in wavelength and normalized to unit
//! Frobenius norm.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::CrystalDatabase;
use crate::error::{Error, Result};
use crate::phasematch::PhaseMatchConfig;

/// Default grid size per axis.
pub const DEFAULT_GRID_POINTS: usize = 200;

/// Window half-width times crystal length, nm·mm (±3 nm at 5 mm).
pub const SPAN_LENGTH_PRODUCT_NM_MM: f64 = 15.0;

const BINARY_MAGIC: &[u8; 4] = b"JSA1";
const NORM_TOLERANCE: f64 = 1e-9;

/// Gaussian pump described by its wavelength-domain width parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    /// Degenerate down-converted wavelength; the pump is centred at half of it.
    pub lambda0_nm: f64,
    /// Width parameter Δλ of the pump envelope.
    pub delta_lambda_nm: f64,
}

impl PumpSpec {
    pub fn new(lambda0_nm: f64, delta_lambda_nm: f64) -> Result<Self> {
        if !(lambda0_nm.is_finite() && lambda0_nm > 0.0) {
            return Err(Error::validation("pump", "lambda0_nm", format!("{lambda0_nm} must be positive")));
        }
        if !(delta_lambda_nm.is_finite() && delta_lambda_nm > 0.0 && delta_lambda_nm < lambda0_nm / 2.0) {
            return Err(Error::validation(
                "pump",
                "delta_lambda_nm",
                format!("{delta_lambda_nm} must be positive and narrower than the pump wavelength"),
            ));
        }
        Ok(Self {
            lambda0_nm,
            delta_lambda_nm,
        })
    }

    pub fn center_nm(&self) -> f64 {
        self.lambda0_nm / 2.0
    }

    /// Envelope width in inverse wavelength, nm⁻¹.
    fn inverse_width(&self) -> f64 {
        let lp = self.center_nm();
        let dl = self.delta_lambda_nm;
        dl / (lp * lp - dl * dl / 4.0)
    }

    /// Exact intensity FWHM of the pump spectrum in nm (≈ 2√ln2·Δλ).
    pub fn fwhm_nm(&self) -> f64 {
        let lp = self.center_nm();
        let a = std::f64::consts::LN_2.sqrt() * self.inverse_width();
        2.0 * a * lp * lp / (1.0 - a * a * lp * lp)
    }
}

/// Pump envelope amplitude at a signal/idler wavelength pair.
pub fn pump_envelope(pump: &PumpSpec, lambda_s: f64, lambda_i: f64) -> f64 {
    let detuning = 1.0 / lambda_s + 1.0 / lambda_i - 1.0 / pump.center_nm();
    let x = detuning / pump.inverse_width();
    (-0.5 * x * x).exp()
}

/// sinc(ΔkL/2) with sinc(0) = 1.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Phase-matching amplitude sinc(ΔkL/2).
pub fn phase_matching_function(
    db: &CrystalDatabase,
    config: &PhaseMatchConfig,
    lambda_s: f64,
    lambda_i: f64,
) -> Result<f64> {
    let dk = crate::phasematch::delta_k(db, config, lambda_s, lambda_i)?;
    Ok(sinc(dk * config.length_mm * 1e3 / 2.0))
}

/// Uniform signal and idler wavelength axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
}

impl SpectralGrid {
    pub fn new(signal: Vec<f64>, idler: Vec<f64>) -> Result<Self> {
        check_axis("signal", &signal)?;
        check_axis("idler", &idler)?;
        Ok(Self { signal, idler })
    }

    /// Square grid of `n` points per axis centred on `center_nm`.
    pub fn centered(center_nm: f64, half_span_nm: f64, n: usize) -> Result<Self> {
        Self::centered_rect(center_nm, half_span_nm, half_span_nm, n, n)
    }

    pub fn centered_rect(
        center_nm: f64,
        signal_half_span_nm: f64,
        idler_half_span_nm: f64,
        n_signal: usize,
        n_idler: usize,
    ) -> Result<Self> {
        for (name, n) in [("signal", n_signal), ("idler", n_idler)] {
            if n < 2 {
                return Err(Error::Grid(format!("{name} axis needs at least 2 points, got {n}")));
            }
        }
        for half in [signal_half_span_nm, idler_half_span_nm] {
            if !(half.is_finite() && half > 0.0 && half < center_nm) {
                return Err(Error::Grid(format!("half span {half} nm is not positive or exceeds the centre")));
            }
        }
        Self::new(
            linspace(center_nm - signal_half_span_nm, center_nm + signal_half_span_nm, n_signal),
            linspace(center_nm - idler_half_span_nm, center_nm + idler_half_span_nm, n_idler),
        )
    }

    pub fn n_signal(&self) -> usize {
        self.signal.len()
    }

    pub fn n_idler(&self) -> usize {
        self.idler.len()
    }

    pub fn transposed(&self) -> Self {
        Self {
            signal: self.idler.clone(),
            idler: self.signal.clone(),
        }
    }

    /// Same sample positions up to round-off.
    pub fn matches(&self, other: &Self) -> bool {
        let close = |a: &[f64], b: &[f64]| {
            a.len() == b.len()
                && a
                    .iter()
                    .zip(b)
                    .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0))
        };
        close(&self.signal, &other.signal) && close(&self.idler, &other.idler)
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { b } else { a + step * k as f64 })
        .collect()
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::Grid(format!("{name} axis needs at least 2 points, got {}", axis.len())));
    }
    if axis.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::Grid(format!("{name} axis has non-positive or non-finite wavelengths")));
    }
    let step = (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::Grid(format!("{name} axis is not strictly increasing")));
    }
    for w in axis.windows(2) {
        let d = w[1] - w[0];
        if !(d > 0.0) || (d - step).abs() > 1e-6 * step {
            return Err(Error::Grid(format!("{name} axis is not uniform and strictly increasing")));
        }
    }
    Ok(())
}

/// Sampling window of a JSA.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum GridSpan {
    /// Half-width scaled inversely with crystal length.
    #[default]
    Auto,
    /// Fixed half-width in nm on both axes.
    HalfWidthNm(f64),
}

impl GridSpan {
    pub fn half_width_nm(self, length_mm: f64) -> f64 {
        match self {
            GridSpan::Auto => SPAN_LENGTH_PRODUCT_NM_MM / length_mm,
            GridSpan::HalfWidthNm(w) => w,
        }
    }
}

/// Normalized complex amplitudes on a signal × idler grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JsaMatrix {
    grid: SpectralGrid,
    amplitudes: Vec<Complex64>,
}

impl JsaMatrix {
    /// Normalizes `amplitudes` (row-major, signal rows) to unit Frobenius norm.
    pub fn from_amplitudes(grid: SpectralGrid, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        check_shape(&grid, &amplitudes)?;
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if !norm_sq.is_finite() {
            return Err(Error::NonFinite("JSA amplitudes"));
        }
        if norm_sq <= 0.0 {
            return Err(Error::NotNormalized(norm_sq));
        }
        let scale = 1.0 / norm_sq.sqrt();
        amplitudes.iter_mut().for_each(|z| *z *= scale);
        Ok(Self { grid, amplitudes })
    }

    /// Wraps amplitudes that are already normalized, without rescaling.
    pub fn from_normalized(grid: SpectralGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_shape(&grid, &amplitudes)?;
        let jsa = Self { grid, amplitudes };
        jsa.check_normalized()?;
        Ok(jsa)
    }

    /// Real-valued convenience constructor.
    pub fn from_real(grid: SpectralGrid, values: &[f64]) -> Result<Self> {
        Self::from_amplitudes(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn n_signal(&self) -> usize {
        self.grid.n_signal()
    }

    pub fn n_idler(&self) -> usize {
        self.grid.n_idler()
    }

    pub fn get(&self, signal: usize, idler: usize) -> Complex64 {
        self.amplitudes[signal * self.n_idler() + idler]
    }

    pub fn row(&self, signal: usize) -> &[Complex64] {
        let n = self.n_idler();
        &self.amplitudes[signal * n..(signal + 1) * n]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        if self.amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("JSA amplitudes"));
        }
        let s = self.norm_sqr();
        if (s - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(s));
        }
        Ok(())
    }

    /// Swaps the signal and idler roles.
    pub fn transposed(&self) -> Self {
        let (ns, ni) = (self.n_signal(), self.n_idler());
        let mut amplitudes = Vec::with_capacity(ns * ni);
        for c in 0..ni {
            for r in 0..ns {
                amplitudes.push(self.amplitudes[r * ni + c]);
            }
        }
        Self {
            grid: self.grid.transposed(),
            amplitudes,
        }
    }

    /// Multiplies every amplitude by e^{iφ}.
    pub fn with_global_phase(&self, phase: f64) -> Self {
        let w = Complex64::from_polar(1.0, phase);
        Self {
            grid: self.grid.clone(),
            amplitudes: self.amplitudes.iter().map(|z| z * w).collect(),
        }
    }

    /// CSV with columns `lambda_s_nm,lambda_i_nm,re,im`, full float precision.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        writeln!(out, "lambda_s_nm,lambda_i_nm,re,im")?;
        for (r, ls) in self.grid.signal.iter().enumerate() {
            for (c, li) in self.grid.idler.iter().enumerate() {
                let z = self.get(r, c);
                writeln!(out, "{ls},{li},{},{}", z.re, z.im)?;
            }
        }
        out.flush()
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<jsa csv>", e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (lineno == 0 && line.starts_with("lambda")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let parse_err = |msg: String| Error::Parse {
                origin: format!("JSA CSV line {}", lineno + 1),
                message: msg,
            };
            if fields.len() != 4 {
                return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
            }
            let mut row = [0.0; 4];
            for (slot, field) in row.iter_mut().zip(&fields) {
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(format!("`{field}`: {e}")))?;
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                origin: "JSA CSV".into(),
                message: "no samples".into(),
            });
        }
        let ni = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
        if rows.len() % ni != 0 {
            return Err(Error::Parse {
                origin: "JSA CSV".into(),
                message: format!("{} samples do not form rows of {ni}", rows.len()),
            });
        }
        let ns = rows.len() / ni;
        let signal: Vec<f64> = (0..ns).map(|r| rows[r * ni][0]).collect();
        let idler: Vec<f64> = rows[..ni].iter().map(|r| r[1]).collect();
        for (k, row) in rows.iter().enumerate() {
            if row[0] != signal[k / ni] || row[1] != idler[k % ni] {
                return Err(Error::Parse {
                    origin: "JSA CSV".into(),
                    message: format!("sample {k} is off the row-major grid"),
                });
            }
        }
        let grid = SpectralGrid::new(signal, idler)?;
        let amplitudes = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
        Self::from_normalized(grid, amplitudes)
    }

    /// Binary layout: `JSA1`, u64 n_signal, u64 n_idler, signal axis,
    /// idler axis, then row-major (re, im) pairs; all little-endian.
    pub fn write_binary<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.n_signal() as u64).to_le_bytes())?;
        out.write_all(&(self.n_idler() as u64).to_le_bytes())?;
        for x in self.grid.signal.iter().chain(&self.grid.idler) {
            out.write_all(&x.to_le_bytes())?;
        }
        for z in &self.amplitudes {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        out.flush()
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        let mut input = BufReader::new(input);
        let bad = |message: &str| Error::Parse {
            origin: "JSA binary".into(),
            message: message.into(),
        };
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != BINARY_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut word = [0u8; 8];
        let mut read_u64 = |input: &mut BufReader<R>| -> Result<u64> {
            input.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
            Ok(u64::from_le_bytes(word))
        };
        let ns = read_u64(&mut input)? as usize;
        let ni = read_u64(&mut input)? as usize;
        if ns.checked_mul(ni).is_none_or(|n| n > 1 << 28) {
            return Err(bad("implausible dimensions"));
        }
        let read_f64 = |input: &mut BufReader<R>| -> Result<f64> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b).map_err(|_| bad("truncated data"))?;
            Ok(f64::from_le_bytes(b))
        };
        let signal = (0..ns).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?;
        let idler = (0..ni).map(|_| read_f64(&mut input)).collect::<Result<Vec<_>>>()?;
        let mut amplitudes = Vec::with_capacity(ns * ni);
        for _ in 0..ns * ni {
            let re = read_f64(&mut input)?;
            let im = read_f64(&mut input)?;
            amplitudes.push(Complex64::new(re, im));
        }
        Self::from_normalized(SpectralGrid::new(signal, idler)?, amplitudes)
    }

    /// Reads a JSA file, binary when it starts with the `JSA1` magic.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::read_binary(bytes.as_slice())
        } else {
            Self::read_csv(bytes.as_slice())
        }
    }
}

fn check_shape(grid: &SpectralGrid, amplitudes: &[Complex64]) -> Result<()> {
    let expected = grid.n_signal() * grid.n_idler();
    if amplitudes.len() != expected {
        return Err(Error::Grid(format!(
            "{} amplitudes for a {}×{} grid",
            amplitudes.len(),
            grid.n_signal(),
            grid.n_idler()
        )));
    }
    Ok(())
}

/// Unnormalized α·φ on `grid`, row-major.
pub fn sample_product(
    db: &CrystalDatabase,
    config: &PhaseMatchConfig,
    pump: &PumpSpec,
    grid: &SpectralGrid,
) -> Result<Vec<Complex64>> {
    config.validate()?;
    let rec = db.crystal(&config.crystal)?;
    let (p, s, i) = config.pm_type.axes();
    let ks = grid
        .signal
        .iter()
        .map(|&l| rec.wavevector(s, l))
        .collect::<Result<Vec<_>>>()?;
    let ki = grid
        .idler
        .iter()
        .map(|&l| rec.wavevector(i, l))
        .collect::<Result<Vec<_>>>()?;
    let pump_model = rec.model(p)?;
    // range check on the extreme pump wavelengths
    let lp = |a: f64, b: f64| 1.0 / (1.0 / a + 1.0 / b);
    rec.refractive_index(p, lp(grid.signal[0], grid.idler[0]))?;
    rec.refractive_index(p, lp(*grid.signal.last().unwrap(), *grid.idler.last().unwrap()))?;

    let k_qpm = config.qpm().k_qpm;
    let half_length_um = config.length_mm * 1e3 / 2.0;
    let ni = grid.n_idler();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_signal() * ni];
    out.par_chunks_mut(ni).enumerate().for_each(|(r, row)| {
        let ls = grid.signal[r];
        for (c, slot) in row.iter_mut().enumerate() {
            let li = grid.idler[c];
            let lpump = lp(ls, li);
            let kp = crate::dispersion::wavevector_from_index(pump_model.index_unchecked(lpump), lpump);
            let dk = ks[r] - ki[c] + k_qpm - kp;
            *slot = Complex64::new(pump_envelope(pump, ls, li) * sinc(dk * half_length_um), 0.0);
        }
    });
    Ok(out)
}

/// Normalized JSA on an explicit grid.
pub fn compute_jsa_on_grid(
    db: &CrystalDatabase,
    config: &PhaseMatchConfig,
    pump: &PumpSpec,
    grid: SpectralGrid,
) -> Result<JsaMatrix> {
    if (pump.lambda0_nm - config.lambda0_nm).abs() > 1e-9 * config.lambda0_nm {
        return Err(Error::validation(
            &config.crystal,
            "lambda0_nm",
            format!(
                "pump degenerate wavelength {} nm differs from the configuration's {} nm",
                pump.lambda0_nm, config.lambda0_nm
            ),
        ));
    }
    let values = sample_product(db, config, pump, &grid)?;
    JsaMatrix::from_amplitudes(grid, values)
}

/// Normalized JSA on an `n`×`n` grid centred on the degenerate point.
pub fn compute_jsa(
    db: &CrystalDatabase,
    config: &PhaseMatchConfig,
    pump: &PumpSpec,
    span: GridSpan,
    n: usize,
) -> Result<JsaMatrix> {
    let half = span.half_width_nm(config.length_mm);
    let grid = SpectralGrid::centered(config.lambda0_nm, half, n)?;
    compute_jsa_on_grid(db, config, pump, grid)
}

/// Projected intensity along one axis, peak-normalized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalSpectrum {
    pub axis: Vec<f64>,
    pub intensity: Vec<f64>,
    pub fwhm_nm: f64,
}

/// Signal and idler marginals of |f|².
pub fn marginal_spectra(jsa: &JsaMatrix) -> Result<(MarginalSpectrum, MarginalSpectrum)> {
    Ok((signal_marginal(jsa)?, idler_marginal(jsa)?))
}

pub fn signal_marginal(jsa: &JsaMatrix) -> Result<MarginalSpectrum> {
    let signal = (0..jsa.n_signal())
        .map(|r| jsa.row(r).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    marginal("signal", &jsa.grid().signal, signal)
}

pub fn idler_marginal(jsa: &JsaMatrix) -> Result<MarginalSpectrum> {
    let mut idler = vec![0.0; jsa.n_idler()];
    for r in 0..jsa.n_signal() {
        for (acc, z) in idler.iter_mut().zip(jsa.row(r)) {
            *acc += z.norm_sqr();
        }
    }
    marginal("idler", &jsa.grid().idler, idler)
}

fn marginal(name: &'static str, axis: &[f64], mut intensity: Vec<f64>) -> Result<MarginalSpectrum> {
    let peak = intensity.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::PeakOnBoundary { axis: name });
    }
    intensity.iter_mut().for_each(|v| *v /= peak);
    let fwhm_nm = width_at_level(axis, &intensity, 0.5).ok_or(Error::PeakOnBoundary { axis: name })?;
    Ok(MarginalSpectrum {
        axis: axis.to_vec(),
        intensity,
        fwhm_nm,
    })
}

/// Width between the outermost linear-interpolated crossings of `level`.
/// `None` when the region at or above `level` touches either end.
pub fn width_at_level(x: &[f64], y: &[f64], level: f64) -> Option<f64> {
    let first = y.iter().position(|&v| v >= level)?;
    let last = y.iter().rposition(|&v| v >= level)?;
    if first == 0 || last + 1 == y.len() {
        return None;
    }
    let cross = |a: usize, b: usize| x[a] + (level - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    Some(cross(last, last + 1) - cross(first - 1, first))
}

/// Δν = cΔλ/λ² in GHz.
pub fn bandwidth_nm_to_ghz(lambda_center_nm: f64, fwhm_nm: f64) -> f64 {
    299_792_458.0 * fwhm_nm / (lambda_center_nm * lambda_center_nm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasematch::PmType;

    fn gaussian_grid(n: usize) -> (SpectralGrid, Vec<f64>) {
        let grid = SpectralGrid::centered(1550.0, 2.0, n).unwrap();
        let mut v = Vec::new();
        for ls in &grid.signal {
            for li in &grid.idler {
                let a = (-(ls - 1550.0).powi(2) / 0.5).exp();
                let b = (-(li - 1550.0).powi(2) / 0.5).exp();
                v.push(a * b);
            }
        }
        (grid, v)
    }

    #[test]
    fn envelope_is_one_at_degeneracy_and_symmetric() {
        let pump = PumpSpec::new(1550.0, 0.16).unwrap();
        assert_eq!(pump_envelope(&pump, 1550.0, 1550.0), 1.0);
        let a = pump_envelope(&pump, 1549.3, 1550.9);
        let b = pump_envelope(&pump, 1550.9, 1549.3);
        assert_eq!(a, b);
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn pump_fwhm_tracks_the_narrowband_rule() {
        let pump = PumpSpec::new(1550.0, 0.16).unwrap();
        let approx = 2.0 * std::f64::consts::LN_2.sqrt() * 0.16;
        assert!((pump.fwhm_nm() / approx - 1.0).abs() < 0.01);
        assert!((pump.fwhm_nm() - 0.27).abs() < 0.005);
    }

    #[test]
    fn pump_intensity_along_the_sum_frequency() {
        // sample α² against the pump wavelength implied by (λs, λi)
        let pump = PumpSpec::new(1550.0, 0.16).unwrap();
        let xs = linspace(774.0, 776.0, 20001);
        let ys: Vec<f64> = xs
            .iter()
            .map(|&lp| {
                let ls = 1550.0;
                let li = 1.0 / (1.0 / lp - 1.0 / ls);
                pump_envelope(&pump, ls, li).powi(2)
            })
            .collect();
        let w = width_at_level(&xs, &ys, 0.5).unwrap();
        let approx = 2.0 * std::f64::consts::LN_2.sqrt() * 0.16;
        assert!((w / approx - 1.0).abs() < 0.01, "{w}");
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn jsa_is_pef_times_pmf_before_normalization() {
        let db = CrystalDatabase::packaged();
        let cfg = PhaseMatchConfig::solved(&db, "PPKTP", PmType::Type0, 1550.0, 5.0).unwrap();
        let pump = PumpSpec::new(1550.0, 0.16).unwrap();
        let grid = SpectralGrid::centered(1550.0, 3.0, 11).unwrap();
        let raw = sample_product(&db, &cfg, &pump, &grid).unwrap();
        for (r, ls) in grid.signal.iter().enumerate() {
            for (c, li) in grid.idler.iter().enumerate() {
                let expect = pump_envelope(&pump, *ls, *li) * phase_matching_function(&db, &cfg, *ls, *li).unwrap();
                assert!((raw[r * 11 + c].re - expect).abs() < 1e-14);
            }
        }
        let jsa = compute_jsa_on_grid(&db, &cfg, &pump, grid).unwrap();
        assert!((jsa.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pmf_is_one_at_solved_point() {
        let db = CrystalDatabase::packaged();
        let cfg = PhaseMatchConfig::solved(&db, "PPRTP", PmType::Type2A, 1550.0, 5.0).unwrap();
        let phi = phase_matching_function(&db, &cfg, 1550.0, 1550.0).unwrap();
        assert!((phi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_too_small_is_rejected() {
        assert!(matches!(SpectralGrid::centered(1550.0, 3.0, 1), Err(Error::Grid(_))));
    }

    #[test]
    fn separable_symmetric_gaussian_has_equal_marginals() {
        let (grid, v) = gaussian_grid(101);
        let jsa = JsaMatrix::from_real(grid, &v).unwrap();
        let (s, i) = marginal_spectra(&jsa).unwrap();
        assert!((s.fwhm_nm - i.fwhm_nm).abs() < 1e-12);
        // Gaussian intensity e^{-2x²/0.5}: FWHM = 2√(ln2/4)
        let exact = 2.0 * (std::f64::consts::LN_2 / 4.0).sqrt();
        assert!((s.fwhm_nm - exact).abs() < 2e-3, "{}", s.fwhm_nm);
    }

    #[test]
    fn truncated_peak_is_an_error() {
        let grid = SpectralGrid::centered(1550.0, 0.1, 21).unwrap();
        let v = vec![1.0; 21 * 21];
        let jsa = JsaMatrix::from_real(grid, &v).unwrap();
        assert!(matches!(marginal_spectra(&jsa), Err(Error::PeakOnBoundary { .. })));
    }

    #[test]
    fn bandwidth_conversion() {
        assert!((bandwidth_nm_to_ghz(1550.0, 0.11) - 13.74).abs() < 0.05);
        assert!((bandwidth_nm_to_ghz(1550.0, 0.54) - 67.43).abs() < 0.2);
        assert_eq!(bandwidth_nm_to_ghz(1550.0, 0.0), 0.0);
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let (grid, v) = gaussian_grid(9);
        let jsa = JsaMatrix::from_real(grid, &v).unwrap().with_global_phase(0.3);
        let mut csv = Vec::new();
        jsa.write_csv(&mut csv).unwrap();
        assert_eq!(JsaMatrix::read_csv(csv.as_slice()).unwrap(), jsa);
        let mut bin = Vec::new();
        jsa.write_binary(&mut bin).unwrap();
        assert_eq!(&bin[..4], b"JSA1");
        assert_eq!(bin.len(), 4 + 16 + 8 * 18 + 16 * 81);
        assert_eq!(JsaMatrix::read_binary(bin.as_slice()).unwrap(), jsa);
    }

    #[test]
    fn transpose_swaps_axes() {
        let grid = SpectralGrid::centered_rect(1550.0, 1.0, 2.0, 3, 4).unwrap();
        let v: Vec<f64> = (0..12).map(|k| k as f64 + 1.0).collect();
        let jsa = JsaMatrix::from_real(grid, &v).unwrap();
        let t = jsa.transposed();
        assert_eq!(t.n_signal(), 4);
        assert_eq!(t.get(3, 1), jsa.get(1, 3));
        assert_eq!(t.transposed(), jsa);
    }
}
