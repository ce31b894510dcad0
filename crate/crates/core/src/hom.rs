//! Hong–Ou–Mandel interference between heralded photons from two sources.
//!
//! With normalized amplitudes the fourfold coincidence probability is
//! P₄(τ) = ¼[2 − 2 Re C(τ)], where the cross term contracts the two
//! reduced density matrices of the interfering photons:
//!
//! C(τ) = Σ_{a,b} M[a,b] N[b,a] e^{i(ω_b − ω_a)τ},  M = f₁f₁†,  N = f₂f₂†.
//!
//! The contraction costs O(N³) once and O(N²) per delay; the literal
//! four-index sum is kept as [`cross_term_bruteforce`] for verification.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsa::{idler_marginal, linspace, signal_marginal, width_at_level, JsaMatrix};
use crate::schmidt;
use crate::SPEED_OF_LIGHT_NM_PER_PS;

/// Largest grid accepted by the four-index sum.
pub const BRUTE_FORCE_LIMIT: usize = 40;

/// Default number of delay samples.
pub const DEFAULT_DELAY_POINTS: usize = 201;

/// Which photons meet at the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterferingPair {
    /// Signals interfere, idlers herald.
    #[serde(rename = "signal-signal")]
    SignalSignal,
    /// Idlers interfere, signals herald.
    #[serde(rename = "idler-idler")]
    IdlerIdler,
}

impl fmt::Display for InterferingPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterferingPair::SignalSignal => "signal-signal",
            InterferingPair::IdlerIdler => "idler-idler",
        })
    }
}

impl FromStr for InterferingPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "signal-signal" | "signal" | "ss" => Ok(InterferingPair::SignalSignal),
            "idler-idler" | "idler" | "ii" => Ok(InterferingPair::IdlerIdler),
            _ => Err(Error::validation(
                "pair",
                "value",
                format!("unknown interfering pair `{s}` (expected signal-signal or idler-idler)"),
            )),
        }
    }
}

/// Fourfold coincidence probability against delay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomCurve {
    pub delays_ps: Vec<f64>,
    pub p4: Vec<f64>,
    /// Mean of the outermost 5% of samples.
    pub baseline: f64,
    pub minimum: f64,
    /// (baseline − min)/baseline.
    pub visibility: f64,
    /// Full width where P₄ falls below half the baseline.
    pub dip_fwhm_ps: Option<f64>,
    /// Full width at half depth between baseline and minimum.
    pub half_depth_width_ps: Option<f64>,
}

impl HomCurve {
    fn from_samples(delays_ps: Vec<f64>, p4: Vec<f64>) -> Self {
        let n = p4.len();
        let tail = ((n as f64 * 0.025).round() as usize).max(1).min(n.div_ceil(2));
        let outer: Vec<f64> = p4[..tail].iter().chain(&p4[n - tail..]).copied().collect();
        let baseline = outer.iter().sum::<f64>() / outer.len() as f64;
        let minimum = p4.iter().cloned().fold(f64::INFINITY, f64::min);
        let depth: Vec<f64> = p4.iter().map(|p| baseline - p).collect();
        let dip_fwhm_ps = width_at_level(&delays_ps, &depth, baseline / 2.0);
        let half_depth_width_ps = width_at_level(&delays_ps, &depth, (baseline - minimum) / 2.0);
        Self {
            visibility: (baseline - minimum) / baseline,
            delays_ps,
            p4,
            baseline,
            minimum,
            dip_fwhm_ps,
            half_depth_width_ps,
        }
    }

    /// `tau_ps,p4` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "tau_ps,p4")?;
        for (t, p) in self.delays_ps.iter().zip(&self.p4) {
            writeln!(out, "{},{}", crate::cli::sig6(*t), crate::cli::sig6(*p))?;
        }
        Ok(())
    }
}

fn angular_frequencies(lambda_nm: &[f64]) -> Vec<f64> {
    lambda_nm
        .iter()
        .map(|l| 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_NM_PER_PS / l)
        .collect()
}

/// Orients both JSAs so that rows index the interfering photon.
fn oriented(f1: &JsaMatrix, f2: &JsaMatrix, pair: InterferingPair) -> Result<(JsaMatrix, JsaMatrix)> {
    if !f1.grid().matches(f2.grid()) {
        return Err(Error::GridMismatch(format!(
            "{}×{} vs {}×{} samples or different wavelengths",
            f1.n_signal(),
            f1.n_idler(),
            f2.n_signal(),
            f2.n_idler()
        )));
    }
    f1.check_normalized()?;
    f2.check_normalized()?;
    Ok(match pair {
        InterferingPair::SignalSignal => (f1.clone(), f2.clone()),
        InterferingPair::IdlerIdler => (f1.transposed(), f2.transposed()),
    })
}

/// f f† reduced over the heralding (column) axis.
fn reduced_density(f: &JsaMatrix) -> Vec<Complex64> {
    let n = f.n_signal();
    let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
    rho.par_chunks_mut(n).enumerate().for_each(|(a, row)| {
        let fa = f.row(a);
        for (b, slot) in row.iter_mut().enumerate() {
            *slot = fa.iter().zip(f.row(b)).map(|(x, y)| x * y.conj()).sum();
        }
    });
    rho
}

/// Precomputed W[a,b] = M[a,b]·N[b,a] and the interfering-axis frequencies.
struct Contraction {
    weights: Vec<Complex64>,
    omega: Vec<f64>,
}

impl Contraction {
    fn new(f1: &JsaMatrix, f2: &JsaMatrix) -> Self {
        let n = f1.n_signal();
        let m = reduced_density(f1);
        let nn = reduced_density(f2);
        let weights = (0..n * n)
            .map(|k| {
                let (a, b) = (k / n, k % n);
                m[a * n + b] * nn[b * n + a]
            })
            .collect();
        Self {
            weights,
            omega: angular_frequencies(&f1.grid().signal),
        }
    }

    fn cross_term(&self, tau_ps: f64) -> Complex64 {
        let n = self.omega.len();
        let phases: Vec<Complex64> = self
            .omega
            .iter()
            .map(|w| Complex64::from_polar(1.0, w * tau_ps))
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        for a in 0..n {
            let row = &self.weights[a * n..(a + 1) * n];
            let inner: Complex64 = row.iter().zip(&phases).map(|(w, p)| w * p).sum();
            total += phases[a].conj() * inner;
        }
        total
    }
}

/// Cross term C(τ) by the density-matrix contraction.
pub fn cross_term(f1: &JsaMatrix, f2: &JsaMatrix, pair: InterferingPair, tau_ps: f64) -> Result<Complex64> {
    let (g1, g2) = oriented(f1, f2, pair)?;
    Ok(Contraction::new(&g1, &g2).cross_term(tau_ps))
}

/// Cross term by the literal four-index sum over both sources' samples.
pub fn cross_term_bruteforce(
    f1: &JsaMatrix,
    f2: &JsaMatrix,
    pair: InterferingPair,
    tau_ps: f64,
) -> Result<Complex64> {
    let (g1, g2) = oriented(f1, f2, pair)?;
    guard_size(&g1)?;
    let omega = angular_frequencies(&g1.grid().signal);
    let (n, h) = (g1.n_signal(), g1.n_idler());
    let mut total = Complex64::new(0.0, 0.0);
    for s1 in 0..n {
        for s2 in 0..n {
            let phase = Complex64::from_polar(1.0, (omega[s2] - omega[s1]) * tau_ps);
            for i1 in 0..h {
                for i2 in 0..h {
                    let direct = g1.get(s1, i1) * g2.get(s2, i2);
                    let exchanged = g1.get(s2, i1) * g2.get(s1, i2);
                    total += direct * exchanged.conj() * phase;
                }
            }
        }
    }
    Ok(total)
}

/// P₄(τ) from the unexpanded squared modulus, with the exchange term
/// carrying e^{−i(ω_s2 − ω_s1)τ}.
pub fn p4_bruteforce(f1: &JsaMatrix, f2: &JsaMatrix, pair: InterferingPair, tau_ps: f64) -> Result<f64> {
    let (g1, g2) = oriented(f1, f2, pair)?;
    guard_size(&g1)?;
    let omega = angular_frequencies(&g1.grid().signal);
    let (n, h) = (g1.n_signal(), g1.n_idler());
    let mut total = 0.0;
    for s1 in 0..n {
        for s2 in 0..n {
            let phase = Complex64::from_polar(1.0, -(omega[s2] - omega[s1]) * tau_ps);
            for i1 in 0..h {
                for i2 in 0..h {
                    let amp = g1.get(s1, i1) * g2.get(s2, i2) - g1.get(s2, i1) * g2.get(s1, i2) * phase;
                    total += amp.norm_sqr();
                }
            }
        }
    }
    Ok(total / 4.0)
}

fn guard_size(f: &JsaMatrix) -> Result<()> {
    let n = f.n_signal().max(f.n_idler());
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(())
}

/// P₄ over `delays_ps`.
pub fn hom_curve(f1: &JsaMatrix, f2: &JsaMatrix, pair: InterferingPair, delays_ps: &[f64]) -> Result<HomCurve> {
    if delays_ps.len() < 3 {
        return Err(Error::Grid(format!("need at least 3 delays, got {}", delays_ps.len())));
    }
    if delays_ps.iter().any(|t| !t.is_finite()) || delays_ps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("delays must be finite and strictly increasing".into()));
    }
    let (g1, g2) = oriented(f1, f2, pair)?;
    let contraction = Contraction::new(&g1, &g2);
    let p4: Vec<f64> = delays_ps
        .par_iter()
        .map(|&t| 0.25 * (2.0 - 2.0 * contraction.cross_term(t).re))
        .collect();
    Ok(HomCurve::from_samples(delays_ps.to_vec(), p4))
}

/// Symmetric delay grid of [`DEFAULT_DELAY_POINTS`] samples spanning ±6× the
/// dip width expected from the interfering photon's bandwidth, kept inside
/// the alias-free window of the sampled frequency grid.
pub fn default_delays(jsa: &JsaMatrix, pair: InterferingPair) -> Vec<f64> {
    let axis = match pair {
        InterferingPair::SignalSignal => &jsa.grid().signal,
        InterferingPair::IdlerIdler => &jsa.grid().idler,
    };
    let n = axis.len();
    let center = axis[n / 2];
    let step = (axis[n - 1] - axis[0]) / (n - 1) as f64;
    let span = axis[n - 1] - axis[0];
    let marginal = match pair {
        InterferingPair::SignalSignal => signal_marginal(jsa),
        InterferingPair::IdlerIdler => idler_marginal(jsa),
    };
    let width_nm = marginal.map_or(span / 4.0, |m| m.fwhm_nm);
    let to_thz = |dl: f64| SPEED_OF_LIGHT_NM_PER_PS * dl / (center * center);
    let anticipated_ps = 0.6 / to_thz(width_nm);
    let alias_ps = 1.0 / to_thz(step);
    let half = (6.0 * anticipated_ps).min(0.45 * alias_ps);
    linspace(-half, half, DEFAULT_DELAY_POINTS)
}

/// Identical-source visibility beside the Schmidt purity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityPurity {
    pub visibility: f64,
    pub purity: f64,
    pub gap: f64,
}

/// Self-interference of heralded signals against the purity of the same JSA.
pub fn visibility_vs_purity_check(jsa: &JsaMatrix) -> Result<VisibilityPurity> {
    let delays = default_delays(jsa, InterferingPair::SignalSignal);
    let curve = hom_curve(jsa, jsa, InterferingPair::SignalSignal, &delays)?;
    let purity = schmidt::decompose(jsa)?.purity();
    Ok(VisibilityPurity {
        visibility: curve.visibility,
        purity,
        gap: (curve.visibility - purity).abs(),
    })
}
