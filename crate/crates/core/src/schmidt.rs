//! Schmidt decomposition of a joint spectral amplitude.
//!
//! The singular value decomposition is a one-sided (Hestenes) Jacobi
//! iteration on complex columns: pairs of columns are rotated until they are
//! mutually orthogonal, after which the column norms are the singular values.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jsa::JsaMatrix;

const MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtDecomposition {
    /// Descending, with Σc² = 1.
    pub coefficients: Vec<f64>,
    /// Orthonormal modes on the signal axis.
    #[serde(skip)]
    pub signal_modes: Vec<Vec<Complex64>>,
    /// Orthonormal modes on the idler axis.
    #[serde(skip)]
    pub idler_modes: Vec<Vec<Complex64>>,
}

impl SchmidtDecomposition {
    pub fn purity(&self) -> f64 {
        purity(self)
    }

    pub fn schmidt_number(&self) -> f64 {
        schmidt_number(self)
    }

    /// Σ c_j ξ_j ζ_jᵀ as a row-major signal × idler matrix.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let ns = self.signal_modes.first().map_or(0, Vec::len);
        let ni = self.idler_modes.first().map_or(0, Vec::len);
        let mut out = vec![Complex64::new(0.0, 0.0); ns * ni];
        for ((c, xi), zeta) in self.coefficients.iter().zip(&self.signal_modes).zip(&self.idler_modes) {
            if *c == 0.0 {
                continue;
            }
            for (r, x) in xi.iter().enumerate() {
                let cx = x * c;
                for (slot, z) in out[r * ni..(r + 1) * ni].iter_mut().zip(zeta) {
                    *slot += cx * z;
                }
            }
        }
        out
    }
}

/// Thin SVD `a = U diag(σ) V†` of a column-major `m`×`n` matrix with `m ≥ n`.
/// Returns (σ, U columns, V columns) in the original column order.
fn jacobi_svd(mut cols: Vec<Vec<Complex64>>, m: usize) -> Result<(Vec<f64>, Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    let n = cols.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut e = vec![zero; n];
            e[j] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();
    let total: f64 = cols.iter().flatten().map(|z| z.norm_sqr()).sum();
    let negligible = total * 1e-40;
    let tol = f64::EPSILON * (m as f64).sqrt();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (ap, aq) = (&cols[p], &cols[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = zero;
                    for (x, y) in ap.iter().zip(aq) {
                        alpha += x.norm_sqr();
                        beta += y.norm_sqr();
                        gamma += x.conj() * y;
                    }
                    (alpha, beta, gamma)
                };
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let g = gamma.norm();
                if g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let w = phase.conj();
                rotate(&mut cols, p, q, c, s, w);
                rotate(&mut v, p, q, c, s, w);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: MAX_SWEEPS });
    }

    let sigma: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = smax * f64::EPSILON * (m.max(n) as f64) * 4.0;
    let mut u: Vec<Option<Vec<Complex64>>> = cols
        .into_iter()
        .zip(&sigma)
        .map(|(c, &s)| (s > cutoff && s > 0.0).then(|| c.into_iter().map(|z| z / s).collect()))
        .collect();
    complete_basis(&mut u, m);
    let u = u.into_iter().map(Option::unwrap).collect();
    Ok((sigma, u, v))
}

fn rotate(cols: &mut [Vec<Complex64>], p: usize, q: usize, c: f64, s: f64, w: Complex64) {
    let (left, right) = cols.split_at_mut(q);
    let (ap, aq) = (&mut left[p], &mut right[0]);
    for (x, y) in ap.iter_mut().zip(aq.iter_mut()) {
        let b = w * *y;
        let xn = *x * c - b * s;
        *y = *x * s + b * c;
        *x = xn;
    }
}

/// Fills missing vectors with unit vectors orthogonalized against the rest.
fn complete_basis(vectors: &mut [Option<Vec<Complex64>>], m: usize) {
    let mut candidate = 0;
    for j in 0..vectors.len() {
        if vectors[j].is_some() {
            continue;
        }
        while candidate < m {
            let mut e = vec![Complex64::new(0.0, 0.0); m];
            e[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            // two passes of Gram–Schmidt for stability
            for _ in 0..2 {
                for other in vectors.iter().flatten() {
                    let proj: Complex64 = other.iter().zip(&e).map(|(o, x)| o.conj() * x).sum();
                    for (x, o) in e.iter_mut().zip(other) {
                        *x -= proj * o;
                    }
                }
            }
            let norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                e.iter_mut().for_each(|z| *z /= norm);
                vectors[j] = Some(e);
                break;
            }
        }
    }
}

/// Schmidt decomposition f = Σ c_j ξ_j(λs) ζ_j(λi).
pub fn decompose(jsa: &JsaMatrix) -> Result<SchmidtDecomposition> {
    if jsa
        .amplitudes()
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NonFinite("JSA amplitudes"));
    }
    let (ns, ni) = (jsa.n_signal(), jsa.n_idler());
    let a = jsa.amplitudes();
    // work on whichever orientation has at least as many rows as columns
    let transposed = ns < ni;
    let (m, n) = if transposed { (ni, ns) } else { (ns, ni) };
    let cols: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            (0..m)
                .map(|r| if transposed { a[j * ni + r] } else { a[r * ni + j] })
                .collect()
        })
        .collect();
    let (sigma, u, v) = jacobi_svd(cols, m)?;

    // f = U Σ V†  ⇒ ξ = u, ζ = conj(v); for fᵀ the roles swap.
    let mut modes: Vec<(f64, Vec<Complex64>, Vec<Complex64>)> = sigma
        .into_iter()
        .zip(u.into_iter().zip(v))
        .map(|(s, (u, v))| {
            if transposed {
                (s, v.iter().map(|z| z.conj()).collect(), u)
            } else {
                (s, u, v.iter().map(|z| z.conj()).collect())
            }
        })
        .collect();
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));

    let norm = modes.iter().map(|m| m.0 * m.0).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::NotNormalized(0.0));
    }
    let mut coefficients = Vec::with_capacity(modes.len());
    let mut signal_modes = Vec::with_capacity(modes.len());
    let mut idler_modes = Vec::with_capacity(modes.len());
    for (s, mut xi, mut zeta) in modes {
        fix_phase(&mut xi, &mut zeta);
        coefficients.push(s / norm);
        signal_modes.push(xi);
        idler_modes.push(zeta);
    }
    Ok(SchmidtDecomposition {
        coefficients,
        signal_modes,
        idler_modes,
    })
}

/// Makes the first significant component of ξ real and positive.
fn fix_phase(xi: &mut [Complex64], zeta: &mut [Complex64]) {
    let peak = xi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(first) = xi.iter().find(|z| z.norm() > 1e-8 * peak) {
        let w = first.conj() / first.norm();
        xi.iter_mut().for_each(|z| *z *= w);
        let wc = w.conj();
        zeta.iter_mut().for_each(|z| *z *= wc);
    }
}

/// Σ c_j⁴.
pub fn purity(d: &SchmidtDecomposition) -> f64 {
    let s2: f64 = d.coefficients.iter().map(|c| c * c).sum();
    d.coefficients.iter().map(|c| (c * c / s2).powi(2)).sum()
}

/// K = 1/p.
pub fn schmidt_number(d: &SchmidtDecomposition) -> f64 {
    1.0 / purity(d)
}

/// Purity straight from the reduced density matrix: Tr(ρ²)/Tr(ρ)² with ρ
/// the Gram matrix on the shorter axis. Skips the modes entirely.
pub fn purity_of(jsa: &JsaMatrix) -> f64 {
    let (ns, ni) = (jsa.n_signal(), jsa.n_idler());
    let a = jsa.amplitudes();
    // rows of the shorter side as contiguous vectors
    let rows: Vec<Vec<Complex64>> = if ns <= ni {
        (0..ns).map(|r| a[r * ni..(r + 1) * ni].to_vec()).collect()
    } else {
        (0..ni).map(|c| (0..ns).map(|r| a[r * ni + c]).collect()).collect()
    };
    let k = rows.len();
    // per-row partial sums, combined in a fixed order for reproducibility
    let partial: Vec<(f64, f64)> = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut diag = 0.0;
            let mut sum = 0.0;
            for j in i..k {
                let g: Complex64 = rows[i].iter().zip(&rows[j]).map(|(x, y)| x * y.conj()).sum();
                if j == i {
                    diag = g.re;
                    sum += g.norm_sqr();
                } else {
                    sum += 2.0 * g.norm_sqr();
                }
            }
            (diag, sum)
        })
        .collect();
    let (trace, off) = partial
        .iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    off / (trace * trace)
}
