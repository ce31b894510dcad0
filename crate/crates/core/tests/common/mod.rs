#![allow(dead_code)]

use cpspdc::jsa::{JsaMatrix, SpectralGrid};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

/// Dense complex matrix with independent uniform entries.
pub fn random_matrix<R: Rng>(rng: &mut R, ns: usize, ni: usize) -> JsaMatrix {
    let grid = SpectralGrid::centered_rect(1550.0, 1.0, 1.5, ns, ni).unwrap();
    let v = (0..ns * ni)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    JsaMatrix::from_amplitudes(grid, v).unwrap()
}

/// Smooth correlated Gaussian JSA with a random chirp, sized like a
/// narrowband photon pair (widths of a fraction of a nanometre).
pub fn random_smooth_jsa<R: Rng>(rng: &mut R, n: usize, real: bool) -> JsaMatrix {
    let grid = SpectralGrid::centered(1550.0, 2.0, n).unwrap();
    let ws = rng.gen_range(0.3..0.7);
    let wi = rng.gen_range(0.3..0.7);
    let rho: f64 = rng.gen_range(-0.9..0.9);
    let chirp = if real { 0.0 } else { rng.gen_range(-2.0..2.0) };
    let mut v = Vec::with_capacity(n * n);
    for ls in &grid.signal {
        for li in &grid.idler {
            let x = (ls - 1550.0) / ws;
            let y = (li - 1550.0) / wi;
            let mag = (-(x * x + y * y + 2.0 * rho * x * y) / 2.0).exp();
            v.push(Complex64::from_polar(mag, chirp * x * y));
        }
    }
    JsaMatrix::from_amplitudes(grid, v).unwrap()
}

pub fn dense(jsa: &JsaMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(jsa.n_signal(), jsa.n_idler(), |r, c| jsa.get(r, c))
}

/// Tr((ff†)²)/Tr(ff†)² by direct dense products.
pub fn trace_purity(jsa: &JsaMatrix) -> f64 {
    let f = dense(jsa);
    let rho = &f * f.adjoint();
    let tr = rho.trace().re;
    (&rho * &rho).trace().re / (tr * tr)
}

/// Eigenvalues of ff†, descending.
pub fn gram_eigenvalues(jsa: &JsaMatrix) -> Vec<f64> {
    let f = dense(jsa);
    let rho = &f * f.adjoint();
    let mut ev: Vec<f64> = rho.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}
