use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues of a small dense real matrix, sorted by descending real part
/// with each conjugate pair adjacent (positive imaginary part first).
///
/// Each eigenvalue is checked against the characteristic equation: the
/// smallest singular value of `A − λI` must vanish relative to `‖A‖`.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Domain(format!("eigenvalues need a square matrix, got {}×{}", n, a.ncols())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNonConvergence);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenNonConvergence)?;
    let raw = schur.complex_eigenvalues();
    let mut lambda: Vec<Complex64> = raw.iter().map(|z| Complex64::new(z.re, z.im)).collect();
    symmetrize(&mut lambda);

    let norm = a.norm().max(1.0);
    for &l in &lambda {
        if characteristic_residual(a, l) > 1e-7 * norm {
            return Err(Error::EigenNonConvergence);
        }
    }
    Ok(lambda)
}

/// Smallest singular value of `A − λI`.
pub fn characteristic_residual(a: &DMatrix<f64>, lambda: Complex64) -> f64 {
    let n = a.nrows();
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let z = Complex64::new(a[(i, j)], 0.0);
        if i == j {
            z - lambda
        } else {
            z
        }
    });
    shifted.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Sorts by descending real part and makes conjugate pairs exact mirrors.
fn symmetrize(lambda: &mut Vec<Complex64>) {
    let scale = lambda.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let mut reals = Vec::new();
    let mut upper: Vec<Complex64> = Vec::new();
    let mut lower: Vec<Complex64> = Vec::new();
    for &z in lambda.iter() {
        if z.im.abs() <= tol {
            reals.push(Complex64::new(z.re, 0.0));
        } else if z.im > 0.0 {
            upper.push(z);
        } else {
            lower.push(z);
        }
    }
    let mut out: Vec<Complex64> = reals;
    for z in upper {
        // pair each upper eigenvalue with its closest lower partner
        let k = lower
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (**a - z.conj()).norm().total_cmp(&(**b - z.conj()).norm()))
            .map(|(k, _)| k);
        let partner = k.map(|k| lower.swap_remove(k)).unwrap_or(z.conj());
        let re = 0.5 * (z.re + partner.re);
        let im = 0.5 * (z.im - partner.im);
        out.push(Complex64::new(re, im));
        out.push(Complex64::new(re, -im));
    }
    out.extend(lower);
    out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    *lambda = out;
}

/// Largest real part of the eigenvalues of `a`.
pub fn max_real_part(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}
