//! Small dense complex-matrix helpers shared by every module.
//!
//! Matrices here are tiny (n <= 8 per cell, 2m <= 16 for block fields), so
//! everything routes through nalgebra dense kernels with closed forms for
//! the 1x1 and 2x2 operator norms that dominate the pair loops.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Hermitian part `(A + A*)/2` together with the largest entrywise
/// deviation `|A - A*|` observed before symmetrization.
pub fn hermitian_part(a: &CMat) -> (CMat, f64) {
    let adj = a.adjoint();
    let mut asym: f64 = 0.0;
    for (x, y) in a.iter().zip(adj.iter()) {
        asym = asym.max((x - y).norm());
    }
    ((a + adj) * Complex64::new(0.5, 0.0), asym)
}

/// Eigendecomposition of a Hermitian matrix: ascending eigenvalues and a
/// unitary matrix of eigenvectors (columns).
pub fn herm_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let se = nalgebra::SymmetricEigen::new(a.clone());
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let n = a.nrows();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in idx.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// `Q diag(f(lambda)) Q*` for a Hermitian `A = Q diag(lambda) Q*`.
pub fn herm_map(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = herm_eigen(a);
    herm_recompose(&vals, &vecs, f)
}

/// Recompose from a precomputed eigensystem.
pub fn herm_recompose(vals: &[f64], vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let n = vecs.nrows();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Complex64::new(f(vals[i]), 0.0);
    }
    vecs * d * vecs.adjoint()
}

/// Fractional power of a Hermitian positive definite matrix.
pub fn herm_power(a: &CMat, s: f64) -> CMat {
    herm_map(a, |l| l.powf(s))
}

/// Operator (spectral) norm. Closed form for 1x1 and 2x2, SVD otherwise.
pub fn op_norm(a: &CMat) -> f64 {
    let n = a.nrows();
    match n {
        1 => a[(0, 0)].norm(),
        2 => {
            // lambda_max of A*A via the stable half-trace form.
            let c00 = a[(0, 0)];
            let c10 = a[(1, 0)];
            let c01 = a[(0, 1)];
            let c11 = a[(1, 1)];
            let b00 = c00.norm_sqr() + c10.norm_sqr();
            let b11 = c01.norm_sqr() + c11.norm_sqr();
            let b01 = c00.conj() * c01 + c10.conj() * c11;
            let half_diff = 0.5 * (b00 - b11);
            let t = 0.5 * (b00 + b11);
            (t + (half_diff * half_diff + b01.norm_sqr()).sqrt())
                .max(0.0)
                .sqrt()
        }
        _ => {
            let svd = a.clone().svd(false, false);
            svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s))
        }
    }
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Max entrywise modulus of `A - B`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
