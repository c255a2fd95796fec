//! Hermitian eigendecomposition that tolerates low-rank input.
//!
//! Householder reduction of a low-rank matrix leaves trailing columns made of
//! rounding noise whose products drift into the subnormal range; the stock
//! solver then divides by an underflowed norm. Here columns whose norm is
//! below `1e-30` of the matrix scale are zeroed before reflecting, and the
//! resulting real tridiagonal problem goes to the dense symmetric solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

const NEGLIGIBLE: f64 = 1e-30;

/// Eigenvalues (unsorted) and orthonormal eigenvectors (columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: m.ncols(),
        });
    }
    if n == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if scale == 0.0 {
        return Ok((DVector::zeros(n), DMatrix::identity(n, n)));
    }
    if !scale.is_finite() {
        return Err(Error::Spectral("matrix has non-finite entries".into()));
    }
    let mut a = m.map(|z| z / scale);
    let mut q = DMatrix::<Complex64>::identity(n, n);
    let zero = Complex64::new(0.0, 0.0);

    for k in 0..n.saturating_sub(2) {
        let norm = a.view((k + 1, k), (n - k - 1, 1)).norm();
        if norm <= NEGLIGIBLE {
            for i in k + 1..n {
                a[(i, k)] = zero;
                a[(k, i)] = zero;
            }
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
        let mut u: DVector<Complex64> = a.view((k + 1, k), (n - k - 1, 1)).column(0).into_owned();
        u[0] += phase * norm;
        let un = u.norm();
        u /= Complex64::new(un, 0.0);
        // column k becomes (-phase * norm, 0, ...)
        for i in k + 1..n {
            a[(i, k)] = zero;
            a[(k, i)] = zero;
        }
        a[(k + 1, k)] = -phase * norm;
        a[(k, k + 1)] = (-phase * norm).conj();
        // trailing block B <- H B H = B - 2 u q^dag - 2 q u^dag, q = p - (u^dag p) u, p = B u
        let mut b = a.view_mut((k + 1, k + 1), (n - k - 1, n - k - 1));
        let p = &b * &u;
        let kk = u.dotc(&p);
        let qv = &p - &u * kk;
        let two = Complex64::new(2.0, 0.0);
        b.ger(-two, &u, &qv.conjugate(), Complex64::new(1.0, 0.0));
        b.ger(-two, &qv, &u.conjugate(), Complex64::new(1.0, 0.0));
        // Q <- Q H on columns k+1..
        let mut qs = q.view_mut((0, k + 1), (n, n - k - 1));
        let w = &qs * &u;
        qs.ger(-two, &w, &u.conjugate(), Complex64::new(1.0, 0.0));
    }

    // real tridiagonal T' = D^dag T D
    let mut d = vec![Complex64::new(1.0, 0.0); n];
    let mut t = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = a[(i, i)].re;
    }
    for i in 0..n - 1 {
        let e = a[(i + 1, i)];
        let mag = e.norm();
        d[i + 1] = if mag > NEGLIGIBLE { d[i] * e / mag } else { d[i] };
        let mag = if mag > NEGLIGIBLE { mag } else { 0.0 };
        t[(i + 1, i)] = mag;
        t[(i, i + 1)] = mag;
    }
    let eig = SymmetricEigen::try_new(t, f64::EPSILON, 0)
        .ok_or_else(|| Error::Spectral("tridiagonal eigensolver did not converge".into()))?;
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) || eig.eigenvectors.iter().any(|x| !x.is_finite()) {
        return Err(Error::Spectral("tridiagonal eigensolver produced non-finite values".into()));
    }
    for (j, dj) in d.iter().enumerate() {
        let mut col = q.column_mut(j);
        col *= *dj;
    }
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    Ok((eig.eigenvalues * scale, q * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(values: &DVector<f64>, vectors: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let lam = DMatrix::from_diagonal(&values.map(|x| Complex64::new(x, 0.0)));
        vectors * lam * vectors.adjoint()
    }

    #[test]
    fn random_hermitian() {
        let n = 9;
        let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, (i as f64 - j as f64) * 0.3));
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        assert!((reconstruct(&vals, &vecs) - &h).camax() < 1e-12);
        assert!((vecs.adjoint() * &vecs - DMatrix::identity(n, n)).camax() < 1e-12);
    }

    #[test]
    fn low_rank_projector() {
        let n = 300;
        let v = DVector::from_fn(n, |i, _| Complex64::from_polar(0.8f64.powi(i as i32), i as f64 * 0.7));
        let v = &v / Complex64::new(v.norm(), 0.0);
        let rho = &v * v.adjoint();
        let (vals, vecs) = hermitian_eigen(&rho).unwrap();
        assert!(vals.iter().all(|x| x.is_finite()));
        assert!((vals.max() - 1.0).abs() < 1e-12);
        assert!((reconstruct(&vals, &vecs) - &rho).camax() < 1e-12);
    }
}
