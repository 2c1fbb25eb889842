//! Thin wrappers over faer for the dense complex routines used here.

use faer::{c64, Mat};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

pub struct ThinSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

pub fn svd(a: &CMat) -> Result<ThinSvd> {
    let d = a
        .thin_svd()
        .map_err(|e| Error::EigensolveFailed(format!("svd: {e:?}")))?;
    let s = d.S().column_vector().iter().map(|x| x.re).collect();
    Ok(ThinSvd {
        u: d.U().to_owned(),
        s,
        v: d.V().to_owned(),
    })
}

pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::EigensolveFailed(format!("svd: {e:?}")))
}

/// Spectral norm.
pub fn op_norm(a: &CMat) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    a.eigenvalues()
        .map_err(|e| Error::EigensolveFailed(format!("eig: {e:?}")))
}

/// Pseudoinverse keeping singular values above `rel * s_max`.
pub fn pinv(a: &CMat, rel: f64) -> Result<CMat> {
    let d = svd(a)?;
    Ok(pinv_from(&d, rel))
}

pub fn pinv_from(d: &ThinSvd, rel: f64) -> CMat {
    let smax = d.s.first().copied().unwrap_or(0.0);
    let k = d.s.iter().take_while(|&&s| s > rel * smax && s > 0.0).count();
    let (m, n) = (d.u.nrows(), d.v.nrows());
    let vs = Mat::from_fn(n, k, |i, j| d.v[(i, j)] / d.s[j]);
    let uk = d.u.get(0..m, 0..k);
    &vs * uk.adjoint()
}

pub fn col(v: &[Complex64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn col_to_vec(m: &CMat, j: usize) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn matvec(a: &CMat, x: &[Complex64]) -> Vec<Complex64> {
    let y = a * col(x);
    col_to_vec(&y, 0)
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Least squares via SVD; returns solution, residual norm and condition number.
pub fn lstsq(a: &CMat, b: &[Complex64]) -> Result<(Vec<Complex64>, f64, f64)> {
    let d = svd(a)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let smin = d.s.last().copied().unwrap_or(0.0);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let x = matvec(&pinv_from(&d, 0.0), b);
    let r = matvec(a, &x);
    let res = norm(&r.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    Ok((x, res, cond))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_rank_is_inverse() {
        let a = Mat::from_fn(3, 3, |i, j| c64::new((i * 3 + j) as f64 % 5.0 + (i == j) as u8 as f64, 0.5 * j as f64));
        let p = pinv(&a, 0.0).unwrap();
        let e = &a * &p;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e[(i, j)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn lstsq_exact() {
        let a = Mat::from_fn(5, 2, |i, j| c64::new(1.0 + i as f64, (j as f64 + 1.0) * i as f64));
        let x = [c64::new(2.0, -1.0), c64::new(0.5, 0.0)];
        let b = matvec(&a, &x);
        let (y, res, cond) = lstsq(&a, &b).unwrap();
        assert!(res < 1e-12 && cond.is_finite());
        assert!((y[0] - x[0]).norm() < 1e-12 && (y[1] - x[1]).norm() < 1e-12);
    }
}
