//! Haar conjugations, free additive and multiplicative ensembles, classical sums.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, EmpiricalSpectrum};
use crate::Mode;

/// Independent reproducible stream `k` of a seed.
pub fn stream(seed: u64, k: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Haar orthogonal matrix from the QR factorization of a Gaussian matrix, with sign correction.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<f64> {
    let a = Mat::<f64>::from_fn(n, n, |_, _| 0.0);
    let mut a = a;
    // fill column-major so the draw order is fixed
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let qr = a.qr();
    let r = qr.R();
    let signs: Vec<f64> = (0..n).map(|i| if r[(i, i)] < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut q = qr.compute_Q();
    for j in 0..n {
        if signs[j] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Diagonal entries: each atom repeated by largest-remainder rounding of `w N`.
pub fn spectrum_matrix(m: &AtomicMeasure, n: usize) -> Result<Vec<f64>> {
    if n < m.len() {
        return Err(Error::input("N", format!("{n} is smaller than the {} atoms", m.len())));
    }
    let exact: Vec<f64> = m.weights().iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|c| c.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(m.locations()
        .iter()
        .zip(counts)
        .flat_map(|(&l, c)| std::iter::repeat_n(l, c))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: Mode,
    pub measures: Vec<AtomicMeasure>,
    pub dimension: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::input("dimension", "must be positive"));
        }
        if self.measures.is_empty() {
            return Err(Error::input("measures", "empty"));
        }
        if self.kind != Mode::Classical && self.measures.len() < 2 {
            return Err(Error::input("measures", "matrix ensembles need at least two factors"));
        }
        if self.kind == Mode::Multiplicative && self.measures.iter().any(|m| m.locations()[0] <= 0.0) {
            return Err(Error::NonPositiveMeasure);
        }
        Ok(())
    }
}

pub fn sample(spec: &EnsembleSpec) -> Result<EmpiricalSpectrum> {
    match spec.kind {
        Mode::Additive => sample_additive(spec),
        Mode::Multiplicative => sample_multiplicative(spec),
        Mode::Classical => {
            spec.validate()?;
            sample_classical(&spec.measures, spec.dimension, &mut stream(spec.seed, 0))
        }
    }
}

fn sym_eigenvalues(mut c: Mat<f64>) -> Result<EmpiricalSpectrum> {
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = s;
            c[(j, i)] = s;
        }
    }
    let ev = c
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::EigensolveFailed(format!("{e:?}")))?;
    EmpiricalSpectrum::new(ev)
}

/// `Q diag(d) Qᵀ`.
fn conjugate_diag(q: &Mat<f64>, d: &[f64]) -> Mat<f64> {
    let n = q.nrows();
    let qd = Mat::from_fn(n, n, |i, j| q[(i, j)] * d[j]);
    &qd * q.transpose()
}

/// Eigenvalues of `A_1 + Σ_k Q_k A_k Q_kᵀ`.
pub fn sample_additive(spec: &EnsembleSpec) -> Result<EmpiricalSpectrum> {
    spec.validate()?;
    if spec.kind != Mode::Additive {
        return Err(Error::input("kind", "expected additive"));
    }
    let n = spec.dimension;
    let d1 = spectrum_matrix(&spec.measures[0], n)?;
    let mut c = Mat::from_fn(n, n, |i, j| if i == j { d1[i] } else { 0.0 });
    for (k, m) in spec.measures.iter().enumerate().skip(1) {
        let q = haar_orthogonal(n, &mut stream(spec.seed, k as u64));
        let d = spectrum_matrix(m, n)?;
        c += conjugate_diag(&q, &d);
    }
    sym_eigenvalues(c)
}

/// Eigenvalues of the nested product `√A_1 Q_2 √A_2 ⋯ Q_n A_n Q_nᵀ ⋯ √A_2 Q_2ᵀ √A_1`.
pub fn sample_multiplicative(spec: &EnsembleSpec) -> Result<EmpiricalSpectrum> {
    spec.validate()?;
    if spec.kind != Mode::Multiplicative {
        return Err(Error::input("kind", "expected multiplicative"));
    }
    let n = spec.dimension;
    let last = spec.measures.len() - 1;
    let dn = spectrum_matrix(&spec.measures[last], n)?;
    let mut b = Mat::from_fn(n, n, |i, j| if i == j { dn[i] } else { 0.0 });
    for k in (0..last).rev() {
        let q = haar_orthogonal(n, &mut stream(spec.seed, (k + 1) as u64));
        let s: Vec<f64> = spectrum_matrix(&spec.measures[k], n)?.iter().map(|v| v.sqrt()).collect();
        let qb = &q * &b;
        let inner = &qb * q.transpose();
        b = Mat::from_fn(n, n, |i, j| s[i] * inner[(i, j)] * s[j]);
    }
    let spec_out = sym_eigenvalues(b)?;
    if spec_out.values()[0] <= 0.0 {
        return Err(Error::EigensolveFailed(format!(
            "non-positive eigenvalue {} in a positive definite product",
            spec_out.values()[0]
        )));
    }
    Ok(spec_out)
}

/// `N` draws of `Y_1 + … + Y_n` with `Y_k ~ α_k` by inverse-CDF sampling.
pub fn sample_classical<R: Rng + ?Sized>(measures: &[AtomicMeasure], n: usize, rng: &mut R) -> Result<EmpiricalSpectrum> {
    if n == 0 {
        return Err(Error::input("N", "must be positive"));
    }
    let cdfs: Vec<Vec<f64>> = measures
        .iter()
        .map(|m| {
            m.weights()
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let mut out = vec![0.0; n];
    for v in out.iter_mut() {
        for (m, cdf) in measures.iter().zip(&cdfs) {
            let u: f64 = rng.random();
            let idx = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
            *v += m.locations()[idx];
        }
    }
    EmpiricalSpectrum::new(out)
}
