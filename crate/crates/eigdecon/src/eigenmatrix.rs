//! Eigenmatrix construction and Krylov/ESPRIT recovery of spike locations.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::transform::Contour;

/// Threshold ladder for the pseudoinverse of the normalized column matrix.
pub const THRESHOLD_LADDER: [f64; 13] = [
    1e-14, 1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2,
];

/// `G(z, x)` evaluated along a whole contour, so that logarithmic kernels can track branches.
pub trait Kernel: Sync {
    fn domain(&self) -> (f64, f64);
    fn column(&self, contour: &Contour, x: f64) -> Result<Vec<Complex64>>;
}

/// Kernel defined pointwise by a closure.
pub struct PointKernel<F> {
    pub lo: f64,
    pub hi: f64,
    pub f: F,
}

impl<F> Kernel for PointKernel<F>
where
    F: Fn(Complex64, f64) -> Complex64 + Sync,
{
    fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn column(&self, contour: &Contour, x: f64) -> Result<Vec<Complex64>> {
        Ok(contour.points.iter().map(|&z| (self.f)(z, x)).collect())
    }
}

/// Chebyshev points of the second kind on `[lo, hi]`, ascending.
pub fn chebyshev_nodes(lo: f64, hi: f64, n_c: usize) -> Result<Vec<f64>> {
    if !(hi - lo >= 1e-12) {
        return Err(Error::DegenerateInterval { lo, hi });
    }
    if n_c < 2 {
        return Err(Error::input("n_c", "needs at least 2 nodes"));
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    // sine form keeps the nodes exactly symmetric
    let m = (n_c - 1) as f64;
    let mut nodes: Vec<f64> = (0..n_c)
        .map(|t| mid + half * (PI * (2.0 * t as f64 - m) / (2.0 * m)).sin())
        .collect();
    nodes[0] = lo;
    nodes[n_c - 1] = hi;
    Ok(nodes)
}

fn normalized_column(kernel: &dyn Kernel, contour: &Contour, x: f64) -> Result<Vec<Complex64>> {
    let col = kernel.column(contour, x).map_err(|e| Error::KernelEvaluationFailed {
        x,
        reason: e.to_string(),
    })?;
    if col.iter().any(|z| !z.is_finite()) {
        return Err(Error::KernelEvaluationFailed { x, reason: "non-finite value".into() });
    }
    let n = linalg::norm(&col);
    if n == 0.0 {
        return Err(Error::KernelEvaluationFailed { x, reason: "zero column".into() });
    }
    Ok(col.into_iter().map(|z| z / n).collect())
}

/// Normalized column matrix and its SVD; eigenmatrices for any threshold derive from it.
pub struct EigenmatrixBasis {
    pub contour: Contour,
    pub nodes: Vec<f64>,
    pub bhat: CMat,
    svd: linalg::ThinSvd,
    probe: Vec<(f64, Vec<Complex64>)>,
}

/// Number of uniform probe parameters checked at build time.
pub const PROBE_POINTS: usize = 100;

pub fn probe_grid(lo: f64, hi: f64) -> Vec<f64> {
    (0..PROBE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (PROBE_POINTS - 1) as f64)
        .collect()
}

impl EigenmatrixBasis {
    pub fn new(kernel: &dyn Kernel, contour: &Contour, n_c: usize) -> Result<Self> {
        let (lo, hi) = kernel.domain();
        let nodes = match n_c {
            0 => return Err(Error::input("n_c", "must be positive")),
            1 if hi - lo >= 0.0 => vec![0.5 * (lo + hi)],
            _ => chebyshev_nodes(lo, hi, n_c)?,
        };
        let cols = nodes
            .iter()
            .map(|&c| normalized_column(kernel, contour, c))
            .collect::<Result<Vec<_>>>()?;
        let bhat = Mat::from_fn(contour.len(), n_c, |i, j| cols[j][i]);
        let svd = linalg::svd(&bhat)?;
        let probe = probe_grid(lo, hi)
            .into_iter()
            .map(|x| Ok((x, normalized_column(kernel, contour, x)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            contour: contour.clone(),
            nodes,
            bhat,
            svd,
            probe,
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.s
    }

    pub fn condition(&self) -> f64 {
        let s = &self.svd.s;
        match (s.first(), s.last()) {
            (Some(&a), Some(&b)) if b > 0.0 => a / b,
            _ => f64::INFINITY,
        }
    }

    /// `B̂ Λ B̂⁺` with singular values below `threshold * s_max` dropped.
    pub fn eigenmatrix(&self, threshold: f64) -> CMat {
        let lam_b = Mat::from_fn(self.bhat.nrows(), self.bhat.ncols(), |i, j| self.bhat[(i, j)] * self.nodes[j]);
        &lam_b * linalg::pinv_from(&self.svd, threshold)
    }

    pub fn model(&self, threshold: f64) -> Result<EigenmatrixModel> {
        let m = self.eigenmatrix(threshold);
        let m_norm = linalg::op_norm(&m)?;
        let mut residual: f64 = 0.0;
        for (j, &c) in self.nodes.iter().enumerate() {
            let b = linalg::col_to_vec(&self.bhat, j);
            residual = residual.max(eigen_residual(&m, &b, c));
        }
        let probe_residual = self
            .probe
            .iter()
            .map(|(x, b)| eigen_residual(&m, b, *x))
            .fold(0.0, f64::max);
        Ok(EigenmatrixModel {
            contour: self.contour.clone(),
            cheb_nodes: self.nodes.clone(),
            bhat: self.bhat.clone(),
            m,
            threshold_used: threshold,
            m_norm,
            bhat_cond: self.condition(),
            model_residual: residual,
            probe_residual,
        })
    }

    /// Models for every ladder rung in `[floor, cap]` meeting the norm bound and the probe tolerance.
    pub fn admissible_models(&self, norm_bound: f64, probe_tol: f64, floor: f64, cap: f64) -> Result<Vec<EigenmatrixModel>> {
        let mut out = Vec::new();
        for &th in THRESHOLD_LADDER.iter().filter(|&&t| t >= floor * (1.0 - 1e-9) && t <= cap * (1.0 + 1e-9)) {
            let model = self.model(th)?;
            if model.m_norm <= norm_bound && model.probe_residual <= probe_tol {
                out.push(model);
            }
        }
        Ok(out)
    }
}

fn eigen_residual(m: &CMat, b: &[Complex64], x: f64) -> f64 {
    let mb = linalg::matvec(m, b);
    linalg::norm(&mb.iter().zip(b).map(|(p, q)| p - x * q).collect::<Vec<_>>())
}

/// Eigenmatrix with its thresholding diagnostics.
#[derive(Clone)]
pub struct EigenmatrixModel {
    pub contour: Contour,
    pub cheb_nodes: Vec<f64>,
    pub bhat: CMat,
    pub m: CMat,
    pub threshold_used: f64,
    pub m_norm: f64,
    pub bhat_cond: f64,
    /// Largest `‖M b̂_c − c b̂_c‖` over the Chebyshev nodes.
    pub model_residual: f64,
    /// Largest `‖M b̂_x − x b̂_x‖` over the uniform probe grid.
    pub probe_residual: f64,
}

impl std::fmt::Debug for EigenmatrixModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EigenmatrixModel")
            .field("n_z", &self.contour.len())
            .field("n_c", &self.cheb_nodes.len())
            .field("threshold_used", &self.threshold_used)
            .field("m_norm", &self.m_norm)
            .field("bhat_cond", &self.bhat_cond)
            .field("model_residual", &self.model_residual)
            .field("probe_residual", &self.probe_residual)
            .finish()
    }
}

impl EigenmatrixModel {
    /// Largest `‖M b̂_x − x b̂_x‖` over the given parameters.
    pub fn probe_residual(&self, kernel: &dyn Kernel, xs: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &x in xs {
            let b = normalized_column(kernel, &self.contour, x)?;
            worst = worst.max(eigen_residual(&self.m, &b, x));
        }
        Ok(worst)
    }

    pub fn bundle(&self) -> ModelBundle {
        let rows = |a: &CMat| {
            (0..a.nrows())
                .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
                .collect()
        };
        ModelBundle {
            contour_kind: self.contour.kind,
            contour: self.contour.points.iter().map(|z| [z.re, z.im]).collect(),
            contour_extent: self.contour.extent,
            cheb_nodes: self.cheb_nodes.clone(),
            bhat: rows(&self.bhat),
            m: rows(&self.m),
            threshold_used: self.threshold_used,
            m_norm: self.m_norm,
            bhat_cond: self.bhat_cond,
            model_residual: self.model_residual,
            probe_residual: self.probe_residual,
        }
    }

    pub fn from_bundle(b: &ModelBundle) -> Result<Self> {
        let mat = |rows: &Vec<Vec<[f64; 2]>>, name: &str| -> Result<CMat> {
            let r = rows.len();
            let c = rows.first().map_or(0, |x| x.len());
            if rows.iter().any(|x| x.len() != c) {
                return Err(Error::input(name, "ragged matrix"));
            }
            Ok(Mat::from_fn(r, c, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
        };
        let contour = Contour {
            kind: b.contour_kind,
            points: b.contour.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
            extent: b.contour_extent,
        };
        contour.validate()?;
        let bhat = mat(&b.bhat, "bhat")?;
        let m = mat(&b.m, "m")?;
        if bhat.nrows() != contour.len() || bhat.ncols() != b.cheb_nodes.len() || m.nrows() != m.ncols() || m.nrows() != contour.len() {
            return Err(Error::input("bundle", "matrix shapes do not match contour and nodes"));
        }
        Ok(Self {
            contour,
            cheb_nodes: b.cheb_nodes.clone(),
            bhat,
            m,
            threshold_used: b.threshold_used,
            m_norm: b.m_norm,
            bhat_cond: b.bhat_cond,
            model_residual: b.model_residual,
            probe_residual: b.probe_residual,
        })
    }
}

/// JSON form of a model; complex entries are `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub contour_kind: crate::transform::ContourKind,
    pub contour: Vec<[f64; 2]>,
    pub contour_extent: f64,
    pub cheb_nodes: Vec<f64>,
    pub bhat: Vec<Vec<[f64; 2]>>,
    pub m: Vec<Vec<[f64; 2]>>,
    pub threshold_used: f64,
    pub m_norm: f64,
    #[serde(with = "crate::unbounded")]
    pub bhat_cond: f64,
    pub model_residual: f64,
    pub probe_residual: f64,
}

/// Builds `M` with the smallest ladder threshold meeting the norm bound.
pub fn build_model(kernel: &dyn Kernel, contour: &Contour, n_c: usize, norm_bound: f64) -> Result<EigenmatrixModel> {
    build_model_from(&EigenmatrixBasis::new(kernel, contour, n_c)?, norm_bound, THRESHOLD_LADDER[0])
}

/// As [`build_model`] but skipping ladder rungs below `floor`.
pub fn build_model_from(basis: &EigenmatrixBasis, norm_bound: f64, floor: f64) -> Result<EigenmatrixModel> {
    let mut best = f64::INFINITY;
    for &th in THRESHOLD_LADDER.iter().filter(|&&t| t >= floor * (1.0 - 1e-9)) {
        let model = basis.model(th)?;
        if model.m_norm <= norm_bound {
            return Ok(model);
        }
        best = best.min(model.m_norm);
    }
    Err(Error::NormBoundUnreachable { bound: norm_bound, best })
}

/// Columns `u, Mu, …, M^{n_l} u`.
pub fn krylov_matrix(m: &CMat, u: &[Complex64], n_l: usize) -> CMat {
    let n_l = n_l.max(1);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n_l + 1);
    cols.push(u.to_vec());
    for k in 0..n_l {
        let next = linalg::matvec(m, &cols[k]);
        cols.push(next);
    }
    Mat::from_fn(u.len(), n_l + 1, |i, j| cols[j][i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub value: [f64; 2],
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EspritOutput {
    pub locations: Vec<f64>,
    pub rejected: Vec<Rejection>,
    pub singular_values: Vec<f64>,
    /// `σ_n` and `σ_{n+1}` tie to machine precision.
    pub degenerate_truncation: bool,
}

/// Eigenvalues of `Z_H Z_L⁺` from the rank-n row space of `T`.
pub fn esprit_locations(t: &CMat, n: usize, domain: (f64, f64), im_tol: f64) -> Result<EspritOutput> {
    let (lo, hi) = domain;
    if n == 0 || n >= t.ncols() || n > t.nrows() {
        return Err(Error::input("n", format!("{n} spikes need 1 <= n <= min(n_z, n_l)")));
    }
    let d = linalg::svd(t)?;
    let smax = d.s.first().copied().unwrap_or(0.0);
    let usable = d.s.iter().filter(|&&s| s > 1e-14 * smax).count();
    if usable < n || smax == 0.0 {
        return Err(Error::RankDeficient { needed: n, available: usable });
    }
    let degenerate = d.s.get(n).is_some_and(|&s| (d.s[n - 1] - s).abs() <= f64::EPSILON * smax);
    let k = t.ncols();
    // rows of V* are conjugated columns of V
    let zl = Mat::from_fn(n, k - 1, |i, j| d.v[(j, i)].conj());
    let zh = Mat::from_fn(n, k - 1, |i, j| d.v[(j + 1, i)].conj());
    let pencil = &zh * linalg::pinv(&zl, 1e-14)?;
    let mut eig = linalg::eigenvalues(&pencil)?;
    eig.sort_by(|a, b| a.re.total_cmp(&b.re));
    let width = hi - lo;
    let mut locations = Vec::with_capacity(n);
    let mut rejected = Vec::new();
    for e in eig {
        if !e.is_finite() {
            rejected.push(Rejection { value: [e.re, e.im], reason: "non-finite".into() });
        } else if e.im.abs() > im_tol * width {
            rejected.push(Rejection {
                value: [e.re, e.im],
                reason: format!("imaginary part {:.3e} exceeds {:.3e}", e.im.abs(), im_tol * width),
            });
        } else {
            locations.push(e.re.clamp(lo, hi));
        }
    }
    if locations.len() < n {
        return Err(Error::TooFewValid { needed: n, found: locations.len() });
    }
    locations.sort_by(f64::total_cmp);
    Ok(EspritOutput {
        locations,
        rejected,
        singular_values: d.s,
        degenerate_truncation: degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFit {
    pub weights: Vec<f64>,
    pub weights_imag: Vec<f64>,
    /// Complex parts above `im_tol` were dropped.
    pub imag_flagged: bool,
    pub offset: Option<[f64; 2]>,
    pub ls_residual: f64,
    pub condition: f64,
}

/// Least-squares weights against the unnormalized kernel columns, optionally with a constant column.
pub fn solve_weights(
    kernel: &dyn Kernel,
    contour: &Contour,
    locations: &[f64],
    u: &[Complex64],
    im_tol: f64,
    affine_offset: bool,
) -> Result<WeightFit> {
    if locations.is_empty() {
        return Err(Error::input("locations", "empty"));
    }
    let (lo, hi) = kernel.domain();
    let mut cols = Vec::with_capacity(locations.len() + 1);
    for &x in locations {
        if !(x >= lo && x <= hi) {
            return Err(Error::input("locations", format!("{x} outside [{lo}, {hi}]")));
        }
        cols.push(kernel.column(contour, x).map_err(|e| Error::KernelEvaluationFailed {
            x,
            reason: e.to_string(),
        })?);
    }
    if affine_offset {
        cols.push(vec![Complex64::new(1.0, 0.0); contour.len()]);
    }
    let g = Mat::from_fn(contour.len(), cols.len(), |i, j| cols[j][i]);
    let (w, res, cond) = linalg::lstsq(&g, u)?;
    if cond > 1e12 {
        return Err(Error::IllConditionedLS { cond });
    }
    let n = locations.len();
    let imag: Vec<f64> = w[..n].iter().map(|z| z.im).collect();
    Ok(WeightFit {
        weights: w[..n].iter().map(|z| z.re).collect(),
        imag_flagged: imag.iter().any(|v| v.abs() > im_tol),
        weights_imag: imag,
        offset: affine_offset.then(|| [w[n].re, w[n].im]),
        ls_residual: res,
        condition: cond,
    })
}

/// Index before the largest ratio of consecutive singular values.
pub fn estimate_spike_count(singular_values: &[f64], gap_factor: f64) -> Result<usize> {
    if singular_values.is_empty() {
        return Err(Error::input("singular_values", "empty"));
    }
    let mut best = (0usize, 0.0f64);
    for (i, w) in singular_values.windows(2).enumerate() {
        let ratio = if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY };
        if ratio > best.1 {
            best = (i + 1, ratio);
        }
    }
    if best.1 >= gap_factor {
        Ok(best.0)
    } else {
        Err(Error::NoClearGap { ratio: best.1, gap_factor })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySolution {
    pub locations: Vec<f64>,
    pub weights: Vec<f64>,
    pub weights_imag: Vec<f64>,
    pub ls_residual: f64,
    pub t_singular_values: Vec<f64>,
    pub rejected: Vec<Rejection>,
    pub degenerate_truncation: bool,
}

/// Krylov matrix, ESPRIT and weight solve for one model.
pub fn recover(
    model: &EigenmatrixModel,
    kernel: &dyn Kernel,
    weight_kernel: &dyn Kernel,
    u_model: &[Complex64],
    u_weights: &[Complex64],
    n: usize,
    n_l: usize,
    im_tol: f64,
    affine_offset: bool,
) -> Result<(RecoverySolution, WeightFit)> {
    let t = krylov_matrix(&model.m, u_model, n_l);
    let es = esprit_locations(&t, n, kernel.domain(), im_tol)?;
    let fit = solve_weights(weight_kernel, &model.contour, &es.locations, u_weights, im_tol, affine_offset)?;
    Ok((
        RecoverySolution {
            locations: es.locations,
            weights: fit.weights.clone(),
            weights_imag: fit.weights_imag.clone(),
            ls_residual: fit.ls_residual,
            t_singular_values: es.singular_values,
            rejected: es.rejected,
            degenerate_truncation: es.degenerate_truncation,
        },
        fit,
    ))
}
