//! End-to-end blind deconvolution in the classical, free additive and free multiplicative settings.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigenmatrix::{self, EigenmatrixBasis, EigenmatrixModel, Kernel, RecoverySolution};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measure::{char_fn, EmpiricalSpectrum, FamilyId, ParametricFamily, Spectral};
use crate::rmt::{self, EnsembleSpec};
use crate::transform::{self, Contour, ContourKind, NewtonConfig};
use crate::Mode;

/// Default additive g-circle radius, in units of 1/σ.
pub const ADDITIVE_RADIUS: f64 = 0.45;
/// Default multiplicative t-circle radii.
pub const MULTIPLICATIVE_RADII: [f64; 2] = [0.45, 0.75];
/// Default classical ray lengths, in units of 1/σ.
pub const CLASSICAL_XI_MAX: [f64; 2] = [8.0, 12.0];
/// Default classical imaginary offset, in units of 1/σ.
pub const CLASSICAL_EPS_IMAG: f64 = 1.0;
/// Default norm bound, in units of max(|x_lo|, |x_hi|).
pub const NORM_BOUND_FACTOR: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Try every admissible contour, threshold and Krylov depth; keep the smallest relative residual.
    Residual,
    /// One contour, the smallest admissible threshold, one Krylov depth.
    NormBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n_z: usize,
    pub n_c: usize,
    pub newton: NewtonConfig,
    /// Circle radii for the additive and multiplicative modes.
    pub radii: Option<Vec<f64>>,
    /// Ray lengths for the classical mode.
    pub xi_max: Option<Vec<f64>>,
    pub eps_imag: Option<f64>,
    /// Fixed Krylov depth; overrides `krylov_offsets`.
    pub n_l: Option<usize>,
    /// Krylov depths `n + k` tried for each model.
    pub krylov_offsets: Vec<usize>,
    pub norm_bound: Option<f64>,
    /// Models whose probe-grid eigenpair residual exceeds this are not used.
    #[serde(with = "crate::unbounded")]
    pub probe_tol: f64,
    pub threshold_floor: f64,
    pub threshold_cap: f64,
    pub im_tol: f64,
    pub selection: Selection,
    pub affine_offset: bool,
    pub gap_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_z: 64,
            n_c: 32,
            newton: NewtonConfig::default(),
            radii: None,
            xi_max: None,
            eps_imag: None,
            n_l: None,
            krylov_offsets: vec![1, 3],
            norm_bound: None,
            probe_tol: 1e-3,
            threshold_floor: 1e-13,
            threshold_cap: 1e-4,
            im_tol: 0.05,
            selection: Selection::Residual,
            affine_offset: false,
            gap_factor: 1e3,
        }
    }
}

impl SolverConfig {
    /// Settings that follow the literal defaults: small contours, norm-bound threshold choice, `n_l = max(2n+2, 12)`.
    pub fn literal() -> Self {
        Self {
            selection: Selection::NormBound,
            threshold_floor: 1e-14,
            threshold_cap: 1e-2,
            norm_bound: None,
            probe_tol: f64::INFINITY,
            newton: NewtonConfig { continuation_steps: 0, ..NewtonConfig::default() },
            krylov_offsets: vec![1],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.newton.validate()?;
        if !(8..=1024).contains(&self.n_z) {
            return Err(Error::input("n_z", "must lie in [8, 1024]"));
        }
        if !(2..=256).contains(&self.n_c) {
            return Err(Error::input("n_c", "must lie in [2, 256]"));
        }
        let positive = |v: &Option<Vec<f64>>, name: &str| -> Result<()> {
            if let Some(v) = v {
                if v.is_empty() || v.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                    return Err(Error::input(name, "needs a nonempty list of positive values"));
                }
            }
            Ok(())
        };
        positive(&self.radii, "radii")?;
        positive(&self.xi_max, "xi_max")?;
        if let Some(e) = self.eps_imag {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::input("eps_imag", "must be non-negative"));
            }
        }
        if self.krylov_offsets.is_empty() || self.krylov_offsets.contains(&0) {
            return Err(Error::input("krylov_offsets", "needs a nonempty list of positive offsets"));
        }
        if self.n_l == Some(0) {
            return Err(Error::input("n_l", "must be at least 1"));
        }
        if let Some(b) = self.norm_bound {
            if !(b > 0.0) {
                return Err(Error::input("norm_bound", "must be positive"));
            }
        }
        if !(self.threshold_floor > 0.0 && self.threshold_floor <= self.threshold_cap) {
            return Err(Error::input("threshold_floor", "must be positive and at most threshold_cap"));
        }
        if !(self.probe_tol > 0.0) {
            return Err(Error::input("probe_tol", "must be positive"));
        }
        if !(self.im_tol > 0.0 && self.im_tol <= 1.0) {
            return Err(Error::input("im_tol", "must lie in (0, 1]"));
        }
        if !(self.gap_factor > 1.0) {
            return Err(Error::input("gap_factor", "must exceed 1"));
        }
        Ok(())
    }
}

/// Kernel `G(z, x)` of a family for one of the three modes.
pub struct FamilyKernel<'a> {
    pub mode: Mode,
    pub family: &'a ParametricFamily,
    pub newton: NewtonConfig,
    /// Subtract the column mean, removing any constant offset.
    pub centered: bool,
}

impl Kernel for FamilyKernel<'_> {
    fn domain(&self) -> (f64, f64) {
        self.family.domain()
    }

    fn column(&self, contour: &Contour, x: f64) -> Result<Vec<Complex64>> {
        let m = self.family.eval(x)?;
        let col = transform_column(self.mode, &m, contour, &self.newton)?;
        Ok(if self.centered { center(col) } else { col })
    }
}

fn center(v: Vec<Complex64>) -> Vec<Complex64> {
    let mean = v.iter().sum::<Complex64>() / v.len() as f64;
    v.into_iter().map(|z| z - mean).collect()
}

fn expect_kind(contour: &Contour, kind: ContourKind) -> Result<()> {
    if contour.kind != kind {
        return Err(Error::InvalidContour(format!("expected {kind:?}, got {:?}", contour.kind)));
    }
    Ok(())
}

/// The mode's linearizing transform of `m` along the contour.
pub fn transform_column<M: Spectral + ?Sized>(mode: Mode, m: &M, contour: &Contour, cfg: &NewtonConfig) -> Result<Vec<Complex64>> {
    match mode {
        Mode::Classical => {
            expect_kind(contour, ContourKind::XiRay)?;
            let v: Vec<Complex64> = contour.points.iter().map(|&xi| char_fn(m, xi)).collect();
            transform::log_branch_track(&v)
        }
        Mode::Additive => {
            expect_kind(contour, ContourKind::GCircle)?;
            contour
                .points
                .iter()
                .map(|&g| transform::r_transform(m, g, cfg))
                .collect()
        }
        Mode::Multiplicative => {
            expect_kind(contour, ContourKind::TCircle)?;
            let v = contour
                .points
                .iter()
                .map(|&t| transform::s_transform(m, t, cfg))
                .collect::<Result<Vec<_>>>()?;
            transform::log_branch_track(&v)
        }
    }
}

/// `log γ̂(ξ_j)` of the samples, branch tracked along the ray.
pub fn observation_classical(s: &EmpiricalSpectrum, contour: &Contour) -> Result<Vec<Complex64>> {
    transform_column(Mode::Classical, s, contour, &NewtonConfig::default())
}

/// `r_{μ_C}(g_j)` of the empirical spectrum.
pub fn observation_additive(s: &EmpiricalSpectrum, contour: &Contour, cfg: &NewtonConfig) -> Result<Vec<Complex64>> {
    transform_column(Mode::Additive, s, contour, cfg)
}

/// `log s_{μ_C}(t_j)` of the empirical spectrum, branch tracked along the circle.
pub fn observation_multiplicative(s: &EmpiricalSpectrum, contour: &Contour, cfg: &NewtonConfig) -> Result<Vec<Complex64>> {
    transform_column(Mode::Multiplicative, s, contour, cfg)
}

pub fn observation(mode: Mode, s: &EmpiricalSpectrum, contour: &Contour, cfg: &NewtonConfig) -> Result<Vec<Complex64>> {
    match mode {
        Mode::Classical => observation_classical(s, contour),
        Mode::Additive => observation_additive(s, contour, cfg),
        Mode::Multiplicative => observation_multiplicative(s, contour, cfg),
    }
}

/// Noiseless observation `Σ_k G(z_j, x_k)`.
pub fn forward_oracle(mode: Mode, family: &ParametricFamily, xs: &[f64], contour: &Contour, cfg: &NewtonConfig) -> Result<Vec<Complex64>> {
    let mut u = vec![Complex64::new(0.0, 0.0); contour.len()];
    for &x in xs {
        if !family.contains(x) {
            return Err(Error::input("xs", format!("{x} outside the family domain")));
        }
        let col = transform_column(mode, &family.eval(x)?, contour, cfg)?;
        for (a, b) in u.iter_mut().zip(col) {
            *a += b;
        }
    }
    Ok(u)
}

/// Candidate contours for a family and mode.
pub fn contours(mode: Mode, family: &ParametricFamily, cfg: &SolverConfig) -> Result<Vec<Contour>> {
    let (lo, hi) = family.domain();
    let nodes = eigenmatrix::chebyshev_nodes(lo, hi, cfg.n_c)?;
    let sigma = family.spectral_scale(&nodes)?.max(f64::MIN_POSITIVE);
    match mode {
        Mode::Additive => {
            let radii = cfg.radii.clone().unwrap_or_else(|| vec![ADDITIVE_RADIUS / sigma]);
            radii.iter().map(|&r| Contour::g_circle(r, cfg.n_z)).collect()
        }
        Mode::Multiplicative => {
            let radii = cfg.radii.clone().unwrap_or_else(|| MULTIPLICATIVE_RADII.to_vec());
            radii.iter().map(|&r| Contour::t_circle(r, cfg.n_z)).collect()
        }
        Mode::Classical => {
            let xs = cfg
                .xi_max
                .clone()
                .unwrap_or_else(|| CLASSICAL_XI_MAX.iter().map(|v| v / sigma).collect());
            let eps = cfg.eps_imag.unwrap_or(CLASSICAL_EPS_IMAG / sigma);
            xs.iter().map(|&x| Contour::xi_ray(x, cfg.n_z, eps)).collect()
        }
    }
}

/// The small literal contour for a mode: g radius 0.15/σ, t radius 0.1, ξ_max 3/σ.
pub fn literal_contour(mode: Mode, family: &ParametricFamily, n_z: usize) -> Result<Contour> {
    let (lo, hi) = family.domain();
    let nodes = eigenmatrix::chebyshev_nodes(lo, hi, 32)?;
    let sigma = family.spectral_scale(&nodes)?.max(f64::MIN_POSITIVE);
    match mode {
        Mode::Additive => Contour::g_circle(0.15 / sigma, n_z),
        Mode::Multiplicative => Contour::t_circle(0.1, n_z),
        Mode::Classical => Contour::xi_ray(3.0 / sigma, n_z, 1e-6),
    }
}

pub fn default_norm_bound(family: &ParametricFamily, cfg: &SolverConfig) -> f64 {
    let (lo, hi) = family.domain();
    let scale = lo.abs().max(hi.abs());
    cfg.norm_bound.unwrap_or(match cfg.selection {
        Selection::Residual => NORM_BOUND_FACTOR * scale,
        Selection::NormBound => 10.0 * scale,
    })
}

/// Basis plus admissible models for one contour.
pub struct ModelSet {
    pub basis: EigenmatrixBasis,
    pub models: Vec<EigenmatrixModel>,
}

type Cache = RwLock<HashMap<String, Arc<ModelSet>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

pub fn clear_model_cache() {
    cache().write().unwrap_or_else(|e| e.into_inner()).clear();
}

/// Cached basis and models keyed by family, contour and build parameters.
pub fn model_set(mode: Mode, family: &ParametricFamily, contour: &Contour, cfg: &SolverConfig) -> Result<Arc<ModelSet>> {
    let bound = default_norm_bound(family, cfg);
    let (floor, cap) = match cfg.selection {
        Selection::Residual => (cfg.threshold_floor, cfg.threshold_cap),
        Selection::NormBound => (cfg.threshold_floor, 1e-2),
    };
    let key = format!(
        "{mode:?}|{}|{:?}|{:?}|{}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{}",
        family.name(),
        family.domain(),
        contour.kind,
        contour.len(),
        contour.points.iter().map(|p| format!("{:x}{:x}", p.re.to_bits(), p.im.to_bits())).collect::<String>(),
        cfg.n_c,
        cfg.newton,
        bound,
        cfg.probe_tol,
        floor,
        cap,
        cfg.affine_offset,
    );
    if let Some(hit) = cache().read().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return Ok(hit.clone());
    }
    let kernel = FamilyKernel {
        mode,
        family,
        newton: cfg.newton,
        centered: cfg.affine_offset,
    };
    let basis = EigenmatrixBasis::new(&kernel, contour, cfg.n_c)?;
    let models = match cfg.selection {
        Selection::Residual => basis.admissible_models(bound, cfg.probe_tol, floor, cap)?,
        Selection::NormBound => vec![eigenmatrix::build_model_from(&basis, bound, floor)?],
    };
    if models.is_empty() {
        let best = basis
            .admissible_models(f64::INFINITY, f64::INFINITY, floor, cap)?
            .iter()
            .map(|m| m.m_norm)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NormBoundUnreachable { bound, best });
    }
    let set = Arc::new(ModelSet { basis, models });
    cache()
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .insert(key, set.clone());
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observed {
    /// Sampled eigenvalues or scalar samples.
    Spectrum(EmpiricalSpectrum),
    /// Noiseless forward-model data for the given parameters.
    Oracle(Vec<f64>),
    /// Precomputed observation on a fixed contour.
    Vector { contour: Contour, u: Vec<Complex64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeCount {
    Fixed(usize),
    Auto,
}

#[derive(Debug, Clone)]
pub struct DeconvProblem {
    pub mode: Mode,
    pub family: ParametricFamily,
    pub observed: Observed,
    pub n: SpikeCount,
    pub solver: SolverConfig,
}

/// Serializable form of a [`DeconvProblem`] over a built-in family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub mode: Mode,
    pub family: FamilyId,
    pub observed: Observed,
    pub n: SpikeCount,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl From<&ProblemSpec> for DeconvProblem {
    fn from(p: &ProblemSpec) -> Self {
        DeconvProblem {
            mode: p.mode,
            family: p.family.family(),
            observed: p.observed.clone(),
            n: p.n,
            solver: p.solver.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub contour_kind: ContourKind,
    pub contour_extent: f64,
    pub eps_imag: f64,
    pub n_z: usize,
    pub n_c: usize,
    pub threshold_used: f64,
    pub m_norm: f64,
    pub norm_bound: f64,
    #[serde(with = "crate::unbounded")]
    pub bhat_cond: f64,
    pub model_residual: f64,
    pub probe_residual: f64,
    pub n_l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub contour_extent: f64,
    pub threshold: Option<f64>,
    pub n_l: Option<usize>,
    pub relative_residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeEstimate {
    pub n: usize,
    pub gap_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvReport {
    pub mode: Mode,
    pub family: String,
    pub domain: (f64, f64),
    pub n: usize,
    pub n_estimate: Option<SpikeEstimate>,
    pub solution: RecoverySolution,
    pub offset: Option<[f64; 2]>,
    pub relative_residual: f64,
    pub observation: Vec<[f64; 2]>,
    pub model: ModelDiagnostics,
    pub candidates: Vec<Candidate>,
    pub warnings: Vec<String>,
    pub timing_seconds: f64,
    pub solver: SolverConfig,
}

struct Best {
    rel: f64,
    solution: RecoverySolution,
    offset: Option<[f64; 2]>,
    u: Vec<Complex64>,
    model: EigenmatrixModel,
    n_l: usize,
    imag_flagged: bool,
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> impl Fn() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn clock() -> impl Fn() -> f64 {
    || 0.0
}

pub fn deconvolve(problem: &DeconvProblem) -> Result<DeconvReport> {
    let elapsed = clock();
    let cfg = &problem.solver;
    cfg.validate()?;
    let mode = problem.mode;
    let family = &problem.family;
    family.check_normalization(mode)?;

    let candidates_contours = match &problem.observed {
        Observed::Vector { contour, u } => {
            contour.validate()?;
            if u.len() != contour.len() {
                return Err(Error::input("u", "length differs from the contour"));
            }
            vec![contour.clone()]
        }
        _ => match cfg.selection {
            Selection::Residual => contours(mode, family, cfg)?,
            Selection::NormBound => vec![literal_contour(mode, family, cfg.n_z)?],
        },
    };

    let observe = |contour: &Contour| -> Result<Vec<Complex64>> {
        match &problem.observed {
            Observed::Spectrum(s) => observation(mode, s, contour, &cfg.newton),
            Observed::Oracle(xs) => forward_oracle(mode, family, xs, contour, &cfg.newton),
            Observed::Vector { u, .. } => Ok(u.clone()),
        }
    };

    let raw_kernel = FamilyKernel { mode, family, newton: cfg.newton, centered: false };
    let model_kernel = FamilyKernel { mode, family, newton: cfg.newton, centered: cfg.affine_offset };

    let mut n_estimate = None;
    let mut tried = Vec::new();
    let mut best: Option<Best> = None;
    let mut first_error: Option<Error> = None;
    let mut n_fixed = match problem.n {
        SpikeCount::Fixed(n) if n >= 1 => Some(n),
        SpikeCount::Fixed(_) => return Err(Error::input("n", "must be at least 1")),
        SpikeCount::Auto => None,
    };

    for contour in &candidates_contours {
        let attempt = (|| -> Result<(Arc<ModelSet>, Vec<Complex64>)> {
            let set = model_set(mode, family, contour, cfg)?;
            let u = observe(contour)?;
            Ok((set, u))
        })();
        let (set, u_raw) = match attempt {
            Ok(v) => v,
            Err(e) => {
                tried.push(Candidate {
                    contour_extent: contour.extent,
                    threshold: None,
                    n_l: None,
                    relative_residual: None,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
                continue;
            }
        };
        let u_model = if cfg.affine_offset { center(u_raw.clone()) } else { u_raw.clone() };
        let n = match n_fixed {
            Some(n) => n,
            None => {
                let t = eigenmatrix::krylov_matrix(&set.models[0].m, &u_model, 12);
                let sv = linalg::singular_values(&t)?;
                let n = eigenmatrix::estimate_spike_count(&sv, cfg.gap_factor)?;
                let gap_ratio = sv[n - 1] / sv[n];
                n_estimate = Some(SpikeEstimate { n, gap_ratio });
                n_fixed = Some(n);
                n
            }
        };
        let depths: Vec<usize> = match (cfg.n_l, cfg.selection) {
            (Some(nl), _) => vec![nl],
            (None, Selection::Residual) => cfg.krylov_offsets.iter().map(|k| n + k).collect(),
            (None, Selection::NormBound) => vec![(2 * n + 2).max(12)],
        };
        let unorm = linalg::norm(&u_raw).max(f64::MIN_POSITIVE);
        for model in &set.models {
            for &n_l in &depths {
                let out = eigenmatrix::recover(
                    model,
                    &model_kernel,
                    &raw_kernel,
                    &u_model,
                    &u_raw,
                    n,
                    n_l,
                    cfg.im_tol,
                    cfg.affine_offset,
                );
                match out {
                    Ok((solution, fit)) => {
                        let rel = fit.ls_residual / unorm;
                        tried.push(Candidate {
                            contour_extent: contour.extent,
                            threshold: Some(model.threshold_used),
                            n_l: Some(n_l),
                            relative_residual: Some(rel),
                            error: None,
                        });
                        if rel.is_finite() && best.as_ref().is_none_or(|b| rel < b.rel) {
                            best = Some(Best {
                                rel,
                                solution,
                                offset: fit.offset,
                                u: u_raw.clone(),
                                model: model.clone(),
                                n_l,
                                imag_flagged: fit.imag_flagged,
                            });
                        }
                    }
                    Err(e) => {
                        tried.push(Candidate {
                            contour_extent: contour.extent,
                            threshold: Some(model.threshold_used),
                            n_l: Some(n_l),
                            relative_residual: None,
                            error: Some(e.to_string()),
                        });
                        first_error.get_or_insert(e);
                    }
                }
            }
        }
    }

    let Some(best) = best else {
        return Err(first_error.unwrap_or_else(|| Error::input("contours", "no candidate contour")));
    };
    let (lo, hi) = family.domain();
    let mut warnings = Vec::new();
    for (x, w) in best.solution.locations.iter().zip(&best.solution.weights) {
        if (w - 1.0).abs() > 0.2 {
            warnings.push(format!("weight {w:.4} at x = {x:.6} deviates from 1 by more than 0.2"));
        }
    }
    for p in best.solution.locations.windows(2) {
        if p[1] - p[0] < 1e-6 * (hi - lo) {
            warnings.push(format!("duplicate locations near x = {:.6}", p[0]));
        }
    }
    if best.imag_flagged {
        warnings.push("weights carry imaginary parts above im_tol".into());
    }
    if best.solution.degenerate_truncation {
        warnings.push("degenerate truncation: σ_n and σ_(n+1) tie".into());
    }
    let contour = &best.model.contour;
    Ok(DeconvReport {
        mode,
        family: family.name().to_string(),
        domain: (lo, hi),
        n: best.solution.locations.len(),
        n_estimate,
        relative_residual: best.rel,
        observation: best.u.iter().map(|z| [z.re, z.im]).collect(),
        model: ModelDiagnostics {
            contour_kind: contour.kind,
            contour_extent: contour.extent,
            eps_imag: if contour.kind == ContourKind::XiRay { -contour.points[0].im } else { 0.0 },
            n_z: contour.len(),
            n_c: best.model.cheb_nodes.len(),
            threshold_used: best.model.threshold_used,
            m_norm: best.model.m_norm,
            norm_bound: default_norm_bound(family, cfg),
            bhat_cond: best.model.bhat_cond,
            model_residual: best.model.model_residual,
            probe_residual: best.model.probe_residual,
            n_l: best.n_l,
        },
        solution: best.solution,
        offset: best.offset,
        candidates: tried,
        warnings,
        timing_seconds: elapsed(),
        solver: cfg.clone(),
    })
}

/// Spectral sample of the mode's ensemble with one factor per parameter.
pub fn simulate(mode: Mode, family: &ParametricFamily, xs: &[f64], dimension: usize, seed: u64) -> Result<EmpiricalSpectrum> {
    let measures = xs.iter().map(|&x| family.eval(x)).collect::<Result<Vec<_>>>()?;
    rmt::sample(&EnsembleSpec {
        kind: mode,
        measures,
        dimension,
        seed,
    })
}

/// Setup of one of the six reference experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceExample {
    pub id: u8,
    pub mode: Mode,
    pub family: FamilyId,
    pub xs: Vec<f64>,
    pub dimension_full: usize,
    pub dimension_desk: usize,
    pub tol_desk: f64,
    pub tol_full: f64,
}

pub fn reference_example(id: u8) -> Option<ReferenceExample> {
    let (family, xs, full, desk, tol_desk, tol_full): (FamilyId, &[f64], usize, usize, f64, f64) = match id {
        1 => (FamilyId::F1, &[0.2, 0.6, 1.0], 102_400, 102_400, 0.02, 0.02),
        2 => (FamilyId::F2, &[0.2, 0.6, 1.0], 102_400, 102_400, 0.02, 0.02),
        3 => (FamilyId::F3, &[0.5, 0.9], 8192, 2048, 0.05, 0.03),
        4 => (FamilyId::F4, &[0.4, 0.7, 1.0], 8192, 2048, 0.05, 0.03),
        5 => (FamilyId::F5, &[1.7, 2.5], 8192, 2048, 0.08, 0.08),
        6 => (FamilyId::F6, &[1.4, 2.2, 3.0], 8192, 2048, 0.08, 0.08),
        _ => return None,
    };
    Some(ReferenceExample {
        id,
        mode: family.native_mode(),
        family,
        xs: xs.to_vec(),
        dimension_full: full,
        dimension_desk: desk,
        tol_desk,
        tol_full,
    })
}

/// Largest absolute location error after sorting both lists; `None` on a count mismatch.
pub fn max_location_error(truth: &[f64], recovered: &[f64]) -> Option<f64> {
    if truth.len() != recovered.len() {
        return None;
    }
    let mut t = truth.to_vec();
    t.sort_by(f64::total_cmp);
    let mut r = recovered.to_vec();
    r.sort_by(f64::total_cmp);
    Some(t.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Simulates and deconvolves one seed of a reference experiment.
pub fn run_reference_example(ex: &ReferenceExample, dimension: usize, seed: u64, solver: &SolverConfig) -> Result<(EmpiricalSpectrum, DeconvReport)> {
    let family = ex.family.family();
    let spectrum = simulate(ex.mode, &family, &ex.xs, dimension, seed)?;
    let report = deconvolve(&DeconvProblem {
        mode: ex.mode,
        family,
        observed: Observed::Spectrum(spectrum.clone()),
        n: SpikeCount::Fixed(ex.xs.len()),
        solver: solver.clone(),
    })?;
    Ok((spectrum, report))
}
