//! R- and S-transforms by Newton inversion, and branch-tracked logarithms.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{stieltjes_pair, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub max_halvings: usize,
    /// Radial steps from near the origin out to the target; 0 starts Newton directly at the target.
    pub continuation_steps: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            damping: 1.0,
            max_halvings: 20,
            continuation_steps: 8,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::input("newton.tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::input("newton.max_iter", "must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::input("newton.damping", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourKind {
    GCircle,
    TCircle,
    XiRay,
}

/// Ordered sample points for a transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub kind: ContourKind,
    pub points: Vec<Complex64>,
    /// Circle radius, or the largest real part for a ray.
    pub extent: f64,
}

impl Contour {
    fn circle(kind: ContourKind, radius: f64, n_z: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidContour(format!("radius {radius} must be positive")));
        }
        if n_z == 0 {
            return Err(Error::InvalidContour("n_z must be positive".into()));
        }
        let points = (0..n_z)
            .map(|j| Complex64::from_polar(radius, 2.0 * PI * (j as f64 + 0.5) / n_z as f64))
            .collect();
        Ok(Self { kind, points, extent: radius })
    }

    pub fn g_circle(radius: f64, n_z: usize) -> Result<Self> {
        Self::circle(ContourKind::GCircle, radius, n_z)
    }

    pub fn t_circle(radius: f64, n_z: usize) -> Result<Self> {
        Self::circle(ContourKind::TCircle, radius, n_z)
    }

    /// Points `xi_max * j / n_z - i eps` for `j = 1..=n_z`.
    pub fn xi_ray(xi_max: f64, n_z: usize, eps_imag: f64) -> Result<Self> {
        if !(xi_max > 0.0 && xi_max.is_finite()) || n_z == 0 || !(eps_imag >= 0.0) {
            return Err(Error::InvalidContour(format!(
                "xi ray needs xi_max > 0, n_z > 0, eps >= 0 (got {xi_max}, {n_z}, {eps_imag})"
            )));
        }
        let points = (1..=n_z)
            .map(|j| Complex64::new(xi_max * j as f64 / n_z as f64, -eps_imag))
            .collect();
        Ok(Self {
            kind: ContourKind::XiRay,
            points,
            extent: xi_max,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidContour("no points".into()));
        }
        match self.kind {
            ContourKind::GCircle | ContourKind::TCircle => {
                for p in &self.points {
                    if p.norm() == 0.0 || (p.norm() - self.extent).abs() > 1e-14 * self.extent.max(1.0) {
                        return Err(Error::InvalidContour(format!("point {p} is off the circle")));
                    }
                }
            }
            ContourKind::XiRay => {
                let im = self.points[0].im;
                for w in self.points.windows(2) {
                    if w[1].re <= w[0].re || w[1].im != im {
                        return Err(Error::InvalidContour("ray points must increase with fixed imaginary part".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

fn pole(e: Error) -> Error {
    match e {
        Error::DivisionNearPole { z } => Error::PoleCollision { z },
        e => e,
    }
}

/// Damped Newton on `f(z) = target` where `eval` returns `(f, f')`.
fn damped_newton(
    mut z: Complex64,
    target: Complex64,
    cfg: &NewtonConfig,
    eval: impl Fn(Complex64) -> Result<(Complex64, Complex64)>,
) -> Result<(Complex64, usize)> {
    let (f0, mut df) = eval(z).map_err(pole)?;
    let mut res = target - f0;
    let initial = res.norm();
    for it in 0..cfg.max_iter {
        if res.norm() <= cfg.tol {
            return Ok((z, it));
        }
        let step = res / df;
        if !step.is_finite() {
            return Err(Error::NewtonDiverged { iterations: it, residual: res.norm() });
        }
        let mut lam = cfg.damping;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let zn = z + lam * step;
            let (fn_, dfn) = eval(zn).map_err(pole)?;
            let rn = target - fn_;
            if rn.norm() < res.norm() {
                accepted = Some((zn, rn, dfn));
                break;
            }
            lam *= 0.5;
        }
        match accepted {
            Some((zn, rn, dfn)) => {
                z = zn;
                res = rn;
                df = dfn;
            }
            None => {
                return Err(Error::NewtonDiverged { iterations: it + 1, residual: res.norm() });
            }
        }
        if res.norm() > 10.0 * initial.max(cfg.tol) {
            return Err(Error::NewtonDiverged { iterations: it + 1, residual: res.norm() });
        }
    }
    if res.norm() <= cfg.tol {
        Ok((z, cfg.max_iter))
    } else {
        Err(Error::NewtonDiverged { iterations: cfg.max_iter, residual: res.norm() })
    }
}

/// Solves `g_m(z) = g` on the branch with `z ~ 1/g` near `g = 0`. Also returns the iteration count.
pub fn invert_stieltjes_traced<M: Spectral + ?Sized>(m: &M, g: Complex64, cfg: &NewtonConfig) -> Result<(Complex64, usize)> {
    if g.norm() == 0.0 || !g.is_finite() {
        return Err(Error::input("g", "must be finite and nonzero"));
    }
    // r = z - 1/g is carried between continuation steps
    let mut r = Complex64::new(m.first_moment(), 0.0);
    let mut total = 0;
    for gk in radial_path(g, cfg.continuation_steps) {
        let (z, it) = damped_newton(gk.inv() + r, gk, cfg, |z| stieltjes_pair(m, z))?;
        r = z - gk.inv();
        total += it;
    }
    Ok((g.inv() + r, total))
}

/// `t k/K` for `k = 1..=K`, or just `t`.
fn radial_path(t: Complex64, steps: usize) -> impl Iterator<Item = Complex64> {
    let k = steps.max(1);
    (1..=k).map(move |j| if j == k { t } else { t * (j as f64 / k as f64) })
}

pub fn invert_stieltjes<M: Spectral + ?Sized>(m: &M, g: Complex64, cfg: &NewtonConfig) -> Result<Complex64> {
    invert_stieltjes_traced(m, g, cfg).map(|r| r.0)
}

pub fn r_transform<M: Spectral + ?Sized>(m: &M, g: Complex64, cfg: &NewtonConfig) -> Result<Complex64> {
    Ok(invert_stieltjes(m, g, cfg)? - g.inv())
}

/// Solves `z g_m(z) = t + 1` on the branch with `z ~ m1/t` near `t = 0`. Also returns the iteration count.
pub fn invert_zg_traced<M: Spectral + ?Sized>(m: &M, t: Complex64, cfg: &NewtonConfig) -> Result<(Complex64, usize)> {
    if t.norm() == 0.0 || !t.is_finite() {
        return Err(Error::input("t", "must be finite and nonzero"));
    }
    let m1 = m.first_moment();
    if m1 == 0.0 {
        return Err(Error::ZeroFirstMoment);
    }
    // s = (t+1)/(t z) is carried between continuation steps
    let mut s = Complex64::new(1.0 / m1, 0.0);
    let mut total = 0;
    let mut z = Complex64::new(0.0, 0.0);
    for tk in radial_path(t, cfg.continuation_steps) {
        let z0 = if cfg.continuation_steps == 0 { m1 / tk } else { (tk + 1.0) / (tk * s) };
        let (zk, it) = damped_newton(z0, tk + 1.0, cfg, |z| {
            let (g, dg) = stieltjes_pair(m, z)?;
            Ok((z * g, g + z * dg))
        })?;
        s = (tk + 1.0) / (tk * zk);
        z = zk;
        total += it;
    }
    Ok((z, total))
}

pub fn invert_zg<M: Spectral + ?Sized>(m: &M, t: Complex64, cfg: &NewtonConfig) -> Result<Complex64> {
    invert_zg_traced(m, t, cfg).map(|r| r.0)
}

pub fn s_transform<M: Spectral + ?Sized>(m: &M, t: Complex64, cfg: &NewtonConfig) -> Result<Complex64> {
    let z = invert_zg(m, t, cfg)?;
    Ok((t + 1.0) / (t * z))
}

/// Logarithms continuous along the sequence, starting on the principal branch.
pub fn log_branch_track(values: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out: Vec<Complex64> = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if v.norm() == 0.0 || !v.is_finite() {
            return Err(Error::ZeroValue { index: i });
        }
        let l = v.ln();
        let next = match out.last() {
            None => l,
            Some(prev) => {
                let gap = (v / values[i - 1]).arg().abs();
                if gap >= PI {
                    return Err(Error::BranchJump { index: i, gap });
                }
                let k = ((prev.im - l.im) / (2.0 * PI)).round();
                Complex64::new(l.re, l.im + 2.0 * PI * k)
            }
        };
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{stieltjes, AtomicMeasure, FamilyId};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dirac_closed_forms() {
        let a = 0.7;
        let d = AtomicMeasure::dirac(a).unwrap();
        let cfg = NewtonConfig::default();
        for g in Contour::g_circle(0.3, 16).unwrap().points {
            assert!((invert_stieltjes(&d, g, &cfg).unwrap() - (a + g.inv())).norm() < 1e-10);
            assert!((r_transform(&d, g, &cfg).unwrap() - a).norm() < 1e-10);
        }
        for t in Contour::t_circle(0.3, 16).unwrap().points {
            assert!((invert_zg(&d, t, &cfg).unwrap() - a * (t + 1.0) / t).norm() < 1e-9);
            assert!((s_transform(&d, t, &cfg).unwrap() - 1.0 / a).norm() < 1e-10);
        }
    }

    #[test]
    fn symmetric_pair_inverse() {
        let x = 0.9;
        let m = FamilyId::F4.family().eval(x).unwrap();
        let cfg = NewtonConfig::default();
        for g in Contour::g_circle(0.4, 32).unwrap().points {
            let want = (1.0 + (1.0 + 4.0 * g * g * x * x).sqrt()) / (2.0 * g);
            assert!((invert_stieltjes(&m, g, &cfg).unwrap() - want).norm() < 1e-10);
        }
    }

    #[test]
    fn small_argument_limits() {
        let m = FamilyId::F3.family().eval(0.6).unwrap();
        let cfg = NewtonConfig::default();
        let r = r_transform(&m, c(1e-4, 1e-4), &cfg).unwrap();
        assert!(r.norm() < 1e-3);
        let m = FamilyId::F5.family().eval(2.0).unwrap();
        let s = s_transform(&m, c(1e-5, -1e-5), &cfg).unwrap();
        assert!((s - 1.0).norm() < 1e-3);
    }

    #[test]
    fn conjugate_symmetry() {
        let m = FamilyId::F3.family().eval(0.8).unwrap();
        let cfg = NewtonConfig::default();
        let g = c(0.2, 0.31);
        let a = r_transform(&m, g, &cfg).unwrap();
        let b = r_transform(&m, g.conj(), &cfg).unwrap();
        assert!((a.conj() - b).norm() < 1e-12);
    }

    #[test]
    fn round_trip_residuals() {
        let m = FamilyId::F6.family().eval(2.2).unwrap();
        let cfg = NewtonConfig::default();
        for t in Contour::t_circle(0.5, 64).unwrap().points {
            let z = invert_zg(&m, t, &cfg).unwrap();
            assert!((z * stieltjes(&m, z).unwrap() - 1.0 - t).norm() <= 1e-12);
        }
    }

    #[test]
    fn zero_first_moment() {
        let m = FamilyId::F4.family().eval(0.5).unwrap();
        assert_eq!(invert_zg(&m, c(0.1, 0.0), &NewtonConfig::default()), Err(Error::ZeroFirstMoment));
    }

    #[test]
    fn unwrap_quarter_turns() {
        let v = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        let l = log_branch_track(&v).unwrap();
        let want = [0.0, PI / 2.0, PI, 1.5 * PI];
        for (a, b) in l.iter().zip(want) {
            assert!((a.im - b).abs() < 1e-15 && a.re.abs() < 1e-15);
        }
        let l = log_branch_track(&[c(0.3f64.exp(), 0.0)]).unwrap();
        assert!((l[0] - c(0.3, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unwrap_errors() {
        assert_eq!(log_branch_track(&[c(1.0, 0.0), c(0.0, 0.0)]), Err(Error::ZeroValue { index: 1 }));
        assert!(matches!(
            log_branch_track(&[c(1.0, 0.0), c(-1.0, 0.0)]),
            Err(Error::BranchJump { index: 1, .. })
        ));
    }

    #[test]
    fn contour_shapes() {
        let g = Contour::g_circle(0.2, 64).unwrap();
        g.validate().unwrap();
        assert!(g.points.iter().all(|p| p.im != 0.0 || p.re < 0.0));
        let r = Contour::xi_ray(3.0, 64, 1e-6).unwrap();
        r.validate().unwrap();
        assert_eq!(r.points[63], c(3.0, -1e-6));
        assert!(Contour::g_circle(0.0, 4).is_err());
    }
}
