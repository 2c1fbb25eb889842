//! Atomic measures, one-parameter families and empirical spectra.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Mode;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const MERGE_TOL: f64 = 1e-10;
const POLE_GUARD: f64 = 1e-14;

/// Finite discrete probability measure, atoms sorted by location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtoms", into = "RawAtoms")]
pub struct AtomicMeasure {
    locs: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawAtoms {
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<RawAtoms> for AtomicMeasure {
    type Error = Error;
    fn try_from(raw: RawAtoms) -> Result<Self> {
        AtomicMeasure::new(raw.atoms)
    }
}

impl From<AtomicMeasure> for RawAtoms {
    fn from(m: AtomicMeasure) -> Self {
        RawAtoms { atoms: m.atoms().collect() }
    }
}

impl AtomicMeasure {
    /// Builds a measure from `(location, weight)` pairs. Nearby locations are merged.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        for &(l, w) in &atoms {
            if !l.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite location {l}")));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::InvalidMeasure(format!("weight {w} outside (0, 1]")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scale = 1.0 + atoms.iter().map(|a| a.0.abs()).fold(0.0, f64::max);
        let mut locs: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (l, w) in atoms {
            match locs.last() {
                Some(&prev) if (l - prev).abs() < MERGE_TOL * scale => {
                    *weights.last_mut().unwrap() += w;
                }
                _ => {
                    locs.push(l);
                    weights.push(w);
                }
            }
        }
        Ok(Self { locs, weights })
    }

    pub fn dirac(a: f64) -> Result<Self> {
        Self::new([(a, 1.0)])
    }

    pub fn locations(&self) -> &[f64] {
        &self.locs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locs.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.locs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locs.is_empty()
    }

    pub fn moment(&self, k: u32) -> f64 {
        moment(self, k)
    }
}

/// Sorted eigenvalues or scalar samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawValues", into = "RawValues")]
pub struct EmpiricalSpectrum {
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawValues {
    values: Vec<f64>,
}

impl TryFrom<RawValues> for EmpiricalSpectrum {
    type Error = Error;
    fn try_from(raw: RawValues) -> Result<Self> {
        EmpiricalSpectrum::new(raw.values)
    }
}

impl From<EmpiricalSpectrum> for RawValues {
    fn from(s: EmpiricalSpectrum) -> Self {
        RawValues { values: s.values }
    }
}

impl EmpiricalSpectrum {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::input("values", format!("non-finite value {v}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Anything with a finite list of weighted support points.
pub trait Spectral: Sync {
    /// Calls `f(location, weight)` for every support point.
    fn for_each_point(&self, f: &mut dyn FnMut(f64, f64));

    fn first_moment(&self) -> f64 {
        let mut m = 0.0;
        self.for_each_point(&mut |l, w| m += w * l);
        m
    }

    /// Largest absolute support point.
    fn radius(&self) -> f64 {
        let mut r: f64 = 0.0;
        self.for_each_point(&mut |l, _| r = r.max(l.abs()));
        r
    }
}

impl Spectral for AtomicMeasure {
    fn for_each_point(&self, f: &mut dyn FnMut(f64, f64)) {
        for (l, w) in self.atoms() {
            f(l, w);
        }
    }
}

impl Spectral for EmpiricalSpectrum {
    fn for_each_point(&self, f: &mut dyn FnMut(f64, f64)) {
        let w = 1.0 / self.values.len() as f64;
        for &l in &self.values {
            f(l, w);
        }
    }

    fn first_moment(&self) -> f64 {
        self.mean()
    }
}

/// Returns `(g(z), g'(z))` in one pass.
pub fn stieltjes_pair<M: Spectral + ?Sized>(m: &M, z: Complex64) -> Result<(Complex64, Complex64)> {
    let guard = POLE_GUARD * (1.0 + z.norm());
    let mut g = Complex64::new(0.0, 0.0);
    let mut dg = Complex64::new(0.0, 0.0);
    let mut near = false;
    m.for_each_point(&mut |l, w| {
        let d = z - l;
        if d.norm() < guard {
            near = true;
        }
        let inv = d.inv();
        g += w * inv;
        dg -= w * inv * inv;
    });
    if near {
        return Err(Error::DivisionNearPole { z });
    }
    Ok((g, dg))
}

pub fn stieltjes<M: Spectral + ?Sized>(m: &M, z: Complex64) -> Result<Complex64> {
    stieltjes_pair(m, z).map(|p| p.0)
}

pub fn stieltjes_deriv<M: Spectral + ?Sized>(m: &M, z: Complex64) -> Result<Complex64> {
    stieltjes_pair(m, z).map(|p| p.1)
}

pub fn moment(m: &AtomicMeasure, k: u32) -> f64 {
    m.atoms().map(|(l, w)| w * l.powi(k as i32)).sum()
}

/// `Σ w exp(-i λ ξ)`.
pub fn char_fn<M: Spectral + ?Sized>(m: &M, xi: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mi = Complex64::new(0.0, -1.0) * xi;
    m.for_each_point(&mut |l, w| acc += w * (mi * l).exp());
    acc
}

/// Equal-width histogram; bins are half-open except the last one.
pub fn histogram(s: &EmpiricalSpectrum, bins: usize, range: Option<(f64, f64)>) -> Result<Vec<(f64, usize)>> {
    if bins == 0 {
        return Err(Error::input("bins", "must be at least 1"));
    }
    let v = s.values();
    if v.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let (lo, hi) = range.unwrap_or((v[0], v[v.len() - 1]));
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::input("range", format!("invalid histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in v {
        if x < lo || x > hi {
            continue;
        }
        let idx = if width == 0.0 {
            0
        } else {
            (((x - lo) / width).floor() as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c))
        .collect())
}

/// Built-in families of the two-atom type used throughout the examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyId {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
}

impl FamilyId {
    pub const ALL: [FamilyId; 6] = [Self::F1, Self::F2, Self::F3, Self::F4, Self::F5, Self::F6];

    pub fn family(self) -> ParametricFamily {
        let (lo, hi) = match self {
            Self::F1 | Self::F2 => (0.2, 1.0),
            Self::F3 | Self::F4 => (0.4, 1.0),
            Self::F5 | Self::F6 => (1.4, 3.0),
        };
        ParametricFamily {
            name: self.to_string(),
            builtin: Some(self),
            lo,
            hi,
            rule: Rule::Builtin(self),
        }
    }

    /// The deconvolution mode whose normalization the family satisfies.
    pub fn native_mode(self) -> Mode {
        match self {
            Self::F1 | Self::F2 => Mode::Classical,
            Self::F3 | Self::F4 => Mode::Additive,
            Self::F5 | Self::F6 => Mode::Multiplicative,
        }
    }

    fn atoms(self, x: f64) -> [(f64, f64); 2] {
        const THIRD: f64 = 1.0 / 3.0;
        match self {
            Self::F1 => [(0.0, 0.5), (x, 0.5)],
            Self::F2 => [(0.0, 2.0 * THIRD), (x, THIRD)],
            Self::F3 => [(-0.5 * x, 2.0 * THIRD), (x, THIRD)],
            Self::F4 => [(-x, 0.5), (x, 0.5)],
            Self::F5 => [(3.0 / (2.0 + x), 2.0 * THIRD), (3.0 * x / (2.0 + x), THIRD)],
            Self::F6 => [(2.0 / (1.0 + x), 0.5), (2.0 * x / (1.0 + x), 0.5)],
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for FamilyId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidFamily(format!("unknown family `{s}` (expected F1..F6)")))
    }
}

pub type FamilyRule = Arc<dyn Fn(f64) -> Result<AtomicMeasure> + Send + Sync>;

#[derive(Clone)]
enum Rule {
    Builtin(FamilyId),
    Custom(FamilyRule),
}

/// The map x -> rho_x over a closed interval.
#[derive(Clone)]
pub struct ParametricFamily {
    name: String,
    builtin: Option<FamilyId>,
    lo: f64,
    hi: f64,
    rule: Rule,
}

impl fmt::Debug for ParametricFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricFamily")
            .field("name", &self.name)
            .field("domain", &(self.lo, self.hi))
            .finish()
    }
}

impl ParametricFamily {
    /// User-supplied family. The rule is probed for continuity on a coarse grid.
    pub fn custom(name: impl Into<String>, lo: f64, hi: f64, rule: FamilyRule) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi - lo < 1e-12 {
            return Err(Error::DegenerateInterval { lo, hi });
        }
        let fam = Self {
            name: name.into(),
            builtin: None,
            lo,
            hi,
            rule: Rule::Custom(rule),
        };
        fam.smoothness_probe()?;
        Ok(fam)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn builtin(&self) -> Option<FamilyId> {
        self.builtin
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn eval(&self, x: f64) -> Result<AtomicMeasure> {
        match &self.rule {
            Rule::Builtin(id) => AtomicMeasure::new(id.atoms(x)),
            Rule::Custom(f) => f(x),
        }
    }

    fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        (0..n).map(move |i| self.lo + self.width() * i as f64 / (n - 1) as f64)
    }

    fn smoothness_probe(&self) -> Result<()> {
        let h = 1e-6 * self.width();
        for x in self.grid(17) {
            let a = self.eval((x - h).max(self.lo))?;
            let b = self.eval((x + h).min(self.hi))?;
            if a.len() != b.len() {
                return Err(Error::InvalidFamily(format!("atom count changes near x = {x}")));
            }
            let jump = a
                .atoms()
                .zip(b.atoms())
                .map(|((la, wa), (lb, wb))| (la - lb).abs().max((wa - wb).abs()))
                .fold(0.0, f64::max);
            if jump > 1e3 * h * (1.0 + a.radius()) {
                return Err(Error::InvalidFamily(format!("rule is not smooth near x = {x}")));
            }
        }
        Ok(())
    }

    /// First-moment normalization required by the mode, checked on a grid over X.
    pub fn check_normalization(&self, mode: Mode) -> Result<()> {
        for x in self.grid(33) {
            let m = self.eval(x)?;
            let m1 = m.moment(1);
            match mode {
                Mode::Classical => {}
                Mode::Additive if m1.abs() > 1e-12 => {
                    return Err(Error::NormalizationViolation(format!(
                        "additive mode needs zero first moment, {} has {m1:.3e} at x = {x}",
                        self.name
                    )));
                }
                Mode::Multiplicative => {
                    if (m1 - 1.0).abs() > 1e-12 {
                        return Err(Error::NormalizationViolation(format!(
                            "multiplicative mode needs unit first moment, {} has {m1} at x = {x}",
                            self.name
                        )));
                    }
                    if m.locations()[0] <= 0.0 {
                        return Err(Error::NormalizationViolation(format!(
                            "multiplicative mode needs positive atoms, {} has {} at x = {x}",
                            self.name,
                            m.locations()[0]
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Largest spectral radius over the given parameters.
    pub fn spectral_scale(&self, xs: &[f64]) -> Result<f64> {
        let mut s: f64 = 0.0;
        for &x in xs {
            s = s.max(self.eval(x)?.radius());
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn merge_and_sort() {
        let m = AtomicMeasure::new([(1.0, 0.25), (0.0, 0.5), (1.0 + 1e-13, 0.25)]).unwrap();
        assert_eq!(m.locations(), &[0.0, 1.0]);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(AtomicMeasure::new([(0.0, 0.5)]).is_err());
        assert!(AtomicMeasure::new([(0.0, 1.5), (1.0, -0.5)]).is_err());
        assert!(AtomicMeasure::new([(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn stieltjes_examples() {
        let d = AtomicMeasure::dirac(0.3).unwrap();
        let z = c(1.0, 0.5);
        assert!((stieltjes(&d, z).unwrap() - (z - 0.3).inv()).norm() < 1e-15);
        assert!((stieltjes_deriv(&d, z).unwrap() + (z - 0.3).powi(-2)).norm() < 1e-15);

        let f1 = FamilyId::F1.family().eval(0.6).unwrap();
        let g = stieltjes(&f1, c(2.0, 0.0)).unwrap();
        assert!((g.re - 0.607_142_857_142_857).abs() < 1e-12 && g.im == 0.0);
        let dg = stieltjes_deriv(&f1, c(2.0, 0.0)).unwrap();
        assert!((dg.re + (0.5 / 4.0 + 0.5 / 1.96)).abs() < 1e-12);
        assert!((dg.re + 0.380_102).abs() < 1e-6);
    }

    #[test]
    fn symmetric_pair_partial_fractions() {
        let x = 0.7;
        let m = FamilyId::F4.family().eval(x).unwrap();
        for z in [c(0.3, 1.1), c(-2.0, 0.4), c(5.0, -3.0)] {
            let want = z / (z * z - x * x);
            assert!((stieltjes(&m, z).unwrap() - want).norm() < 1e-14);
        }
    }

    #[test]
    fn pole_guard() {
        let d = AtomicMeasure::dirac(1.0).unwrap();
        assert!(matches!(stieltjes(&d, c(1.0, 0.0)), Err(Error::DivisionNearPole { .. })));
    }

    #[test]
    fn empirical_is_uniform_average() {
        let s = EmpiricalSpectrum::new(vec![1.0, -1.0, 0.5]).unwrap();
        assert_eq!(s.values(), &[-1.0, 0.5, 1.0]);
        let z = c(0.1, 2.0);
        let want = ((z + 1.0).inv() + (z - 0.5).inv() + (z - 1.0).inv()) / 3.0;
        assert!((stieltjes(&s, z).unwrap() - want).norm() < 1e-15);
    }

    #[test]
    fn moments_and_char_fn() {
        let d = AtomicMeasure::dirac(1.5).unwrap();
        assert_eq!(d.moment(0), 1.0);
        assert!((d.moment(3) - 1.5f64.powi(3)).abs() < 1e-15);
        let f1 = FamilyId::F1.family().eval(0.8).unwrap();
        let xi = c(2.3, -0.1);
        let want = 0.5 + 0.5 * (c(0.0, -0.8) * xi).exp();
        assert!((char_fn(&f1, xi) - want).norm() < 1e-15);
        assert!((char_fn(&f1, c(0.0, 0.0)) - 1.0).norm() < 1e-15);
        assert_eq!(char_fn(&AtomicMeasure::dirac(0.0).unwrap(), xi), c(1.0, 0.0));
    }

    #[test]
    fn histogram_examples() {
        let s = EmpiricalSpectrum::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(histogram(&s, 2, None).unwrap(), vec![(0.25, 1), (0.75, 1)]);
        let s = EmpiricalSpectrum::new(vec![0.4; 7]).unwrap();
        assert_eq!(histogram(&s, 1, None).unwrap(), vec![(0.4, 7)]);
        assert!(histogram(&s, 0, None).is_err());
    }

    #[test]
    fn builtin_normalization() {
        for id in FamilyId::ALL {
            let fam = id.family();
            fam.check_normalization(id.native_mode()).unwrap();
        }
        assert!(FamilyId::F1.family().check_normalization(Mode::Additive).is_err());
        assert!(FamilyId::F4.family().check_normalization(Mode::Multiplicative).is_err());
    }

    #[test]
    fn custom_family_probe() {
        let ok = ParametricFamily::custom(
            "shifted",
            0.0,
            1.0,
            Arc::new(|x| AtomicMeasure::new([(x, 0.5), (x + 1.0, 0.5)])),
        );
        assert!(ok.is_ok());
        let jumpy = ParametricFamily::custom(
            "jumpy",
            0.0,
            1.0,
            Arc::new(|x| AtomicMeasure::new([(if x < 0.5 { 0.0 } else { 1.0 }, 0.5), (3.0, 0.5)])),
        );
        assert!(jumpy.is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = FamilyId::F3.family().eval(0.5).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with("{\"atoms\":[["));
        let back: AtomicMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bad: std::result::Result<AtomicMeasure, _> = serde_json::from_str(r#"{"atoms":[[0,0.3]]}"#);
        assert!(bad.is_err());
        let sp: EmpiricalSpectrum = serde_json::from_str(r#"{"values":[2,1]}"#).unwrap();
        assert_eq!(sp.values(), &[1.0, 2.0]);
    }
}
