//! Browser bindings: simulate a reference example, recover its parameters, plot the transform.

use eigdecon::measure::histogram;
use eigdecon::pipeline::{forward_oracle, reference_example, simulate, ReferenceExample};
use eigdecon::transform::{Contour, ContourKind, NewtonConfig};
use eigdecon::{deconvolve, DeconvProblem, DeconvReport, EmpiricalSpectrum, Error, Observed, SpikeCount};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub bin_width: f64,
    pub dimension: usize,
}

#[derive(Serialize)]
pub struct Recovery {
    pub true_x: Vec<f64>,
    pub recovered_x: Vec<f64>,
    pub weights: Vec<f64>,
    pub max_error: Option<f64>,
    pub tolerance: f64,
    pub relative_residual: f64,
    pub threshold: f64,
    pub n_l: usize,
    pub warnings: Vec<String>,
}

/// Real and imaginary parts of the observed and modelled transform along the selected contour.
#[derive(Serialize)]
pub struct TransformCurve {
    pub kind: ContourKind,
    pub abscissa: Vec<f64>,
    pub observed: Vec<[f64; 2]>,
    pub truth: Vec<[f64; 2]>,
    pub fitted: Vec<[f64; 2]>,
}

/// One simulated spectrum and, once recovered, its report.
pub struct Session {
    example: ReferenceExample,
    spectrum: EmpiricalSpectrum,
    report: Option<DeconvReport>,
}

impl Session {
    /// Simulates example `id`; empty `xs` keeps the example's own parameters.
    pub fn new(id: u8, xs: &[f64], dimension: usize, seed: u64) -> eigdecon::Result<Self> {
        let mut example = reference_example(id).ok_or_else(|| Error::InvalidInput { field: "id".into(), message: format!("no example {id}") })?;
        if !xs.is_empty() {
            example.xs = xs.to_vec();
        }
        let spectrum = simulate(example.mode, &example.family.family(), &example.xs, dimension, seed)?;
        Ok(Self { example, spectrum, report: None })
    }

    pub fn histogram(&self, bins: usize) -> eigdecon::Result<Histogram> {
        let h = histogram(&self.spectrum, bins, None)?;
        let bin_width = if h.len() > 1 { h[1].0 - h[0].0 } else { 1.0 };
        Ok(Histogram {
            centers: h.iter().map(|b| b.0).collect(),
            counts: h.iter().map(|b| b.1).collect(),
            bin_width,
            dimension: self.spectrum.dimension(),
        })
    }

    pub fn recover(&mut self) -> eigdecon::Result<Recovery> {
        let report = deconvolve(&DeconvProblem {
            mode: self.example.mode,
            family: self.example.family.family(),
            observed: Observed::Spectrum(self.spectrum.clone()),
            n: SpikeCount::Fixed(self.example.xs.len()),
            solver: Default::default(),
        })?;
        let mut true_x = self.example.xs.clone();
        true_x.sort_by(f64::total_cmp);
        let recovered_x = report.solution.locations.clone();
        let max_error = eigdecon::pipeline::max_location_error(&true_x, &recovered_x);
        let tolerance = if self.spectrum.dimension() >= self.example.dimension_full {
            self.example.tol_full
        } else {
            self.example.tol_desk
        };
        let out = Recovery {
            true_x,
            recovered_x,
            weights: report.solution.weights.clone(),
            max_error,
            tolerance,
            relative_residual: report.relative_residual,
            threshold: report.model.threshold_used,
            n_l: report.model.n_l,
            warnings: report.warnings.clone(),
        };
        self.report = Some(report);
        Ok(out)
    }

    /// Needs a prior `recover`.
    pub fn transform(&self) -> eigdecon::Result<TransformCurve> {
        let report = self.report.as_ref().ok_or_else(|| Error::InvalidInput { field: "report".into(), message: "run recover first".into() })?;
        let d = &report.model;
        let contour = match d.contour_kind {
            ContourKind::GCircle => Contour::g_circle(d.contour_extent, d.n_z)?,
            ContourKind::TCircle => Contour::t_circle(d.contour_extent, d.n_z)?,
            ContourKind::XiRay => Contour::xi_ray(d.contour_extent, d.n_z, d.eps_imag)?,
        };
        let abscissa = match d.contour_kind {
            ContourKind::XiRay => contour.points.iter().map(|z| z.re).collect(),
            _ => contour.points.iter().map(|z| z.arg()).collect(),
        };
        let family = self.example.family.family();
        let newton = NewtonConfig::default();
        let truth = forward_oracle(self.example.mode, &family, &self.example.xs, &contour, &newton)?;
        let offset = report.offset.map(|o| eigdecon::Complex64::new(o[0], o[1])).unwrap_or_default();
        let mut fitted = vec![offset; contour.len()];
        let sol = &report.solution;
        for (k, &x) in sol.locations.iter().enumerate() {
            let w = eigdecon::Complex64::new(sol.weights[k], sol.weights_imag.get(k).copied().unwrap_or(0.0));
            let col = forward_oracle(self.example.mode, &family, &[x], &contour, &newton)?;
            for (f, c) in fitted.iter_mut().zip(col) {
                *f += w * c;
            }
        }
        let pairs = |v: Vec<eigdecon::Complex64>| v.into_iter().map(|z| [z.re, z.im]).collect();
        Ok(TransformCurve {
            kind: d.contour_kind,
            abscissa,
            observed: report.observation.clone(),
            truth: pairs(truth),
            fitted: pairs(fitted),
        })
    }
}

fn js<T: Serialize>(r: eigdecon::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// The six reference examples as JSON.
#[wasm_bindgen]
pub fn examples() -> String {
    let all: Vec<ReferenceExample> = (1..=6).filter_map(reference_example).collect();
    serde_json::to_string(&all).unwrap_or_default()
}

#[wasm_bindgen]
pub struct Demo(Session);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(id: u8, xs: Vec<f64>, dimension: usize, seed: u64) -> Result<Demo, JsError> {
        Session::new(id, &xs, dimension, seed).map(Demo).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn histogram(&self, bins: usize) -> Result<String, JsError> {
        js(self.0.histogram(bins))
    }

    pub fn recover(&mut self) -> Result<String, JsError> {
        js(self.0.recover())
    }

    pub fn transform(&self) -> Result<String, JsError> {
        js(self.0.transform())
    }
}
