use std::path::Path;

use anyhow::Context;
use eigdecon::measure::histogram;
use eigdecon::pipeline::simulate;
use eigdecon::{deconvolve, DeconvProblem, DeconvReport, EmpiricalSpectrum, Observed};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredRow {
    pub true_x: Option<f64>,
    pub recovered_x: f64,
    pub abs_error: Option<f64>,
    pub weight: f64,
}

/// Everything one run produces.
pub struct Outcome {
    pub config: ExperimentConfig,
    pub spectrum: Option<EmpiricalSpectrum>,
    pub report: DeconvReport,
    pub rows: Vec<RecoveredRow>,
}

impl Outcome {
    pub fn errors(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.abs_error).collect()
    }

    pub fn max_error(&self) -> Option<f64> {
        self.errors().map(|e| e.into_iter().fold(0.0, f64::max))
    }

    pub fn histogram(&self) -> anyhow::Result<Option<Vec<(f64, usize)>>> {
        self.spectrum
            .as_ref()
            .map(|s| histogram(s, self.config.bins(), None))
            .transpose()
            .map_err(Into::into)
    }
}

/// Pairs sorted truth with sorted estimates when the counts agree.
pub fn recovered_rows(truth: &[f64], report: &DeconvReport) -> Vec<RecoveredRow> {
    let mut t = truth.to_vec();
    t.sort_by(f64::total_cmp);
    let paired = t.len() == report.solution.locations.len();
    report
        .solution
        .locations
        .iter()
        .zip(&report.solution.weights)
        .enumerate()
        .map(|(i, (&x, &w))| {
            let tx = paired.then(|| t[i]);
            RecoveredRow { true_x: tx, recovered_x: x, abs_error: tx.map(|v| (v - x).abs()), weight: w }
        })
        .collect()
}

fn read_spectrum(path: &Path) -> anyhow::Result<EmpiricalSpectrum> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn execute(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let config = cfg.resolved();
    let mode = config.mode();
    let family = config.family.family();
    let spectrum = match (&config.spectrum, config.noiseless) {
        (Some(p), _) => Some(read_spectrum(p)?),
        (None, true) => None,
        (None, false) => Some(simulate(mode, &family, &config.true_parameters, config.dimension(), config.seed)?),
    };
    let observed = match &spectrum {
        Some(s) => Observed::Spectrum(s.clone()),
        None => Observed::Oracle(config.true_parameters.clone()),
    };
    let report = deconvolve(&DeconvProblem {
        mode,
        family,
        observed,
        n: config.spikes(),
        solver: config.solver.clone(),
    })?;
    let rows = recovered_rows(&config.true_parameters, &report);
    Ok(Outcome { config, spectrum, report, rows })
}
