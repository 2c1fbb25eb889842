//! Blind deconvolution of sparse spectral measures drawn from one-parameter families.
//!
//! Three settings are covered: classical convolution of scalar samples, free additive
//! convolution `A_1 + Q A_2 Qᵀ`, and free multiplicative convolution `√A_1 Q A_2 Qᵀ √A_1`.
//! Each is linearized by a transform (log characteristic function, R-transform, log
//! S-transform) and the family parameters are read off with an eigenmatrix and ESPRIT.

pub mod eigenmatrix;
pub mod error;
pub mod linalg;
pub mod measure;
pub mod pipeline;
pub mod rmt;
pub mod transform;

mod unbounded;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use measure::{AtomicMeasure, EmpiricalSpectrum, FamilyId, ParametricFamily};
pub use num_complex::Complex64;
pub use pipeline::{deconvolve, DeconvProblem, DeconvReport, Observed, SolverConfig, SpikeCount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Classical,
    Additive,
    Multiplicative,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classical" => Ok(Mode::Classical),
            "additive" => Ok(Mode::Additive),
            "multiplicative" => Ok(Mode::Multiplicative),
            _ => Err(Error::InvalidInput {
                field: "mode".into(),
                message: format!("unknown mode `{s}`"),
            }),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Classical => "classical",
            Mode::Additive => "additive",
            Mode::Multiplicative => "multiplicative",
        })
    }
}
