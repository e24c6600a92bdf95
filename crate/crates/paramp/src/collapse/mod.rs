//! Interference under wave-function collapse part-way through the amplifiers,
//! onto photon-number states or onto coherent states.

mod coherent;
mod mix;
mod montecarlo;
mod number;

pub use coherent::{
    coherent_amplitude, coherent_collapse_means_quadrature, coherent_overlap, detector_counts,
    evolve_amplitudes, fock_overlaps, radial_integral, radial_integral_series, CoherentPoint,
    CoherentQuadrature,
};
pub use mix::{stochastic_mix, MixedPrediction, PositionPdf};
pub use montecarlo::{
    coherent_collapse_means_mc, state_at_collapse, ArmExpansion, ArmProductState, HusimiMoments,
    HusimiSource, McEstimate, PHASE_SPACE_MODES, PROPOSAL_INFLATION,
};
pub use number::{
    number_collapse, number_collapse_from_populations, number_collapse_from_state,
    number_collapse_visibility, NumberCollapse,
};

use serde::{Deserialize, Serialize};

use crate::analytic::lossless_means;
use crate::error::{Error, Result};
use crate::interferometer::{visibility, DetectorMeans, ExperimentConfig, Visibility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phenomenology {
    Number,
    Coherent,
}

impl std::str::FromStr for Phenomenology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "number" => Ok(Phenomenology::Number),
            "coherent" => Ok(Phenomenology::Coherent),
            o => Err(Error::Config(format!(
                "unknown collapse {o:?}; expected number or coherent"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Quadrature,
    MonteCarlo,
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(Estimator::Quadrature),
            "monte_carlo" => Ok(Estimator::MonteCarlo),
            o => Err(Error::Config(format!(
                "unknown estimator {o:?}; expected quadrature or monte_carlo"
            ))),
        }
    }
}

fn default_eta() -> f64 {
    1.0
}
fn default_estimator() -> Estimator {
    Estimator::Quadrature
}
fn default_samples() -> usize {
    100_000
}
fn default_tol() -> f64 {
    1e-6
}

/// Smallest Monte Carlo sample count accepted for acceptance-grade runs.
pub const MIN_ACCEPTANCE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSpec {
    pub phenomenology: Phenomenology,
    /// Collapse position as a fraction of the amplifier; ignored when `pdf` is set.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub pdf: Option<PositionPdf>,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Relative tolerance of each radial integral.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

impl CollapseSpec {
    pub fn new(phenomenology: Phenomenology, eta: f64) -> Self {
        CollapseSpec {
            phenomenology,
            eta,
            pdf: None,
            estimator: default_estimator(),
            samples: default_samples(),
            tol: default_tol(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if let Some(p) = &self.pdf {
            p.validate()?;
        }
        if self.samples < 2 {
            return Err(Error::Config("samples must be at least 2".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!(
                "tol must lie in (0, 1), got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Collapse prediction at one gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseResult {
    pub kappa: f64,
    pub means: DetectorMeans,
    pub v_s: Visibility,
    pub v_i: Visibility,
    /// Monte Carlo standard errors of the means and visibilities.
    pub stderr: Option<DetectorMeans>,
    pub v_s_se: Option<f64>,
    pub v_i_se: Option<f64>,
    /// Probability that a collapse happens (1 without a position density).
    pub collapse_probability: f64,
}

/// Collapse-averaged detector means at position eta.
fn means_at(
    spec: &CollapseSpec,
    kappa: f64,
    eta: f64,
) -> Result<(DetectorMeans, Option<McEstimate>)> {
    match (spec.phenomenology, spec.estimator) {
        (Phenomenology::Number, _) => Ok((
            number_collapse(&ExperimentConfig::lossless(kappa), eta)?.means,
            None,
        )),
        (Phenomenology::Coherent, Estimator::Quadrature) => Ok((
            coherent_collapse_means_quadrature(kappa, eta, spec.tol)?.means,
            None,
        )),
        (Phenomenology::Coherent, Estimator::MonteCarlo) => {
            let state = state_at_collapse(kappa, eta, 0.0)?;
            let est = coherent_collapse_means_mc(&state, kappa, eta, spec.samples, spec.seed)?;
            Ok((est.means, Some(est)))
        }
    }
}

/// Collapse prediction for equal lossless amplifiers of gain kappa.
pub fn evaluate(spec: &CollapseSpec, kappa: f64) -> Result<CollapseResult> {
    spec.validate()?;
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Config(format!(
            "kappa must be finite and >= 0, got {kappa}"
        )));
    }
    match &spec.pdf {
        None => {
            let (means, mc) = means_at(spec, kappa, spec.eta)?;
            let (v_s, v_i) = visibility(&means);
            Ok(CollapseResult {
                kappa,
                means,
                v_s,
                v_i,
                stderr: mc.as_ref().map(|e| e.stderr),
                v_s_se: mc.as_ref().map(|e| e.v_s_se),
                v_i_se: mc.as_ref().map(|e| e.v_i_se),
                collapse_probability: 1.0,
            })
        }
        Some(pdf) => {
            let mix = stochastic_mix(
                pdf,
                |eta| Ok(means_at(spec, kappa, eta)?.0),
                &lossless_means(kappa),
            )?;
            Ok(CollapseResult {
                kappa,
                means: mix.means,
                v_s: mix.v_s,
                v_i: mix.v_i,
                stderr: None,
                v_s_se: None,
                v_i_se: None,
                collapse_probability: mix.mass,
            })
        }
    }
}
