//! Collapse at a random position along the amplifiers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{visibility, DetectorMeans, Visibility};
use crate::quadrature::gk15_nodes;

/// Slack allowed on the total probability before it counts as above 1.
const MASS_SLACK: f64 = 1e-12;

/// Density of the collapse position eta; its mass is the collapse probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PositionPdf {
    /// Collapse at `eta` with probability `mass`.
    Delta { eta: f64, mass: f64 },
    /// Linear interpolation between (eta, density) knots with increasing eta,
    /// zero outside the first and last knot.
    PiecewiseLinear { points: Vec<[f64; 2]> },
}

impl PositionPdf {
    /// Uniform density on [0, 1] with total mass `mass`.
    pub fn uniform(mass: f64) -> Self {
        PositionPdf::PiecewiseLinear {
            points: vec![[0.0, mass], [1.0, mass]],
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            PositionPdf::Delta { mass, .. } => *mass,
            PositionPdf::PiecewiseLinear { points } => points
                .windows(2)
                .map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][1] + w[1][1]))
                .sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PositionPdf::Delta { eta, mass } => {
                if !(0.0..=1.0).contains(eta) {
                    return Err(Error::Config(format!(
                        "collapse position must lie in [0, 1], got {eta}"
                    )));
                }
                if !(*mass >= 0.0) {
                    return Err(Error::Config(format!(
                        "collapse probability must be >= 0, got {mass}"
                    )));
                }
            }
            PositionPdf::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    return Err(Error::Config(
                        "a piecewise-linear density needs at least two knots".into(),
                    ));
                }
                for p in points {
                    if !(0.0..=1.0).contains(&p[0]) {
                        return Err(Error::Config(format!(
                            "density knot at eta = {} is outside [0, 1]",
                            p[0]
                        )));
                    }
                    if !(p[1] >= 0.0) || !p[1].is_finite() {
                        return Err(Error::Config(format!(
                            "density at eta = {} must be finite and >= 0",
                            p[0]
                        )));
                    }
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::Config(
                        "density knots must have strictly increasing eta".into(),
                    ));
                }
            }
        }
        let m = self.mass();
        if m > 1.0 + MASS_SLACK {
            return Err(Error::Config(format!(
                "collapse probability (density mass) is {m:.6}, which exceeds 1"
            )));
        }
        Ok(())
    }

    /// Quadrature nodes (eta, weight) integrating the density against a smooth function.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match self {
            PositionPdf::Delta { eta, mass } => vec![(*eta, *mass)],
            PositionPdf::PiecewiseLinear { points } => {
                let mut out = Vec::new();
                for w in points.windows(2) {
                    let ([a, fa], [b, fb]) = (w[0], w[1]);
                    if fa == 0.0 && fb == 0.0 {
                        continue;
                    }
                    for (x, wk, _) in gk15_nodes(a, b) {
                        let density = fa + (fb - fa) * (x - a) / (b - a);
                        out.push((x, wk * density));
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedPrediction {
    pub means: DetectorMeans,
    pub v_s: Visibility,
    pub v_i: Visibility,
    /// Collapse probability, the density's mass.
    pub mass: f64,
}

/// <n> = int pdf(eta) <n_coll(eta)> d eta + (1 - mass) <n_quantum>.
pub fn stochastic_mix<F>(
    pdf: &PositionPdf,
    collapse_means: F,
    quantum: &DetectorMeans,
) -> Result<MixedPrediction>
where
    F: Fn(f64) -> Result<DetectorMeans>,
{
    pdf.validate()?;
    let mass = pdf.mass().min(1.0);
    let mut means = quantum.scaled(1.0 - mass);
    for (eta, w) in pdf.nodes() {
        if w == 0.0 {
            continue;
        }
        means = means.plus(&collapse_means(eta)?.scaled(w));
    }
    let (v_s, v_i) = visibility(&means);
    Ok(MixedPrediction {
        means,
        v_s,
        v_i,
        mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> DetectorMeans {
        DetectorMeans {
            n_as: 1.0,
            n_ai: 4.0,
            n_bs: 5.0,
            n_bi: 2.0,
        }
    }

    fn coll(eta: f64) -> Result<DetectorMeans> {
        Ok(DetectorMeans {
            n_as: 3.0 + eta,
            n_ai: 3.0 + eta,
            n_bs: 3.0 + eta,
            n_bi: 3.0 + eta,
        })
    }

    #[test]
    fn zero_density_is_the_quantum_prediction() {
        let r = stochastic_mix(&PositionPdf::uniform(0.0), coll, &q()).unwrap();
        assert_eq!(r.means, q());
    }

    #[test]
    fn unit_delta_is_the_collapse_prediction() {
        let r = stochastic_mix(
            &PositionPdf::Delta {
                eta: 0.3,
                mass: 1.0,
            },
            coll,
            &q(),
        )
        .unwrap();
        assert_eq!(r.means, coll(0.3).unwrap());
    }

    #[test]
    fn uniform_density_integrates_linear_means() {
        let r = stochastic_mix(&PositionPdf::uniform(0.5), coll, &q()).unwrap();
        assert!((r.means.n_as - (0.5 * 1.0 + 0.5 * 3.5)).abs() < 1e-14);
    }

    #[test]
    fn rejects_mass_above_one() {
        let pdf = PositionPdf::PiecewiseLinear {
            points: vec![[0.0, 1.0], [0.5, 3.0], [1.0, 0.0]],
        };
        assert!(stochastic_mix(&pdf, coll, &q()).is_err());
        assert!(PositionPdf::Delta {
            eta: 0.5,
            mass: 1.2
        }
        .validate()
        .is_err());
        assert!(PositionPdf::Delta {
            eta: 1.5,
            mass: 0.2
        }
        .validate()
        .is_err());
    }
}
