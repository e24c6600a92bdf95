//! Collapse onto photon-number states part-way through the amplifiers.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{Mode, QuantumState};
use crate::interferometer::{visibility, DetectorMeans, ExperimentConfig, Visibility};

use super::montecarlo::{state_at_collapse, ArmExpansion, PHASE_SPACE_MODES};

/// Born-weighted result of evolving every collapsed number state to the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumberCollapse {
    pub means: DetectorMeans,
    pub v_s: Visibility,
    pub v_i: Visibility,
    /// Born average of <a_up^dag a_low - a_up a_low^dag> for (signal, idler).
    pub interference_signal: C64,
    pub interference_idler: C64,
    /// Largest |<a_up^dag a_low>| met on a single collapsed product state.
    pub max_product_cross: f64,
    /// Total Born probability of the enumerated collapse outcomes.
    pub born_mass: f64,
    /// Largest weight lost by a truncated post-collapse expansion.
    pub evolution_tail: f64,
}

struct ArmMoments {
    n_s: f64,
    n_i: f64,
    a_s: C64,
    a_i: C64,
    tail: f64,
}

fn arm_moments(e: &ArmExpansion) -> ArmMoments {
    let (n_s, n_i) = e.means();
    ArmMoments {
        n_s,
        n_i,
        a_s: e.matrix_element(&[(0, false)], e),
        a_i: e.matrix_element(&[(1, false)], e),
        tail: (1.0 - e.norm_sqr()).abs(),
    }
}

/// Evolves each collapsed basis state |up_s, up_i, low_s, low_i> through the
/// remaining amplifier gain and the second hybrid, weighting by its Born
/// probability.
pub fn number_collapse_from_populations(
    populations: &[([usize; 4], f64)],
    kappa_rest: f64,
) -> Result<NumberCollapse> {
    if !(kappa_rest >= 0.0) || !kappa_rest.is_finite() {
        return Err(Error::Config(format!(
            "remaining gain must be finite and >= 0, got {kappa_rest}"
        )));
    }
    let mut cache: HashMap<(usize, usize), ArmMoments> = HashMap::new();
    for (occ, _) in populations {
        for key in [(occ[0], occ[1]), (occ[2], occ[3])] {
            if !cache.contains_key(&key) {
                let e = ArmExpansion::amplified(key.0, key.1, kappa_rest)?;
                cache.insert(key, arm_moments(&e));
            }
        }
    }
    let zero = C64::new(0.0, 0.0);
    let (mut n_us, mut n_ui, mut n_ls, mut n_li) = (0.0, 0.0, 0.0, 0.0);
    let (mut x_s, mut x_i) = (zero, zero);
    let mut max_cross: f64 = 0.0;
    let mut mass = 0.0;
    let mut tail: f64 = 0.0;
    for (occ, p) in populations {
        let up = &cache[&(occ[0], occ[1])];
        let low = &cache[&(occ[2], occ[3])];
        // product state: <a_up^dag a_low> = <a_up>^* <a_low>
        let cs = up.a_s.conj() * low.a_s;
        let ci = up.a_i.conj() * low.a_i;
        max_cross = max_cross.max(cs.norm()).max(ci.norm());
        n_us += p * up.n_s;
        n_ui += p * up.n_i;
        n_ls += p * low.n_s;
        n_li += p * low.n_i;
        x_s += cs * *p;
        x_i += ci * *p;
        mass += p;
        tail = tail.max(up.tail).max(low.tail);
    }
    // second hybrid: n_A = (n_up + n_low)/2 - Im X, n_B = (n_up + n_low)/2 + Im X
    let means = DetectorMeans {
        n_as: 0.5 * (n_us + n_ls) - x_s.im,
        n_ai: 0.5 * (n_ui + n_li) - x_i.im,
        n_bs: 0.5 * (n_us + n_ls) + x_s.im,
        n_bi: 0.5 * (n_ui + n_li) + x_i.im,
    };
    let (v_s, v_i) = visibility(&means);
    Ok(NumberCollapse {
        means,
        v_s,
        v_i,
        interference_signal: x_s - x_s.conj(),
        interference_idler: x_i - x_i.conj(),
        max_product_cross: max_cross,
        born_mass: mass,
        evolution_tail: tail,
    })
}

/// Number collapse for a dense state holding the four interferometer modes.
pub fn number_collapse_from_state(state: &QuantumState, kappa_rest: f64) -> Result<NumberCollapse> {
    let dist = state.number_distribution();
    let mut positions = [0usize; 4];
    for (j, m) in PHASE_SPACE_MODES.iter().enumerate() {
        positions[j] = dist
            .modes()
            .iter()
            .position(|x| x == m)
            .ok_or_else(|| Error::UnknownMode(Mode::to_string(m)))?;
    }
    let pops: Vec<([usize; 4], f64)> = dist
        .entries()
        .into_iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(o, p)| (positions.map(|k| o[k]), p))
        .collect();
    number_collapse_from_populations(&pops, kappa_rest)
}

/// Number collapse at position eta of the equal lossless amplifiers in `config`.
pub fn number_collapse(config: &ExperimentConfig, eta: f64) -> Result<NumberCollapse> {
    config.validate()?;
    if config.bath.is_some_and(|b| b.gamma > 0.0) {
        return Err(Error::Config(
            "number collapse is defined for lossless amplifiers".into(),
        ));
    }
    if config.kappa_up != config.kappa_low {
        return Err(Error::Config(
            "number collapse needs identical amplifiers".into(),
        ));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Config(format!("eta must lie in [0, 1], got {eta}")));
    }
    let kappa = config.kappa_up;
    let state = state_at_collapse(kappa, eta, config.delta_theta)?;
    number_collapse_from_populations(&state.number_populations(), (1.0 - eta) * kappa)
}

/// (V_s, V_i) under number collapse.
pub fn number_collapse_visibility(
    config: &ExperimentConfig,
    eta: f64,
) -> Result<(Visibility, Visibility)> {
    let r = number_collapse(config, eta)?;
    Ok((r.v_s, r.v_i))
}
