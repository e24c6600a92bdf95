//! Closed-form oracles: amplifier relations, lossless visibilities, Fock
//! expansions of the amplifiers and the analytic interferometer output state.

use std::collections::HashMap;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::Serialize;
use statrs::function::factorial::ln_factorial;

use crate::dynamics::{build_hamiltonian, ComponentSpec, Propagator};
use crate::error::{Error, Result};
use crate::fock::{Arm, HilbertLayout, Mode, ModeOperator, QuantumState, StateRepr};
use crate::interferometer::{DetectorMeans, Durations, Visibility};

/// Amplitude magnitude below which a series term is dropped.
const SERIES_FLOOR: f64 = 1e-17;

/// A state written as (occupations, amplitude) pairs over named modes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FockExpansion {
    pub modes: Vec<Mode>,
    pub cutoff: usize,
    pub entries: Vec<(Vec<usize>, C64)>,
}

impl FockExpansion {
    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c.norm_sqr()).sum()
    }

    /// Probability left outside the cutoff.
    pub fn tail(&self) -> f64 {
        (1.0 - self.norm_sqr()).max(0.0)
    }

    pub fn get(&self, occupations: &[usize]) -> C64 {
        self.entries
            .iter()
            .find(|(o, _)| o == occupations)
            .map(|(_, c)| *c)
            .unwrap_or_default()
    }

    pub fn mean(&self, mode: Mode) -> Result<f64> {
        let p = self
            .modes
            .iter()
            .position(|m| *m == mode)
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))?;
        Ok(self
            .entries
            .iter()
            .map(|(o, c)| o[p] as f64 * c.norm_sqr())
            .sum())
    }

    pub fn layout(&self) -> Result<HilbertLayout> {
        HilbertLayout::new(self.modes.clone(), self.cutoff)
    }

    /// Pure state over the expansion's layout, renormalised by the kept weight.
    pub fn to_state(&self) -> Result<QuantumState> {
        let layout = self.layout()?;
        let mut v = DVector::<C64>::zeros(layout.dim());
        for (o, c) in &self.entries {
            v[layout.index(o)?] = *c;
        }
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::Numeric(
                "expansion has no weight inside the cutoff".into(),
            ));
        }
        QuantumState::pure(layout, v / C64::new(n, 0.0))
    }
}

/// Lossless amplifier means for number-state inputs.
pub fn lossless_amp_output(n_s: usize, n_i: usize, kappa: f64) -> (f64, f64) {
    let c2 = kappa.cosh().powi(2);
    let s2 = kappa.sinh().powi(2);
    (
        n_s as f64 * c2 + (n_i as f64 + 1.0) * s2,
        n_i as f64 * c2 + (n_s as f64 + 1.0) * s2,
    )
}

/// V_s = cosh^2 k/(cosh^2 k + 2 sinh^2 k), V_i = 1/3 (undefined at k = 0).
pub fn lossless_visibility(kappa: f64) -> (Visibility, Visibility) {
    let c2 = kappa.cosh().powi(2);
    let s2 = kappa.sinh().powi(2);
    let v_i = if s2 == 0.0 {
        Visibility::Undefined
    } else {
        Visibility::Defined(1.0 / 3.0)
    };
    (Visibility::Defined(c2 / (c2 + 2.0 * s2)), v_i)
}

/// Lossless detector means for equal amplifiers at the working point:
/// n_Bs = cosh^2 + sinh^2, n_As = sinh^2, n_Ai = 2 sinh^2, n_Bi = sinh^2.
pub fn lossless_means(kappa: f64) -> DetectorMeans {
    let (photon_s, photon_i) = lossless_amp_output(1, 0, kappa);
    let (vac_s, vac_i) = lossless_amp_output(0, 0, kappa);
    // interference terms 2 Im<a_up^dag a_low>: cosh^2 (signal), -sinh^2 (idler)
    let (cross_s, cross_i) = (kappa.cosh().powi(2), -kappa.sinh().powi(2));
    let (mean_s, mean_i) = (0.5 * (photon_s + vac_s), 0.5 * (photon_i + vac_i));
    DetectorMeans {
        n_as: mean_s - 0.5 * cross_s,
        n_ai: mean_i - 0.5 * cross_i,
        n_bs: mean_s + 0.5 * cross_s,
        n_bi: mean_i + 0.5 * cross_i,
    }
}

/// exp(i k (a_s^dag a_i^dag + a_s a_i)) |n_s, n_i> on one arm, via the
/// disentangled form exp(z K+) (1-|z|^2)^{K0} exp(-z* K-), z = i tanh k.
pub fn twpa_pair_evolution(
    arm: Arm,
    n_s: usize,
    n_i: usize,
    kappa: f64,
    cutoff: usize,
) -> Result<FockExpansion> {
    if n_s >= cutoff || n_i >= cutoff {
        return Err(Error::Truncation {
            mode: Mode::new(arm, crate::fock::Species::Signal).to_string(),
            occupation: n_s.max(n_i),
            cutoff,
        });
    }
    let t = kappa.tanh();
    let ln_sech = -kappa.cosh().ln();
    let lf = |n: usize| ln_factorial(n as u64);
    let mut amps: HashMap<(usize, usize), C64> = HashMap::new();
    for j in 0..=n_s.min(n_i) {
        // exp(-z* K-): (-z*)^j/j! (a_s a_i)^j, -z* = i tanh k
        let (p, q) = (n_s - j, n_i - j);
        let ln_tj = if j == 0 { 0.0 } else { j as f64 * t.ln() };
        let ln_a = ln_tj - lf(j)
            + 0.5 * (lf(n_s) - lf(p) + lf(n_i) - lf(q))
            + (p + q + 1) as f64 * ln_sech;
        if t == 0.0 && j > 0 {
            continue;
        }
        let phase_a = C64::i().powu(j as u32);
        for k in 0.. {
            if p + k >= cutoff || q + k >= cutoff {
                break;
            }
            let ln_b = if k == 0 {
                0.0
            } else if t == 0.0 {
                break;
            } else {
                k as f64 * t.ln() - lf(k) + 0.5 * (lf(p + k) - lf(p) + lf(q + k) - lf(q))
            };
            let mag = (ln_a + ln_b).exp();
            if k > 0 && mag < SERIES_FLOOR {
                break;
            }
            let amp = phase_a * C64::i().powu(k as u32) * mag;
            *amps.entry((p + k, q + k)).or_default() += amp;
        }
    }
    let mut entries: Vec<(Vec<usize>, C64)> = amps
        .into_iter()
        .map(|((a, b), c)| (vec![a, b], c))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(FockExpansion {
        modes: vec![
            Mode::new(arm, crate::fock::Species::Signal),
            Mode::new(arm, crate::fock::Species::Idler),
        ],
        cutoff,
        entries,
    })
}

/// TWPA acting on |N_s, 0>: cosh^{-(1+N_s)} k sum_n (i tanh k)^n sqrt(C(N_s+n, n)) |N_s+n, n>.
pub fn twpa_fock_evolution(n_s: usize, kappa: f64, cutoff: usize) -> Result<FockExpansion> {
    twpa_pair_evolution(Arm::Up, n_s, 0, kappa, cutoff)
}

/// exp(i k (e^{i dphi} a^dag^2 + h.c.)) |N_s> via the disentangled form with
/// K+ = a^dag^2/2, K0 = (n + 1/2)/2, z = i e^{i dphi} tanh 2k.
pub fn degenerate_evolution(
    n_s: usize,
    kappa: f64,
    delta_phi: f64,
    cutoff: usize,
) -> Result<FockExpansion> {
    if n_s >= cutoff {
        return Err(Error::Truncation {
            mode: Mode::UP_S.to_string(),
            occupation: n_s,
            cutoff,
        });
    }
    let t = (2.0 * kappa).tanh();
    let ln_sech = -(2.0 * kappa).cosh().ln();
    let z_phase = C64::i() * C64::from_polar(1.0, delta_phi);
    let lf = |n: usize| ln_factorial(n as u64);
    let mut amps: HashMap<usize, C64> = HashMap::new();
    for j in 0..=n_s / 2 {
        if t == 0.0 && j > 0 {
            break;
        }
        // (-z*/2)^j / j! a^{2j}
        let p = n_s - 2 * j;
        let ln_a = j as f64 * (0.5 * t).ln() - lf(j)
            + 0.5 * (lf(n_s) - lf(p))
            + (p as f64 + 0.5) * ln_sech;
        let phase_a = (-z_phase.conj()).powu(j as u32);
        for k in 0.. {
            if p + 2 * k >= cutoff {
                break;
            }
            let ln_b = if k == 0 {
                0.0
            } else if t == 0.0 {
                break;
            } else {
                k as f64 * (0.5 * t).ln() - lf(k) + 0.5 * (lf(p + 2 * k) - lf(p))
            };
            let mag = (ln_a + ln_b).exp();
            if k > 0 && mag < SERIES_FLOOR {
                break;
            }
            *amps.entry(p + 2 * k).or_default() += phase_a * z_phase.powu(k as u32) * mag;
        }
    }
    let mut entries: Vec<(Vec<usize>, C64)> = amps.into_iter().map(|(n, c)| (vec![n], c)).collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(FockExpansion {
        modes: vec![Mode::UP_S],
        cutoff,
        entries,
    })
}

/// Extremal quadrature variances of a single-mode expansion, with
/// X_theta = (a e^{-i theta} + a^dag e^{i theta})/sqrt 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureAxis {
    /// Angle of the squeezed quadrature in (-pi/2, pi/2].
    pub angle: f64,
    pub min_variance: f64,
    pub max_variance: f64,
}

pub fn squeezing_axis(expansion: &FockExpansion) -> Result<QuadratureAxis> {
    if expansion.modes.len() != 1 {
        return Err(Error::Config(
            "squeezing axis needs a single-mode expansion".into(),
        ));
    }
    let amp = |n: usize| expansion.get(&[n]);
    let top = expansion
        .entries
        .iter()
        .map(|(o, _)| o[0])
        .max()
        .unwrap_or(0);
    let (mut a1, mut a2, mut n) = (C64::default(), C64::default(), 0.0);
    for m in 0..=top {
        let c = amp(m);
        n += m as f64 * c.norm_sqr();
        if m >= 1 {
            a1 += amp(m - 1).conj() * c * (m as f64).sqrt();
        }
        if m >= 2 {
            a2 += amp(m - 2).conj() * c * ((m * (m - 1)) as f64).sqrt();
        }
    }
    // Var X_theta = 1/2 + n + Re(<a^2> e^{-2 i theta}) - 2 (Re(<a> e^{-i theta}))^2
    let base = 0.5 + n - 2.0 * a1.norm_sqr() / 2.0;
    let b = a2 - a1 * a1;
    let r = b.norm();
    let mut angle = 0.5 * (b.arg() + std::f64::consts::PI);
    if angle > std::f64::consts::FRAC_PI_2 {
        angle -= std::f64::consts::PI;
    }
    Ok(QuadratureAxis {
        angle,
        min_variance: base - r,
        max_variance: base + r,
    })
}

/// Cutoff for degenerate amplification: photon-number amplitudes fall like tanh(2k)^n.
pub fn degenerate_cutoff(kappa: f64, eps: f64) -> usize {
    let t = (2.0 * kappa).tanh();
    if t <= 0.0 {
        return 4;
    }
    (2.0 + (eps.ln() / t.ln()).ceil()).max(4.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerateVisibility {
    pub quantum: Visibility,
    /// Coherent-state collapse between the amplifiers and the second hybrid.
    pub collapse: Visibility,
    pub n_a: f64,
    pub n_b: f64,
    pub cutoff: usize,
    pub tail: f64,
}

/// Single-photon interferometer with degenerate amplifiers whose pump phases
/// differ by `delta_phi` (upper arm) against 0 (lower arm).
pub fn degenerate_visibility(
    kappa: f64,
    delta_phi: f64,
    cutoff: Option<usize>,
) -> Result<DegenerateVisibility> {
    if !(kappa >= 0.0) {
        return Err(Error::Config(format!(
            "amplification must be >= 0, got {kappa}"
        )));
    }
    let n = cutoff.unwrap_or_else(|| degenerate_cutoff(kappa, 1e-10));
    let layout = HilbertLayout::new(vec![Mode::UP_S, Mode::LOW_S], n)?;
    let d = Durations::default();
    let mut psi = match QuantumState::fock(&layout, &[1, 0])?.repr() {
        StateRepr::Pure(v) => v.clone(),
        StateRepr::Mixed(_) => unreachable!(),
    };
    let h1 = build_hamiltonian(&ComponentSpec::hybrid(d.hybrid1), &layout)?;
    let amps = build_hamiltonian(
        &ComponentSpec::degenerate(Arm::Up, kappa, delta_phi, d.twpa),
        &layout,
    )? + build_hamiltonian(
        &ComponentSpec::degenerate(Arm::Low, kappa, 0.0, d.twpa),
        &layout,
    )?;
    Propagator::new(&h1, d.hybrid1)?.apply(psi.as_mut_slice());
    Propagator::new(&amps, d.twpa)?.apply(psi.as_mut_slice());
    let before = QuantumState::from_pure_unchecked(layout.clone(), psi.clone());
    let tail = before.truncation_tail();
    let n_u = before.mean_number(Mode::UP_S)?;
    let n_l = before.mean_number(Mode::LOW_S)?;
    let x = before.expectation(
        &(ModeOperator::creation(&layout, Mode::UP_S)?
            * ModeOperator::annihilation(&layout, Mode::LOW_S)?),
    )?;
    let n_a = 0.5 * (n_u + n_l) - x.im;
    let n_b = 0.5 * (n_u + n_l) + x.im;
    Ok(DegenerateVisibility {
        quantum: Visibility::contrast(n_b, n_a),
        collapse: Visibility::contrast(n_b + 1.0, n_a + 1.0),
        n_a,
        n_b,
        cutoff: n,
        tail,
    })
}

type Poly = HashMap<[u16; 4], C64>;

fn poly_mul(p: &Poly, q: &[([u16; 4], C64)], scale: C64, cutoff: usize) -> Poly {
    let mut out: Poly = HashMap::with_capacity(p.len() * 2);
    for (e, c) in p {
        for (f, d) in q {
            let g = [e[0] + f[0], e[1] + f[1], e[2] + f[2], e[3] + f[3]];
            if g.iter().any(|&x| x as usize >= cutoff) {
                continue;
            }
            *out.entry(g).or_default() += c * d * scale;
        }
    }
    out
}

/// Norm of a creation-operator polynomial acting on vacuum.
fn poly_state_norm(p: &Poly) -> f64 {
    p.iter()
        .map(|(e, c)| {
            let lf: f64 = e.iter().map(|&x| ln_factorial(x as u64)).sum();
            c.norm_sqr() * lf.exp()
        })
        .sum::<f64>()
        .sqrt()
}

fn exp_series(start: Poly, gen: &[([u16; 4], C64)], x: C64, cutoff: usize) -> Poly {
    let mut sum = start.clone();
    let mut term = start;
    for n in 1.. {
        term = poly_mul(&term, gen, x / n as f64, cutoff);
        if term.is_empty() {
            break;
        }
        for (e, c) in &term {
            *sum.entry(*e).or_default() += c;
        }
        if poly_state_norm(&term) < SERIES_FLOOR {
            break;
        }
    }
    sum
}

/// Output state of the lossless interferometer from the creation-operator
/// expansion after the second hybrid. Ports 6 and 7 map to the upper (A) and
/// lower (B) detector modes; k acts on the upper arm, k' on the lower.
pub fn analytic_output_state(
    kappa: f64,
    kappa_p: f64,
    delta_theta: f64,
    cutoff: usize,
) -> Result<FockExpansion> {
    if cutoff < 2 {
        return Err(Error::Config("cutoff must be >= 2".into()));
    }
    let i = C64::i();
    let one = C64::new(1.0, 0.0);
    // variables: (6s, 6i, 7s, 7i)
    let p_up = [
        ([1, 1, 0, 0], -one),
        ([1, 0, 0, 1], i),
        ([0, 1, 1, 0], i),
        ([0, 0, 1, 1], one),
    ];
    let p_low = [
        ([1, 1, 0, 0], one),
        ([1, 0, 0, 1], i),
        ([0, 1, 1, 0], i),
        ([0, 0, 1, 1], -one),
    ];
    let x = i * kappa.tanh() / 2.0;
    let y = i * kappa_p.tanh() / 2.0;
    let mut vac: Poly = HashMap::new();
    vac.insert([0; 4], one);
    let su = exp_series(vac, &p_up, x, cutoff);
    let s = exp_series(su, &p_low, y, cutoff);
    let (ck, ckp) = (kappa.cosh(), kappa_p.cosh());
    let eth = C64::from_polar(1.0, delta_theta);
    let pref = 0.5 / (ck * ckp);
    let lin = [
        ([1u16, 0, 0, 0], (-eth / ck + 1.0 / ckp) * pref),
        ([0u16, 0, 1, 0], (i * eth / ck + i / ckp) * pref),
    ];
    let out = poly_mul(&s, &lin, one, cutoff);
    let mut entries: Vec<(Vec<usize>, C64)> = out
        .into_iter()
        .map(|(e, c)| {
            let lf: f64 = e.iter().map(|&x| ln_factorial(x as u64)).sum();
            (
                e.iter().map(|&x| x as usize).collect(),
                c * (0.5 * lf).exp(),
            )
        })
        .filter(|(_, c)| *c != C64::default())
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(FockExpansion {
        modes: vec![Mode::UP_S, Mode::UP_I, Mode::LOW_S, Mode::LOW_I],
        cutoff,
        entries,
    })
}
