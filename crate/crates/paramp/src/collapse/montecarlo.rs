//! Importance-sampled average over coherent collapse points.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::twpa_pair_evolution;
use crate::error::{Error, Result};
use crate::fock::{Arm, Mode, ModeOperator, QuantumState, StateRepr};
use crate::interferometer::{DetectorMeans, Visibility};

use super::coherent::{
    coherent_amplitude, detector_counts, evolve_amplitudes, fock_overlaps, CoherentPoint,
};

/// Mode order shared by every phase-space quantity: up_s, up_i, low_s, low_i.
pub const PHASE_SPACE_MODES: [Mode; 4] = [Mode::UP_S, Mode::UP_I, Mode::LOW_S, Mode::LOW_I];

/// Samples drawn from one random stream.
const CHUNK: usize = 4096;

/// Variance inflation of the Gaussian proposal relative to the Husimi covariance.
pub const PROPOSAL_INFLATION: f64 = 1.2;

/// First and second anti-normally ordered moments, which are the moments of the
/// Husimi distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiMoments {
    /// <a_j>
    pub mean: [C64; 4],
    /// <a_j a_k^dag>
    pub anti_normal: [[C64; 4]; 4],
    /// <a_j a_k>
    pub pair: [[C64; 4]; 4],
}

impl HusimiMoments {
    /// <n_j> = <a_j a_j^dag> - 1.
    pub fn mean_number(&self, j: usize) -> f64 {
        self.anti_normal[j][j].re - 1.0
    }
}

/// A pure four-mode state that can be projected on coherent states.
pub trait HusimiSource: Sync {
    /// <alpha|psi> with amplitudes in [`PHASE_SPACE_MODES`] order.
    fn coherent_amplitude(&self, point: &CoherentPoint) -> C64;

    fn husimi_moments(&self) -> Result<HusimiMoments>;
}

/// Pure dense state; must carry the four interferometer modes.
impl HusimiSource for QuantumState {
    fn coherent_amplitude(&self, point: &CoherentPoint) -> C64 {
        coherent_amplitude(self, point).unwrap_or_default()
    }

    fn husimi_moments(&self) -> Result<HusimiMoments> {
        if !matches!(self.repr(), StateRepr::Pure(_)) {
            return Err(Error::Config(
                "phase-space sampling needs a pure state".into(),
            ));
        }
        let layout = self.layout();
        let mut ops = Vec::with_capacity(4);
        for m in PHASE_SPACE_MODES {
            ops.push(ModeOperator::annihilation(layout, m)?);
        }
        let zero = C64::new(0.0, 0.0);
        let mut mom = HusimiMoments {
            mean: [zero; 4],
            anti_normal: [[zero; 4]; 4],
            pair: [[zero; 4]; 4],
        };
        for j in 0..4 {
            mom.mean[j] = self.expectation(&ops[j])?;
            for k in 0..4 {
                mom.anti_normal[j][k] = self.expectation(&(ops[j].clone() * ops[k].adjoint()))?;
                mom.pair[j][k] = self.expectation(&(ops[j].clone() * ops[k].clone()))?;
            }
        }
        Ok(mom)
    }
}

/// Two-mode (signal, idler) state of one arm as a sparse Fock expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmExpansion {
    amps: HashMap<(usize, usize), C64>,
    list: Vec<(usize, usize, C64)>,
    max_occupation: usize,
}

impl ArmExpansion {
    /// Amplifier of gain kappa acting on |n_s, n_i>.
    pub fn amplified(n_s: usize, n_i: usize, kappa: f64) -> Result<Self> {
        let exp = twpa_pair_evolution(Arm::Up, n_s, n_i, kappa, usize::MAX / 4)?;
        let mut amps = HashMap::with_capacity(exp.entries.len());
        let mut list = Vec::with_capacity(exp.entries.len());
        let mut max_occupation = 0;
        for (o, c) in exp.entries {
            max_occupation = max_occupation.max(o[0]).max(o[1]);
            amps.insert((o[0], o[1]), c);
            list.push((o[0], o[1], c));
        }
        Ok(ArmExpansion {
            amps,
            list,
            max_occupation,
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.list.iter().map(|e| e.2.norm_sqr()).sum()
    }

    /// (n_s, n_i, amplitude) in increasing occupation order.
    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.list
    }

    pub fn max_occupation(&self) -> usize {
        self.max_occupation
    }

    /// Mean photon numbers (signal, idler).
    pub fn means(&self) -> (f64, f64) {
        self.list.iter().fold((0.0, 0.0), |(s, i), &(a, b, c)| {
            let p = c.norm_sqr();
            (s + a as f64 * p, i + b as f64 * p)
        })
    }

    /// <this| word |other> for a word of ladder operators on (signal = 0, idler = 1),
    /// applied right to left; `true` marks a creation operator.
    pub fn matrix_element(&self, word: &[(usize, bool)], other: &ArmExpansion) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        'outer: for &(a, b, c) in &other.list {
            let mut occ = [a, b];
            let mut w = c;
            for &(mode, raise) in word.iter().rev() {
                if raise {
                    occ[mode] += 1;
                    w *= (occ[mode] as f64).sqrt();
                } else {
                    if occ[mode] == 0 {
                        continue 'outer;
                    }
                    w *= (occ[mode] as f64).sqrt();
                    occ[mode] -= 1;
                }
            }
            if let Some(x) = self.amps.get(&(occ[0], occ[1])) {
                acc += x.conj() * w;
            }
        }
        acc
    }

    /// <alpha_s, alpha_i | this>.
    pub fn coherent_amplitude(&self, alpha_s: C64, alpha_i: C64) -> C64 {
        let len = self.max_occupation + 1;
        self.project(&fock_overlaps(alpha_s, len), &fock_overlaps(alpha_i, len))
    }

    /// Sum of c(n_s, n_i) t_s[n_s] t_i[n_i] over the expansion.
    fn project(&self, ts: &[C64], ti: &[C64]) -> C64 {
        self.list.iter().map(|&(a, b, c)| c * ts[a] * ti[b]).sum()
    }
}

/// Interferometer state after h1, the phase shifter and a fraction eta of each
/// (equal) amplifier: (e^{i dtheta} phi1 x phi0 + i phi0 x phi1)/sqrt(2), where
/// phi1 and phi0 are one arm's amplified |1,0> and |0,0>.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmProductState {
    pub kappa_collapse: f64,
    pub delta_theta: f64,
    pub photon: ArmExpansion,
    pub vacuum: ArmExpansion,
}

impl ArmProductState {
    pub fn new(kappa_collapse: f64, delta_theta: f64) -> Result<Self> {
        if !(kappa_collapse >= 0.0) || !kappa_collapse.is_finite() {
            return Err(Error::Config(format!(
                "collapse gain must be finite and >= 0, got {kappa_collapse}"
            )));
        }
        Ok(ArmProductState {
            kappa_collapse,
            delta_theta,
            photon: ArmExpansion::amplified(1, 0, kappa_collapse)?,
            vacuum: ArmExpansion::amplified(0, 0, kappa_collapse)?,
        })
    }

    /// Weight kept by the truncated expansions (1 up to rounding).
    pub fn norm_sqr(&self) -> f64 {
        self.photon.norm_sqr() * self.vacuum.norm_sqr()
    }

    fn branches(&self) -> [(C64, &ArmExpansion, &ArmExpansion); 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        [
            (
                C64::from_polar(h, self.delta_theta),
                &self.photon,
                &self.vacuum,
            ),
            (C64::new(0.0, h), &self.vacuum, &self.photon),
        ]
    }

    /// Born probabilities of the four-mode number basis, as
    /// ([up_s, up_i, low_s, low_i], probability).
    pub fn number_populations(&self) -> Vec<([usize; 4], f64)> {
        let mut out = Vec::new();
        // the two branches differ in per-arm charge, so their supports are disjoint
        for (c, up, low) in self.branches() {
            let w = c.norm_sqr();
            for &(a, b, cu) in up.entries() {
                let pu = w * cu.norm_sqr();
                for &(x, y, cl) in low.entries() {
                    out.push(([a, b, x, y], pu * cl.norm_sqr()));
                }
            }
        }
        out
    }

    /// Expectation of a product of ladder operators given in
    /// [`PHASE_SPACE_MODES`] indices, applied right to left.
    fn expect_word(&self, word: &[(usize, bool)]) -> C64 {
        let up: Vec<(usize, bool)> = word.iter().filter(|w| w.0 < 2).copied().collect();
        let low: Vec<(usize, bool)> = word
            .iter()
            .filter(|w| w.0 >= 2)
            .map(|&(m, r)| (m - 2, r))
            .collect();
        let mut acc = C64::new(0.0, 0.0);
        for (cb, ub, lb) in self.branches() {
            for (ck, uk, lk) in self.branches() {
                let e = ub.matrix_element(&up, uk) * lb.matrix_element(&low, lk);
                acc += cb.conj() * ck * e;
            }
        }
        acc
    }
}

impl HusimiSource for ArmProductState {
    fn coherent_amplitude(&self, point: &CoherentPoint) -> C64 {
        let len = self.photon.max_occupation.max(self.vacuum.max_occupation) + 1;
        let a = point.as_array();
        let t: Vec<Vec<C64>> = a.iter().map(|&x| fock_overlaps(x, len)).collect();
        self.branches()
            .iter()
            .map(|(c, up, low)| c * up.project(&t[0], &t[1]) * low.project(&t[2], &t[3]))
            .sum()
    }

    fn husimi_moments(&self) -> Result<HusimiMoments> {
        let zero = C64::new(0.0, 0.0);
        let mut mom = HusimiMoments {
            mean: [zero; 4],
            anti_normal: [[zero; 4]; 4],
            pair: [[zero; 4]; 4],
        };
        for j in 0..4 {
            mom.mean[j] = self.expect_word(&[(j, false)]);
            for k in 0..4 {
                mom.anti_normal[j][k] = self.expect_word(&[(j, false), (k, true)]);
                mom.pair[j][k] = self.expect_word(&[(j, false), (k, false)]);
            }
        }
        Ok(mom)
    }
}

/// State reached after a fraction eta of equal lossless amplifiers of gain kappa.
pub fn state_at_collapse(kappa: f64, eta: f64, delta_theta: f64) -> Result<ArmProductState> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Config(format!("eta must lie in [0, 1], got {eta}")));
    }
    ArmProductState::new(eta * kappa, delta_theta)
}

/// Monte Carlo estimate of the collapse-averaged detector means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub means: DetectorMeans,
    pub stderr: DetectorMeans,
    pub v_s: Visibility,
    pub v_i: Visibility,
    pub v_s_se: f64,
    pub v_i_se: f64,
    /// Husimi mean of |alpha_j|^2 per mode, in [`PHASE_SPACE_MODES`] order.
    pub mode_means: [f64; 4],
    pub mode_means_se: [f64; 4],
    /// Plain average of the weights; estimates the Husimi normalisation (1).
    pub normalization: f64,
    pub normalization_se: f64,
    /// Kish effective sample size.
    pub effective_samples: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Number of per-sample functions: 4 detector counts, 4 mode intensities.
const NF: usize = 8;
const NG: usize = NF + 1;

#[derive(Clone)]
struct Accumulator {
    sum_w: f64,
    sum_w2: f64,
    sum_wf: [f64; NF],
    /// sum of w^2 g g^T with g = (1, f)
    sum_w2_gg: [[f64; NG]; NG],
}

impl Accumulator {
    fn new() -> Self {
        Accumulator {
            sum_w: 0.0,
            sum_w2: 0.0,
            sum_wf: [0.0; NF],
            sum_w2_gg: [[0.0; NG]; NG],
        }
    }

    fn push(&mut self, w: f64, f: &[f64; NF]) {
        self.sum_w += w;
        self.sum_w2 += w * w;
        let mut g = [1.0; NG];
        for k in 0..NF {
            self.sum_wf[k] += w * f[k];
            g[k + 1] = f[k];
        }
        let w2 = w * w;
        for a in 0..NG {
            for b in a..NG {
                self.sum_w2_gg[a][b] += w2 * g[a] * g[b];
            }
        }
    }

    fn merge(&mut self, o: &Accumulator) {
        self.sum_w += o.sum_w;
        self.sum_w2 += o.sum_w2;
        for k in 0..NF {
            self.sum_wf[k] += o.sum_wf[k];
        }
        for a in 0..NG {
            for b in a..NG {
                self.sum_w2_gg[a][b] += o.sum_w2_gg[a][b];
            }
        }
    }

    fn gg(&self, a: usize, b: usize) -> f64 {
        self.sum_w2_gg[a.min(b)][a.max(b)]
    }

    /// Delta-method variance of sum_k c_k mu_k for the self-normalised means mu.
    fn linear_variance(&self, c: &[f64; NF], mu: &[f64; NF]) -> f64 {
        // influence per sample: sum_k c_k (f_k - mu_k) = c.f - c.mu
        let shift: f64 = c.iter().zip(mu).map(|(a, b)| a * b).sum();
        let mut h = [0.0; NG];
        h[0] = -shift;
        h[1..].copy_from_slice(c);
        let mut v = 0.0;
        for a in 0..NG {
            for b in 0..NG {
                v += h[a] * h[b] * self.gg(a, b);
            }
        }
        v.max(0.0) / (self.sum_w * self.sum_w)
    }
}

struct Proposal {
    mean: [f64; 8],
    chol: DMatrix<f64>,
    ln_norm: f64,
}

impl Proposal {
    fn from_moments(m: &HusimiMoments) -> Result<Self> {
        let mut cov = DMatrix::<f64>::zeros(8, 8);
        for j in 0..4 {
            for k in 0..4 {
                let a = m.anti_normal[j][k] - m.mean[j] * m.mean[k].conj();
                let b = m.pair[j][k] - m.mean[j] * m.mean[k];
                cov[(j, k)] = 0.5 * (a + b).re;
                cov[(j + 4, k + 4)] = 0.5 * (a - b).re;
                cov[(j, k + 4)] = 0.5 * (b.im - a.im);
                cov[(k + 4, j)] = cov[(j, k + 4)];
            }
        }
        let cov = (&cov + cov.transpose()) * (0.5 * PROPOSAL_INFLATION);
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateProposal(
                "non-finite Husimi covariance".into(),
            ));
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| {
                Error::DegenerateProposal("Husimi covariance is not positive definite".into())
            })?
            .l();
        let ln_det_half: f64 = (0..8).map(|i| chol[(i, i)].ln()).sum();
        let mut mean = [0.0; 8];
        for j in 0..4 {
            mean[j] = m.mean[j].re;
            mean[j + 4] = m.mean[j].im;
        }
        Ok(Proposal {
            mean,
            chol,
            ln_norm: 4.0 * (2.0 * PI).ln() + ln_det_half,
        })
    }

    /// Draws a point and returns it with ln of the proposal density.
    fn draw(&self, rng: &mut ChaCha8Rng) -> (CoherentPoint, f64) {
        let z = DVector::<f64>::from_fn(8, |_, _| StandardNormal.sample(rng));
        let x = &self.chol * &z;
        let mut a = [C64::new(0.0, 0.0); 4];
        for j in 0..4 {
            a[j] = C64::new(self.mean[j] + x[j], self.mean[j + 4] + x[j + 4]);
        }
        (
            CoherentPoint::from_array(a),
            -0.5 * z.norm_squared() - self.ln_norm,
        )
    }
}

/// Averages the detector counts of evolved coherent collapse points over the
/// Husimi distribution of `source`, sampled from a matched Gaussian.
///
/// Chunks of samples use independent ChaCha8 streams of the master seed and
/// are reduced in index order, so results do not depend on the thread count.
pub fn coherent_collapse_means_mc<S: HusimiSource>(
    source: &S,
    kappa: f64,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Config(format!("eta must lie in [0, 1], got {eta}")));
    }
    if samples < 2 {
        return Err(Error::Config("Monte Carlo needs at least 2 samples".into()));
    }
    let proposal = Proposal::from_moments(&source.husimi_moments()?)?;
    let ln_pi4 = 4.0 * PI.ln();
    let chunks = samples.div_ceil(CHUNK);
    let partials: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let n = CHUNK.min(samples - chunk * CHUNK);
            let mut acc = Accumulator::new();
            for _ in 0..n {
                let (point, ln_g) = proposal.draw(&mut rng);
                let q = source.coherent_amplitude(&point).norm_sqr();
                let w = if q > 0.0 {
                    (q.ln() - ln_pi4 - ln_g).exp()
                } else {
                    0.0
                };
                let counts = detector_counts(&evolve_amplitudes(&point, kappa, eta));
                let a = point.as_array();
                let f = [
                    counts.n_as,
                    counts.n_ai,
                    counts.n_bs,
                    counts.n_bi,
                    a[0].norm_sqr(),
                    a[1].norm_sqr(),
                    a[2].norm_sqr(),
                    a[3].norm_sqr(),
                ];
                acc.push(w, &f);
            }
            acc
        })
        .collect();
    let mut acc = Accumulator::new();
    for p in &partials {
        acc.merge(p);
    }
    if !(acc.sum_w > 0.0) || !acc.sum_w.is_finite() {
        return Err(Error::DegenerateProposal(
            "all importance weights vanished or overflowed".into(),
        ));
    }
    let mut mu = [0.0; NF];
    for k in 0..NF {
        mu[k] = acc.sum_wf[k] / acc.sum_w;
    }
    let se = |k: usize| {
        let mut c = [0.0; NF];
        c[k] = 1.0;
        acc.linear_variance(&c, &mu).sqrt()
    };
    let means = DetectorMeans {
        n_as: mu[0],
        n_ai: mu[1],
        n_bs: mu[2],
        n_bi: mu[3],
    };
    let stderr = DetectorMeans {
        n_as: se(0),
        n_ai: se(1),
        n_bs: se(2),
        n_bi: se(3),
    };
    // V = (hi - lo)/(hi + lo); gradient w.r.t. (hi, lo) is (1 - V, -(1 + V))/(hi + lo)
    let vis = |hi: usize, lo: usize| -> (Visibility, f64) {
        let v = Visibility::contrast(mu[hi], mu[lo]);
        match v {
            Visibility::Defined(x) => {
                let d = mu[hi] + mu[lo];
                let mut c = [0.0; NF];
                c[hi] = (1.0 - x) / d;
                c[lo] = -(1.0 + x) / d;
                (v, acc.linear_variance(&c, &mu).sqrt())
            }
            Visibility::Undefined => (v, f64::NAN),
        }
    };
    let (v_s, v_s_se) = vis(2, 0);
    let (v_i, v_i_se) = vis(1, 3);
    let n = samples as f64;
    let norm = acc.sum_w / n;
    let norm_var = (acc.sum_w2 / n - norm * norm).max(0.0) / (n - 1.0);
    Ok(McEstimate {
        means,
        stderr,
        v_s,
        v_i,
        v_s_se,
        v_i_se,
        mode_means: [mu[4], mu[5], mu[6], mu[7]],
        mode_means_se: [se(4), se(5), se(6), se(7)],
        normalization: norm,
        normalization_se: norm_var.sqrt(),
        effective_samples: acc.sum_w * acc.sum_w / acc.sum_w2,
        samples,
        seed,
    })
}
