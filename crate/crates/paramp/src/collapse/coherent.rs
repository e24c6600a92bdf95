//! Coherent-state collapse: phase-space points, amplitude evolution, detector
//! counts and the radial-integral evaluation of the averaged counts.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::fock::{Mode, QuantumState, StateRepr};
use crate::interferometer::{visibility, DetectorMeans, Visibility};
use crate::quadrature::{integrate, integrate_semi_infinite, Tolerance};
use crate::special::bessel_ie;

/// Four-mode coherent state |a_up,s>|a_up,i>|a_low,s>|a_low,i>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentPoint {
    pub up_s: C64,
    pub up_i: C64,
    pub low_s: C64,
    pub low_i: C64,
}

impl CoherentPoint {
    pub fn new(up_s: C64, up_i: C64, low_s: C64, low_i: C64) -> Result<Self> {
        let p = CoherentPoint {
            up_s,
            up_i,
            low_s,
            low_i,
        };
        if p.as_array()
            .iter()
            .any(|a| !a.re.is_finite() || !a.im.is_finite())
        {
            return Err(Error::Config("coherent amplitudes must be finite".into()));
        }
        Ok(p)
    }

    pub fn vacuum() -> Self {
        let z = C64::new(0.0, 0.0);
        CoherentPoint {
            up_s: z,
            up_i: z,
            low_s: z,
            low_i: z,
        }
    }

    /// Amplitudes in the order up_s, up_i, low_s, low_i.
    pub fn as_array(&self) -> [C64; 4] {
        [self.up_s, self.up_i, self.low_s, self.low_i]
    }

    pub fn from_array(a: [C64; 4]) -> Self {
        CoherentPoint {
            up_s: a[0],
            up_i: a[1],
            low_s: a[2],
            low_i: a[3],
        }
    }
}

/// <alpha|n> for n = 0..len, stable for large |alpha|.
pub fn fock_overlaps(alpha: C64, len: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    if len == 0 {
        return out;
    }
    let r2 = alpha.norm_sqr();
    if r2 == 0.0 {
        out[0] = C64::new(1.0, 0.0);
        return out;
    }
    let r = r2.sqrt();
    let conj_phase = alpha.conj() / r;
    // magnitudes recurse outward from the peak at n ~ |alpha|^2
    let peak = (r2.floor() as usize).min(len - 1);
    let ln_peak = -0.5 * r2 + peak as f64 * r.ln() - 0.5 * ln_factorial(peak as u64);
    let mut mags = vec![0.0; len];
    mags[peak] = ln_peak.exp();
    for n in (peak + 1)..len {
        mags[n] = mags[n - 1] * r / (n as f64).sqrt();
    }
    for n in (0..peak).rev() {
        mags[n] = mags[n + 1] * ((n + 1) as f64).sqrt() / r;
    }
    let mut phase = C64::new(1.0, 0.0);
    for n in 0..len {
        out[n] = phase * mags[n];
        phase *= conj_phase;
    }
    out
}

/// |<alpha|psi>|^2 for a pure state holding the four interferometer modes.
pub fn coherent_overlap(state: &QuantumState, point: &CoherentPoint) -> Result<f64> {
    Ok(coherent_amplitude(state, point)?.norm_sqr())
}

/// <alpha|psi> for a pure state holding the four interferometer modes.
pub fn coherent_amplitude(state: &QuantumState, point: &CoherentPoint) -> Result<C64> {
    let StateRepr::Pure(psi) = state.repr() else {
        return Err(Error::Config("coherent overlap needs a pure state".into()));
    };
    let layout = state.layout();
    let n = layout.cutoff();
    let modes = [Mode::UP_S, Mode::UP_I, Mode::LOW_S, Mode::LOW_I];
    if layout.num_modes() != 4 {
        return Err(Error::LayoutMismatch(
            "coherent overlap needs the four interferometer modes".into(),
        ));
    }
    let alphas = point.as_array();
    let mut tables = Vec::with_capacity(4);
    for pos in 0..4 {
        let mode = layout.modes()[pos];
        let k = modes
            .iter()
            .position(|m| *m == mode)
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))?;
        tables.push(fock_overlaps(alphas[k], n));
    }
    let mut acc = C64::new(0.0, 0.0);
    for (idx, c) in psi.iter().enumerate() {
        if *c == C64::new(0.0, 0.0) {
            continue;
        }
        let mut w = *c;
        for (pos, t) in tables.iter().enumerate() {
            w *= t[layout.occupation(idx, pos)];
        }
        acc += w;
    }
    Ok(acc)
}

/// Classical mean amplitudes after the rest (1 - eta) kappa of each amplifier.
pub fn evolve_amplitudes(point: &CoherentPoint, kappa: f64, eta: f64) -> CoherentPoint {
    let k = (1.0 - eta) * kappa;
    let (c, s) = (k.cosh(), k.sinh());
    let is = C64::new(0.0, s);
    CoherentPoint {
        up_s: point.up_s * c + is * point.up_i.conj(),
        up_i: point.up_i * c + is * point.up_s.conj(),
        low_s: point.low_s * c + is * point.low_i.conj(),
        low_i: point.low_i * c + is * point.low_s.conj(),
    }
}

/// Photon counts behind the second hybrid, n_A = |i a_up - a_low|^2 / 2 and
/// n_B = |i a_up + a_low|^2 / 2 per species.
pub fn detector_counts(point: &CoherentPoint) -> DetectorMeans {
    let i = C64::i();
    let a = |up: C64, low: C64| 0.5 * (i * up - low).norm_sqr();
    let b = |up: C64, low: C64| 0.5 * (i * up + low).norm_sqr();
    DetectorMeans {
        n_as: a(point.up_s, point.low_s),
        n_ai: a(point.up_i, point.low_i),
        n_bs: b(point.up_s, point.low_s),
        n_bi: b(point.up_i, point.low_i),
    }
}

/// Collapse-averaged detector means from the radial integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherentQuadrature {
    pub means: DetectorMeans,
    pub v_s: Visibility,
    pub v_i: Visibility,
    /// Largest relative change of a radial integral when the tolerance is cut by 16.
    pub refinement_change: f64,
    /// 2 K R(2,0,0) R(0,0,0); equals 1 for a normalised collapse distribution.
    pub normalization: f64,
    /// Relative tolerance requested for each radial integral.
    pub tol: f64,
}

/// R(p, q, m) = 1/4 int int t_s^(p/2) t_i^(q/2) e^(-t_s - t_i) I_m(2 tau sqrt(t_s t_i)).
pub fn radial_integral(p: u32, q: u32, m: u32, tau: f64, tol: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::Config(format!(
            "tanh(eta kappa) must lie in [0, 1), got {tau}"
        )));
    }
    let (hp, hq) = (p as f64 / 2.0, q as f64 / 2.0);
    let inner_tol = Tolerance::relative(tol / 8.0).with_abs(1e-300);
    let mut failure: Option<Error> = None;
    let mut outer = |ts: f64| -> f64 {
        if failure.is_some() {
            return 0.0;
        }
        let rs = ts.sqrt();
        let f = |ti: f64| -> f64 {
            let ri = ti.sqrt();
            let x = rs * ri;
            let expo = -(rs - ri).powi(2) - 2.0 * (1.0 - tau) * x;
            let pw = if hq == 0.0 { 1.0 } else { ti.powf(hq) };
            pw * expo.exp() * bessel_ie(m, 2.0 * tau * x)
        };
        let width = 2.0 * rs.max(1.0);
        let lo = (ts - width).max(0.0);
        let pieces = [
            if lo > 0.0 {
                integrate(f, 0.0, lo, inner_tol)
            } else {
                Ok(zero_estimate())
            },
            integrate(f, lo, ts + width, inner_tol),
            integrate_semi_infinite(f, ts + width, width.max(1.0 / (1.0 - tau)), inner_tol),
        ];
        let mut sum = 0.0;
        for r in pieces {
            match r {
                Ok(e) => sum += e.value,
                Err(e) => {
                    failure = Some(e);
                    return 0.0;
                }
            }
        }
        let pw = if hp == 0.0 { 1.0 } else { ts.powf(hp) };
        pw * sum
    };
    let scale = (1.0 + 0.5 * (hp + hq)) / (2.0 * (1.0 - tau));
    let outer_tol = Tolerance::relative(tol).with_abs(1e-300);
    let head = integrate(&mut outer, 0.0, scale, outer_tol);
    let tail = integrate_semi_infinite(&mut outer, scale, scale, outer_tol);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(0.25 * (head?.value + tail?.value))
}

fn zero_estimate() -> crate::quadrature::Estimate {
    crate::quadrature::Estimate {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    }
}

/// Series form of [`radial_integral`], used as an independent check.
pub fn radial_integral_series(p: u32, q: u32, m: u32, tau: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let mut sum = 0.0;
    let ln_tau = tau.ln();
    for k in 0..100_000u32 {
        let kf = k as f64;
        let mf = m as f64;
        let ln_term = if tau == 0.0 {
            if k > 0 || m > 0 {
                break;
            }
            0.0
        } else {
            (2.0 * kf + mf) * ln_tau
        } - ln_factorial(k as u64)
            - ln_factorial((k + m) as u64)
            + ln_gamma(p as f64 / 2.0 + 1.0 + kf + mf / 2.0)
            + ln_gamma(q as f64 / 2.0 + 1.0 + kf + mf / 2.0);
        let term = ln_term.exp();
        sum += term;
        if k > 10 && term < 1e-17 * sum {
            break;
        }
    }
    0.25 * sum
}

struct RadialSet {
    r000: f64,
    r200: f64,
    r111: f64,
    r220: f64,
    r400: f64,
    r311: f64,
}

fn radial_set(tau: f64, tol: f64) -> Result<RadialSet> {
    Ok(RadialSet {
        r000: radial_integral(0, 0, 0, tau, tol)?,
        r200: radial_integral(2, 0, 0, tau, tol)?,
        r111: radial_integral(1, 1, 1, tau, tol)?,
        r220: radial_integral(2, 2, 0, tau, tol)?,
        r400: radial_integral(4, 0, 0, tau, tol)?,
        r311: radial_integral(3, 1, 1, tau, tol)?,
    })
}

fn assemble(r: &RadialSet, kappa: f64, eta: f64) -> (DetectorMeans, f64) {
    let t = eta * kappa;
    let k = 8.0 / t.cosh().powi(6);
    let rest = (1.0 - eta) * kappa;
    let (c, s) = (rest.cosh(), rest.sinh());
    let d_s = 2.0 * k * (c * r.r200 + s * r.r111).powi(2);
    let d_i = 2.0 * k * (s * r.r200 + c * r.r111).powi(2);
    let cross = 4.0 * c * s * (r.r311 * r.r000 + r.r111 * r.r200);
    let even = 2.0 * r.r200 * r.r200;
    let self_term = 2.0 * r.r400 * r.r000 + even;
    let partner_term = 2.0 * r.r220 * r.r000 + even;
    let sum_s = k * (c * c * self_term + s * s * partner_term + cross);
    let sum_i = k * (c * c * partner_term + s * s * self_term + cross);
    let means = DetectorMeans {
        n_as: 0.5 * (sum_s - d_s),
        n_ai: 0.5 * (sum_i + d_i),
        n_bs: 0.5 * (sum_s + d_s),
        n_bi: 0.5 * (sum_i - d_i),
    };
    (means, 2.0 * k * r.r200 * r.r000)
}

/// Detector means averaged over coherent collapse points at position eta for
/// equal lossless amplifiers of gain kappa.
///
/// Each radial integral is evaluated at `tol` and again at `tol / 16`; the run
/// fails when the two disagree by more than `tol` relative.
pub fn coherent_collapse_means_quadrature(
    kappa: f64,
    eta: f64,
    tol: f64,
) -> Result<CoherentQuadrature> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Config(format!(
            "kappa must be finite and >= 0, got {kappa}"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Config(format!("eta must lie in [0, 1], got {eta}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!(
            "tolerance must lie in (0, 1), got {tol}"
        )));
    }
    let tau = (eta * kappa).tanh();
    let coarse = radial_set(tau, tol)?;
    let fine = radial_set(tau, tol / 16.0)?;
    let pairs = [
        (coarse.r000, fine.r000),
        (coarse.r200, fine.r200),
        (coarse.r111, fine.r111),
        (coarse.r220, fine.r220),
        (coarse.r400, fine.r400),
        (coarse.r311, fine.r311),
    ];
    let mut change: f64 = 0.0;
    for (a, b) in pairs {
        let scale = b.abs().max(f64::MIN_POSITIVE);
        change = change.max((a - b).abs() / scale);
    }
    let (means, normalization) = assemble(&fine, kappa, eta);
    if change > tol {
        let total = means.total_signal();
        return Err(Error::Quadrature {
            estimate: total,
            error: change * total,
        });
    }
    let (v_s, v_i) = visibility(&means);
    Ok(CoherentQuadrature {
        means,
        v_s,
        v_i,
        refinement_change: change,
        normalization,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn overlap_table_matches_direct_formula() {
        let a = C64::new(0.7, -0.4);
        let t = fock_overlaps(a, 12);
        for (n, v) in t.iter().enumerate() {
            let expect = C64::new((-0.5 * a.norm_sqr()).exp(), 0.0) * a.conj().powu(n as u32)
                / (1..=n).map(|k| k as f64).product::<f64>().sqrt();
            assert!((v - expect).norm() < 1e-14, "n = {n}");
        }
    }

    #[test]
    fn overlap_table_survives_large_amplitudes() {
        let a = C64::new(30.0, 20.0);
        let t = fock_overlaps(a, 4000);
        let total: f64 = t.iter().map(|v| v.norm_sqr()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn single_photon_overlap_peaks_at_unit_modulus() {
        let f = |r: f64| r * r * (-r * r).exp();
        let t = fock_overlaps(C64::new(1.0, 0.0), 2);
        assert_relative_eq!(t[1].norm_sqr(), f(1.0), epsilon = 1e-15);
        assert!(f(1.0) > f(0.9) && f(1.0) > f(1.1));
    }

    #[test]
    fn evolution_identity_and_invariant() {
        let p = CoherentPoint::new(
            C64::new(0.3, 0.1),
            C64::new(-0.2, 0.5),
            C64::new(1.1, -0.7),
            C64::new(0.0, 0.4),
        )
        .unwrap();
        assert_eq!(evolve_amplitudes(&p, 1.3, 1.0), p);
        let q = evolve_amplitudes(&p, 1.3, 0.4);
        let inv = |x: &CoherentPoint| {
            (
                x.up_s.norm_sqr() - x.up_i.norm_sqr(),
                x.low_s.norm_sqr() - x.low_i.norm_sqr(),
            )
        };
        assert_relative_eq!(inv(&p).0, inv(&q).0, epsilon = 1e-12);
        assert_relative_eq!(inv(&p).1, inv(&q).1, epsilon = 1e-12);
        assert_eq!(
            evolve_amplitudes(&CoherentPoint::vacuum(), 2.0, 0.0),
            CoherentPoint::vacuum()
        );
    }

    #[test]
    fn counts_follow_the_hybrid() {
        let z = C64::new(0.0, 0.0);
        let a = C64::new(1.5, 0.0);
        // the first hybrid leaves the lower arm a quarter period ahead
        let same = detector_counts(&CoherentPoint::from_array([a, z, C64::i() * a, z]));
        assert_eq!(same.n_as, 0.0);
        assert_relative_eq!(same.total_signal(), 2.0 * a.norm_sqr(), epsilon = 1e-14);
        let one = detector_counts(&CoherentPoint::from_array([a, a, z, z]));
        assert_relative_eq!(one.n_as, one.n_bs, epsilon = 1e-14);
        let p = CoherentPoint::from_array([
            C64::new(0.3, -1.2),
            C64::new(0.8, 0.2),
            C64::new(-0.5, 0.9),
            C64::new(0.1, 0.1),
        ]);
        let c = detector_counts(&p);
        assert_relative_eq!(
            c.total_signal(),
            p.up_s.norm_sqr() + p.low_s.norm_sqr(),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            c.total_idler(),
            p.up_i.norm_sqr() + p.low_i.norm_sqr(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn radial_integrals_match_series() {
        for tau in [0.0, 0.3, 0.76, 0.95] {
            for (p, q, m) in [
                (0, 0, 0),
                (2, 0, 0),
                (1, 1, 1),
                (2, 2, 0),
                (4, 0, 0),
                (3, 1, 1),
            ] {
                let quad = radial_integral(p, q, m, tau, 1e-9).unwrap();
                let series = radial_integral_series(p, q, m, tau);
                assert_relative_eq!(quad, series, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn collapse_at_the_end_adds_one_photon_per_mode() {
        let k: f64 = 0.5;
        let q = coherent_collapse_means_quadrature(k, 1.0, 1e-8).unwrap();
        let (c2, s2) = (k.cosh().powi(2), k.sinh().powi(2));
        assert_relative_eq!(q.means.n_bs, c2 + s2 + 1.0, max_relative = 1e-7);
        assert_relative_eq!(q.means.n_as, s2 + 1.0, max_relative = 1e-7);
        assert_relative_eq!(q.means.n_ai, 2.0 * s2 + 1.0, max_relative = 1e-7);
        assert_relative_eq!(q.means.n_bi, s2 + 1.0, max_relative = 1e-7);
        assert_relative_eq!(q.normalization, 1.0, max_relative = 1e-7);
        assert_relative_eq!(q.v_s.value().unwrap(), 1.0 / 3.0, epsilon = 1e-7);
    }

    #[test]
    fn mid_amplifier_collapse_at_high_gain() {
        let q = coherent_collapse_means_quadrature(2.5, 0.5, 1e-6).unwrap();
        assert_relative_eq!(q.means.n_bs, 77.776093, max_relative = 1e-5);
        assert_relative_eq!(q.means.n_as, 40.171119, max_relative = 1e-5);
        assert_relative_eq!(q.means.n_ai, 76.776093, max_relative = 1e-5);
        assert_relative_eq!(q.means.n_bi, 40.171119, max_relative = 1e-5);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(coherent_collapse_means_quadrature(1.0, 1.5, 1e-6).is_err());
        assert!(coherent_collapse_means_quadrature(-1.0, 0.5, 1e-6).is_err());
        assert!(coherent_collapse_means_quadrature(1.0, 0.5, 0.0).is_err());
    }
}
