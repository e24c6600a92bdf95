//! Two-parameter fit of the lossy amplifier output and its high-gain extrapolation.
//!
//! Each detector channel follows
//! n(k) = n0_self cosh^2 k + (n0_partner + 1) e^{-f} sinh^2 k,
//! where n0 are the outputs without amplification.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::BathSpec;
use crate::error::{Error, Result};
use crate::interferometer::{
    run_reduced, visibility, DetectorMeans, ExperimentConfig, Method, Visibility, VisibilityResult,
};

/// Largest accepted relative residual of a channel fit.
pub const ACCEPT_RESIDUAL: f64 = 1e-2;

/// Default amplification grid of the fit.
pub fn default_kappa_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// Output without amplification: (n_in - n_th) e^{-g} + n_th, g = Gamma dt_tot.
pub fn n_out_kappa0(n_in: f64, n_th: f64, gamma: f64, dt_tot: f64) -> f64 {
    (n_in - n_th) * (-gamma * dt_tot).exp() + n_th
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    As,
    Ai,
    Bs,
    Bi,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::As, Channel::Ai, Channel::Bs, Channel::Bi];

    pub fn of(self, m: &DetectorMeans) -> f64 {
        match self {
            Channel::As => m.n_as,
            Channel::Ai => m.n_ai,
            Channel::Bs => m.n_bs,
            Channel::Bi => m.n_bi,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::As => "A,s",
            Channel::Ai => "A,i",
            Channel::Bs => "B,s",
            Channel::Bi => "B,i",
        })
    }
}

/// Unamplified outputs feeding one channel: its own mode and the partner species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub n_self: f64,
    pub n_partner: f64,
}

/// Baselines of the four channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub a_s: Baseline,
    pub a_i: Baseline,
    pub b_s: Baseline,
    pub b_i: Baseline,
}

impl Baselines {
    /// From the bath decay law. B,s sees the photon on its own mode and A,i on
    /// its partner; the other two channels see vacuum.
    pub fn from_baths(signal: &BathSpec, idler: &BathSpec, dt_tot: f64) -> Self {
        let s1 = n_out_kappa0(1.0, signal.n_th, signal.gamma, dt_tot);
        let s0 = n_out_kappa0(0.0, signal.n_th, signal.gamma, dt_tot);
        let i0 = n_out_kappa0(0.0, idler.n_th, idler.gamma, dt_tot);
        Baselines {
            a_s: Baseline {
                n_self: s0,
                n_partner: i0,
            },
            a_i: Baseline {
                n_self: i0,
                n_partner: s1,
            },
            b_s: Baseline {
                n_self: s1,
                n_partner: i0,
            },
            b_i: Baseline {
                n_self: i0,
                n_partner: s0,
            },
        }
    }

    pub fn lossless() -> Self {
        let b = |s, p| Baseline {
            n_self: s,
            n_partner: p,
        };
        Baselines {
            a_s: b(0.0, 0.0),
            a_i: b(0.0, 1.0),
            b_s: b(1.0, 0.0),
            b_i: b(0.0, 0.0),
        }
    }

    pub fn get(&self, c: Channel) -> Baseline {
        match c {
            Channel::As => self.a_s,
            Channel::Ai => self.a_i,
            Channel::Bs => self.b_s,
            Channel::Bi => self.b_i,
        }
    }
}

/// Model mean of one channel.
pub fn model_mean(base: Baseline, f: f64, kappa: f64) -> f64 {
    base.n_self * kappa.cosh().powi(2) + (base.n_partner + 1.0) * (-f).exp() * kappa.sinh().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelFit {
    pub channel: Channel,
    pub f: f64,
    /// ||model - data|| / ||data|| over the grid.
    pub residual: f64,
    pub baseline: Baseline,
}

impl ChannelFit {
    pub fn accepted(&self) -> bool {
        self.residual < ACCEPT_RESIDUAL && self.f.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossFit {
    pub kappas: Vec<f64>,
    pub channels: Vec<ChannelFit>,
}

impl LossFit {
    pub fn channel(&self, c: Channel) -> &ChannelFit {
        self.channels
            .iter()
            .find(|x| x.channel == c)
            .expect("all channels fitted")
    }

    pub fn f(&self, c: Channel) -> f64 {
        self.channel(c).f
    }

    pub fn accepted(&self) -> bool {
        self.channels.iter().all(|c| c.accepted())
    }

    /// Errors with the worst channel when any fit is rejected.
    pub fn require_accepted(&self) -> Result<()> {
        match self
            .channels
            .iter()
            .filter(|c| !c.accepted())
            .max_by(|a, b| a.residual.total_cmp(&b.residual))
        {
            None => Ok(()),
            Some(c) => Err(Error::FitRejected {
                channel: c.channel.to_string(),
                residual: c.residual,
                limit: ACCEPT_RESIDUAL,
            }),
        }
    }

    /// f of the surface shared by (A,s), (B,s), (B,i): their mean.
    pub fn f_shared(&self) -> f64 {
        (self.f(Channel::As) + self.f(Channel::Bs) + self.f(Channel::Bi)) / 3.0
    }

    pub fn model_means(&self, kappa: f64) -> DetectorMeans {
        let m = |c: Channel| model_mean(self.channel(c).baseline, self.f(c), kappa);
        DetectorMeans {
            n_as: m(Channel::As),
            n_ai: m(Channel::Ai),
            n_bs: m(Channel::Bs),
            n_bi: m(Channel::Bi),
        }
    }
}

/// Per-channel least squares. The model is linear in x = e^{-f}:
/// x = sum(y b)/sum(b^2), b = (n0_partner + 1) sinh^2 k, y = n - n0_self cosh^2 k.
pub fn fit_f(kappas: &[f64], data: &[DetectorMeans], baselines: &Baselines) -> Result<LossFit> {
    if kappas.len() != data.len() {
        return Err(Error::Config("one set of means per amplification".into()));
    }
    if kappas.len() < 4 {
        return Err(Error::Config(format!(
            "fit needs at least 4 amplification points, got {}",
            kappas.len()
        )));
    }
    if let Some(k) = kappas.iter().find(|&&k| !(k > 0.0 && k <= 1.0 + 1e-12)) {
        return Err(Error::Config(format!(
            "fit amplifications must lie in (0, 1], got {k}"
        )));
    }
    let channels = Channel::ALL
        .iter()
        .map(|&c| {
            let base = baselines.get(c);
            let (mut sby, mut sbb) = (0.0, 0.0);
            for (k, m) in kappas.iter().zip(data) {
                let b = (base.n_partner + 1.0) * k.sinh().powi(2);
                let y = c.of(m) - base.n_self * k.cosh().powi(2);
                sby += b * y;
                sbb += b * b;
            }
            let x = sby / sbb;
            let f = if x > 0.0 { -x.ln() } else { f64::INFINITY };
            let (mut r2, mut d2) = (0.0, 0.0);
            for (k, m) in kappas.iter().zip(data) {
                let model =
                    base.n_self * k.cosh().powi(2) + x * (base.n_partner + 1.0) * k.sinh().powi(2);
                r2 += (model - c.of(m)).powi(2);
                d2 += c.of(m).powi(2);
            }
            ChannelFit {
                channel: c,
                f,
                residual: (r2 / d2).sqrt(),
                baseline: base,
            }
        })
        .collect();
    Ok(LossFit {
        kappas: kappas.to_vec(),
        channels,
    })
}

/// Simulates the reduced pipeline over `kappas` and fits every channel.
pub fn fit_from_reduced(
    template: &ExperimentConfig,
    kappas: &[f64],
) -> Result<(LossFit, Vec<VisibilityResult>)> {
    let runs: Vec<VisibilityResult> = kappas
        .par_iter()
        .map(|&k| {
            let mut c = template.clone();
            c.kappa_up = k;
            c.kappa_low = k;
            c.method = Method::Reduced;
            run_reduced(&c)
        })
        .collect::<Result<_>>()?;
    let baselines = match &template.bath {
        None => Baselines::lossless(),
        Some(b) => Baselines::from_baths(
            &BathSpec::new(b.gamma, b.temperature, template.omega_signal)?,
            &BathSpec::new(b.gamma, b.temperature, template.omega_idler)?,
            template.durations.total(),
        ),
    };
    let means: Vec<DetectorMeans> = runs.iter().map(|r| r.means).collect();
    Ok((fit_f(kappas, &means, &baselines)?, runs))
}

/// Fitted means at amplification `kappa` pushed through the visibility.
pub fn extrapolate_visibility(fit: &LossFit, kappa: f64) -> Result<(Visibility, Visibility)> {
    fit.require_accepted()?;
    Ok(visibility(&fit.model_means(kappa)))
}

/// kappa -> infinity of the fitted model (cosh^2 / sinh^2 -> 1).
pub fn high_gain_limit(fit: &LossFit) -> Result<(Visibility, Visibility)> {
    fit.require_accepted()?;
    let m = |c: Channel| {
        let b = fit.channel(c).baseline;
        b.n_self + (b.n_partner + 1.0) * (-fit.f(c)).exp()
    };
    Ok(visibility(&DetectorMeans {
        n_as: m(Channel::As),
        n_ai: m(Channel::Ai),
        n_bs: m(Channel::Bs),
        n_bi: m(Channel::Bi),
    }))
}

/// Single-f high-gain visibility with g = Gamma dt_tot.
pub fn high_gain_visibility(f: f64, g: f64, n_th: f64) -> f64 {
    1.0 / (1.0
        + 2.0 * (g - f).exp()
        + 2.0 * n_th * g.exp() * (1.0 + (-f).exp()) * (1.0 - (-g).exp()))
}

/// Low-temperature limit with f = g/2.
pub fn low_temperature_visibility(g: f64) -> f64 {
    1.0 / (1.0 + 2.0 * (g / 2.0).exp())
}

/// Low-loss limit to first order in g.
pub fn low_loss_visibility(g: f64, n_th: f64) -> f64 {
    1.0 / (3.0 + 4.0 * n_th * g)
}

/// f on a rectangular (g_tot, n_th) mesh with bilinear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FSurface {
    pub g_tot: Vec<f64>,
    pub n_th: Vec<f64>,
    /// values[i][j] at (g_tot[i], n_th[j]).
    pub values: Vec<Vec<f64>>,
}

impl FSurface {
    pub fn new(g_tot: Vec<f64>, n_th: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if g_tot.len() < 2 || n_th.len() < 2 || !increasing(&g_tot) || !increasing(&n_th) {
            return Err(Error::Config(
                "surface axes need at least two strictly increasing points".into(),
            ));
        }
        if values.len() != g_tot.len() || values.iter().any(|r| r.len() != n_th.len()) {
            return Err(Error::Config("surface values do not match its axes".into()));
        }
        Ok(FSurface {
            g_tot,
            n_th,
            values,
        })
    }

    /// Bilinear interpolation; points outside the mesh are clamped to it.
    pub fn interpolate(&self, g: f64, n: f64) -> f64 {
        let locate = |axis: &[f64], x: f64| -> (usize, f64) {
            let x = x.clamp(axis[0], axis[axis.len() - 1]);
            let i = match axis.iter().position(|&a| a > x) {
                Some(0) => 0,
                Some(p) => p - 1,
                None => axis.len() - 2,
            };
            (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
        };
        let (i, u) = locate(&self.g_tot, g);
        let (j, v) = locate(&self.n_th, n);
        let z = &self.values;
        (1.0 - u) * (1.0 - v) * z[i][j]
            + u * (1.0 - v) * z[i + 1][j]
            + (1.0 - u) * v * z[i][j + 1]
            + u * v * z[i + 1][j + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kappa_zero_outputs() {
        assert_eq!(n_out_kappa0(1.0, 0.0, 0.0, 1e-9), 1.0);
        assert_abs_diff_eq!(
            n_out_kappa0(1.0, 8.3e-3, 1e8, 13e-9),
            0.278570,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(n_out_kappa0(0.3, 0.3, 1e8, 1e-9), 0.3, epsilon = 1e-15);
    }

    fn lossless_means(k: f64) -> DetectorMeans {
        let (c, s) = (k.cosh().powi(2), k.sinh().powi(2));
        DetectorMeans {
            n_as: s,
            n_ai: 2.0 * s,
            n_bs: c + s,
            n_bi: s,
        }
    }

    #[test]
    fn lossless_data_gives_zero_f() {
        let ks = default_kappa_grid();
        let data: Vec<_> = ks.iter().map(|&k| lossless_means(k)).collect();
        let fit = fit_f(&ks, &data, &Baselines::lossless()).unwrap();
        for c in &fit.channels {
            assert!(c.f.abs() < 1e-6, "{}: {}", c.channel, c.f);
            assert!(c.residual < 1e-12);
        }
        let (vs, vi) = high_gain_limit(&fit).unwrap();
        assert_abs_diff_eq!(vs.value().unwrap(), 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(vi.value().unwrap(), 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn synthetic_model_is_recovered() {
        let ks = default_kappa_grid();
        let bs = Baselines::from_baths(
            &BathSpec::new(1e8, 0.05, 2.0 * std::f64::consts::PI * 5e9).unwrap(),
            &BathSpec::new(1e8, 0.05, 2.0 * std::f64::consts::PI * 5e9).unwrap(),
            8e-9,
        );
        let truth = [0.41, 0.27, 0.43, 0.39];
        let data: Vec<_> = ks
            .iter()
            .map(|&k| DetectorMeans {
                n_as: model_mean(bs.a_s, truth[0], k),
                n_ai: model_mean(bs.a_i, truth[1], k),
                n_bs: model_mean(bs.b_s, truth[2], k),
                n_bi: model_mean(bs.b_i, truth[3], k),
            })
            .collect();
        let fit = fit_f(&ks, &data, &bs).unwrap();
        for (c, t) in Channel::ALL.iter().zip(truth) {
            assert_abs_diff_eq!(fit.f(*c), t, epsilon = 1e-12);
        }
        let (vs, _) = extrapolate_visibility(&fit, 1.0).unwrap();
        let direct = visibility(&data[9]).0;
        assert_abs_diff_eq!(
            vs.value().unwrap(),
            direct.value().unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn fit_preconditions() {
        let ks = [0.1, 0.2, 0.3];
        let d = vec![DetectorMeans::default(); 3];
        assert!(fit_f(&ks, &d, &Baselines::lossless()).is_err());
        let ks = [0.5, 0.8, 1.0, 1.5];
        let d = vec![DetectorMeans::default(); 4];
        assert!(fit_f(&ks, &d, &Baselines::lossless()).is_err());
    }

    #[test]
    fn rejected_fit_is_reported() {
        let ks = default_kappa_grid();
        let data: Vec<_> = ks
            .iter()
            .map(|&k| {
                let mut m = lossless_means(k);
                m.n_bs += 0.3 * (10.0 * k).sin();
                m
            })
            .collect();
        let fit = fit_f(&ks, &data, &Baselines::lossless()).unwrap();
        assert!(!fit.accepted());
        assert!(matches!(
            extrapolate_visibility(&fit, 2.0),
            Err(Error::FitRejected { .. })
        ));
    }

    #[test]
    fn limit_formulas_agree() {
        let g = 0.8;
        assert_abs_diff_eq!(
            high_gain_visibility(g / 2.0, g, 0.0),
            low_temperature_visibility(g),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            high_gain_visibility(0.0, 0.0, 0.01),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        // first order in g at f = g
        let small = 1e-5;
        assert_abs_diff_eq!(
            high_gain_visibility(small, small, 0.01),
            low_loss_visibility(small, 0.01),
            epsilon = 1e-9
        );
    }

    #[test]
    fn surface_interpolation() {
        let s = FSurface::new(
            vec![0.0, 1.0],
            vec![0.0, 0.1],
            vec![vec![0.0, 1.0], vec![2.0, 3.0]],
        )
        .unwrap();
        assert_abs_diff_eq!(s.interpolate(0.5, 0.05), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.interpolate(1.0, 0.1), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.interpolate(5.0, -1.0), 2.0, epsilon = 1e-15);
        assert!(FSurface::new(vec![0.0], vec![0.0, 1.0], vec![vec![0.0, 0.0]]).is_err());
    }
}
