//! The pipeline h1 -> phase shift -> TWPAs -> h2 in full and reduced Hilbert spaces.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    build_hamiltonian, evolve_lindblad_report, jump_operators_by_species, BathSpec, ComponentSpec,
    LindbladReport, Propagator,
};
use crate::error::{Error, Result};
use crate::fock::{Arm, HilbertLayout, Mode, ModeOperator, NumberDistribution, QuantumState};

/// Geometric-tail target for lossless runs.
pub const LOSSLESS_TAIL_TARGET: f64 = 1e-10;
/// Geometric-tail target for Lindblad runs.
pub const LINDBLAD_TAIL_TARGET: f64 = 1e-7;
/// Default hard limit on the top-two-level population.
pub const DEFAULT_TAIL_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FullPure,
    FullLindblad,
    Reduced,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::FullPure => "full_pure",
            Method::FullLindblad => "full_lindblad",
            Method::Reduced => "reduced",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_pure" => Ok(Method::FullPure),
            "full_lindblad" => Ok(Method::FullLindblad),
            "reduced" => Ok(Method::Reduced),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected full_pure, full_lindblad or reduced"
            ))),
        }
    }
}

/// Segment durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Durations {
    pub hybrid1: f64,
    pub phase_shifter: f64,
    pub twpa: f64,
    pub hybrid2: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Durations {
            hybrid1: 1e-9,
            phase_shifter: 1e-9,
            twpa: 5e-9,
            hybrid2: 1e-9,
        }
    }
}

impl Durations {
    pub fn total(&self) -> f64 {
        self.hybrid1 + self.phase_shifter + self.twpa + self.hybrid2
    }
}

/// Thermal loss acting on every mode during every segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bath {
    /// Loss rate, 1/s.
    pub gamma: f64,
    /// Temperature, K.
    pub temperature: f64,
}

fn default_omega() -> f64 {
    2.0 * PI * 5e9
}

fn default_lindblad_tol() -> f64 {
    1e-9
}

fn default_tail_limit() -> f64 {
    DEFAULT_TAIL_LIMIT
}

fn default_method() -> Method {
    Method::FullPure
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kappa_up: f64,
    #[serde(default)]
    pub kappa_low: f64,
    #[serde(default)]
    pub delta_theta: f64,
    #[serde(default)]
    pub durations: Durations,
    #[serde(default)]
    pub bath: Option<Bath>,
    /// Per-mode cutoff; chosen by [`cutoff_rule`] when absent.
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_omega")]
    pub omega_signal: f64,
    #[serde(default = "default_omega")]
    pub omega_idler: f64,
    /// Absolute per-entry error bound of the Lindblad integrator.
    #[serde(default = "default_lindblad_tol")]
    pub lindblad_tol: f64,
    /// Largest accepted top-two-level population per mode.
    #[serde(default = "default_tail_limit")]
    pub tail_limit: f64,
}

impl ExperimentConfig {
    /// Lossless full-space run with equal amplifiers.
    pub fn lossless(kappa: f64) -> Self {
        ExperimentConfig {
            kappa_up: kappa,
            kappa_low: kappa,
            delta_theta: 0.0,
            durations: Durations::default(),
            bath: None,
            cutoff: None,
            method: Method::FullPure,
            omega_signal: default_omega(),
            omega_idler: default_omega(),
            lindblad_tol: default_lindblad_tol(),
            tail_limit: DEFAULT_TAIL_LIMIT,
        }
    }

    /// Equal amplifiers with thermal loss.
    pub fn lossy(kappa: f64, bath: Bath, durations: Durations, method: Method) -> Self {
        ExperimentConfig {
            bath: Some(bath),
            durations,
            method,
            ..Self::lossless(kappa)
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn with_delta_theta(mut self, delta_theta: f64) -> Self {
        self.delta_theta = delta_theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, k) in [("kappa_up", self.kappa_up), ("kappa_low", self.kappa_low)] {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {k}"
                )));
            }
        }
        if !self.delta_theta.is_finite() {
            return Err(Error::Config("delta_theta must be finite".into()));
        }
        let d = &self.durations;
        for (name, t) in [
            ("hybrid1", d.hybrid1),
            ("phase_shifter", d.phase_shifter),
            ("twpa", d.twpa),
            ("hybrid2", d.hybrid2),
        ] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!(
                    "duration {name} must be positive, got {t}"
                )));
            }
        }
        if let Some(n) = self.cutoff {
            if n < 2 {
                return Err(Error::Config(format!("cutoff must be >= 2, got {n}")));
            }
        }
        if !(self.lindblad_tol > 0.0) {
            return Err(Error::Config("lindblad_tol must be positive".into()));
        }
        if !(self.tail_limit > 0.0) {
            return Err(Error::Config("tail_limit must be positive".into()));
        }
        if let Some(b) = &self.bath {
            BathSpec::new(b.gamma, b.temperature, self.omega_signal)?;
            BathSpec::new(b.gamma, b.temperature, self.omega_idler)?;
        }
        if self.method == Method::FullPure && self.bath.is_some_and(|b| b.gamma > 0.0) {
            return Err(Error::Config(
                "full_pure cannot model loss; use full_lindblad or reduced".into(),
            ));
        }
        if self.method == Method::Reduced {
            if self.kappa_up != self.kappa_low {
                return Err(Error::Config(format!(
                    "reduced method needs identical amplifiers (kappa_up = {}, kappa_low = {})",
                    self.kappa_up, self.kappa_low
                )));
            }
            if self.delta_theta.rem_euclid(2.0 * PI) != 0.0 {
                return Err(Error::Config(
                    "reduced method evaluates the delta_theta = 0 working point only".into(),
                ));
            }
        }
        Ok(())
    }

    fn baths(&self) -> Result<Option<(BathSpec, BathSpec)>> {
        match &self.bath {
            None => Ok(None),
            Some(b) => Ok(Some((
                BathSpec::new(b.gamma, b.temperature, self.omega_signal)?,
                BathSpec::new(b.gamma, b.temperature, self.omega_idler)?,
            ))),
        }
    }

    fn max_n_th(&self) -> Result<f64> {
        Ok(self
            .baths()?
            .map(|(s, i)| s.n_th.max(i.n_th))
            .unwrap_or(0.0))
    }

    fn lindblad(&self) -> bool {
        match self.method {
            Method::FullPure => false,
            Method::FullLindblad => true,
            Method::Reduced => self.bath.is_some(),
        }
    }

    /// Cutoff in use: explicit, or from [`cutoff_rule`].
    pub fn resolved_cutoff(&self) -> Result<usize> {
        if let Some(n) = self.cutoff {
            return Ok(n);
        }
        let eps = if self.lindblad() {
            LINDBLAD_TAIL_TARGET
        } else {
            LOSSLESS_TAIL_TARGET
        };
        Ok(cutoff_rule(
            self.kappa_up.max(self.kappa_low),
            self.max_n_th()?,
            eps,
        ))
    }
}

/// Smallest N whose geometric amplifier tail q^(N-2) is below `eps`, with
/// q = m/(1+m) and m = sinh^2 k + n_th cosh 2k the thermal-like occupation.
pub fn cutoff_rule(kappa: f64, n_th: f64, eps: f64) -> usize {
    let m = kappa.sinh().powi(2) + n_th * (2.0 * kappa).cosh();
    if m <= 0.0 {
        return 4;
    }
    let q = m / (1.0 + m);
    let n = 2.0 + (eps.ln() / q.ln()).ceil();
    (n.max(4.0)) as usize
}

/// Mean photon numbers at the two detectors, per species.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectorMeans {
    pub n_as: f64,
    pub n_ai: f64,
    pub n_bs: f64,
    pub n_bi: f64,
}

impl DetectorMeans {
    pub fn total_signal(&self) -> f64 {
        self.n_as + self.n_bs
    }

    pub fn total_idler(&self) -> f64 {
        self.n_ai + self.n_bi
    }

    pub fn scaled(&self, w: f64) -> Self {
        DetectorMeans {
            n_as: self.n_as * w,
            n_ai: self.n_ai * w,
            n_bs: self.n_bs * w,
            n_bi: self.n_bi * w,
        }
    }

    pub fn plus(&self, o: &Self) -> Self {
        DetectorMeans {
            n_as: self.n_as + o.n_as,
            n_ai: self.n_ai + o.n_ai,
            n_bs: self.n_bs + o.n_bs,
            n_bi: self.n_bi + o.n_bi,
        }
    }
}

/// Interference visibility, or the marker for an empty species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Visibility {
    Defined(f64),
    /// Both detectors empty for this species (no photons to interfere).
    Undefined,
}

impl Visibility {
    /// (hi - lo)/(hi + lo); undefined when both counts vanish.
    pub fn contrast(hi: f64, lo: f64) -> Self {
        let d = hi + lo;
        if d.abs() <= 1e-15 {
            Visibility::Undefined
        } else {
            Visibility::Defined((hi - lo) / d)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Visibility::Defined(v) => Some(*v),
            Visibility::Undefined => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, Visibility::Defined(_))
    }
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Visibility::Defined(v) => write!(f, "{v}"),
            Visibility::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Visibility {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Visibility::Defined(v) => s.serialize_f64(*v),
            Visibility::Undefined => s.serialize_str("undefined"),
        }
    }
}

/// V_s = (n_Bs - n_As)/(n_Bs + n_As), V_i = (n_Ai - n_Bi)/(n_Ai + n_Bi).
pub fn visibility(means: &DetectorMeans) -> (Visibility, Visibility) {
    (
        Visibility::contrast(means.n_bs, means.n_as),
        Visibility::contrast(means.n_ai, means.n_bi),
    )
}

/// Numerical health of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub cutoff: usize,
    /// |1 - norm or trace| of the final state.
    pub norm_error: f64,
    pub lindblad_steps: usize,
    pub trace_drift: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityResult {
    pub means: DetectorMeans,
    pub v_s: Visibility,
    pub v_i: Visibility,
    /// Largest top-two-level population seen on any mode.
    pub tail: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl VisibilityResult {
    fn new(means: DetectorMeans, tail: f64, method: Method, diagnostics: Diagnostics) -> Self {
        let (v_s, v_i) = visibility(&means);
        VisibilityResult {
            means,
            v_s,
            v_i,
            tail,
            method,
            diagnostics,
        }
    }
}

struct Segment {
    h: ModeOperator,
    dt: f64,
}

fn sum_hamiltonians(specs: &[ComponentSpec], layout: &HilbertLayout) -> Result<ModeOperator> {
    let mut h = ModeOperator::zero(layout);
    for s in specs {
        h = h + build_hamiltonian(s, layout)?;
    }
    Ok(h)
}

fn full_segments(
    config: &ExperimentConfig,
    layout: &HilbertLayout,
    upto_h2: bool,
) -> Result<Vec<Segment>> {
    let d = &config.durations;
    let mut segs = vec![
        Segment {
            h: build_hamiltonian(&ComponentSpec::hybrid(d.hybrid1), layout)?,
            dt: d.hybrid1,
        },
        Segment {
            h: build_hamiltonian(
                &ComponentSpec::phase_shifter(config.delta_theta, d.phase_shifter),
                layout,
            )?,
            dt: d.phase_shifter,
        },
        Segment {
            h: sum_hamiltonians(
                &[
                    ComponentSpec::twpa(Arm::Up, config.kappa_up, d.twpa),
                    ComponentSpec::twpa(Arm::Low, config.kappa_low, d.twpa),
                ],
                layout,
            )?,
            dt: d.twpa,
        },
    ];
    if upto_h2 {
        segs.push(Segment {
            h: build_hamiltonian(&ComponentSpec::hybrid(d.hybrid2), layout)?,
            dt: d.hybrid2,
        });
    }
    Ok(segs)
}

fn reduced_segments(config: &ExperimentConfig, layout: &HilbertLayout) -> Result<Vec<Segment>> {
    let d = &config.durations;
    Ok(vec![
        Segment {
            h: ModeOperator::zero(layout),
            dt: d.hybrid1,
        },
        Segment {
            h: build_hamiltonian(
                &ComponentSpec::phase_shifter(config.delta_theta, d.phase_shifter),
                layout,
            )?,
            dt: d.phase_shifter,
        },
        Segment {
            h: build_hamiltonian(
                &ComponentSpec::twpa(Arm::Up, config.kappa_up, d.twpa),
                layout,
            )?,
            dt: d.twpa,
        },
        Segment {
            h: ModeOperator::zero(layout),
            dt: d.hybrid2,
        },
    ])
}

/// Runs segments on `state`, tracking the truncation tail after each one.
fn propagate(
    config: &ExperimentConfig,
    state: QuantumState,
    segments: &[Segment],
    lindblad: bool,
) -> Result<(QuantumState, f64, Diagnostics)> {
    let layout = state.layout().clone();
    let mut diag = Diagnostics {
        cutoff: layout.cutoff(),
        min_eigenvalue: f64::NAN,
        ..Default::default()
    };
    let mut tail: f64 = 0.0;
    let mut state = state;
    if lindblad {
        let jumps = match config.baths()? {
            Some((s, i)) => jump_operators_by_species(&layout, &s, &i),
            None => Vec::new(),
        };
        state = state.into_mixed();
        let mut min_eig = f64::INFINITY;
        for seg in segments {
            let (next, rep): (QuantumState, LindbladReport) =
                evolve_lindblad_report(&state, &seg.h, &jumps, seg.dt, config.lindblad_tol)?;
            state = next;
            diag.lindblad_steps += rep.steps;
            diag.trace_drift = diag.trace_drift.max(rep.trace_drift);
            min_eig = min_eig.min(rep.min_eigenvalue);
            tail = tail.max(state.truncation_tail());
        }
        diag.min_eigenvalue = min_eig;
    } else {
        let mut psi = match state.repr() {
            crate::fock::StateRepr::Pure(v) => v.clone(),
            crate::fock::StateRepr::Mixed(_) => {
                return Err(Error::Config(
                    "pure pipeline needs a pure input state".into(),
                ))
            }
        };
        for seg in segments {
            if seg.h.is_zero() {
                continue;
            }
            Propagator::new(&seg.h, seg.dt)?.apply(psi.as_mut_slice());
            let st = QuantumState::from_pure_unchecked(layout.clone(), psi);
            tail = tail.max(st.truncation_tail());
            psi = match st.repr() {
                crate::fock::StateRepr::Pure(v) => v.clone(),
                _ => unreachable!(),
            };
        }
        state = QuantumState::from_pure_unchecked(layout.clone(), psi);
    }
    diag.norm_error = (state.trace() - 1.0).abs();
    if tail > config.tail_limit {
        let suggested = cutoff_rule(
            config.kappa_up.max(config.kappa_low),
            config.max_n_th()?,
            if lindblad {
                LINDBLAD_TAIL_TARGET
            } else {
                LOSSLESS_TAIL_TARGET
            },
        )
        .max(layout.cutoff() + layout.cutoff() / 2);
        return Err(Error::TailTooLarge {
            tail,
            limit: config.tail_limit,
            suggested,
        });
    }
    Ok((state, tail, diag))
}

fn full_input(config: &ExperimentConfig) -> Result<(HilbertLayout, QuantumState)> {
    let layout = HilbertLayout::interferometer(config.resolved_cutoff()?)?;
    let input = QuantumState::fock(&layout, &[1, 0, 0, 0])?;
    Ok((layout, input))
}

fn full_means(state: &QuantumState) -> Result<DetectorMeans> {
    Ok(DetectorMeans {
        n_as: state.mean_number(Mode::UP_S)?,
        n_ai: state.mean_number(Mode::UP_I)?,
        n_bs: state.mean_number(Mode::LOW_S)?,
        n_bi: state.mean_number(Mode::LOW_I)?,
    })
}

/// Full four-mode pipeline from |1,0,0,0>. Detector A is the upper output of
/// the second hybrid, B the lower one.
pub fn run_full(config: &ExperimentConfig) -> Result<(QuantumState, VisibilityResult)> {
    config.validate()?;
    if config.method == Method::Reduced {
        return Err(Error::Config("run_full needs a full_* method".into()));
    }
    let (layout, input) = full_input(config)?;
    let segments = full_segments(config, &layout, true)?;
    let lindblad = config.method == Method::FullLindblad;
    let (state, tail, diag) = propagate(config, input, &segments, lindblad)?;
    let means = full_means(&state)?;
    Ok((
        state,
        VisibilityResult::new(means, tail, config.method, diag),
    ))
}

/// Two runs of the single-arm chain on (signal, idler): |1,0> gives n_Bs and
/// n_Ai, |0,0> gives n_As and n_Bi.
pub fn run_reduced(config: &ExperimentConfig) -> Result<VisibilityResult> {
    let mut config = config.clone();
    config.method = Method::Reduced;
    config.validate()?;
    let layout = HilbertLayout::arm(Arm::Up, config.resolved_cutoff()?)?;
    let segments = reduced_segments(&config, &layout)?;
    let lindblad = config.lindblad();
    let one = QuantumState::fock(&layout, &[1, 0])?;
    let zero = QuantumState::vacuum(&layout);
    let (s1, t1, d1) = propagate(&config, one, &segments, lindblad)?;
    let (s0, t0, d0) = propagate(&config, zero, &segments, lindblad)?;
    let means = DetectorMeans {
        n_bs: s1.mean_number(Mode::UP_S)?,
        n_ai: s1.mean_number(Mode::UP_I)?,
        n_as: s0.mean_number(Mode::UP_S)?,
        n_bi: s0.mean_number(Mode::UP_I)?,
    };
    let diag = Diagnostics {
        cutoff: d1.cutoff,
        norm_error: d1.norm_error.max(d0.norm_error),
        lindblad_steps: d1.lindblad_steps + d0.lindblad_steps,
        trace_drift: d1.trace_drift.max(d0.trace_drift),
        min_eigenvalue: d1.min_eigenvalue.min(d0.min_eigenvalue),
    };
    Ok(VisibilityResult::new(
        means,
        t1.max(t0),
        Method::Reduced,
        diag,
    ))
}

/// Dispatches on the configured method.
pub fn run(config: &ExperimentConfig) -> Result<VisibilityResult> {
    match config.method {
        Method::Reduced => run_reduced(config),
        _ => run_full(config).map(|(_, r)| r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PatternPoint {
    /// Phase shift reduced to [0, 2 pi).
    pub delta_theta: f64,
    pub means: DetectorMeans,
    pub tail: f64,
}

/// Detector means over a grid of phase shifts (full methods only).
pub fn interference_pattern(config: &ExperimentConfig, grid: &[f64]) -> Result<Vec<PatternPoint>> {
    if grid.is_empty() {
        return Err(Error::Config("phase grid is empty".into()));
    }
    if config.method == Method::Reduced {
        return Err(Error::Config(
            "the interference pattern needs a full method".into(),
        ));
    }
    grid.par_iter()
        .map(|&dt| {
            let c = config.clone().with_delta_theta(dt);
            let (_, r) = run_full(&c)?;
            Ok(PatternPoint {
                delta_theta: dt.rem_euclid(2.0 * PI),
                means: r.means,
                tail: r.tail,
            })
        })
        .collect()
}

/// `n` evenly spaced phases on [0, 2 pi).
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

/// Joint photon-number tables just before the second hybrid.
#[derive(Debug, Clone)]
pub struct Correlations {
    /// (n_up_s, n_low_s)
    pub signal_arms: NumberDistribution,
    /// (n_up_s, n_up_i)
    pub upper_pair: NumberDistribution,
    /// (n_up_i, n_low_i)
    pub idler_arms: NumberDistribution,
    pub tail: f64,
}

/// Full-space state after the amplifiers, before the second hybrid.
pub fn state_before_h2(config: &ExperimentConfig) -> Result<(QuantumState, f64)> {
    config.validate()?;
    if config.method == Method::Reduced {
        return Err(Error::Config(
            "the state before h2 needs a full method".into(),
        ));
    }
    let (layout, input) = full_input(config)?;
    let segments = full_segments(config, &layout, false)?;
    let (state, tail, _) = propagate(
        config,
        input,
        &segments,
        config.method == Method::FullLindblad,
    )?;
    Ok((state, tail))
}

pub fn correlations_before_h2(config: &ExperimentConfig) -> Result<Correlations> {
    let (state, tail) = state_before_h2(config)?;
    let dist = state.number_distribution();
    Ok(Correlations {
        signal_arms: dist.marginal(&[Mode::UP_S, Mode::LOW_S])?,
        upper_pair: dist.marginal(&[Mode::UP_S, Mode::UP_I])?,
        idler_arms: dist.marginal(&[Mode::UP_I, Mode::LOW_I])?,
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn closed_form(k: f64) -> f64 {
        let c2 = k.cosh().powi(2);
        let s2 = k.sinh().powi(2);
        c2 / (c2 + 2.0 * s2)
    }

    #[test]
    fn kappa_zero_is_a_single_photon_interferometer() {
        let (_, r) = run_full(&ExperimentConfig::lossless(0.0)).unwrap();
        assert_abs_diff_eq!(r.v_s.value().unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(r.v_i, Visibility::Undefined);
        assert_abs_diff_eq!(r.means.n_bs, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lossless_matches_closed_form() {
        for k in [0.3, 0.7] {
            let (_, r) = run_full(&ExperimentConfig::lossless(k)).unwrap();
            assert_abs_diff_eq!(r.v_s.value().unwrap(), closed_form(k), epsilon = 1e-8);
            assert_abs_diff_eq!(r.v_i.value().unwrap(), 1.0 / 3.0, epsilon = 1e-8);
            assert!(r.tail < 1e-6);
            assert!(r.diagnostics.norm_error < 1e-9);
        }
    }

    #[test]
    fn reduced_matches_full_lossless() {
        for k in [0.2, 0.6] {
            let c = ExperimentConfig::lossless(k).with_cutoff(24);
            let (_, a) = run_full(&c).unwrap();
            let b = run_reduced(&c).unwrap();
            for (x, y) in [
                (a.means.n_as, b.means.n_as),
                (a.means.n_ai, b.means.n_ai),
                (a.means.n_bs, b.means.n_bs),
                (a.means.n_bi, b.means.n_bi),
            ] {
                assert_abs_diff_eq!(x, y, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn visibility_markers() {
        let m = DetectorMeans {
            n_as: 0.0,
            n_ai: 2.0,
            n_bs: 3.0,
            n_bi: 0.0,
        };
        let (vs, vi) = visibility(&m);
        assert_eq!(vs, Visibility::Defined(1.0));
        assert_eq!(vi, Visibility::Defined(1.0));
        let eq = DetectorMeans {
            n_as: 1.0,
            n_ai: 1.0,
            n_bs: 1.0,
            n_bi: 1.0,
        };
        assert_eq!(visibility(&eq).0, Visibility::Defined(0.0));
        assert_eq!(Visibility::contrast(0.0, 0.0), Visibility::Undefined);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::lossless(0.3).with_method(Method::Reduced);
        c.kappa_low = 0.4;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let lossy = ExperimentConfig::lossy(
            0.3,
            Bath {
                gamma: 1e8,
                temperature: 0.05,
            },
            Durations::default(),
            Method::FullPure,
        );
        assert!(lossy.validate().is_err());
        assert!(ExperimentConfig::lossless(-0.1).validate().is_err());
        assert!("bogus".parse::<Method>().is_err());
        assert_eq!("reduced".parse::<Method>().unwrap(), Method::Reduced);
    }

    #[test]
    fn tail_limit_is_enforced() {
        let c = ExperimentConfig::lossless(0.8).with_cutoff(5);
        match run_full(&c) {
            Err(Error::TailTooLarge { suggested, .. }) => assert!(suggested > 5),
            other => panic!("expected a tail error, got {other:?}"),
        }
    }

    #[test]
    fn cutoff_rule_grows_with_gain() {
        let a = cutoff_rule(0.1, 0.0, 1e-10);
        let b = cutoff_rule(1.2, 0.0, 1e-10);
        assert!(a >= 4 && b > a);
        assert_eq!(cutoff_rule(0.0, 0.0, 1e-10), 4);
        assert!(cutoff_rule(0.5, 0.01, 1e-7) >= cutoff_rule(0.5, 0.0, 1e-7));
    }

    #[test]
    fn pattern_totals_are_phase_independent() {
        let c = ExperimentConfig::lossless(0.0);
        let pts = interference_pattern(&c, &phase_grid(8)).unwrap();
        for p in &pts {
            assert_abs_diff_eq!(p.means.total_signal(), 1.0, epsilon = 1e-12);
            // single-photon Mach-Zehnder: n_Bs = cos^2(dtheta/2)
            assert_abs_diff_eq!(
                p.means.n_bs,
                (p.delta_theta / 2.0).cos().powi(2),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn correlations_at_zero_gain() {
        let c = ExperimentConfig::lossless(0.0);
        let corr = correlations_before_h2(&c).unwrap();
        assert_abs_diff_eq!(corr.signal_arms.get(&[1, 0]), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(corr.signal_arms.get(&[0, 1]), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(corr.idler_arms.get(&[0, 0]), 1.0, epsilon = 1e-12);
    }
}
