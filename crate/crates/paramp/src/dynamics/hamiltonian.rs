use serde::{Deserialize, Serialize};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{Arm, HilbertLayout, Mode, ModeOperator, Species};

/// Which arm(s) a component acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArmScope {
    Up,
    Low,
    Both,
}

impl ArmScope {
    fn arms(self) -> &'static [Arm] {
        match self {
            ArmScope::Up => &[Arm::Up],
            ArmScope::Low => &[Arm::Low],
            ArmScope::Both => &[Arm::Up, Arm::Low],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentKind {
    Hybrid,
    PhaseShifter { delta_theta: f64 },
    Twpa { kappa: f64 },
    TwpaDegenerate { kappa: f64, delta_phi: f64 },
    Idle,
}

/// One interferometer element with its coupling and duration (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub kind: ComponentKind,
    pub duration: f64,
    pub scope: ArmScope,
}

impl ComponentSpec {
    pub fn hybrid(duration: f64) -> Self {
        ComponentSpec {
            kind: ComponentKind::Hybrid,
            duration,
            scope: ArmScope::Both,
        }
    }

    /// Phase shift applied to the upper arm.
    pub fn phase_shifter(delta_theta: f64, duration: f64) -> Self {
        ComponentSpec {
            kind: ComponentKind::PhaseShifter { delta_theta },
            duration,
            scope: ArmScope::Up,
        }
    }

    pub fn twpa(arm: Arm, kappa: f64, duration: f64) -> Self {
        ComponentSpec {
            kind: ComponentKind::Twpa { kappa },
            duration,
            scope: arm_scope(arm),
        }
    }

    pub fn degenerate(arm: Arm, kappa: f64, delta_phi: f64, duration: f64) -> Self {
        ComponentSpec {
            kind: ComponentKind::TwpaDegenerate { kappa, delta_phi },
            duration,
            scope: arm_scope(arm),
        }
    }

    pub fn idle(duration: f64, scope: ArmScope) -> Self {
        ComponentSpec {
            kind: ComponentKind::Idle,
            duration,
            scope,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Config(format!(
                "component duration must be positive, got {}",
                self.duration
            )));
        }
        match self.kind {
            ComponentKind::Hybrid if self.scope != ArmScope::Both => {
                Err(Error::Config("a hybrid acts on both arms".into()))
            }
            ComponentKind::Twpa { kappa } | ComponentKind::TwpaDegenerate { kappa, .. }
                if !(kappa >= 0.0) =>
            {
                Err(Error::Config(format!(
                    "amplification must be >= 0, got {kappa}"
                )))
            }
            ComponentKind::PhaseShifter { .. }
            | ComponentKind::Twpa { .. }
            | ComponentKind::TwpaDegenerate { .. }
                if self.scope == ArmScope::Both =>
            {
                Err(Error::Config(
                    "phase shifters and amplifiers act on a single arm".into(),
                ))
            }
            _ => Ok(()),
        }
    }
}

fn arm_scope(arm: Arm) -> ArmScope {
    match arm {
        Arm::Up => ArmScope::Up,
        Arm::Low => ArmScope::Low,
    }
}

fn op(layout: &HilbertLayout, mode: Mode) -> Result<(ModeOperator, ModeOperator)> {
    let a = ModeOperator::annihilation(layout, mode)?;
    let ad = a.adjoint();
    Ok((a, ad))
}

fn scope_error(spec: &ComponentSpec, missing: Mode) -> Error {
    Error::Config(format!(
        "{:?} needs mode {missing}, which the layout lacks",
        spec.kind
    ))
}

/// Generator H/hbar in rad/s for one component.
///
/// Couplings are divided by the duration, so exp(-i H dt / hbar) depends only
/// on the dimensionless coupling:
/// hybrid exp(i pi/4 (a_up^dag a_low + h.c.)) per species,
/// phase shifter exp(i dtheta n_up),
/// TWPA exp(i kappa (a_s^dag a_i^dag + a_s a_i)),
/// degenerate TWPA exp(i kappa (e^{i dphi} a_s^dag^2 + h.c.)).
pub fn build_hamiltonian(spec: &ComponentSpec, layout: &HilbertLayout) -> Result<ModeOperator> {
    spec.validate()?;
    let rate = 1.0 / spec.duration;
    let mut h = ModeOperator::zero(layout);
    match spec.kind {
        ComponentKind::Hybrid => {
            let mut any = false;
            for sp in [Species::Signal, Species::Idler] {
                let up = Mode::new(Arm::Up, sp);
                let low = Mode::new(Arm::Low, sp);
                match (layout.contains(up), layout.contains(low)) {
                    (true, true) => {
                        let (_, up_d) = op(layout, up)?;
                        let (low_a, _) = op(layout, low)?;
                        let hop = up_d * low_a;
                        h = h
                            + (hop.clone() + hop.adjoint()) * (-std::f64::consts::FRAC_PI_4 * rate);
                        any = true;
                    }
                    (true, false) => return Err(scope_error(spec, low)),
                    (false, true) => return Err(scope_error(spec, up)),
                    (false, false) => {}
                }
            }
            if !any {
                return Err(Error::Config("hybrid needs both arms in the layout".into()));
            }
        }
        ComponentKind::PhaseShifter { delta_theta } => {
            let arm = spec.scope.arms()[0];
            let mut any = false;
            for sp in [Species::Signal, Species::Idler] {
                let m = Mode::new(arm, sp);
                if layout.contains(m) {
                    h = h + ModeOperator::number(layout, m)? * (-delta_theta * rate);
                    any = true;
                }
            }
            if !any {
                return Err(scope_error(spec, Mode::new(arm, Species::Signal)));
            }
        }
        ComponentKind::Twpa { kappa } => {
            let arm = spec.scope.arms()[0];
            let s = Mode::new(arm, Species::Signal);
            let i = Mode::new(arm, Species::Idler);
            for m in [s, i] {
                if !layout.contains(m) {
                    return Err(scope_error(spec, m));
                }
            }
            let (sa, sd) = op(layout, s)?;
            let (ia, id) = op(layout, i)?;
            h = (sd * id + sa * ia) * (-kappa * rate);
        }
        ComponentKind::TwpaDegenerate { kappa, delta_phi } => {
            let arm = spec.scope.arms()[0];
            let s = Mode::new(arm, Species::Signal);
            if !layout.contains(s) {
                return Err(scope_error(spec, s));
            }
            let sd = ModeOperator::creation(layout, s)?;
            let pump = (sd.clone() * sd).scale(C64::from_polar(1.0, delta_phi));
            h = (pump.clone() + pump.adjoint()) * (-kappa * rate);
        }
        ComponentKind::Idle => {
            for arm in spec.scope.arms() {
                if !layout.modes().iter().any(|m| m.arm == *arm) {
                    return Err(Error::Config(format!(
                        "idle segment on missing arm {arm:?}"
                    )));
                }
            }
        }
    }
    Ok(h)
}
