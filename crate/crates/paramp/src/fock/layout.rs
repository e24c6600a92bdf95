use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Up,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Signal,
    Idler,
}

/// One bosonic mode, labelled by interferometer arm and species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub arm: Arm,
    pub species: Species,
}

impl Mode {
    pub const UP_S: Mode = Mode::new(Arm::Up, Species::Signal);
    pub const UP_I: Mode = Mode::new(Arm::Up, Species::Idler);
    pub const LOW_S: Mode = Mode::new(Arm::Low, Species::Signal);
    pub const LOW_I: Mode = Mode::new(Arm::Low, Species::Idler);

    pub const fn new(arm: Arm, species: Species) -> Self {
        Mode { arm, species }
    }

    /// Contribution of one photon in this mode to the signal-minus-idler charge.
    pub fn charge(&self) -> i64 {
        match self.species {
            Species::Signal => 1,
            Species::Idler => -1,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arm = match self.arm {
            Arm::Up => "up",
            Arm::Low => "low",
        };
        let sp = match self.species {
            Species::Signal => "s",
            Species::Idler => "i",
        };
        write!(f, "({arm},{sp})")
    }
}

/// Ordered modes with a common cutoff N; each mode holds occupations 0..N-1.
///
/// Basis index = sum_k n_k * N^(M-1-k), so the first mode varies slowest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    modes: Vec<Mode>,
    cutoff: usize,
    strides: Vec<usize>,
    dim: usize,
}

impl HilbertLayout {
    pub fn new(modes: Vec<Mode>, cutoff: usize) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Config("a layout needs at least one mode".into()));
        }
        if cutoff < 2 {
            return Err(Error::Config(format!("cutoff must be >= 2, got {cutoff}")));
        }
        for (k, m) in modes.iter().enumerate() {
            if modes[..k].contains(m) {
                return Err(Error::Config(format!("mode {m} appears twice")));
            }
        }
        let mut strides = vec![1usize; modes.len()];
        let mut dim = 1usize;
        for k in (0..modes.len()).rev() {
            strides[k] = dim;
            dim = dim
                .checked_mul(cutoff)
                .ok_or_else(|| Error::Config("layout dimension overflows".into()))?;
        }
        Ok(HilbertLayout {
            modes,
            cutoff,
            strides,
            dim,
        })
    }

    /// Full interferometer layout in the fixed order (up,s), (up,i), (low,s), (low,i).
    pub fn interferometer(cutoff: usize) -> Result<Self> {
        Self::new(
            vec![Mode::UP_S, Mode::UP_I, Mode::LOW_S, Mode::LOW_I],
            cutoff,
        )
    }

    /// Signal and idler of a single arm.
    pub fn arm(arm: Arm, cutoff: usize) -> Result<Self> {
        Self::new(
            vec![
                Mode::new(arm, Species::Signal),
                Mode::new(arm, Species::Idler),
            ],
            cutoff,
        )
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, position: usize) -> usize {
        self.strides[position]
    }

    pub fn position(&self, mode: Mode) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| *m == mode)
            .ok_or_else(|| Error::UnknownMode(mode.to_string()))
    }

    pub fn contains(&self, mode: Mode) -> bool {
        self.modes.contains(&mode)
    }

    pub fn index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} occupations for {} modes",
                occupations.len(),
                self.modes.len()
            )));
        }
        let mut idx = 0;
        for (k, &n) in occupations.iter().enumerate() {
            if n >= self.cutoff {
                return Err(Error::Truncation {
                    mode: self.modes[k].to_string(),
                    occupation: n,
                    cutoff: self.cutoff,
                });
            }
            idx += n * self.strides[k];
        }
        Ok(idx)
    }

    #[inline]
    pub fn occupation(&self, index: usize, position: usize) -> usize {
        (index / self.strides[position]) % self.cutoff
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.modes.len())
            .map(|k| self.occupation(index, k))
            .collect()
    }

    /// Signal-minus-idler photon number of a basis state.
    pub fn charge(&self, index: usize) -> i64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(k, m)| m.charge() * self.occupation(index, k) as i64)
            .sum()
    }

    /// Layout over a subset of modes, in the order given.
    pub fn sublayout(&self, keep: &[Mode]) -> Result<HilbertLayout> {
        for m in keep {
            self.position(*m)?;
        }
        HilbertLayout::new(keep.to_vec(), self.cutoff)
    }

    /// Global index offsets of every basis state of `sub` embedded in `self`,
    /// and offsets of every basis state of the complementary modes.
    pub(crate) fn split_offsets(&self, sub: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let rest: Vec<usize> = (0..self.modes.len()).filter(|k| !sub.contains(k)).collect();
        (self.offsets_for(sub), self.offsets_for(&rest))
    }

    fn offsets_for(&self, positions: &[usize]) -> Vec<usize> {
        let mut out = vec![0usize];
        for &p in positions {
            let s = self.strides[p];
            let mut next = Vec::with_capacity(out.len() * self.cutoff);
            for &o in &out {
                for n in 0..self.cutoff {
                    next.push(o + n * s);
                }
            }
            out = next;
        }
        out
    }
}
