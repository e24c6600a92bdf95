use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::layout::{HilbertLayout, Mode};
use super::operator::ModeOperator;
use crate::error::{Error, Result};

/// Probabilities below this are reported as exactly zero.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum StateRepr {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

/// Pure or mixed state over a [`HilbertLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    layout: HilbertLayout,
    repr: StateRepr,
}

impl QuantumState {
    /// Pure state; the amplitudes must be normalised within 1e-10.
    pub fn pure(layout: HilbertLayout, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::LayoutMismatch(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        let n = amplitudes.norm_squared();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::Numeric(format!("state norm^2 = {n}")));
        }
        Ok(QuantumState {
            layout,
            repr: StateRepr::Pure(amplitudes),
        })
    }

    /// Density matrix; must be Hermitian with unit trace within 1e-10.
    pub fn mixed(layout: HilbertLayout, rho: DMatrix<C64>) -> Result<Self> {
        let d = layout.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} density matrix for dimension {d}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let herm = (&rho - rho.adjoint()).camax();
        if herm > 1e-10 {
            return Err(Error::Numeric(format!(
                "density matrix not Hermitian ({herm:.2e})"
            )));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Numeric(format!("density matrix trace {tr}")));
        }
        Ok(QuantumState {
            layout,
            repr: StateRepr::Mixed(rho),
        })
    }

    pub(crate) fn from_pure_unchecked(layout: HilbertLayout, amplitudes: DVector<C64>) -> Self {
        QuantumState {
            layout,
            repr: StateRepr::Pure(amplitudes),
        }
    }

    pub(crate) fn from_mixed_unchecked(layout: HilbertLayout, rho: DMatrix<C64>) -> Self {
        QuantumState {
            layout,
            repr: StateRepr::Mixed(rho),
        }
    }

    /// Fock basis state with the given occupation per mode.
    pub fn fock(layout: &HilbertLayout, occupations: &[usize]) -> Result<Self> {
        let idx = layout.index(occupations)?;
        let mut v = DVector::zeros(layout.dim());
        v[idx] = C64::new(1.0, 0.0);
        Ok(QuantumState::from_pure_unchecked(layout.clone(), v))
    }

    pub fn vacuum(layout: &HilbertLayout) -> Self {
        QuantumState::fock(layout, &vec![0; layout.num_modes()]).expect("vacuum is in range")
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, StateRepr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            StateRepr::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> DMatrix<C64> {
        match &self.repr {
            StateRepr::Pure(v) => v * v.adjoint(),
            StateRepr::Mixed(r) => r.clone(),
        }
    }

    pub fn into_mixed(self) -> QuantumState {
        match self.repr {
            StateRepr::Pure(_) => {
                let rho = self.density_matrix();
                QuantumState::from_mixed_unchecked(self.layout, rho)
            }
            StateRepr::Mixed(_) => self,
        }
    }

    /// Squared norm (pure) or trace (mixed).
    pub fn trace(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(v) => v.norm_squared(),
            StateRepr::Mixed(r) => r.trace().re,
        }
    }

    /// Diagonal of the density matrix in the Fock basis.
    pub fn populations(&self) -> Vec<f64> {
        match &self.repr {
            StateRepr::Pure(v) => v.iter().map(|a| a.norm_sqr()).collect(),
            StateRepr::Mixed(r) => (0..r.nrows()).map(|i| r[(i, i)].re).collect(),
        }
    }

    /// <O> as <psi|O|psi> or Tr(rho O).
    pub fn expectation(&self, op: &ModeOperator) -> Result<C64> {
        if op.layout() != &self.layout {
            return Err(Error::LayoutMismatch(
                "operator and state live on different layouts".into(),
            ));
        }
        match &self.repr {
            StateRepr::Pure(v) => {
                let w = op.apply(v.as_slice());
                Ok(v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum())
            }
            StateRepr::Mixed(r) => {
                let m = op.to_sparse();
                let mut acc = C64::new(0.0, 0.0);
                for (i, row) in m.rows.iter().enumerate() {
                    for &(j, x) in row {
                        acc += x * r[(j, i)];
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Mean photon number of one mode, from the populations.
    pub fn mean_number(&self, mode: Mode) -> Result<f64> {
        let pos = self.layout.position(mode)?;
        Ok(self
            .populations()
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.layout.occupation(i, pos) as f64)
            .sum())
    }

    /// Largest population held in the top two levels of any single mode.
    pub fn truncation_tail(&self) -> f64 {
        let n = self.layout.cutoff();
        let pops = self.populations();
        (0..self.layout.num_modes())
            .map(|k| {
                pops.iter()
                    .enumerate()
                    .filter(|(i, _)| self.layout.occupation(*i, k) + 2 >= n)
                    .map(|(_, p)| p)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn number_distribution(&self) -> NumberDistribution {
        NumberDistribution::from_populations(
            self.layout.modes().to_vec(),
            self.layout.cutoff(),
            self.populations(),
        )
    }

    /// Reduced state over `keep`, in the order given.
    pub fn partial_trace(&self, keep: &[Mode]) -> Result<QuantumState> {
        if keep.is_empty() {
            return Err(Error::Config(
                "partial trace needs at least one kept mode".into(),
            ));
        }
        let sub = self.layout.sublayout(keep)?;
        let positions: Vec<usize> = keep
            .iter()
            .map(|m| self.layout.position(*m))
            .collect::<Result<_>>()?;
        let (keep_off, rest_off) = self.layout.split_offsets(&positions);
        let dk = keep_off.len();
        let rho = match &self.repr {
            StateRepr::Pure(v) => {
                let m = DMatrix::from_fn(dk, rest_off.len(), |i, r| v[keep_off[i] + rest_off[r]]);
                &m * m.adjoint()
            }
            StateRepr::Mixed(full) => DMatrix::from_fn(dk, dk, |i, j| {
                rest_off
                    .iter()
                    .map(|&r| full[(keep_off[i] + r, keep_off[j] + r)])
                    .sum()
            }),
        };
        Ok(QuantumState::from_mixed_unchecked(sub, rho))
    }
}

/// Joint photon-number distribution over the modes of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberDistribution {
    modes: Vec<Mode>,
    cutoff: usize,
    probs: Vec<f64>,
    /// Probability missing from the table: norm deficit plus clamped mass.
    pub tail: f64,
}

impl NumberDistribution {
    fn from_populations(modes: Vec<Mode>, cutoff: usize, mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < PROBABILITY_FLOOR {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        NumberDistribution {
            modes,
            cutoff,
            probs,
            tail: (1.0 - total).max(0.0),
        }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn layout(&self) -> HilbertLayout {
        HilbertLayout::new(self.modes.clone(), self.cutoff).expect("valid modes")
    }

    /// Pr(n_1, ..., n_k); zero outside the cutoff.
    pub fn get(&self, occupations: &[usize]) -> f64 {
        match self.layout().index(occupations) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    /// Marginal over a subset of modes, in the order given.
    pub fn marginal(&self, keep: &[Mode]) -> Result<NumberDistribution> {
        let layout = self.layout();
        let positions: Vec<usize> = keep
            .iter()
            .map(|m| layout.position(*m))
            .collect::<Result<_>>()?;
        let sub = layout.sublayout(keep)?;
        let mut out = vec![0.0; sub.dim()];
        for (i, p) in self.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let j: usize = positions
                .iter()
                .enumerate()
                .map(|(k, &pos)| layout.occupation(i, pos) * sub.stride(k))
                .sum();
            out[j] += p;
        }
        Ok(NumberDistribution {
            modes: keep.to_vec(),
            cutoff: self.cutoff,
            probs: out,
            tail: self.tail,
        })
    }

    pub fn mean(&self, mode: Mode) -> Result<f64> {
        let layout = self.layout();
        let pos = layout.position(mode)?;
        Ok(self
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * layout.occupation(i, pos) as f64)
            .sum())
    }

    /// Nonzero entries as (occupations, probability).
    pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        let layout = self.layout();
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(i, p)| (layout.occupations(i), *p))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::layout::{Arm, Species};

    #[test]
    fn fock_state_basics() {
        let l = HilbertLayout::interferometer(3).unwrap();
        let s = QuantumState::fock(&l, &[1, 0, 0, 0]).unwrap();
        assert!((s.trace() - 1.0).abs() < 1e-15);
        assert_eq!(s.mean_number(Mode::UP_S).unwrap(), 1.0);
        let v = QuantumState::vacuum(&l);
        for m in l.modes() {
            assert_eq!(v.mean_number(*m).unwrap(), 0.0);
        }
        assert!(QuantumState::fock(&l, &[3, 0, 0, 0]).is_err());
    }

    #[test]
    fn lowering_and_number_expectations() {
        let l = HilbertLayout::new(vec![Mode::UP_S], 4).unwrap();
        let a = ModeOperator::annihilation(&l, Mode::UP_S).unwrap();
        let one = QuantumState::fock(&l, &[1]).unwrap();
        let out = a.apply(one.amplitudes().unwrap().as_slice());
        assert!((out[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        let zero = QuantumState::fock(&l, &[0]).unwrap();
        assert!(a
            .apply(zero.amplitudes().unwrap().as_slice())
            .iter()
            .all(|x| x.norm() == 0.0));
        let two = QuantumState::fock(&l, &[2]).unwrap();
        let n = ModeOperator::number(&l, Mode::UP_S).unwrap();
        assert!((two.expectation(&n).unwrap().re - 2.0).abs() < 1e-14);
        assert_eq!(two.expectation(&a).unwrap().norm(), 0.0);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let l = HilbertLayout::interferometer(3).unwrap();
        let s = QuantumState::fock(&l, &[1, 0, 0, 0]).unwrap();
        let r = s.partial_trace(&[Mode::UP_S, Mode::UP_I]).unwrap();
        let rho = r.density_matrix();
        assert!((rho[(3, 3)].re - 1.0).abs() < 1e-15);
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        assert!(s.partial_trace(&[]).is_err());
    }

    #[test]
    fn partial_trace_of_entangled_pair_is_maximally_mixed() {
        let l =
            HilbertLayout::new(vec![Mode::UP_S, Mode::new(Arm::Up, Species::Idler)], 3).unwrap();
        let mut v = DVector::zeros(9);
        let w = 1.0 / 3f64.sqrt();
        for n in 0..3 {
            v[l.index(&[n, n]).unwrap()] = C64::new(w, 0.0);
        }
        let s = QuantumState::pure(l, v).unwrap();
        let r = s.partial_trace(&[Mode::UP_S]).unwrap().density_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { w * w } else { 0.0 };
                assert!((r[(i, j)].re - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn distribution_clamps_and_marginalises() {
        let l = HilbertLayout::interferometer(3).unwrap();
        let s = QuantumState::fock(&l, &[0, 0, 1, 0]).unwrap();
        let d = s.number_distribution();
        assert_eq!(d.get(&[0, 0, 1, 0]), 1.0);
        assert!(d.tail < 1e-15);
        let m = d.marginal(&[Mode::LOW_S]).unwrap();
        assert_eq!(m.get(&[1]), 1.0);
        assert_eq!(m.get(&[0]), 0.0);
    }

    #[test]
    fn mixed_state_validation() {
        let l = HilbertLayout::new(vec![Mode::UP_S], 2).unwrap();
        let mut rho = DMatrix::zeros(2, 2);
        rho[(0, 0)] = C64::new(0.5, 0.0);
        rho[(1, 1)] = C64::new(0.5, 0.0);
        assert!(QuantumState::mixed(l.clone(), rho.clone()).is_ok());
        rho[(0, 1)] = C64::new(0.1, 0.0);
        assert!(QuantumState::mixed(l, rho).is_err());
    }
}
