//! Truncated multimode bosonic Fock space.

mod layout;
mod operator;
mod state;

pub use layout::{Arm, HilbertLayout, Mode, Species};
pub use operator::{Ladder, ModeOperator, SparseMatrix};
pub use state::{NumberDistribution, QuantumState, StateRepr, PROBABILITY_FLOOR};

use num_complex::Complex64 as C64;

use crate::error::Result;

pub fn make_fock(layout: &HilbertLayout, occupations: &[usize]) -> Result<QuantumState> {
    QuantumState::fock(layout, occupations)
}

pub fn annihilation(layout: &HilbertLayout, mode: Mode) -> Result<ModeOperator> {
    ModeOperator::annihilation(layout, mode)
}

pub fn partial_trace(state: &QuantumState, keep: &[Mode]) -> Result<QuantumState> {
    state.partial_trace(keep)
}

pub fn number_distribution(state: &QuantumState) -> NumberDistribution {
    state.number_distribution()
}

pub fn expectation(state: &QuantumState, op: &ModeOperator) -> Result<C64> {
    state.expectation(op)
}
