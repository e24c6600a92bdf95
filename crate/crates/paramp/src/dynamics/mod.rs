//! Component generators, unitary propagation and the Lindblad master equation.

mod hamiltonian;
mod lindblad;
mod unitary;

pub use hamiltonian::{build_hamiltonian, ArmScope, ComponentKind, ComponentSpec};
pub use lindblad::{
    evolve_lindblad, evolve_lindblad_report, insertion_loss, jump_operators,
    jump_operators_by_species, thermal_occupation, BathSpec, InsertionLoss, LindbladReport,
};
pub use unitary::{evolve_unitary, Propagator, HERMITIAN_TOL};
