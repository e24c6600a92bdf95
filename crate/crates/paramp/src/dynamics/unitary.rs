use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{HilbertLayout, ModeOperator, QuantumState, StateRepr};

/// Relative Hermiticity tolerance for generators.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Block {
    members: Vec<usize>,
    unitary: DMatrix<C64>,
}

#[derive(Debug, Clone)]
struct GroupPropagator {
    local_offsets: Vec<usize>,
    rest_offsets: Vec<usize>,
    blocks: Vec<Block>,
}

/// exp(-i H dt) for a generator H given in rad/s.
///
/// Commuting groups of terms on disjoint modes are exponentiated separately;
/// within a group the truncated matrix splits into connected blocks (one per
/// value of the group's conserved charges), each exponentiated through a
/// Hermitian eigendecomposition.
#[derive(Debug, Clone)]
pub struct Propagator {
    layout: HilbertLayout,
    phase: C64,
    groups: Vec<GroupPropagator>,
}

impl Propagator {
    pub fn new(h: &ModeOperator, dt: f64) -> Result<Self> {
        h.check_hermitian(HERMITIAN_TOL)?;
        let layout = h.layout().clone();
        let (scalar, groups) = h.commuting_groups();
        let phase = (C64::new(0.0, -dt) * scalar.re).exp();
        let groups = groups
            .into_iter()
            .map(|(positions, op)| {
                let (local_offsets, rest_offsets) = layout.split_offsets(&positions);
                GroupPropagator {
                    local_offsets,
                    rest_offsets,
                    blocks: exponentiate_blocks(&op, dt),
                }
            })
            .collect();
        Ok(Propagator {
            layout,
            phase,
            groups,
        })
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    /// Applies the propagator in place to a vector over the layout basis.
    pub fn apply(&self, psi: &mut [C64]) {
        assert_eq!(psi.len(), self.layout.dim());
        let zero = C64::new(0.0, 0.0);
        let mut x = Vec::new();
        for g in &self.groups {
            for &r in &g.rest_offsets {
                for b in &g.blocks {
                    x.clear();
                    x.extend(b.members.iter().map(|&l| psi[r + g.local_offsets[l]]));
                    if x.iter().all(|v| *v == zero) {
                        continue;
                    }
                    let n = x.len();
                    for (i, &l) in b.members.iter().enumerate() {
                        let mut acc = zero;
                        for j in 0..n {
                            acc += b.unitary[(i, j)] * x[j];
                        }
                        psi[r + g.local_offsets[l]] = acc;
                    }
                }
            }
        }
        if self.phase != C64::new(1.0, 0.0) {
            for v in psi.iter_mut() {
                *v *= self.phase;
            }
        }
    }

    pub fn apply_state(&self, state: &QuantumState) -> Result<QuantumState> {
        if state.layout() != &self.layout {
            return Err(Error::LayoutMismatch(
                "state and generator live on different layouts".into(),
            ));
        }
        Ok(match state.repr() {
            StateRepr::Pure(v) => {
                let mut w = v.clone();
                self.apply(w.as_mut_slice());
                QuantumState::from_pure_unchecked(self.layout.clone(), w)
            }
            StateRepr::Mixed(rho) => {
                // U rho U^dag = (U (U rho)^dag)^dag for Hermitian rho
                let mut m = rho.clone();
                for mut col in m.column_iter_mut() {
                    self.apply(col.as_mut_slice());
                }
                let mut m = m.adjoint();
                for mut col in m.column_iter_mut() {
                    self.apply(col.as_mut_slice());
                }
                QuantumState::from_mixed_unchecked(self.layout.clone(), m.adjoint())
            }
        })
    }
}

/// Connected components of the generator's matrix graph, each exponentiated.
fn exponentiate_blocks(op: &ModeOperator, dt: f64) -> Vec<Block> {
    let m = op.to_sparse();
    let dim = m.dim;
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nxt = p[y];
            p[y] = r;
            y = nxt;
        }
        r
    }
    for (r, row) in m.rows.iter().enumerate() {
        for &(c, _) in row {
            let a = find(&mut parent, r);
            let b = find(&mut parent, c);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for i in 0..dim {
        let r = find(&mut parent, i);
        members[r].push(i);
    }
    let mut blocks = Vec::new();
    for mem in members.into_iter().filter(|m| !m.is_empty()) {
        let n = mem.len();
        let mut hb = DMatrix::<C64>::zeros(n, n);
        let mut nonzero = false;
        for (i, &gi) in mem.iter().enumerate() {
            for &(c, v) in &m.rows[gi] {
                let j = mem.binary_search(&c).expect("column inside its block");
                hb[(i, j)] = v;
                nonzero = true;
            }
        }
        if !nonzero {
            continue;
        }
        let unitary = if n == 1 {
            DMatrix::from_element(1, 1, (C64::new(0.0, -dt) * hb[(0, 0)].re).exp())
        } else {
            hermitian_exp(&hb, dt)
        };
        blocks.push(Block {
            members: mem,
            unitary,
        });
    }
    blocks
}

/// exp(-i H dt) for a dense Hermitian H.
pub(crate) fn hermitian_exp(h: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let v = eig.eigenvectors;
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&l| (C64::new(0.0, -dt * l)).exp()),
    );
    let mut vd = v.clone();
    for (j, mut col) in vd.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    vd * v.adjoint()
}

/// Applies exp(-i H dt / hbar) with H given as H/hbar in rad/s.
pub fn evolve_unitary(state: &QuantumState, h: &ModeOperator, dt: f64) -> Result<QuantumState> {
    Propagator::new(h, dt)?.apply_state(state)
}
