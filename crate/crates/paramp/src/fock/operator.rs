use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::layout::{HilbertLayout, Mode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ladder {
    Raise,
    Lower,
}

impl Ladder {
    fn dagger(self) -> Ladder {
        match self {
            Ladder::Raise => Ladder::Lower,
            Ladder::Lower => Ladder::Raise,
        }
    }
}

/// Product of ladder operators on one mode, leftmost operator first.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    position: usize,
    word: Vec<Ladder>,
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coeff: C64,
    factors: Vec<Factor>,
}

impl Term {
    /// Applies the term to one basis state; `None` when it maps to zero.
    #[inline]
    fn act(&self, layout: &HilbertLayout, index: usize) -> Option<(usize, f64)> {
        let cutoff = layout.cutoff();
        let mut target = index;
        let mut amp = 1.0;
        for f in &self.factors {
            let n0 = layout.occupation(index, f.position);
            let mut n = n0;
            for op in f.word.iter().rev() {
                match op {
                    Ladder::Lower => {
                        if n == 0 {
                            return None;
                        }
                        amp *= (n as f64).sqrt();
                        n -= 1;
                    }
                    Ladder::Raise => {
                        if n + 1 >= cutoff {
                            return None;
                        }
                        n += 1;
                        amp *= (n as f64).sqrt();
                    }
                }
            }
            let s = layout.stride(f.position);
            target = target + n * s - n0 * s;
        }
        Some((target, amp))
    }

    fn adjoint(&self) -> Term {
        Term {
            coeff: self.coeff.conj(),
            factors: self
                .factors
                .iter()
                .map(|f| Factor {
                    position: f.position,
                    word: f.word.iter().rev().map(|l| l.dagger()).collect(),
                })
                .collect(),
        }
    }

    fn product(&self, other: &Term) -> Term {
        let mut factors = self.factors.clone();
        for g in &other.factors {
            match factors.iter_mut().find(|f| f.position == g.position) {
                Some(f) => f.word.extend_from_slice(&g.word),
                None => factors.push(g.clone()),
            }
        }
        factors.sort_by_key(|f| f.position);
        Term {
            coeff: self.coeff * other.coeff,
            factors,
        }
    }
}

/// Operator on a truncated Fock space, stored as a sum of ladder-operator
/// words. Matrix elements are those of the truncated matrices: a raising
/// step out of level N-1 gives zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    layout: HilbertLayout,
    terms: Vec<Term>,
}

impl ModeOperator {
    pub fn zero(layout: &HilbertLayout) -> Self {
        ModeOperator {
            layout: layout.clone(),
            terms: Vec::new(),
        }
    }

    pub fn identity(layout: &HilbertLayout) -> Self {
        ModeOperator {
            layout: layout.clone(),
            terms: vec![Term {
                coeff: C64::new(1.0, 0.0),
                factors: Vec::new(),
            }],
        }
    }

    fn ladder(layout: &HilbertLayout, mode: Mode, op: Ladder) -> Result<Self> {
        let position = layout.position(mode)?;
        Ok(ModeOperator {
            layout: layout.clone(),
            terms: vec![Term {
                coeff: C64::new(1.0, 0.0),
                factors: vec![Factor {
                    position,
                    word: vec![op],
                }],
            }],
        })
    }

    pub fn annihilation(layout: &HilbertLayout, mode: Mode) -> Result<Self> {
        Self::ladder(layout, mode, Ladder::Lower)
    }

    pub fn creation(layout: &HilbertLayout, mode: Mode) -> Result<Self> {
        Self::ladder(layout, mode, Ladder::Raise)
    }

    pub fn number(layout: &HilbertLayout, mode: Mode) -> Result<Self> {
        Ok(Self::creation(layout, mode)? * Self::annihilation(layout, mode)?)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == C64::new(0.0, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        ModeOperator {
            layout: self.layout.clone(),
            terms: self.terms.iter().map(Term::adjoint).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        ModeOperator {
            layout: self.layout.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * c,
                    factors: t.factors.clone(),
                })
                .collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// Positions of the modes the operator acts on non-trivially.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .terms
            .iter()
            .flat_map(|t| t.factors.iter().map(|f| f.position))
            .collect();
        s.sort();
        s.dedup();
        s
    }

    /// Splits the operator into sums acting on disjoint mode sets; summands
    /// commute. Returns the mode positions of each group and the group's
    /// operator expressed on the sublayout of those modes. Scalar terms are
    /// returned separately.
    pub(crate) fn commuting_groups(&self) -> (C64, Vec<(Vec<usize>, ModeOperator)>) {
        let m = self.layout.num_modes();
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut scalar = C64::new(0.0, 0.0);
        for t in &self.terms {
            if t.factors.is_empty() {
                scalar += t.coeff;
                continue;
            }
            let a = find(&mut parent, t.factors[0].position);
            for f in &t.factors[1..] {
                let b = find(&mut parent, f.position);
                parent[b] = a;
            }
        }
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for pos in self.support() {
            let root = find(&mut parent, pos);
            match groups.iter_mut().find(|g| g.0 == root) {
                Some(g) => g.1.push(pos),
                None => groups.push((root, vec![pos])),
            }
        }
        let out = groups
            .into_iter()
            .map(|(root, positions)| {
                let sub_modes: Vec<Mode> =
                    positions.iter().map(|&p| self.layout.modes()[p]).collect();
                let sub_layout = HilbertLayout::new(sub_modes, self.layout.cutoff())
                    .expect("sublayout of a valid layout");
                let terms = self
                    .terms
                    .iter()
                    .filter(|t| {
                        !t.factors.is_empty() && find(&mut parent, t.factors[0].position) == root
                    })
                    .map(|t| Term {
                        coeff: t.coeff,
                        factors: t
                            .factors
                            .iter()
                            .map(|f| Factor {
                                position: positions.iter().position(|&p| p == f.position).unwrap(),
                                word: f.word.clone(),
                            })
                            .collect(),
                    })
                    .collect();
                (
                    positions,
                    ModeOperator {
                        layout: sub_layout,
                        terms,
                    },
                )
            })
            .collect();
        (scalar, out)
    }

    /// Matrix in row-list sparse form, duplicates summed.
    pub fn to_sparse(&self) -> SparseMatrix {
        let dim = self.layout.dim();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for col in 0..dim {
            for t in &self.terms {
                if let Some((row, amp)) = t.act(&self.layout, col) {
                    let v = t.coeff * amp;
                    let r = &mut rows[row];
                    match r.iter_mut().find(|e| e.0 == col) {
                        Some(e) => e.1 += v,
                        None => r.push((col, v)),
                    }
                }
            }
        }
        for r in rows.iter_mut() {
            r.retain(|e| e.1 != C64::new(0.0, 0.0));
            r.sort_by_key(|e| e.0);
        }
        SparseMatrix { dim, rows }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.to_sparse().to_dense()
    }

    /// O|v> for a vector over the layout basis.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (col, &x) in v.iter().enumerate() {
            if x == C64::new(0.0, 0.0) {
                continue;
            }
            for t in &self.terms {
                if let Some((row, amp)) = t.act(&self.layout, col) {
                    out[row] += t.coeff * amp * x;
                }
            }
        }
        out
    }

    /// Largest |O_ij - conj(O_ji)| relative to the largest |O_ij|, evaluated
    /// group by group so that large layouts stay cheap.
    pub fn hermitian_defect(&self) -> f64 {
        let (scalar, groups) = self.commuting_groups();
        let mut worst = if scalar.norm() == 0.0 {
            0.0
        } else {
            scalar.im.abs() / scalar.norm()
        };
        for (_, op) in groups {
            let m = op.to_sparse();
            let scale = m.max_abs().max(1e-300);
            let adj = m.adjoint();
            let mut d: f64 = 0.0;
            for (a, b) in m.rows.iter().zip(adj.rows.iter()) {
                let mut i = 0;
                let mut j = 0;
                while i < a.len() || j < b.len() {
                    let (ca, va) = a
                        .get(i)
                        .copied()
                        .unwrap_or((usize::MAX, C64::new(0.0, 0.0)));
                    let (cb, vb) = b
                        .get(j)
                        .copied()
                        .unwrap_or((usize::MAX, C64::new(0.0, 0.0)));
                    if ca == cb {
                        d = d.max((va - vb).norm());
                        i += 1;
                        j += 1;
                    } else if ca < cb {
                        d = d.max(va.norm());
                        i += 1;
                    } else {
                        d = d.max(vb.norm());
                        j += 1;
                    }
                }
            }
            worst = worst.max(d / scale);
        }
        worst
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        let d = self.hermitian_defect();
        if d > tol {
            Err(Error::NonHermitian(d))
        } else {
            Ok(())
        }
    }

    fn assert_same_layout(&self, other: &ModeOperator) {
        assert_eq!(
            self.layout, other.layout,
            "operators on different layouts cannot be combined"
        );
    }
}

impl Add for ModeOperator {
    type Output = ModeOperator;
    fn add(mut self, rhs: ModeOperator) -> ModeOperator {
        self.assert_same_layout(&rhs);
        self.terms.extend(rhs.terms);
        self
    }
}

impl Sub for ModeOperator {
    type Output = ModeOperator;
    fn sub(self, rhs: ModeOperator) -> ModeOperator {
        self + (-rhs)
    }
}

impl Neg for ModeOperator {
    type Output = ModeOperator;
    fn neg(self) -> ModeOperator {
        self.scale_real(-1.0)
    }
}

impl Mul for ModeOperator {
    type Output = ModeOperator;
    fn mul(self, rhs: ModeOperator) -> ModeOperator {
        self.assert_same_layout(&rhs);
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(a.product(b));
            }
        }
        ModeOperator {
            layout: self.layout,
            terms,
        }
    }
}

impl Mul<C64> for ModeOperator {
    type Output = ModeOperator;
    fn mul(self, c: C64) -> ModeOperator {
        self.scale(c)
    }
}

impl Mul<f64> for ModeOperator {
    type Output = ModeOperator;
    fn mul(self, c: f64) -> ModeOperator {
        self.scale_real(c)
    }
}

/// Row-list sparse matrix; each row holds (column, value) pairs sorted by column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<(usize, C64)>>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|e| e.1.norm()))
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> SparseMatrix {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.dim];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                rows[c].push((r, v.conj()));
            }
        }
        SparseMatrix {
            dim: self.dim,
            rows,
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, x)| x * v[c]).sum())
            .collect()
    }

    /// Product A*B of two sparse matrices.
    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        let mut rows = Vec::with_capacity(self.dim);
        for row in &self.rows {
            let mut acc: Vec<(usize, C64)> = Vec::new();
            for &(k, a) in row {
                for &(c, b) in &other.rows[k] {
                    match acc.iter_mut().find(|e| e.0 == c) {
                        Some(e) => e.1 += a * b,
                        None => acc.push((c, a * b)),
                    }
                }
            }
            acc.retain(|e| e.1 != C64::new(0.0, 0.0));
            acc.sort_by_key(|e| e.0);
            rows.push(acc);
        }
        SparseMatrix {
            dim: self.dim,
            rows,
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] += v;
            }
        }
        m
    }
}
