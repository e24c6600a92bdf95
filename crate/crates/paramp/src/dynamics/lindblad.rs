use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::unitary::HERMITIAN_TOL;
use crate::error::{Error, Result};
use crate::fock::{HilbertLayout, ModeOperator, QuantumState, SparseMatrix, Species};
use crate::{HBAR, K_B};

/// Bose occupation 1/(exp(hbar w / kT) - 1); zero at T = 0.
pub fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * temperature);
    1.0 / x.exp_m1()
}

/// Thermal bath coupled to one mode family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    /// Loss rate, 1/s.
    pub gamma: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Mode angular frequency, rad/s.
    pub omega: f64,
    pub n_th: f64,
}

impl BathSpec {
    pub fn new(gamma: f64, temperature: f64, omega: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !(temperature >= 0.0) || !(omega > 0.0) {
            return Err(Error::Config(format!(
                "bath needs gamma >= 0, T >= 0, omega > 0 (got {gamma}, {temperature}, {omega})"
            )));
        }
        Ok(BathSpec {
            gamma,
            temperature,
            omega,
            n_th: thermal_occupation(omega, temperature),
        })
    }
}

/// Per mode: sqrt(gamma (1 + n_th)) a and sqrt(gamma n_th) a^dag.
pub fn jump_operators(layout: &HilbertLayout, bath: &BathSpec) -> Vec<ModeOperator> {
    jump_operators_by_species(layout, bath, bath)
}

/// Jump operators with separate baths for signal and idler modes.
pub fn jump_operators_by_species(
    layout: &HilbertLayout,
    signal: &BathSpec,
    idler: &BathSpec,
) -> Vec<ModeOperator> {
    let mut out = Vec::new();
    for m in layout.modes() {
        let bath = match m.species {
            Species::Signal => signal,
            Species::Idler => idler,
        };
        let a = ModeOperator::annihilation(layout, *m).expect("mode from layout");
        out.push(a.scale_real((bath.gamma * (1.0 + bath.n_th)).sqrt()));
        out.push(a.adjoint().scale_real((bath.gamma * bath.n_th).sqrt()));
    }
    out
}

/// Insertion loss of a lossy element in dB, exact and in the 4 gamma dt form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertionLoss {
    pub exact_db: f64,
    pub approx_db: f64,
}

pub fn insertion_loss(gamma: f64, dt: f64, n_th: f64, n_in: f64) -> Result<InsertionLoss> {
    if !(n_in > 0.0) {
        return Err(Error::Config("insertion loss needs n_in > 0".into()));
    }
    let r = n_th / n_in;
    let e = (-gamma * dt).exp();
    Ok(InsertionLoss {
        exact_db: -10.0 * ((1.0 - r) * e + r).log10(),
        approx_db: 4.0 * gamma * dt,
    })
}

/// Diagnostics of one Lindblad integration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LindbladReport {
    pub steps: usize,
    pub rejected: usize,
    /// Largest |Tr rho - 1| seen over accepted steps.
    pub trace_drift: f64,
    /// Smallest eigenvalue of the final density matrix.
    pub min_eigenvalue: f64,
    /// Number of charge blocks used for rho (1 = dense).
    pub blocks: usize,
}

/// Rows of an operator restricted to one (target block <- source block) pair.
#[derive(Debug, Clone)]
struct BlockOp {
    target: usize,
    source: usize,
    /// Per target-local row: (source-local column, value).
    rows: Vec<Vec<(usize, C64)>>,
}

/// Block-diagonal density matrix layout over conserved-charge sectors.
#[derive(Debug, Clone)]
struct Sectors {
    /// Global basis indices per block.
    members: Vec<Vec<usize>>,
    /// (block, local index) per global index.
    locate: Vec<(usize, usize)>,
    /// Offset of each row-major block inside the packed vector.
    offsets: Vec<usize>,
    len: usize,
}

impl Sectors {
    fn new(charges: &[i64]) -> Self {
        let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &q) in charges.iter().enumerate() {
            map.entry(q).or_default().push(i);
        }
        let members: Vec<Vec<usize>> = map.into_values().collect();
        let mut locate = vec![(0, 0); charges.len()];
        let mut offsets = Vec::with_capacity(members.len());
        let mut len = 0;
        for (b, m) in members.iter().enumerate() {
            for (l, &g) in m.iter().enumerate() {
                locate[g] = (b, l);
            }
            offsets.push(len);
            len += m.len() * m.len();
        }
        Sectors {
            members,
            locate,
            offsets,
            len,
        }
    }

    fn size(&self, b: usize) -> usize {
        self.members[b].len()
    }

    /// Splits a charge-respecting sparse matrix into block pieces.
    fn split(&self, m: &SparseMatrix) -> Vec<BlockOp> {
        let mut pieces: BTreeMap<(usize, usize), Vec<Vec<(usize, C64)>>> = BTreeMap::new();
        for (r, row) in m.rows.iter().enumerate() {
            let (tb, tl) = self.locate[r];
            for &(c, v) in row {
                let (sb, sl) = self.locate[c];
                let rows = pieces
                    .entry((tb, sb))
                    .or_insert_with(|| vec![Vec::new(); self.size(tb)]);
                rows[tl].push((sl, v));
            }
        }
        pieces
            .into_iter()
            .map(|((target, source), rows)| BlockOp {
                target,
                source,
                rows,
            })
            .collect()
    }

    fn pack(&self, rho: &DMatrix<C64>) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len];
        for (b, mem) in self.members.iter().enumerate() {
            let n = mem.len();
            for (i, &gi) in mem.iter().enumerate() {
                for (j, &gj) in mem.iter().enumerate() {
                    out[self.offsets[b] + i * n + j] = rho[(gi, gj)];
                }
            }
        }
        out
    }

    fn unpack(&self, packed: &[C64], dim: usize) -> DMatrix<C64> {
        let mut rho = DMatrix::zeros(dim, dim);
        for (b, mem) in self.members.iter().enumerate() {
            let n = mem.len();
            for (i, &gi) in mem.iter().enumerate() {
                for (j, &gj) in mem.iter().enumerate() {
                    rho[(gi, gj)] = packed[self.offsets[b] + i * n + j];
                }
            }
        }
        rho
    }

    fn trace(&self, packed: &[C64]) -> f64 {
        let mut t = 0.0;
        for b in 0..self.members.len() {
            let n = self.size(b);
            for i in 0..n {
                t += packed[self.offsets[b] + i * n + i].re;
            }
        }
        t
    }
}

/// Lindblad right-hand side d rho/ds = K rho + rho K^dag + sum_J J rho J^dag with
/// K = -i H - 1/2 sum J^dag J, all in units of the segment duration.
struct Generator {
    sectors: Sectors,
    k: Vec<BlockOp>,
    jumps: Vec<Vec<BlockOp>>,
}

impl Generator {
    fn rhs(&self, rho: &[C64], out: &mut [C64], scratch: &mut Vec<C64>) {
        let zero = C64::new(0.0, 0.0);
        out.iter_mut().for_each(|x| *x = zero);
        let s = &self.sectors;
        // K rho + rho K^dag; both products are formed so that the map stays exact
        // for inputs whose Hermiticity has been perturbed by rounding
        for op in &self.k {
            debug_assert_eq!(op.target, op.source);
            let b = op.target;
            let n = s.size(b);
            let base = s.offsets[b];
            scratch.clear();
            scratch.resize(n * n, zero);
            for (i, row) in op.rows.iter().enumerate() {
                let dst = &mut scratch[i * n..(i + 1) * n];
                for &(l, v) in row {
                    let src = &rho[base + l * n..base + (l + 1) * n];
                    for (d, x) in dst.iter_mut().zip(src) {
                        *d += v * x;
                    }
                }
            }
            for i in 0..n {
                let rrow = &rho[base + i * n..base + (i + 1) * n];
                for (j, row) in op.rows.iter().enumerate() {
                    let mut acc = scratch[i * n + j];
                    for &(l, v) in row {
                        acc += rrow[l] * v.conj();
                    }
                    out[base + i * n + j] += acc;
                }
            }
        }
        // J rho J^dag, block by block
        let mut t: Vec<C64> = Vec::new();
        for pieces in &self.jumps {
            for op in pieces {
                let (tb, sb) = (op.target, op.source);
                let nt = s.size(tb);
                let ns = s.size(sb);
                let sbase = s.offsets[sb];
                let tbase = s.offsets[tb];
                // T = J rho_s  (nt x ns)
                t.clear();
                t.resize(nt * ns, zero);
                for (i, row) in op.rows.iter().enumerate() {
                    let dst = &mut t[i * ns..(i + 1) * ns];
                    for &(l, v) in row {
                        let src = &rho[sbase + l * ns..sbase + (l + 1) * ns];
                        for (d, x) in dst.iter_mut().zip(src) {
                            *d += v * x;
                        }
                    }
                }
                // out_t += T J^dag, (T J^dag)[i,k] = sum_l T[i,l] conj(J[k,l])
                for i in 0..nt {
                    let trow = &t[i * ns..(i + 1) * ns];
                    for (k, row) in op.rows.iter().enumerate() {
                        let mut acc = zero;
                        for &(l, v) in row {
                            acc += trow[l] * v.conj();
                        }
                        out[tbase + i * nt + k] += acc;
                    }
                }
            }
        }
    }
}

fn detect_charges(layout: &HilbertLayout, ops: &[&SparseMatrix], rho: &DMatrix<C64>) -> Vec<i64> {
    let charges: Vec<i64> = (0..layout.dim()).map(|i| layout.charge(i)).collect();
    let fixed_shift = |m: &SparseMatrix| -> bool {
        let mut shift: Option<i64> = None;
        for (r, row) in m.rows.iter().enumerate() {
            for &(c, _) in row {
                let d = charges[r] - charges[c];
                match shift {
                    None => shift = Some(d),
                    Some(s) if s != d => return false,
                    _ => {}
                }
            }
        }
        true
    };
    let conserved = ops.iter().all(|m| fixed_shift(m));
    let diagonal_start = (0..rho.nrows())
        .all(|i| (0..rho.ncols()).all(|j| charges[i] == charges[j] || rho[(i, j)].norm() < 1e-15));
    if conserved && diagonal_start {
        charges
    } else {
        vec![0; layout.dim()]
    }
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates the master equation over `dt` seconds with generator `h`
/// (H/hbar in rad/s) and jump operators in sqrt(1/s).
///
/// Dormand-Prince 5(4) with absolute per-entry error control `tol`.
pub fn evolve_lindblad_report(
    state: &QuantumState,
    h: &ModeOperator,
    jumps: &[ModeOperator],
    dt: f64,
    tol: f64,
) -> Result<(QuantumState, LindbladReport)> {
    if !(tol > 0.0) {
        return Err(Error::Config("Lindblad tolerance must be positive".into()));
    }
    if !(dt >= 0.0) {
        return Err(Error::Config("negative evolution time".into()));
    }
    let layout = state.layout().clone();
    if h.layout() != &layout || jumps.iter().any(|j| j.layout() != &layout) {
        return Err(Error::LayoutMismatch(
            "generator, jumps and state must share a layout".into(),
        ));
    }
    h.check_hermitian(HERMITIAN_TOL)?;
    let rho0 = state.density_matrix();
    let dim = layout.dim();

    // dimensionless time s = t/dt
    let hs = h.to_sparse();
    let js: Vec<SparseMatrix> = jumps.iter().map(|j| j.to_sparse()).collect();
    let mut all_ops: Vec<&SparseMatrix> = vec![&hs];
    all_ops.extend(js.iter());
    let sectors = Sectors::new(&detect_charges(&layout, &all_ops, &rho0));

    let mut k = hs.clone();
    for row in k.rows.iter_mut() {
        for e in row.iter_mut() {
            e.1 *= C64::new(0.0, -dt);
        }
    }
    let mut decay: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
    for j in &js {
        let jdj = j.adjoint().matmul(j);
        for (r, row) in jdj.rows.iter().enumerate() {
            for &(c, v) in row {
                let v = v * (-0.5 * dt);
                match decay[r].iter_mut().find(|e| e.0 == c) {
                    Some(e) => e.1 += v,
                    None => decay[r].push((c, v)),
                }
            }
        }
    }
    for (r, extra) in decay.into_iter().enumerate() {
        for (c, v) in extra {
            match k.rows[r].iter_mut().find(|e| e.0 == c) {
                Some(e) => e.1 += v,
                None => k.rows[r].push((c, v)),
            }
        }
    }
    let jumps_scaled: Vec<SparseMatrix> = js
        .iter()
        .map(|j| {
            let mut j = j.clone();
            let f = dt.sqrt();
            for row in j.rows.iter_mut() {
                for e in row.iter_mut() {
                    e.1 *= f;
                }
            }
            j
        })
        .collect();
    let gen = Generator {
        k: sectors.split(&k),
        jumps: jumps_scaled.iter().map(|j| sectors.split(j)).collect(),
        sectors,
    };

    let mut y = gen.sectors.pack(&rho0);
    let n = y.len();
    let mut report = LindbladReport {
        blocks: gen.sectors.members.len(),
        ..Default::default()
    };
    let mut stages: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![C64::new(0.0, 0.0); n];
    let mut scratch = Vec::new();
    let mut s = 0.0f64;
    let mut step = 0.01f64;
    let mut have_first = false;
    while s < 1.0 && dt > 0.0 {
        let hstep = step.min(1.0 - s);
        if !have_first {
            gen.rhs(&y, &mut stages[0], &mut scratch);
            have_first = true;
        }
        for st in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (p, a) in DP_A[st][..st].iter().enumerate() {
                    if *a != 0.0 {
                        acc += stages[p][i] * (hstep * a);
                    }
                }
                tmp[i] = acc;
            }
            gen.rhs(&tmp, &mut stages[st], &mut scratch);
        }
        // tmp holds the 5th order solution (stage 7 input), stages[6] = f(s+h, y5)
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = C64::new(0.0, 0.0);
            for (p, c) in DP_E.iter().enumerate() {
                if *c != 0.0 {
                    e += stages[p][i] * c;
                }
            }
            err = err.max((e * hstep).norm());
        }
        if err <= tol || hstep <= 1e-14 {
            if hstep <= 1e-14 && err > tol {
                return Err(Error::StepUnderflow {
                    time: s * dt,
                    step: hstep * dt,
                    error: err,
                });
            }
            s += hstep;
            std::mem::swap(&mut y, &mut tmp);
            let f7 = std::mem::take(&mut stages[6]);
            stages[6] = std::mem::replace(&mut stages[0], f7);
            report.steps += 1;
            report.trace_drift = report.trace_drift.max((gen.sectors.trace(&y) - 1.0).abs());
        } else {
            report.rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        };
        step = hstep * factor;
        if step < 1e-14 {
            return Err(Error::StepUnderflow {
                time: s * dt,
                step: step * dt,
                error: err,
            });
        }
    }

    let mut rho = gen.sectors.unpack(&y, dim);
    let herm = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    rho = herm;
    report.min_eigenvalue = min_eigenvalue(&gen.sectors, &y);
    Ok((QuantumState::from_mixed_unchecked(layout, rho), report))
}

fn min_eigenvalue(sectors: &Sectors, packed: &[C64]) -> f64 {
    let mut lo = f64::INFINITY;
    for b in 0..sectors.members.len() {
        let n = sectors.size(b);
        let base = sectors.offsets[b];
        let m = DMatrix::from_fn(n, n, |i, j| {
            0.5 * (packed[base + i * n + j] + packed[base + j * n + i].conj())
        });
        let e = m.symmetric_eigenvalues();
        lo = lo.min(e.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    lo
}

/// As [`evolve_lindblad_report`], discarding the diagnostics.
pub fn evolve_lindblad(
    state: &QuantumState,
    h: &ModeOperator,
    jumps: &[ModeOperator],
    dt: f64,
    tol: f64,
) -> Result<QuantumState> {
    evolve_lindblad_report(state, h, jumps, dt, tol).map(|(s, _)| s)
}
