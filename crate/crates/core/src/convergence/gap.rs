use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{SweepError, TransverseMode};
use crate::eigensolve::{matrix_eigenpairs, SolverSettings};
use crate::operators::{AssembledOperator, CsrMatrix};
use crate::C64;

/// Transverse gap diagnostics of `Q(H_ren + k)Q` on `ran Q`.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub epsilon: f64,
    pub k: f64,
    /// `3π²/(4ε²)`.
    pub bound: f64,
    /// Lowest eigenvalue of `H_ren + k` compressed to `ran Q`.
    pub q_min: f64,
    /// Lowest eigenvalue of `H_ren + k` compressed to `ran P₁`.
    pub p_min: f64,
    /// `q_min − p_min`, the lowest transverse excitation.
    pub excitation: f64,
    /// Smallest Rayleigh quotient over the random samples in `ran Q`.
    pub sampled_min: f64,
    pub samples: usize,
    /// `q_min − bound`.
    pub margin: f64,
}

impl GapReport {
    pub fn passed(&self) -> bool {
        self.margin >= -1e-9 * self.bound && self.sampled_min >= self.q_min - 1e-9 * self.q_min.abs().max(1.0)
    }

    pub fn advice(&self) -> Option<String> {
        if self.passed() {
            None
        } else {
            Some(format!(
                "transverse gap margin {:.3e} is negative at ε = {}; refine the surface grid or raise the transverse node count",
                self.margin, self.epsilon
            ))
        }
    }
}

/// `(I ⊗ E)ᴴ S (I ⊗ E)` for an orthonormal transverse basis `E` (columns
/// given as rows of `basis`), on the `s·m + j` dof layout.
pub(crate) fn compress(matrix: &CsrMatrix, m: usize, basis: &[Vec<f64>]) -> CsrMatrix {
    let n_surface = matrix.n / m;
    let r = basis.len();
    let mut t = Vec::new();
    for s in 0..n_surface {
        let mut blocks: BTreeMap<usize, Vec<C64>> = BTreeMap::new();
        for j in 0..m {
            for (c, v) in matrix.row(s * m + j) {
                let (tn, jp) = (c / m, c % m);
                let b = blocks.entry(tn).or_insert_with(|| vec![C64::new(0.0, 0.0); m * m]);
                b[j * m + jp] += v;
            }
        }
        for (tn, b) in blocks {
            // (Eᵀ B E)_{k k'} = Σ_j Σ_j' E_k(j) B_{j j'} E_k'(j').
            let mut be = vec![C64::new(0.0, 0.0); m * r];
            for j in 0..m {
                for (kp, e) in basis.iter().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for jp in 0..m {
                        acc += b[j * m + jp] * e[jp];
                    }
                    be[j * r + kp] = acc;
                }
            }
            for (k, e) in basis.iter().enumerate() {
                for kp in 0..r {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..m {
                        acc += be[j * r + kp] * e[j];
                    }
                    if acc != C64::new(0.0, 0.0) {
                        t.push((s * r + k, tn * r + kp, acc));
                    }
                }
            }
        }
    }
    let mut c = CsrMatrix::from_triplets(n_surface * r, t);
    // Restore exact Hermitian symmetry lost to summation order.
    for i in 0..c.n {
        for p in c.row_ptr[i]..c.row_ptr[i + 1] {
            let j = c.cols[p];
            if j < i {
                let v = c.get(j, i).conj();
                c.vals[p] = v;
            } else if j == i {
                c.vals[p].im = 0.0;
            }
        }
    }
    c
}

/// Check `Q(H_ren + k)Q ≥ 3π²/(4ε²)` on `ran Q` for a renormalized layer
/// operator: exactly via the compression to the transverse modes `k ≥ 2`,
/// and by sampling `samples` seeded random vectors of `ran Q`.
pub fn gap_bound_check(
    op: &AssembledOperator,
    mode: &TransverseMode,
    k: f64,
    samples: usize,
    seed: u64,
) -> Result<GapReport, SweepError> {
    let m = mode.m();
    if op.dofs.transverse_nodes != Some(m) {
        return Err(SweepError::Config("gap check needs a layer operator on the mode's transverse grid".into()));
    }
    let eps = op.meta.epsilon.ok_or_else(|| SweepError::Config("gap check needs an ε-dependent operator".into()))?;
    if !op.meta.renormalized {
        return Err(SweepError::Config("gap check expects a renormalized operator".into()));
    }
    let bound = 3.0 * std::f64::consts::PI.powi(2) / (4.0 * eps * eps);
    let settings = SolverSettings { dense_threshold: 1500, ..SolverSettings::default() };
    let q_basis = mode.basis(2..=m);
    let p_basis = mode.basis(1..=1);
    let cq = compress(&op.matrix, m, &q_basis);
    let cp = compress(&op.matrix, m, &p_basis);
    let q_min = matrix_eigenpairs(&cq, op.lower_bound + bound, 1, &settings)?.values[0] + k;
    let p_min = matrix_eigenpairs(&cp, op.lower_bound, 1, &settings)?.values[0] + k;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_surface = op.dim() / m;
    let mut sampled_min = f64::INFINITY;
    for _ in 0..samples {
        let coef: Vec<C64> =
            (0..cq.n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let mut y = vec![C64::new(0.0, 0.0); op.dim()];
        for s in 0..n_surface {
            for (kk, e) in q_basis.iter().enumerate() {
                let c = coef[s * q_basis.len() + kk];
                for j in 0..m {
                    y[s * m + j] += c * e[j];
                }
            }
        }
        let sy = op.matrix.matvec(&y);
        let num: f64 = y.iter().zip(&sy).map(|(a, b)| (a.conj() * b).re).sum();
        let den: f64 = y.iter().map(|a| a.norm_sqr()).sum();
        sampled_min = sampled_min.min(num / den + k);
    }
    Ok(GapReport {
        epsilon: eps,
        k,
        bound,
        q_min,
        p_min,
        excitation: q_min - p_min,
        sampled_min,
        samples,
        margin: q_min - bound,
    })
}
