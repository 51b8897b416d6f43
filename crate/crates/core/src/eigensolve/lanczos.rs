//! Shift-invert Lanczos with full reorthogonalization and locking.
//!
//! Each restart runs a fresh Krylov sequence for `(S − σ)⁻¹` from a seeded
//! random start orthogonal to the locked vectors. Converged Ritz pairs are
//! locked smallest-first; the search stops once a restart finds nothing below
//! the current `n`-th locked eigenvalue.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{norm, Factorization, Method, RawSpectrum, SolverError, SolverMeta, SolverSettings};
use crate::operators::CsrMatrix;
use crate::C64;

#[derive(Clone, Debug, Default, Serialize)]
pub struct LanczosStats {
    pub iterations: usize,
    pub restarts: usize,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn orthogonalize(w: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            for (x, y) in w.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
}

struct Ritz {
    lambda: f64,
    vector: Vec<C64>,
    residual: f64,
}

fn converged(r: &Ritz, tol: f64, floor: f64) -> bool {
    r.residual <= (tol * r.lambda.abs().max(1.0)).max(floor)
}

/// Ritz pairs of the current Krylov basis, ordered by ascending λ.
fn ritz_pairs(matrix: &CsrMatrix, q: &[Vec<C64>], alpha: &[f64], beta: &[f64], take: usize) -> Vec<Ritz> {
    let k = alpha.len();
    let t = faer::Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let e = t.self_adjoint_eigen(faer::Side::Lower).expect("tridiagonal eigen");
    let theta = e.S().column_vector();
    let s = e.U();
    let mut order: Vec<usize> = (0..k).collect();
    // Largest θ of the inverse corresponds to the smallest λ.
    order.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]));
    let n = matrix.n;
    order
        .into_iter()
        .take(take)
        .filter(|&i| theta[i] > 0.0)
        .map(|i| {
            let mut y = vec![C64::new(0.0, 0.0); n];
            for (j, qj) in q.iter().enumerate().take(k) {
                let c = s[(j, i)];
                for (a, b) in y.iter_mut().zip(qj) {
                    *a += b * c;
                }
            }
            let ny = norm(&y);
            y.iter_mut().for_each(|x| *x /= ny);
            let sy = matrix.matvec(&y);
            let lambda = dot(&y, &sy).re;
            let residual = sy.iter().zip(&y).map(|(a, b)| (a - b * lambda).norm_sqr()).sum::<f64>().sqrt();
            Ritz { lambda, vector: y, residual }
        })
        .collect()
}

pub(crate) fn shift_invert(
    matrix: &CsrMatrix,
    factor: &Factorization,
    sigma: f64,
    n_want: usize,
    settings: &SolverSettings,
) -> Result<RawSpectrum, SolverError> {
    let n = matrix.n;
    let tol = settings.tol;
    let floor = super::rounding_floor(matrix);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut locked: Vec<Ritz> = Vec::new();
    let mut stats = LanczosStats::default();
    let mut best_unconverged: Vec<f64> = Vec::new();
    let mut quiet_restarts = 0;

    while stats.restarts < settings.max_restarts {
        stats.restarts += 1;
        let basis_locked: Vec<Vec<C64>> = locked.iter().map(|r| r.vector.clone()).collect();
        let free = n - locked.len();
        if free == 0 {
            break;
        }
        let kmax = settings.max_krylov.min(free);
        let want = n_want.saturating_sub(locked.len()).max(1);

        let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        orthogonalize(&mut v, &basis_locked);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);

        let mut q: Vec<Vec<C64>> = vec![v];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let pairs = loop {
            let j = alpha.len();
            let mut w = factor.solve(&q[j]);
            stats.iterations += 1;
            let a = dot(&q[j], &w).re;
            alpha.push(a);
            orthogonalize(&mut w, &q);
            orthogonalize(&mut w, &basis_locked);
            let b = norm(&w);
            let k = alpha.len();
            let breakdown = b <= 1e-14 * a.abs().max(f64::MIN_POSITIVE);
            let check = breakdown || k == kmax || (k >= want + 2 && k % 5 == 0);
            if check {
                let pairs = ritz_pairs(matrix, &q, &alpha, &beta, want + 2);
                let top_ok = pairs.len() >= want.min(k) && pairs.iter().take(want).all(|r| converged(r, tol, floor));
                if top_ok || breakdown || k == kmax {
                    break pairs;
                }
            }
            beta.push(b);
            q.push(w.into_iter().map(|x| x / b).collect());
        };

        let threshold = if locked.len() >= n_want {
            let mut l: Vec<f64> = locked.iter().map(|r| r.lambda).collect();
            l.sort_by(f64::total_cmp);
            Some(l[n_want - 1])
        } else {
            None
        };
        let mut new_below = false;
        let mut locked_any = false;
        best_unconverged.clear();
        for r in pairs {
            if !converged(&r, tol, floor) {
                best_unconverged.push(r.residual);
                break;
            }
            if threshold.is_none_or(|t| r.lambda < t - tol * t.abs().max(1.0)) {
                new_below = true;
            }
            locked.push(r);
            locked_any = true;
        }
        if locked.len() >= n_want && !new_below {
            break;
        }
        if !locked_any {
            quiet_restarts += 1;
            if quiet_restarts >= 3 {
                break;
            }
        } else {
            quiet_restarts = 0;
        }
    }

    locked.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    if locked.len() < n_want {
        let mut residuals: Vec<f64> = locked.iter().map(|r| r.residual).collect();
        residuals.extend(best_unconverged);
        return Err(SolverError::NoConvergence { iterations: stats.iterations, residuals });
    }
    locked.truncate(n_want);
    Ok(RawSpectrum {
        values: locked.iter().map(|r| r.lambda).collect(),
        residuals: locked.iter().map(|r| r.residual).collect(),
        vectors: locked.into_iter().map(|r| r.vector).collect(),
        meta: SolverMeta {
            method: Method::ShiftInvertLanczos,
            iterations: stats.iterations,
            restarts: stats.restarts,
            shift: Some(sigma),
            tolerance: tol,
        },
    })
}
