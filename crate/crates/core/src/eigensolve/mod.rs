//! Lowest eigenpairs, resolvents and operator-norm estimates for
//! [`AssembledOperator`]s.

mod lanczos;

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::operators::{weighted_inner, AssembledOperator, CsrMatrix};
use crate::C64;

pub use lanczos::LanczosStats;

/// Default dof count below which eigenpairs come from a dense solve.
pub const DEFAULT_DENSE_THRESHOLD: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("requested {requested} eigenpairs of a {dim}-dimensional operator")]
    BadCount { requested: usize, dim: usize },
    #[error("factorization failed at every shift tried (last σ = {last_shift})")]
    Factorization { last_shift: f64 },
    #[error("no convergence within {iterations} iterations; best residuals {residuals:?}")]
    NoConvergence { iterations: usize, residuals: Vec<f64> },
    #[error("-k = {k_neg} is not in the resolvent set; nearest eigenvalue {nearest}")]
    SingularShift { k_neg: f64, nearest: f64 },
    #[error("dense eigensolver failed")]
    Dense,
    #[error("vector length {got} does not match operator dimension {dim}")]
    Length { got: usize, dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSettings {
    /// Residual tolerance: `‖Sy − λy‖ ≤ max(tol · max(1, |λ|), 64 ε_mach ‖S‖_∞)`;
    /// the second term is the rounding floor of the matrix.
    pub tol: f64,
    pub dense_threshold: usize,
    pub seed: u64,
    /// Cap on Lanczos steps per restart.
    pub max_krylov: usize,
    /// Cap on restarts.
    pub max_restarts: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { tol: 1e-9, dense_threshold: DEFAULT_DENSE_THRESHOLD, seed: 42, max_krylov: 120, max_restarts: 40 }
    }
}

impl SolverSettings {
    /// Defaults, with the dense threshold taken from
    /// `THINLAYER_DENSE_THRESHOLD` when set.
    pub fn from_env() -> Self {
        let mut s = Self::default();
        if let Some(v) = std::env::var("THINLAYER_DENSE_THRESHOLD").ok().and_then(|v| v.trim().parse().ok()) {
            s.dense_threshold = v;
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dense,
    ShiftInvertLanczos,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverMeta {
    pub method: Method,
    pub iterations: usize,
    pub restarts: usize,
    pub shift: Option<f64>,
    pub tolerance: f64,
}

/// Ascending eigenvalues with nodal eigenvectors of unit weighted norm.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<C64>>,
    /// `‖Hx − λx‖_W`.
    pub residuals: Vec<f64>,
    pub meta: SolverMeta,
}

/// Sparse `LLᴴ` factorization of `S + shift·I`.
pub struct Factorization {
    llt: faer::sparse::linalg::solvers::Llt<usize, C64>,
    n: usize,
    pub shift: f64,
}

impl Factorization {
    pub fn new(matrix: &CsrMatrix, shift: f64) -> Option<Self> {
        let m = matrix.shifted(shift).to_faer();
        let llt = m.sp_cholesky(faer::Side::Lower).ok()?;
        Some(Factorization { llt, n: matrix.n, shift })
    }

    /// `(S + shift)⁻¹ b`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut rhs = faer::Mat::<C64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }
}

/// Eigen-decomposition of the Hermitian matrix `S` (Euclidean vectors).
pub(crate) struct RawSpectrum {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub meta: SolverMeta,
}

/// `64 ε_mach ‖S‖_∞`, below which residuals are not resolvable.
pub fn rounding_floor(matrix: &CsrMatrix) -> f64 {
    let inf = (0..matrix.n).map(|i| matrix.row(i).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max);
    64.0 * f64::EPSILON * inf
}

pub(crate) fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn residual(matrix: &CsrMatrix, lambda: f64, y: &[C64]) -> f64 {
    let sy = matrix.matvec(y);
    sy.iter().zip(y).map(|(a, b)| (a - b * lambda).norm_sqr()).sum::<f64>().sqrt()
}

fn dense_eigenpairs(matrix: &CsrMatrix, n_want: usize, tol: f64) -> Result<RawSpectrum, SolverError> {
    let dense = matrix.to_dense();
    let e = dense.self_adjoint_eigen(faer::Side::Lower).map_err(|_| SolverError::Dense)?;
    let s = e.S().column_vector();
    let u = e.U();
    let n = matrix.n;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let mut values = Vec::with_capacity(n_want);
    let mut vectors = Vec::with_capacity(n_want);
    let mut residuals = Vec::with_capacity(n_want);
    for &k in order.iter().take(n_want) {
        let y: Vec<C64> = (0..n).map(|i| u[(i, k)]).collect();
        let lam = s[k].re;
        residuals.push(residual(matrix, lam, &y));
        values.push(lam);
        vectors.push(y);
    }
    Ok(RawSpectrum {
        values,
        vectors,
        residuals,
        meta: SolverMeta { method: Method::Dense, iterations: 0, restarts: 0, shift: None, tolerance: tol },
    })
}

/// Lowest `n_want` eigenpairs of a Hermitian matrix given a lower bound on
/// its spectrum.
pub(crate) fn matrix_eigenpairs(
    matrix: &CsrMatrix,
    lower_bound: f64,
    n_want: usize,
    settings: &SolverSettings,
) -> Result<RawSpectrum, SolverError> {
    let n = matrix.n;
    if n_want == 0 || n_want > n {
        return Err(SolverError::BadCount { requested: n_want, dim: n });
    }
    if n <= settings.dense_threshold {
        return dense_eigenpairs(matrix, n_want, settings.tol);
    }
    let bound = if lower_bound.is_finite() { lower_bound } else { matrix.gershgorin_lower() };
    let mut sigma = bound - 1.0;
    let delta = 1.0f64.max(0.01 * sigma.abs());
    let mut attempt = 0;
    let factor = loop {
        if let Some(f) = Factorization::new(matrix, -sigma) {
            break f;
        }
        attempt += 1;
        if attempt > 3 {
            return Err(SolverError::Factorization { last_shift: sigma });
        }
        sigma -= delta * 10f64.powi(attempt);
    };
    lanczos::shift_invert(matrix, &factor, sigma, n_want, settings)
}

pub fn lowest_eigenpairs(op: &AssembledOperator, n_want: usize, settings: &SolverSettings) -> Result<Spectrum, SolverError> {
    let raw = matrix_eigenpairs(&op.matrix, op.lower_bound, n_want, settings)?;
    let inv_sqrt: Vec<f64> = op.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let eigenvectors = raw
        .vectors
        .into_iter()
        .map(|y| y.iter().zip(&inv_sqrt).map(|(v, s)| v * *s).collect())
        .collect();
    Ok(Spectrum { eigenvalues: raw.values, eigenvectors, residuals: raw.residuals, meta: raw.meta })
}

fn factorization(op: &AssembledOperator, k: f64) -> Result<Arc<Factorization>, SolverError> {
    let key = k.to_bits();
    let mut cache = op.cache.lock().expect("factor cache poisoned");
    if let Some((_, f)) = cache.iter().find(|(kk, _)| *kk == key) {
        return Ok(f.clone());
    }
    match Factorization::new(&op.matrix, k) {
        Some(f) => {
            let f = Arc::new(f);
            cache.push((key, f.clone()));
            Ok(f)
        }
        None => {
            drop(cache);
            let settings = SolverSettings { dense_threshold: op.dim().min(4000), ..SolverSettings::default() };
            let nearest = matrix_eigenpairs(&op.matrix, op.lower_bound, 1, &settings)
                .map(|s| s.values[0])
                .unwrap_or(f64::NAN);
            Err(SolverError::SingularShift { k_neg: -k, nearest })
        }
    }
}

/// Solve `(H + k) x = v` for a nodal vector `v`. The factorization is cached
/// on the operator per `k`; `H + k` must be positive definite.
pub fn resolvent_apply(op: &AssembledOperator, k: f64, v: &[C64]) -> Result<Vec<C64>, SolverError> {
    if v.len() != op.dim() {
        return Err(SolverError::Length { got: v.len(), dim: op.dim() });
    }
    let f = factorization(op, k)?;
    let rhs: Vec<C64> = v.iter().zip(&op.weights).map(|(x, w)| x * w.sqrt()).collect();
    let y = f.solve(&rhs);
    Ok(y.iter().zip(&op.weights).map(|(x, w)| x / w.sqrt()).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    /// `|⟨v, Dv⟩_W|` at the final iterate.
    pub rayleigh: f64,
    /// `‖Dv_t‖_W` per iteration; nondecreasing in exact arithmetic.
    pub history: Vec<f64>,
    pub monotone: bool,
}

/// Power iteration on a map that is self-adjoint in the `weights` inner
/// product, from a seeded random start.
pub fn opnorm_estimate<F>(map: F, weights: &[f64], iters: usize, seed: u64) -> NormEstimate
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    let n = weights.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let wn = |x: &[C64]| weighted_inner(weights, x, x).re.sqrt();
    let nv = wn(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut history = Vec::with_capacity(iters);
    let mut rayleigh = 0.0;
    for _ in 0..iters.max(1) {
        let w = map(&v);
        rayleigh = weighted_inner(weights, &v, &w).norm();
        let nw = wn(&w);
        history.push(nw);
        if nw == 0.0 {
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    let monotone = history.windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-9) - 1e-14);
    NormEstimate { value: *history.last().unwrap_or(&0.0), rayleigh, history, monotone }
}

/// Seeded random complex vector with entries in the unit square.
pub fn random_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OperatorKind;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let h = 1.0 / (n + 1) as f64;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(2.0 / (h * h), 0.0)));
            if i + 1 < n {
                t.push((i, i + 1, C64::new(-1.0 / (h * h), 0.0)));
                t.push((i + 1, i, C64::new(-1.0 / (h * h), 0.0)));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn dirichlet_laplacian_lowest() {
        let op = AssembledOperator::from_matrix(laplacian_1d(199), OperatorKind::HEff);
        let pi2 = std::f64::consts::PI.powi(2);
        for threshold in [0usize, 10_000] {
            let s = SolverSettings { dense_threshold: threshold, ..SolverSettings::default() };
            let sp = lowest_eigenpairs(&op, 3, &s).unwrap();
            assert!(((sp.eigenvalues[0] - pi2) / pi2).abs() < 1e-3);
        }
    }

    #[test]
    fn identity_is_degenerate() {
        let op = AssembledOperator::from_matrix(CsrMatrix::identity(1500), OperatorKind::HEff);
        let sp = lowest_eigenpairs(&op, 3, &SolverSettings::default()).unwrap();
        for l in &sp.eigenvalues {
            assert!((l - 1.0).abs() < 1e-12);
        }
        for a in 0..3 {
            for b in 0..3 {
                let ip = op.inner(&sp.eigenvectors[a], &sp.eigenvectors[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((ip - C64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn resolvent_examples() {
        let zero = AssembledOperator::from_matrix(CsrMatrix::from_real_diagonal(&[0.0, 0.0]), OperatorKind::HEff);
        let v = vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        let x = resolvent_apply(&zero, 2.0, &v).unwrap();
        assert!((x[0] - C64::new(0.5, 0.0)).norm() < 1e-15 && (x[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
        let d = AssembledOperator::from_matrix(CsrMatrix::from_real_diagonal(&[1.0, 3.0]), OperatorKind::HEff);
        let x = resolvent_apply(&d, 1.0, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        assert!((x[0].re - 0.5).abs() < 1e-15 && (x[1].re - 0.25).abs() < 1e-15);
        let err = resolvent_apply(&d, -1.0, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, SolverError::SingularShift { .. }));
    }

    #[test]
    fn opnorm_examples() {
        let w = vec![1.0; 3];
        let e = opnorm_estimate(|v| v.iter().map(|x| x * 2.0).collect(), &w, 60, 1);
        assert!((e.value - 2.0).abs() < 1e-12);
        let d = [1.0, 0.5, 0.1];
        let e = opnorm_estimate(|v| v.iter().zip(&d).map(|(x, s)| x * *s).collect(), &w, 60, 1);
        assert!((e.value - 1.0).abs() < 1e-6);
        assert!(e.monotone);
    }
}
