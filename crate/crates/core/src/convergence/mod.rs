//! ε-sweeps comparing the renormalized layer operator with the effective
//! Hamiltonian: eigenvalue gaps, eigenfunction discrepancies, transverse
//! leakage, resolvent differences and the transverse gap.

mod fit;
mod gap;
mod mode;

use std::cell::RefCell;
use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use fit::{fit_rate, FitRefused, FitStatus, RateFit};
pub use gap::{gap_bound_check, GapReport};
pub use mode::TransverseMode;

use crate::eigensolve::{
    lowest_eigenpairs, opnorm_estimate, resolvent_apply, NormEstimate, SolverError, SolverSettings,
};
use crate::geometry::{
    build_patch, check_embedding, layer_geometry, GeometryError, GeometryFamily, HypersurfacePatch, LayerGeometry,
    TransverseGrid,
};
use crate::magnetics::{
    effective_field, electric_layer, electric_trace, gauge_fix, pullback, AmbientField, GaugeFixedPotential,
    MagneticsError,
};
use crate::operators::{
    assemble_effective, assemble_full, renormalize, weighted_inner, AssembledOperator, AssemblyError,
    ComparisonConstants,
};
use crate::C64;

/// Acceptance window for fitted eigenvalue-gap slopes.
pub const GAP_SLOPE_WINDOW: [f64; 2] = [0.9, 2.3];
/// Minimum slope for the other fitted observables.
pub const MIN_SLOPE: f64 = 0.9;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Magnetics(#[from] MagneticsError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("embedding check failed at the largest ε: {0}")]
    Embedding(String),
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub family: GeometryFamily,
    pub sizes: Vec<usize>,
    pub transverse_nodes: usize,
    pub field: AmbientField,
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub n_eigen: usize,
    /// Additional eigenpairs of `H_ren` computed for matching.
    pub extra: usize,
    pub solver: SolverSettings,
    pub k_override: Option<f64>,
    pub resolvent_iterations: usize,
    /// Estimate discretization error by one grid doubling.
    pub discretization_check: bool,
    /// Run [`gap_bound_check`] at every ε.
    pub gap_check: bool,
    pub gap_samples: usize,
    /// Relative tolerance for grouping `μ_n` into degenerate clusters.
    pub cluster_tol: f64,
    /// Eigenfunction discrepancies and leakages below this count as zero.
    pub exact_vector_tol: f64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(family: GeometryFamily, sizes: Vec<usize>, epsilons: Vec<f64>, n_eigen: usize) -> Self {
        SweepConfig {
            family,
            sizes,
            transverse_nodes: 17,
            field: AmbientField::zero(),
            epsilons,
            n_eigen,
            extra: 2,
            solver: SolverSettings::from_env(),
            k_override: None,
            resolvent_iterations: 60,
            discretization_check: true,
            gap_check: false,
            gap_samples: 200,
            cluster_tol: 1e-6,
            exact_vector_tol: 1e-6,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// 1-based index of `μ_n`.
    pub n: usize,
    pub cluster: usize,
    pub lambda: f64,
    pub mu: f64,
    pub gap: f64,
    /// Largest gap within the degenerate cluster of `μ_n`.
    pub cluster_gap: f64,
    /// Phase-aligned (cluster-rotated, RMS over the cluster)
    /// `‖ψ − ι φ‖` in the weighted norm.
    pub discrepancy: f64,
    /// `‖Qψ‖`, RMS over the cluster.
    pub leakage: f64,
    /// `‖P_cluster ψ‖`, the matching overlap.
    pub overlap: f64,
    pub resolvent_norm: Option<f64>,
    /// `|gap(h) − gap(h/2)|` for the cluster gap.
    pub disc_error: Option<f64>,
    pub resolved: bool,
    pub flagged: bool,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichCheck {
    pub script_plus: f64,
    pub script_minus: f64,
    pub script_zero: f64,
    /// Largest `λ_n(H₀⁻) − λ_n(H)` and `λ_n(H) − λ_n(H₀⁺)` over `n ≤ N`.
    pub lower_violation: f64,
    pub upper_violation: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonSummary {
    pub epsilon: f64,
    pub skipped: Option<String>,
    pub resolvent: Option<NormEstimate>,
    pub sandwich: Option<SandwichCheck>,
    pub gap: Option<GapReport>,
    pub max_residual: f64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridParams {
    pub sizes: Vec<usize>,
    pub transverse_nodes: usize,
    pub surface_nodes: usize,
    pub layer_dofs: usize,
    pub refined_sizes: Option<Vec<usize>>,
    pub refined_transverse_nodes: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitSummary {
    pub observable: String,
    pub cluster: Option<usize>,
    pub status: FitStatus,
    pub fit: Option<RateFit>,
    /// Lower and upper slope limits used for acceptance.
    pub window: [f64; 2],
    pub within_window: bool,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Acceptance {
    pub ok: bool,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub geometry: String,
    pub field: String,
    pub grid: GridParams,
    pub k: f64,
    pub k_policy: String,
    pub mu: Vec<f64>,
    /// Ranges of `μ` indices (0-based, half open) forming degenerate clusters.
    pub clusters: Vec<[usize; 2]>,
    /// Sorted by ε descending, then n.
    pub rows: Vec<SweepRow>,
    pub epsilons: Vec<EpsilonSummary>,
    pub fits: Vec<FitSummary>,
    pub acceptance: Acceptance,
}

struct Level {
    patch: HypersurfacePatch,
    mode: TransverseMode,
    heff: AssembledOperator,
    mu: Vec<f64>,
    phi: Vec<Vec<C64>>,
    clusters: Vec<Range<usize>>,
    v_min: f64,
}

fn clusters_of(mu: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=mu.len() {
        if i == mu.len() || (mu[i] - mu[i - 1]).abs() > tol * mu[i - 1].abs().max(1.0) {
            out.push(start..i);
            start = i;
        }
    }
    out
}

fn build_level(cfg: &SweepConfig, sizes: &[usize], m: usize) -> Result<Level, SweepError> {
    let patch = build_patch(&cfg.family, sizes)?;
    let mode = TransverseMode::new(TransverseGrid::new(m)?);
    let eff = effective_field(&cfg.field, &patch)?;
    let trace = electric_trace(&cfg.field, &patch)?;
    let heff = assemble_effective(&patch, &eff, trace.as_deref())?;
    let mut v = patch.v_eff();
    if let Some(w) = &trace {
        v.iter_mut().zip(w).for_each(|(a, b)| *a += b);
    }
    let v_min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let dim = heff.dim();
    let mut count = (cfg.n_eigen + cfg.extra).min(dim);
    loop {
        let sp = lowest_eigenpairs(&heff, count, &cfg.solver)?;
        let clusters = clusters_of(&sp.eigenvalues, cfg.cluster_tol);
        let needed: Vec<Range<usize>> = clusters.into_iter().filter(|c| c.start < cfg.n_eigen).collect();
        let last_end = needed.last().map(|c| c.end).unwrap_or(0);
        if last_end < count || count == dim {
            return Ok(Level { patch, mode, heff, mu: sp.eigenvalues, phi: sp.eigenvectors, clusters: needed, v_min });
        }
        count = (2 * count).min(dim);
    }
}

fn refined_sizes(patch: &HypersurfacePatch) -> Vec<usize> {
    patch.grid.axes.iter().map(|a| a.refined().nodes).collect()
}

struct ClusterResult {
    range: Range<usize>,
    lambdas: Vec<f64>,
    overlaps: Vec<f64>,
    cluster_gap: f64,
    discrepancy: f64,
    leakage: f64,
    ambiguous: bool,
}

struct EpsData {
    clusters: Vec<ClusterResult>,
    eigenvalues: Vec<f64>,
    max_residual: f64,
    resolvent: Option<NormEstimate>,
    sandwich: Option<SandwichCheck>,
    gap: Option<GapReport>,
}

struct Layer {
    layer: LayerGeometry,
    pot: GaugeFixedPotential,
    electric: Option<(Vec<f64>, Vec<f64>)>,
}

fn build_layer(level: &Level, field: &AmbientField, eps: f64) -> Result<Layer, SweepError> {
    let layer = layer_geometry(&level.patch, eps, level.mode.m())?;
    let raw = pullback(field, &layer, &level.patch)?;
    let pot = gauge_fix(&raw, &level.patch);
    let full = electric_layer(field, &layer, &level.patch)?;
    let trace = electric_trace(field, &level.patch)?;
    let electric = full.zip(trace);
    Ok(Layer { layer, pot, electric })
}

fn sum_singular_values(m: &faer::Mat<C64>) -> f64 {
    m.singular_values().map(|s| s.iter().sum()).unwrap_or(f64::NAN)
}

fn match_clusters(level: &Level, h: &AssembledOperator, lambdas: &[f64], psi: &[Vec<C64>]) -> Vec<ClusterResult> {
    let w = &h.weights;
    let embedded: Vec<Vec<C64>> = level.phi.iter().map(|p| level.mode.embed(p)).collect();
    let mut used = vec![false; psi.len()];
    let mut out = Vec::new();
    for range in &level.clusters {
        let c = range.len();
        let mu_c = level.mu[range.start];
        let mut cand: Vec<(usize, f64)> = (0..psi.len())
            .filter(|&i| !used[i])
            .map(|i| {
                let ov2: f64 = range.clone().map(|n| weighted_inner(w, &embedded[n], &psi[i]).norm_sqr()).sum();
                (i, ov2.sqrt())
            })
            .collect();
        cand.sort_by(|a, b| b.1.total_cmp(&a.1).then((lambdas[a.0] - mu_c).abs().total_cmp(&(lambdas[b.0] - mu_c).abs())));
        let mut ambiguous = cand.len() < c;
        if cand.len() > c {
            let last = cand[c - 1].1;
            let next = cand[c].1;
            if next >= 0.99 * last {
                ambiguous = true;
                // Tie broken by eigenvalue proximity among the near-equal overlaps.
                let mut tied: Vec<usize> = (0..cand.len()).filter(|&j| cand[j].1 >= 0.99 * last).collect();
                let firm: Vec<usize> = (0..c).filter(|j| !tied.contains(j)).collect();
                tied.sort_by(|&a, &b| (lambdas[cand[a].0] - mu_c).abs().total_cmp(&(lambdas[cand[b].0] - mu_c).abs()));
                let mut chosen: Vec<(usize, f64)> = firm.iter().map(|&j| cand[j]).collect();
                chosen.extend(tied.iter().take(c - firm.len()).map(|&j| cand[j]));
                cand = chosen;
            }
        }
        cand.truncate(c);
        let mut chosen: Vec<(usize, f64)> = cand;
        chosen.sort_by(|a, b| lambdas[a.0].total_cmp(&lambdas[b.0]));
        for (i, _) in &chosen {
            used[*i] = true;
        }
        let lam: Vec<f64> = chosen.iter().map(|(i, _)| lambdas[*i]).collect();
        let cluster_gap = lam.iter().zip(range.clone()).map(|(l, n)| (l - level.mu[n]).abs()).fold(0.0, f64::max);
        let cc = chosen.len();
        let mmat = faer::Mat::<C64>::from_fn(c, cc, |a, b| weighted_inner(w, &embedded[range.start + a], &psi[chosen[b].0]));
        let norms: f64 = chosen.iter().map(|(i, _)| weighted_inner(w, &psi[*i], &psi[*i]).re).sum::<f64>()
            + range.clone().map(|n| weighted_inner(w, &embedded[n], &embedded[n]).re).sum::<f64>();
        let d2 = (norms - 2.0 * sum_singular_values(&mmat)).max(0.0);
        let discrepancy = (d2 / c as f64).sqrt();
        let leak2: f64 = chosen
            .iter()
            .map(|(i, _)| {
                let q = level.mode.q(&psi[*i]);
                weighted_inner(w, &q, &q).re
            })
            .sum();
        let leakage = (leak2 / cc.max(1) as f64).sqrt();
        out.push(ClusterResult {
            range: range.clone(),
            lambdas: lam,
            overlaps: chosen.iter().map(|c| c.1).collect(),
            cluster_gap,
            discrepancy,
            leakage,
            ambiguous,
        });
    }
    out
}

fn comparison_k(level: &Level, cfg: &SweepConfig, eps: f64) -> Result<(f64, String), SweepError> {
    if let Some(k) = cfg.k_override {
        return Ok((k, "override".into()));
    }
    let l = build_layer(level, &cfg.field, eps)?;
    let e = l.electric.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()));
    let c = ComparisonConstants::compute(&level.patch, &l.layer, &l.pot, e);
    let k = (2.0 * level.v_min.min(0.0).abs() + 1.0 + c.script_zero).max(1.0);
    Ok((k, format!("max(1, 2|min V_eff| + 1 + C0) at eps = {eps}, C0 = {:.6e}", c.script_zero)))
}

fn solve_epsilon(level: &Level, cfg: &SweepConfig, eps: f64, k: f64, full: bool) -> Result<EpsData, SweepError> {
    let l = build_layer(level, &cfg.field, eps)?;
    let e_full = l.electric.as_ref().map(|(a, _)| a.as_slice());
    let h = renormalize(assemble_full(&level.patch, &l.layer, &l.pot, e_full)?)?;
    let needed = level.clusters.last().map(|c| c.end).unwrap_or(cfg.n_eigen);
    let count = (needed + cfg.extra).min(h.dim());
    let sp = lowest_eigenpairs(&h, count, &cfg.solver)?;
    let clusters = match_clusters(level, &h, &sp.eigenvalues, &sp.eigenvectors);
    let max_residual = sp.residuals.iter().copied().fold(0.0, f64::max);
    if !full {
        return Ok(EpsData { clusters, eigenvalues: sp.eigenvalues, max_residual, resolvent: None, sandwich: None, gap: None });
    }

    let failure: RefCell<Option<SolverError>> = RefCell::new(None);
    let zero = vec![C64::new(0.0, 0.0); h.dim()];
    let map = |v: &[C64]| -> Vec<C64> {
        let a = match resolvent_apply(&h, k, v) {
            Ok(a) => a,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                return zero.clone();
            }
        };
        let b = match resolvent_apply(&level.heff, k, &level.mode.project(v)) {
            Ok(b) => level.mode.embed(&b),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                return zero.clone();
            }
        };
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    };
    let resolvent = opnorm_estimate(map, &h.weights, cfg.resolvent_iterations, cfg.seed);
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }

    let e = l.electric.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()));
    let c = ComparisonConstants::compute(&level.patch, &l.layer, &l.pot, e);
    let mut lower_violation = f64::NEG_INFINITY;
    let mut upper_violation = f64::NEG_INFINITY;
    for n in 0..cfg.n_eigen.min(sp.eigenvalues.len()) {
        let lam = sp.eigenvalues[n];
        let lo = c.script_minus * level.mu[n] - c.script_zero;
        let hi = c.script_plus * level.mu[n] + c.script_zero;
        lower_violation = lower_violation.max(lo - lam);
        upper_violation = upper_violation.max(lam - hi);
    }
    let slack = 1e-10 * sp.eigenvalues.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let sandwich = Some(SandwichCheck {
        script_plus: c.script_plus,
        script_minus: c.script_minus,
        script_zero: c.script_zero,
        lower_violation,
        upper_violation,
        holds: lower_violation <= slack && upper_violation <= slack,
    });
    let gap = if cfg.gap_check { Some(gap_bound_check(&h, &level.mode, k, cfg.gap_samples, cfg.seed)?) } else { None };
    Ok(EpsData { clusters, eigenvalues: sp.eigenvalues, max_residual, resolvent: Some(resolvent), sandwich, gap })
}

fn validate(cfg: &SweepConfig) -> Result<(), SweepError> {
    if cfg.epsilons.is_empty() {
        return Err(SweepError::Config("empty ε list".into()));
    }
    if cfg.epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(SweepError::Config("every ε must be positive and finite".into()));
    }
    if cfg.epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SweepError::Config("ε list must be strictly decreasing".into()));
    }
    if cfg.n_eigen == 0 {
        return Err(SweepError::Config("N must be at least 1".into()));
    }
    Ok(())
}

fn gap_exact(gap: f64, mu: f64, tol: f64) -> bool {
    gap <= tol * mu.abs().max(1.0)
}

/// Run the sweep described by `cfg`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<ConvergenceReport, SweepError> {
    validate(cfg)?;
    let level = build_level(cfg, &cfg.sizes, cfg.transverse_nodes)?;
    let eps_max = cfg.epsilons[0];
    let diag = check_embedding(&level.patch, eps_max)?;
    if !diag.passed() {
        return Err(SweepError::Embedding(diag.reason().unwrap_or_default()));
    }
    let (k, k_policy) = comparison_k(&level, cfg, eps_max)?;

    let refinable = cfg.discretization_check && !matches!(cfg.family, GeometryFamily::UserSampled(_));
    let fine_sizes = refinable.then(|| refined_sizes(&level.patch));
    let fine_m = refinable.then(|| level.mode.grid.refined().m);
    let fine = match (&fine_sizes, fine_m) {
        (Some(s), Some(m)) => Some(build_level(cfg, s, m)?),
        _ => None,
    };

    type Job = Result<(Option<EpsData>, Option<EpsData>, Option<String>), SweepError>;
    let results: Vec<Job> = cfg
        .epsilons
        .par_iter()
        .map(|&eps| {
            let d = check_embedding(&level.patch, eps)?;
            if !d.passed() {
                return Ok((None, None, d.reason()));
            }
            let coarse = solve_epsilon(&level, cfg, eps, k, true)?;
            let fine_data = match &fine {
                Some(f) => Some(solve_epsilon(f, cfg, eps, k, false)?),
                None => None,
            };
            Ok((Some(coarse), fine_data, None))
        })
        .collect();

    let tol = cfg.solver.tol;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (idx, res) in results.into_iter().enumerate() {
        let eps = cfg.epsilons[idx];
        let (coarse, fine_data, skipped) = res?;
        let Some(coarse) = coarse else {
            summaries.push(EpsilonSummary {
                epsilon: eps,
                skipped,
                resolvent: None,
                sandwich: None,
                gap: None,
                max_residual: f64::NAN,
                eigenvalues: Vec::new(),
            });
            continue;
        };
        let fine_ok = fine_data.as_ref().filter(|f| {
            f.clusters.len() == coarse.clusters.len()
                && f.clusters.iter().zip(&coarse.clusters).all(|(a, b)| a.range == b.range)
        });
        for (ci, cl) in coarse.clusters.iter().enumerate() {
            let mu0 = level.mu[cl.range.start];
            let exact = gap_exact(cl.cluster_gap, mu0, tol);
            let (disc_error, resolved, mut note) = match (fine_ok, &fine_data) {
                (Some(f), _) => {
                    let fg = f.clusters[ci].cluster_gap;
                    let err = (cl.cluster_gap - fg).abs();
                    let resolved = err < 0.2 * cl.cluster_gap || (exact && gap_exact(fg, mu0, tol));
                    let note = if resolved { String::new() } else { "under-resolved".to_string() };
                    (Some(err), resolved, note)
                }
                (None, Some(_)) => (None, false, "cluster structure changes under refinement".to_string()),
                (None, None) => (None, true, String::new()),
            };
            if cl.ambiguous {
                if !note.is_empty() {
                    note.push_str("; ");
                }
                note.push_str("ambiguous match");
            }
            for (r, n) in cl.range.clone().enumerate() {
                let lambda = cl.lambdas.get(r).copied().unwrap_or(f64::NAN);
                rows.push(SweepRow {
                    epsilon: eps,
                    n: n + 1,
                    cluster: ci + 1,
                    lambda,
                    mu: level.mu[n],
                    gap: (lambda - level.mu[n]).abs(),
                    cluster_gap: cl.cluster_gap,
                    discrepancy: cl.discrepancy,
                    leakage: cl.leakage,
                    overlap: cl.overlaps.get(r).copied().unwrap_or(0.0),
                    resolvent_norm: coarse.resolvent.as_ref().map(|r| r.value),
                    disc_error,
                    resolved,
                    flagged: cl.ambiguous || !resolved,
                    note: note.clone(),
                });
            }
        }
        summaries.push(EpsilonSummary {
            epsilon: eps,
            skipped: None,
            resolvent: coarse.resolvent,
            sandwich: coarse.sandwich,
            gap: coarse.gap,
            max_residual: coarse.max_residual,
            eigenvalues: coarse.eigenvalues,
        });
    }

    let fits = fit_all(cfg, &level, &rows, &summaries);
    let acceptance = judge(&rows, &summaries, &fits);
    Ok(ConvergenceReport {
        geometry: level.patch.id.clone(),
        field: cfg.field.id(),
        grid: GridParams {
            sizes: cfg.sizes.clone(),
            transverse_nodes: level.mode.m(),
            surface_nodes: level.patch.len(),
            layer_dofs: level.patch.len() * level.mode.m(),
            refined_sizes: fine_sizes,
            refined_transverse_nodes: fine_m,
        },
        k,
        k_policy,
        mu: level.mu.clone(),
        clusters: level.clusters.iter().map(|c| [c.start, c.end]).collect(),
        rows,
        epsilons: summaries,
        fits,
        acceptance,
    })
}

fn fit_observable(name: &str, cluster: Option<usize>, points: &[(f64, f64)], exact_tol: f64, window: [f64; 2]) -> FitSummary {
    if !points.is_empty() && points.iter().all(|p| p.1.abs() <= exact_tol) {
        return FitSummary {
            observable: name.into(),
            cluster,
            status: FitStatus::Exact,
            fit: None,
            window,
            within_window: true,
            note: format!("all values ≤ {exact_tol:.1e}"),
        };
    }
    match fit_rate(points) {
        Ok(f) => {
            let within = f.slope >= window[0] && f.slope <= window[1];
            FitSummary { observable: name.into(), cluster, status: FitStatus::Fitted, fit: Some(f), window, within_window: within, note: String::new() }
        }
        Err(e) => FitSummary {
            observable: name.into(),
            cluster,
            status: FitStatus::Refused,
            fit: None,
            window,
            within_window: false,
            note: e.to_string(),
        },
    }
}

fn fit_all(cfg: &SweepConfig, level: &Level, rows: &[SweepRow], eps: &[EpsilonSummary]) -> Vec<FitSummary> {
    let mut out = Vec::new();
    let open = [MIN_SLOPE, f64::INFINITY];
    for (ci, range) in level.clusters.iter().enumerate() {
        let first: Vec<&SweepRow> = rows.iter().filter(|r| r.cluster == ci + 1 && r.n == range.start + 1 && !r.flagged).collect();
        let mu0 = level.mu[range.start];
        let pts = |f: &dyn Fn(&SweepRow) -> f64| first.iter().map(|r| (r.epsilon, f(r))).collect::<Vec<_>>();
        out.push(fit_observable("gap", Some(ci + 1), &pts(&|r| r.cluster_gap), cfg.solver.tol * mu0.abs().max(1.0), GAP_SLOPE_WINDOW));
        out.push(fit_observable("discrepancy", Some(ci + 1), &pts(&|r| r.discrepancy), cfg.exact_vector_tol, open));
        out.push(fit_observable("leakage", Some(ci + 1), &pts(&|r| r.leakage), cfg.exact_vector_tol, open));
    }
    let flagged_eps: Vec<f64> = rows.iter().filter(|r| r.flagged).map(|r| r.epsilon).collect();
    let res: Vec<(f64, f64)> = eps
        .iter()
        .filter(|e| !flagged_eps.contains(&e.epsilon))
        .filter_map(|e| e.resolvent.as_ref().map(|r| (e.epsilon, r.value)))
        .collect();
    out.push(fit_observable("resolvent", None, &res, cfg.exact_vector_tol, open));
    out
}

fn judge(rows: &[SweepRow], eps: &[EpsilonSummary], fits: &[FitSummary]) -> Acceptance {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    for r in rows.iter().filter(|r| r.flagged) {
        violations.push(format!("flagged row ε = {}, n = {}: {}", r.epsilon, r.n, r.note));
    }
    for f in fits {
        match f.status {
            FitStatus::Fitted if !f.within_window => {
                let s = f.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
                violations.push(format!(
                    "{} slope {:.4} outside [{}, {}]{}",
                    f.observable,
                    s,
                    f.window[0],
                    f.window[1],
                    f.cluster.map(|c| format!(" (cluster {c})")).unwrap_or_default()
                ));
            }
            FitStatus::Refused => warnings.push(format!("{} fit refused: {}", f.observable, f.note)),
            _ => {}
        }
    }
    for e in eps {
        if let Some(s) = &e.skipped {
            warnings.push(format!("ε = {} skipped: {s}", e.epsilon));
        }
        if let Some(s) = &e.sandwich {
            if !s.holds {
                violations.push(format!(
                    "sandwich violated at ε = {}: lower {:.3e}, upper {:.3e}",
                    e.epsilon, s.lower_violation, s.upper_violation
                ));
            }
        }
        if let Some(r) = &e.resolvent {
            if !r.monotone {
                warnings.push(format!("power iteration history not monotone at ε = {}", e.epsilon));
            }
        }
        if let Some(g) = &e.gap {
            if let Some(a) = g.advice() {
                violations.push(a);
            }
        }
    }
    Acceptance { ok: violations.is_empty(), violations, warnings }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

impl ConvergenceReport {
    /// One row per (ε, n); numbers with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "epsilon",
            "n",
            "cluster",
            "lambda",
            "mu",
            "gap",
            "cluster_gap",
            "discrepancy",
            "leakage",
            "overlap",
            "resolvent_norm",
            "disc_error",
            "resolved",
            "flagged",
            "note",
        ])?;
        for r in &self.rows {
            wr.write_record([
                fmt(r.epsilon),
                r.n.to_string(),
                r.cluster.to_string(),
                fmt(r.lambda),
                fmt(r.mu),
                fmt(r.gap),
                fmt(r.cluster_gap),
                fmt(r.discrepancy),
                fmt(r.leakage),
                fmt(r.overlap),
                r.resolvent_norm.map(fmt).unwrap_or_default(),
                r.disc_error.map(fmt).unwrap_or_default(),
                r.resolved.to_string(),
                r.flagged.to_string(),
                r.note.clone(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "geometry": self.geometry,
            "field": self.field,
            "grid": self.grid,
            "k": self.k,
            "k_policy": self.k_policy,
            "mu": self.mu,
            "clusters": self.clusters,
            "epsilons": self.epsilons,
            "fits": self.fits,
            "acceptance": self.acceptance,
        })
    }

    pub fn fit(&self, observable: &str, cluster: Option<usize>) -> Option<&FitSummary> {
        self.fits.iter().find(|f| f.observable == observable && f.cluster == cluster)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters_group_near_equal_values() {
        let c = clusters_of(&[-0.25, 0.75, 0.75 + 1e-9, 3.75, 3.75], 1e-6);
        assert_eq!(c, vec![0..1, 1..3, 3..5]);
    }

    #[test]
    fn flat_segment_sweep_is_exact() {
        let mut cfg = SweepConfig::new(GeometryFamily::Segment { length: 1.0 }, vec![48], vec![0.2, 0.1, 0.05], 2);
        cfg.gap_check = true;
        let rep = run_sweep(&cfg).unwrap();
        for f in rep.fits.iter().filter(|f| f.observable != "resolvent") {
            assert_eq!(f.status, FitStatus::Exact, "{f:?}");
        }
        assert!(rep.acceptance.ok, "{:?}", rep.acceptance);
        for e in &rep.epsilons {
            let g = e.gap.as_ref().unwrap();
            assert!((g.excitation - g.bound).abs() < 1e-9 * g.bound);
        }
    }
}
