//! Hermitian discretizations of the layer operator H, the effective surface
//! Hamiltonian h_eff and the decoupled comparison operators H₀^±.
//!
//! Every operator is stored as `S = W^{1/2} H W^{-1/2}`, which is Hermitian
//! in the Euclidean inner product; `W` holds the weights of the discrete
//! measure `|g|^{1/2} dx [du]`. Functions on the grid ("nodal vectors") are
//! related to `S`-space vectors by `y = W^{1/2} x`.

mod potentials;
pub mod sparse;
mod stencil;

pub use potentials::{potential_grids, v2_pointwise, PotentialGrids};
pub use sparse::CsrMatrix;

use std::sync::{Arc, Mutex};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{ChartGrid, Closure, HypersurfacePatch, LayerGeometry};
use crate::magnetics::{EffectiveField, GaugeFixedPotential};
use crate::small::M2;
use crate::C64;
use potentials::sup_abs;
use stencil::SurfaceLevel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("vector potential is not gauge fixed: max |Ã_d| = {0:e}")]
    UnfixedGauge(f64),
    #[error("assembled matrix is not Hermitian: residual {0:e}")]
    NotHermitian(f64),
    #[error("operator is already renormalized")]
    AlreadyRenormalized,
    #[error("only full-H and comparison operators can be renormalized")]
    NotRenormalizable,
    #[error("comparison constant 𝒞₀ = {0} is not admissible")]
    BadComparisonConstant(f64),
    #[error("grid mismatch: {0}")]
    Mismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    FullH,
    HEff,
    ComparisonPlus,
    ComparisonMinus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorMeta {
    pub kind: OperatorKind,
    pub renormalized: bool,
    pub epsilon: Option<f64>,
    pub geometry: String,
    pub field: String,
}

impl OperatorMeta {
    pub fn label(&self) -> String {
        let base = match self.kind {
            OperatorKind::FullH => "full-H",
            OperatorKind::HEff => "h-eff",
            OperatorKind::ComparisonPlus => "H0+",
            OperatorKind::ComparisonMinus => "H0-",
        };
        if self.renormalized {
            format!("{base}-renormalized")
        } else {
            base.to_string()
        }
    }
}

/// Row layout: surface node `s` and transverse node `j` map to
/// `s * m_u + j` (transverse index fastest).
#[derive(Clone, Debug, Serialize)]
pub struct DofMap {
    pub chart: ChartGrid,
    pub transverse_nodes: Option<usize>,
}

impl DofMap {
    pub fn len(&self) -> usize {
        self.chart.len() * self.transverse_nodes.unwrap_or(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, s: usize, j: usize) -> usize {
        s * self.transverse_nodes.unwrap_or(1) + j
    }

    /// Human-readable boundary treatment per chart direction.
    pub fn boundary_record(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .chart
            .axes
            .iter()
            .map(|a| match a.closure {
                Closure::Periodic => "periodic".to_string(),
                Closure::Bounded { start, end } => format!("{start:?}/{end:?}").to_lowercase(),
            })
            .collect();
        if self.transverse_nodes.is_some() {
            out.push("transverse: dirichlet at u = ±1 (rows eliminated)".to_string());
        }
        out
    }
}

pub(crate) type FactorCache = Mutex<Vec<(u64, Arc<crate::eigensolve::Factorization>)>>;

/// An assembled Hermitian operator with its grid and weight data.
pub struct AssembledOperator {
    /// `S = W^{1/2} H W^{-1/2}`.
    pub matrix: CsrMatrix,
    /// Diagonal of `W`, the discrete measure.
    pub weights: Vec<f64>,
    pub dofs: DofMap,
    pub meta: OperatorMeta,
    /// Lower bound on the spectrum used to place shifts.
    pub lower_bound: f64,
    pub hermitian_residual: f64,
    pub(crate) cache: FactorCache,
}

impl Clone for AssembledOperator {
    fn clone(&self) -> Self {
        AssembledOperator {
            matrix: self.matrix.clone(),
            weights: self.weights.clone(),
            dofs: self.dofs.clone(),
            meta: self.meta.clone(),
            lower_bound: self.lower_bound,
            hermitian_residual: self.hermitian_residual,
            cache: Mutex::new(Vec::new()),
        }
    }
}

impl std::fmt::Debug for AssembledOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AssembledOperator")
            .field("kind", &self.meta.label())
            .field("dim", &self.dim())
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl AssembledOperator {
    /// Wrap a Hermitian matrix with unit weights and a Gershgorin bound.
    pub fn from_matrix(matrix: CsrMatrix, kind: OperatorKind) -> Self {
        let n = matrix.n;
        let chart = ChartGrid::new(vec![crate::geometry::ChartAxis::dirichlet(0.0, (n + 1) as f64, n)]);
        let lower_bound = matrix.gershgorin_lower();
        let hermitian_residual = matrix.hermitian_residual();
        AssembledOperator {
            matrix,
            weights: vec![1.0; n],
            dofs: DofMap { chart, transverse_nodes: None },
            meta: OperatorMeta { kind, renormalized: false, epsilon: None, geometry: "matrix".into(), field: "none".into() },
            lower_bound,
            hermitian_residual,
            cache: Mutex::new(Vec::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    /// `H x` for a nodal vector `x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let y: Vec<C64> = x.iter().zip(&self.weights).map(|(v, w)| v * w.sqrt()).collect();
        let z = self.matrix.matvec(&y);
        z.iter().zip(&self.weights).map(|(v, w)| v / w.sqrt()).collect()
    }

    /// Weighted inner product `⟨a, b⟩_W`.
    pub fn inner(&self, a: &[C64], b: &[C64]) -> C64 {
        weighted_inner(&self.weights, a, b)
    }

    pub fn write_matrix_market<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        self.matrix.write_matrix_market(w)
    }

    /// Sidecar describing rows, weights and metadata of a Matrix Market dump.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "thinlayer-operator/1",
            "operator": self.meta.label(),
            "meta": self.meta,
            "rows": self.dim(),
            "nnz": self.matrix.nnz(),
            "matrix_form": "W^(1/2) H W^(-1/2) (Hermitian)",
            "row_order": "surface node (row-major chart) outer, transverse node inner",
            "dof_map": self.dofs,
            "boundary": self.dofs.boundary_record(),
            "weights": self.weights,
            "lower_bound": self.lower_bound,
            "hermitian_residual": self.hermitian_residual,
        })
    }
}

pub fn weighted_inner(w: &[f64], a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x.conj() * y * *w).sum()
}

fn finish(
    matrix: CsrMatrix,
    weights: Vec<f64>,
    dofs: DofMap,
    meta: OperatorMeta,
    lower_bound: f64,
) -> Result<AssembledOperator, AssemblyError> {
    let res = matrix.hermitian_residual();
    let scale = matrix.max_abs().max(f64::MIN_POSITIVE);
    if res > 1e-12 * scale {
        return Err(AssemblyError::NotHermitian(res / scale));
    }
    Ok(AssembledOperator { matrix, weights, dofs, meta, lower_bound, hermitian_residual: res, cache: Mutex::new(Vec::new()) })
}

fn needs_mixed(coeff: &[M2], sdim: usize) -> bool {
    sdim == 2 && coeff.iter().any(|a| a[0][1].abs() > 1e-13 * (a[0][0].abs() + a[1][1].abs()))
}

fn surface_coefficients(patch: &HypersurfacePatch) -> Vec<M2> {
    patch
        .metric_inv
        .iter()
        .zip(&patch.sqrt_det_g)
        .map(|(gi, w)| [[gi[0][0] * w, gi[0][1] * w], [gi[1][0] * w, gi[1][1] * w]])
        .collect()
}

fn layer_coefficients(patch: &HypersurfacePatch, layer: &LayerGeometry, j: usize) -> Vec<M2> {
    let m = layer.m_u();
    (0..patch.len())
        .map(|s| {
            let gi = &layer.metric_inv[s * m + j];
            let w = patch.sqrt_det_g[s];
            [[gi[0][0] * w, gi[0][1] * w], [gi[1][0] * w, gi[1][1] * w]]
        })
        .collect()
}

fn check_layer(patch: &HypersurfacePatch, layer: &LayerGeometry, pot: &GaugeFixedPotential) -> Result<(), AssemblyError> {
    if layer.n_surface != patch.len() || pot.tangential.len() != layer.len() {
        return Err(AssemblyError::Mismatch(format!(
            "patch {} nodes, layer {}x{}, potential {} entries",
            patch.len(),
            layer.n_surface,
            layer.m_u(),
            pot.tangential.len()
        )));
    }
    if pot.transverse_grid.m != layer.m_u() {
        return Err(AssemblyError::Mismatch("potential and layer use different transverse grids".into()));
    }
    let ad = sup_abs(&pot.transverse);
    if ad != 0.0 {
        return Err(AssemblyError::UnfixedGauge(ad));
    }
    Ok(())
}

/// Add `ε⁻² D` (transverse stiffness) for every surface node.
fn push_transverse(n_surface: usize, layer: &LayerGeometry, scale: f64, out: &mut Vec<(usize, usize, C64)>) {
    let m = layer.m_u();
    let d = layer.transverse.stiffness();
    for s in 0..n_surface {
        for i in 0..m {
            for k in 0..m {
                let v = d[i * m + k];
                if v != 0.0 {
                    out.push((s * m + i, s * m + k, C64::new(scale * v, 0.0)));
                }
            }
        }
    }
}

/// The transformed layer operator
/// `|g|^{-1/2}(−i∂+Ã)_μ |g|^{1/2}G^{μν}(−i∂+Ã)_ν − ε⁻²∂_u² + V (+ W∘𝓛)`.
pub fn assemble_full(
    patch: &HypersurfacePatch,
    layer: &LayerGeometry,
    pot: &GaugeFixedPotential,
    electric: Option<&[f64]>,
) -> Result<AssembledOperator, AssemblyError> {
    check_layer(patch, layer, pot)?;
    let n = patch.len();
    let m = layer.m_u();
    let eps = layer.epsilon;
    let grids = potential_grids(patch, layer);
    let surf_w = patch.weights();
    let levels: Vec<Vec<M2>> = (0..m).map(|j| layer_coefficients(patch, layer, j)).collect();
    let mixed = levels.iter().any(|c| needs_mixed(c, patch.sdim()));
    let mut t = Vec::new();
    for (j, coeff) in levels.iter().enumerate() {
        let p: Vec<[f64; 2]> = (0..n).map(|s| pot.tangential[s * m + j]).collect();
        let level = SurfaceLevel { grid: &patch.grid, coeff, weights: &surf_w, potential: &p, mixed };
        level.push_entries(1.0, &|s| s * m + j, &mut t);
    }
    push_transverse(n, layer, 1.0 / (eps * eps), &mut t);
    let mut diag = grids.v.clone();
    if let Some(w) = electric {
        for (d, v) in diag.iter_mut().zip(w) {
            *d += v;
        }
    }
    for (i, &v) in diag.iter().enumerate() {
        t.push((i, i, C64::new(v, 0.0)));
    }
    let matrix = CsrMatrix::from_triplets(n * m, t);
    let weights = layer_weights(&surf_w, layer);
    let lower = lower_bound(&matrix, mixed, min(&diag) + crate::E1 / (eps * eps));
    finish(
        matrix,
        weights,
        DofMap { chart: patch.grid.clone(), transverse_nodes: Some(m) },
        OperatorMeta { kind: OperatorKind::FullH, renormalized: false, epsilon: Some(eps), geometry: patch.id.clone(), field: String::new() },
        lower,
    )
}

fn layer_weights(surf_w: &[f64], layer: &LayerGeometry) -> Vec<f64> {
    let h = layer.transverse.h;
    surf_w.iter().flat_map(|w| std::iter::repeat_n(w * h, layer.m_u())).collect()
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn lower_bound(matrix: &CsrMatrix, mixed: bool, form_bound: f64) -> f64 {
    if mixed {
        matrix.gershgorin_lower().min(form_bound)
    } else {
        form_bound
    }
}

/// The effective Hamiltonian: magnetic Laplace–Beltrami operator with link
/// phases from `α_eff`, plus `V_eff` and the optional electric trace.
pub fn assemble_effective(
    patch: &HypersurfacePatch,
    eff: &EffectiveField,
    electric: Option<&[f64]>,
) -> Result<AssembledOperator, AssemblyError> {
    if eff.alpha.len() != patch.len() {
        return Err(AssemblyError::Mismatch("effective field and patch differ in size".into()));
    }
    let n = patch.len();
    let coeff = surface_coefficients(patch);
    let w = patch.weights();
    let mixed = needs_mixed(&coeff, patch.sdim());
    let level = SurfaceLevel { grid: &patch.grid, coeff: &coeff, weights: &w, potential: &eff.alpha, mixed };
    let mut t = Vec::new();
    level.push_entries(1.0, &|s| s, &mut t);
    let mut diag = patch.v_eff();
    if let Some(e) = electric {
        for (d, v) in diag.iter_mut().zip(e) {
            *d += v;
        }
    }
    for (i, &v) in diag.iter().enumerate() {
        t.push((i, i, C64::new(v, 0.0)));
    }
    let matrix = CsrMatrix::from_triplets(n, t);
    let lower = lower_bound(&matrix, mixed, min(&diag));
    finish(
        matrix,
        w,
        DofMap { chart: patch.grid.clone(), transverse_nodes: None },
        OperatorMeta { kind: OperatorKind::HEff, renormalized: false, epsilon: None, geometry: patch.id.clone(), field: String::new() },
        lower,
    )
}

/// Explicit constants of the comparison operators `H₀^±`.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonConstants {
    pub epsilon: f64,
    /// `C_± = (1 ± ε/ρ_m)²`.
    pub c_plus: f64,
    pub c_minus: f64,
    /// `𝒞_± = (1 ± ε) C_∓⁻¹`.
    pub script_plus: f64,
    pub script_minus: f64,
    pub script_zero: f64,
    pub sup_v1: f64,
    pub sup_v_surface: f64,
    pub sup_v2_minus_v_eff: f64,
    pub sup_v_eff: f64,
    /// `sup A′_μ g^{μν} A′_ν`.
    pub sup_remainder: f64,
    /// Lattice version of the remainder term: the largest per-node sum of
    /// `c_e |e^{iθ_e} − e^{iθ_e^{eff}}|² / (ε² w)` over incident edges.
    pub sup_remainder_lattice: f64,
    /// `sup |W∘𝓛 − W(·, 0)|`, zero without an electric potential.
    pub sup_electric_variation: f64,
}

impl ComparisonConstants {
    pub fn compute(
        patch: &HypersurfacePatch,
        layer: &LayerGeometry,
        pot: &GaugeFixedPotential,
        electric: Option<(&[f64], &[f64])>,
    ) -> Self {
        let eps = layer.epsilon;
        let r = eps / patch.rho_m;
        let c_plus = (1.0 + r) * (1.0 + r);
        let c_minus = (1.0 - r) * (1.0 - r);
        let script_plus = (1.0 + eps) / c_minus;
        let script_minus = (1.0 - eps) / c_plus;
        let grids = potential_grids(patch, layer);
        let m = layer.m_u();
        let lattice = lattice_remainder(patch, layer, pot);
        let sup_electric_variation = match electric {
            Some((full, trace)) => full.iter().enumerate().map(|(i, v)| (v - trace[i / m]).abs()).fold(0.0, f64::max),
            None => 0.0,
        };
        let sup_v1 = grids.sup_v1();
        let sup_v_surface = grids.sup_v_surface();
        let sup_v2_minus_v_eff = grids.sup_v2_minus_v_eff();
        let sup_v_eff = grids.sup_v_eff();
        let remainder = (pot.remainder_sup / c_minus).max(lattice);
        let script_zero = (sup_v1 / c_minus).max(sup_v_surface)
            + sup_v2_minus_v_eff
            + (eps + eps * eps) * remainder
            + (script_plus - 1.0).abs().max((script_minus - 1.0).abs()) * sup_v_eff
            + sup_electric_variation;
        ComparisonConstants {
            epsilon: eps,
            c_plus,
            c_minus,
            script_plus,
            script_minus,
            script_zero,
            sup_v1,
            sup_v_surface,
            sup_v2_minus_v_eff,
            sup_v_eff,
            sup_remainder: pot.remainder_sup,
            sup_remainder_lattice: lattice,
            sup_electric_variation,
        }
    }

    pub fn script(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Plus => self.script_plus,
            Sign::Minus => self.script_minus,
        }
    }
}

fn lattice_remainder(patch: &HypersurfacePatch, layer: &LayerGeometry, pot: &GaugeFixedPotential) -> f64 {
    if pot.remainder_sup == 0.0 {
        return 0.0;
    }
    let n = patch.len();
    let m = layer.m_u();
    let eps = layer.epsilon;
    let w = patch.weights();
    let coeff_eff = surface_coefficients(patch);
    let trace_level = SurfaceLevel { grid: &patch.grid, coeff: &coeff_eff, weights: &w, potential: &pot.trace, mixed: false };
    let eff_edges = trace_level.edges();
    let mut sup: f64 = 0.0;
    for j in 0..m {
        let coeff = layer_coefficients(patch, layer, j);
        let p: Vec<[f64; 2]> = (0..n).map(|s| pot.tangential[s * m + j]).collect();
        let level = SurfaceLevel { grid: &patch.grid, coeff: &coeff, weights: &w, potential: &p, mixed: false };
        let mut acc = vec![0.0; n];
        for (e, ee) in level.edges().iter().zip(&eff_edges) {
            if let Some(b) = e.b {
                let d = 2.0 * (0.5 * (e.theta - ee.theta)).sin();
                acc[b] += e.c * d * d / (eps * eps);
            }
        }
        for s in 0..n {
            sup = sup.max(acc[s] / w[s]);
        }
    }
    sup
}

/// `H₀^± = 𝒞_±(h_eff ⊗ 1) − ε⁻²∂_u² ± 𝒞₀` on the dof map of the full
/// operator, with the surface-trace potential in every transverse level.
pub fn assemble_comparison(
    patch: &HypersurfacePatch,
    layer: &LayerGeometry,
    pot: &GaugeFixedPotential,
    sign: Sign,
    electric: Option<(&[f64], &[f64])>,
) -> Result<(AssembledOperator, ComparisonConstants), AssemblyError> {
    check_layer(patch, layer, pot)?;
    let consts = ComparisonConstants::compute(patch, layer, pot, electric);
    let c0 = consts.script_zero;
    if !(c0.is_finite() && c0 >= 0.0) {
        return Err(AssemblyError::BadComparisonConstant(c0));
    }
    let n = patch.len();
    let m = layer.m_u();
    let eps = layer.epsilon;
    let scale = consts.script(sign);
    let coeff = surface_coefficients(patch);
    let w = patch.weights();
    let mixed = needs_mixed(&coeff, patch.sdim());
    let level = SurfaceLevel { grid: &patch.grid, coeff: &coeff, weights: &w, potential: &pot.trace, mixed };
    let mut t = Vec::new();
    for j in 0..m {
        level.push_entries(scale, &|s| s * m + j, &mut t);
    }
    push_transverse(n, layer, 1.0 / (eps * eps), &mut t);
    let mut v_eff = patch.v_eff();
    if let Some((_, trace)) = electric {
        for (d, v) in v_eff.iter_mut().zip(trace) {
            *d += v;
        }
    }
    let shift = match sign {
        Sign::Plus => c0,
        Sign::Minus => -c0,
    };
    let mut diag = Vec::with_capacity(n * m);
    for s in 0..n {
        for _ in 0..m {
            diag.push(scale * v_eff[s] + shift);
        }
    }
    for (i, &v) in diag.iter().enumerate() {
        t.push((i, i, C64::new(v, 0.0)));
    }
    let matrix = CsrMatrix::from_triplets(n * m, t);
    let lower = lower_bound(&matrix, mixed, min(&diag) + crate::E1 / (eps * eps));
    let kind = match sign {
        Sign::Plus => OperatorKind::ComparisonPlus,
        Sign::Minus => OperatorKind::ComparisonMinus,
    };
    let op = finish(
        matrix,
        layer_weights(&w, layer),
        DofMap { chart: patch.grid.clone(), transverse_nodes: Some(m) },
        OperatorMeta { kind, renormalized: false, epsilon: Some(eps), geometry: patch.id.clone(), field: String::new() },
        lower,
    )?;
    Ok((op, consts))
}

/// Subtract `ε⁻² E₁` from the diagonal.
pub fn renormalize(op: AssembledOperator) -> Result<AssembledOperator, AssemblyError> {
    if op.meta.renormalized {
        return Err(AssemblyError::AlreadyRenormalized);
    }
    let eps = match (op.meta.kind, op.meta.epsilon) {
        (OperatorKind::HEff, _) | (_, None) => return Err(AssemblyError::NotRenormalizable),
        (_, Some(e)) => e,
    };
    let shift = crate::E1 / (eps * eps);
    let matrix = op.matrix.shifted(-shift);
    let mut meta = op.meta.clone();
    meta.renormalized = true;
    Ok(AssembledOperator {
        matrix,
        weights: op.weights,
        dofs: op.dofs,
        meta,
        lower_bound: op.lower_bound - shift,
        hermitian_residual: op.hermitian_residual,
        cache: Mutex::new(Vec::new()),
    })
}

/// Attach a field label to operator metadata.
pub fn with_field_label(mut op: AssembledOperator, field: &str) -> AssembledOperator {
    op.meta.field = field.to_string();
    op
}
