//! Pull-back of the ambient vector potential to layer coordinates, the
//! transverse gauge fix, and the effective surface field.

mod fields;

pub use fields::{AmbientField, Monomial, Polynomial, SampledGrid, ScalarPotential, VectorPotential};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::grid::{diff_grid, diff_line, ChartAxis, ChartGrid};
use crate::geometry::{HypersurfacePatch, LayerGeometry, TransverseGrid};
use crate::small::{self, V3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MagneticsError {
    #[error("sampled field is undefined at ambient point {point:?}")]
    OutsideSample { point: V3 },
    #[error("electric potential is singular at ambient point {point:?}")]
    SingularPotential { point: V3 },
    #[error("bad sampled field: {0}")]
    SampleShape(String),
    #[error("layer has {layer} surface nodes but the patch has {patch}")]
    Mismatch { layer: usize, patch: usize },
}

/// `Ã_i = (∂y^j/∂x^i) A_j(𝓛(x,u))` on the layer grid, index `s * m_u + j`.
#[derive(Clone, Debug)]
pub struct RawPotential {
    pub epsilon: f64,
    pub sdim: usize,
    pub chart: ChartGrid,
    pub transverse_grid: TransverseGrid,
    pub tangential: Vec<[f64; 2]>,
    /// `Ã_d`, the component along `∂/∂u`.
    pub transverse: Vec<f64>,
}

/// Potential in the gauge `Ã_d = 0`.
#[derive(Clone, Debug)]
pub struct GaugeFixedPotential {
    pub epsilon: f64,
    pub sdim: usize,
    pub chart: ChartGrid,
    pub transverse_grid: TransverseGrid,
    pub tangential: Vec<[f64; 2]>,
    /// Identically zero when produced by [`gauge_fix`]; assembly rejects
    /// anything else.
    pub transverse: Vec<f64>,
    /// `Ã_μ(x, 0)` per surface node.
    pub trace: Vec<[f64; 2]>,
    /// `A′ = (Ã(x,u) − Ã(x,0)) / ε`.
    pub remainder: Vec<[f64; 2]>,
    /// `sup A′_μ g^{μν} A′_ν` over the layer grid.
    pub remainder_sup: f64,
}

impl GaugeFixedPotential {
    pub fn as_raw(&self) -> RawPotential {
        RawPotential {
            epsilon: self.epsilon,
            sdim: self.sdim,
            chart: self.chart.clone(),
            transverse_grid: self.transverse_grid.clone(),
            tangential: self.tangential.clone(),
            transverse: self.transverse.clone(),
        }
    }
}

/// Ambient point `𝓛(x_s, u_j)` and the columns of `D𝓛` there.
pub(crate) fn layer_frame(patch: &HypersurfacePatch, eps: f64, s: usize, u: f64) -> (V3, [V3; 2], V3) {
    let k = patch.sdim();
    let x = &patch.positions[s];
    let n = &patch.normals[s];
    let t = &patch.tangents[s];
    let l = &patch.weingarten[s];
    let y = small::axpy3(eps * u, n, x);
    let mut cols = [[0.0; 3]; 2];
    for mu in 0..k {
        let mut c = t[mu];
        for rho in 0..k {
            c = small::axpy3(-eps * u * l[rho][mu], &t[rho], &c);
        }
        cols[mu] = c;
    }
    (y, cols, small::scale3(n, eps))
}

pub fn pullback(
    field: &AmbientField,
    layer: &LayerGeometry,
    patch: &HypersurfacePatch,
) -> Result<RawPotential, MagneticsError> {
    if layer.n_surface != patch.len() {
        return Err(MagneticsError::Mismatch { layer: layer.n_surface, patch: patch.len() });
    }
    let k = patch.sdim();
    let mu_n = layer.m_u();
    let eps = layer.epsilon;
    let mut tangential = vec![[0.0; 2]; layer.len()];
    let mut transverse = vec![0.0; layer.len()];
    if !field.is_zero() {
        for s in 0..patch.len() {
            for (j, &u) in layer.transverse.nodes.iter().enumerate() {
                let (y, cols, du) = layer_frame(patch, eps, s, u);
                let a = field.vector_potential(&y)?;
                let i = s * mu_n + j;
                for m in 0..k {
                    tangential[i][m] = small::dot3(&cols[m], &a);
                }
                transverse[i] = small::dot3(&du, &a);
            }
        }
    }
    Ok(RawPotential {
        epsilon: eps,
        sdim: k,
        chart: patch.grid.clone(),
        transverse_grid: layer.transverse.clone(),
        tangential,
        transverse,
    })
}

/// `∫₀^{u_j} f du` for every node, from samples `f` on the transverse grid.
///
/// Composite Simpson from the centre node outward, with a closing 3/8 panel
/// for odd panel counts; a single panel uses the three-point rule through
/// the neighbour on the far side. All rules are exact for quadratics.
pub fn antiderivative_from_center(f: &[f64], h: f64, c: usize) -> Vec<f64> {
    let m = f.len();
    let mut out = vec![0.0; m];
    for (j, o) in out.iter_mut().enumerate() {
        if j == c {
            continue;
        }
        let fwd = j > c;
        let k = if fwd { j - c } else { c - j };
        let at = |i: usize| -> f64 { if fwd { f[c + i] } else { f[c - i] } };
        let val = if k == 1 {
            let far = if fwd { f[c - 1] } else { f[c + 1] };
            h / 12.0 * (-far + 8.0 * at(0) + 5.0 * at(1))
        } else {
            let simpson_panels = if k % 2 == 0 { k } else { k - 3 };
            let mut acc = 0.0;
            let mut i = 0;
            while i < simpson_panels {
                acc += h / 3.0 * (at(i) + 4.0 * at(i + 1) + at(i + 2));
                i += 2;
            }
            if k % 2 == 1 {
                acc += 3.0 * h / 8.0 * (at(i) + 3.0 * at(i + 1) + 3.0 * at(i + 2) + at(i + 3));
            }
            acc
        };
        *o = if fwd { val } else { -val };
    }
    out
}

pub fn gauge_fix(raw: &RawPotential, patch: &HypersurfacePatch) -> GaugeFixedPotential {
    let k = raw.sdim;
    let tg = &raw.transverse_grid;
    let m = tg.m;
    let n = raw.chart.len();
    let mut integral = vec![0.0; n * m];
    for s in 0..n {
        let col = &raw.transverse[s * m..(s + 1) * m];
        if col.iter().all(|v| *v == 0.0) {
            continue;
        }
        let f = antiderivative_from_center(col, tg.h, tg.center);
        integral[s * m..(s + 1) * m].copy_from_slice(&f);
    }
    let mut tangential = raw.tangential.clone();
    if integral.iter().any(|v| *v != 0.0) {
        for j in 0..m {
            let level: Vec<f64> = (0..n).map(|s| integral[s * m + j]).collect();
            for a in 0..k {
                let d = diff_grid(&raw.chart, &level, a, 1, 2);
                for s in 0..n {
                    tangential[s * m + j][a] -= d[s];
                }
            }
        }
    }
    let trace: Vec<[f64; 2]> = (0..n).map(|s| tangential[s * m + tg.center]).collect();
    let mut remainder = vec![[0.0; 2]; n * m];
    let mut sup: f64 = 0.0;
    for s in 0..n {
        let gi = &patch.metric_inv[s];
        for j in 0..m {
            let i = s * m + j;
            let mut r = [0.0; 2];
            for a in 0..k {
                r[a] = (tangential[i][a] - trace[s][a]) / raw.epsilon;
            }
            let mut q = 0.0;
            for a in 0..k {
                for b in 0..k {
                    q += r[a] * gi[a][b] * r[b];
                }
            }
            sup = sup.max(q);
            remainder[i] = r;
        }
    }
    GaugeFixedPotential {
        epsilon: raw.epsilon,
        sdim: k,
        chart: raw.chart.clone(),
        transverse_grid: tg.clone(),
        tangential,
        transverse: vec![0.0; n * m],
        trace,
        remainder,
        remainder_sup: sup,
    }
}

/// Components of the discrete 2-form `β = dα` on the layer grid:
/// `[β₁₂, β₁u, β₂u]` with `β_μu = ∂_μÃ_u − ∂_uÃ_μ` (curves use only `β₁u`).
pub fn two_form(raw: &RawPotential) -> Vec<[f64; 3]> {
    let k = raw.sdim;
    let m = raw.transverse_grid.m;
    let n = raw.chart.len();
    let mut out = vec![[0.0; 3]; n * m];
    let u_axis = ChartAxis::dirichlet(-1.0, 1.0, m);
    for j in 0..m {
        let comp = |a: usize| -> Vec<f64> { (0..n).map(|s| raw.tangential[s * m + j][a]).collect() };
        let au: Vec<f64> = (0..n).map(|s| raw.transverse[s * m + j]).collect();
        if k == 2 {
            let d1a2 = diff_grid(&raw.chart, &comp(1), 0, 1, 2);
            let d2a1 = diff_grid(&raw.chart, &comp(0), 1, 1, 2);
            for s in 0..n {
                out[s * m + j][0] = d1a2[s] - d2a1[s];
            }
        }
        for a in 0..k {
            let d = diff_grid(&raw.chart, &au, a, 1, 2);
            for s in 0..n {
                out[s * m + j][1 + a] += d[s];
            }
        }
    }
    if m >= 3 {
        for s in 0..n {
            for a in 0..k {
                let line: Vec<f64> = (0..m).map(|j| raw.tangential[s * m + j][a]).collect();
                let d = diff_line(&u_axis, &line, 1, 2);
                for j in 0..m {
                    out[s * m + j][1 + a] -= d[j];
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveField {
    pub dim: usize,
    /// `α_eff,μ = x_μ · A(x)` per surface node.
    pub alpha: Vec<[f64; 2]>,
    /// Surfaces: `n · B` at each node.
    pub b_eff: Option<Vec<f64>>,
    /// Surfaces: `β̃₁₂ |g|^{-1/2}` with `β̃` from the transformation rule
    /// `γ̃ = det(M) M⁻¹ γ`, `M = [x₁, x₂, n]`.
    pub b_eff_transformed: Option<Vec<f64>>,
    /// Surfaces: discrete curl of `α_eff` divided by `|g|^{1/2}`.
    pub b_eff_curl: Option<Vec<f64>>,
    /// Closed curves: `∮ α_eff` by the trapezoid rule.
    pub flux: Option<f64>,
    /// Open curves: the magnetic term can be removed by a gauge change.
    pub gauged_out: bool,
}

pub fn effective_field(field: &AmbientField, patch: &HypersurfacePatch) -> Result<EffectiveField, MagneticsError> {
    let n = patch.len();
    let k = patch.sdim();
    let mut alpha = vec![[0.0; 2]; n];
    for s in 0..n {
        let a = field.vector_potential(&patch.positions[s])?;
        for m in 0..k {
            alpha[s][m] = small::dot3(&patch.tangents[s][m], &a);
        }
    }
    let mut eff = EffectiveField {
        dim: patch.dim,
        alpha,
        b_eff: None,
        b_eff_transformed: None,
        b_eff_curl: None,
        flux: None,
        gauged_out: false,
    };
    if patch.dim == 3 {
        let mut direct = Vec::with_capacity(n);
        let mut transformed = Vec::with_capacity(n);
        for s in 0..n {
            let b = field.magnetic_field(&patch.positions[s])?;
            let nn = &patch.normals[s];
            direct.push(small::dot3(nn, &b));
            let t = &patch.tangents[s];
            let det = small::det3_cols(&t[0], &t[1], nn);
            let coeff = small::solve3_cols(&t[0], &t[1], nn, &b);
            transformed.push(det * coeff[2] / patch.sqrt_det_g[s]);
        }
        let a1: Vec<f64> = eff.alpha.iter().map(|v| v[0]).collect();
        let a2: Vec<f64> = eff.alpha.iter().map(|v| v[1]).collect();
        let d1a2 = diff_grid(&patch.grid, &a2, 0, 1, 2);
        let d2a1 = diff_grid(&patch.grid, &a1, 1, 1, 2);
        let curl = (0..n).map(|s| (d1a2[s] - d2a1[s]) / patch.sqrt_det_g[s]).collect();
        eff.b_eff = Some(direct);
        eff.b_eff_transformed = Some(transformed);
        eff.b_eff_curl = Some(curl);
    } else if patch.grid.axes[0].is_periodic() {
        let h = patch.grid.axes[0].spacing;
        eff.flux = Some(eff.alpha.iter().map(|v| v[0] * h).sum());
    } else {
        eff.gauged_out = true;
    }
    Ok(eff)
}

/// `W(𝓛(x, u))` on the layer grid, or `None` without an electric potential.
pub fn electric_layer(
    field: &AmbientField,
    layer: &LayerGeometry,
    patch: &HypersurfacePatch,
) -> Result<Option<Vec<f64>>, MagneticsError> {
    if field.electric.is_none() {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(layer.len());
    for s in 0..patch.len() {
        for &u in &layer.transverse.nodes {
            let y = small::axpy3(layer.epsilon * u, &patch.normals[s], &patch.positions[s]);
            out.push(field.electric_potential(&y)?.unwrap_or(0.0));
        }
    }
    Ok(Some(out))
}

/// `W(x)` on the surface nodes, the effective electric term.
pub fn electric_trace(field: &AmbientField, patch: &HypersurfacePatch) -> Result<Option<Vec<f64>>, MagneticsError> {
    if field.electric.is_none() {
        return Ok(None);
    }
    patch
        .positions
        .iter()
        .map(|y| field.electric_potential(y).map(|v| v.unwrap_or(0.0)))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antiderivative_exact_for_quadratics() {
        for m in [3usize, 5, 7, 9, 17] {
            let t = TransverseGrid::new(m).unwrap();
            let f: Vec<f64> = t.nodes.iter().map(|u| 1.0 - 2.0 * u + 3.0 * u * u).collect();
            let a = antiderivative_from_center(&f, t.h, t.center);
            for (j, u) in t.nodes.iter().enumerate() {
                let exact = u - u * u + u * u * u;
                assert!((a[j] - exact).abs() < 1e-14, "m={m} j={j}: {} vs {exact}", a[j]);
            }
        }
    }
}
