use crate::geometry::grid::diff_grid;
use crate::geometry::{v_eff, HypersurfacePatch, LayerGeometry};

/// Scalar potentials of the transformed operator on the layer grid
/// (index `s * m_u + j`) and the effective potential per surface node.
#[derive(Clone, Debug)]
pub struct PotentialGrids {
    /// `V = V_surf + V₂`.
    pub v: Vec<f64>,
    /// `|g|^{-1/2}∂_μ(|g|^{1/2}G^{μν}∂_νJ) + ∂_μJ G^{μν} ∂_νJ`.
    pub v_surface: Vec<f64>,
    /// `Δ_g J + |∇_g J|²_g`.
    pub v1: Vec<f64>,
    /// `ε⁻²(∂_u²J + (∂_uJ)²)` from the closed form in κ.
    pub v2: Vec<f64>,
    pub v_eff: Vec<f64>,
}

impl PotentialGrids {
    pub fn sup_v1(&self) -> f64 {
        sup_abs(&self.v1)
    }

    pub fn sup_v_surface(&self) -> f64 {
        sup_abs(&self.v_surface)
    }

    pub fn sup_v2_minus_v_eff(&self) -> f64 {
        let m = self.v2.len() / self.v_eff.len();
        self.v2.iter().enumerate().map(|(i, v)| (v - self.v_eff[i / m]).abs()).fold(0.0, f64::max)
    }

    pub fn sup_v_eff(&self) -> f64 {
        sup_abs(&self.v_eff)
    }
}

pub(crate) fn sup_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `−½Σκ²/(1−εuκ)² + ¼(Σκ/(1−εuκ))²` at one point.
pub fn v2_pointwise(kappa: &[f64], epsilon: f64, u: f64) -> f64 {
    let r: Vec<f64> = kappa.iter().map(|k| k / (1.0 - epsilon * u * k)).collect();
    v_eff(&r)
}

/// `|g|^{-1/2} ∂_μ(|g|^{1/2} a^{μν} ∂_ν f) + ∂_μ f a^{μν} ∂_ν f` per level,
/// with `a` either the layer metric `G⁻¹` or the surface metric `g⁻¹`.
fn divergence_terms(patch: &HypersurfacePatch, layer: &LayerGeometry, use_layer_metric: bool) -> Vec<f64> {
    let k = patch.sdim();
    let n = patch.len();
    let m = layer.m_u();
    let mut out = vec![0.0; n * m];
    for j in 0..m {
        let inv = |s: usize| if use_layer_metric { &layer.metric_inv[s * m + j] } else { &patch.metric_inv[s] };
        let dj = |s: usize| layer.dj_dx[s * m + j];
        for a in 0..k {
            let flux: Vec<f64> = (0..n)
                .map(|s| patch.sqrt_det_g[s] * (0..k).map(|b| inv(s)[a][b] * dj(s)[b]).sum::<f64>())
                .collect();
            let div = diff_grid(&patch.grid, &flux, a, 1, 2);
            for s in 0..n {
                out[s * m + j] += div[s] / patch.sqrt_det_g[s];
            }
        }
        for s in 0..n {
            let mut q = 0.0;
            for a in 0..k {
                for b in 0..k {
                    q += dj(s)[a] * inv(s)[a][b] * dj(s)[b];
                }
            }
            out[s * m + j] += q;
        }
    }
    out
}

pub fn potential_grids(patch: &HypersurfacePatch, layer: &LayerGeometry) -> PotentialGrids {
    let n = patch.len();
    let m = layer.m_u();
    let flat = patch.rho_m.is_infinite();
    let v_eff_grid = patch.v_eff();
    let mut v2 = vec![0.0; n * m];
    for s in 0..n {
        for (j, &u) in layer.transverse.nodes.iter().enumerate() {
            v2[s * m + j] = v2_pointwise(patch.kappa_list(s), layer.epsilon, u);
        }
    }
    let (v_surface, v1) = if flat {
        (vec![0.0; n * m], vec![0.0; n * m])
    } else {
        (divergence_terms(patch, layer, true), divergence_terms(patch, layer, false))
    };
    let v = v_surface.iter().zip(&v2).map(|(a, b)| a + b).collect();
    PotentialGrids { v, v_surface, v1, v2, v_eff: v_eff_grid }
}
