//! Sampled hypersurfaces, their curvature data, and the ε-dependent layer
//! geometry around them.

mod embedding;
mod family;
pub mod grid;
mod layer;
mod sampled;
mod transverse;

pub use embedding::{check_embedding, check_embedding_with_margin, EmbeddingDiagnosis, OffendingPair};
pub use family::{GeometryFamily, Jet};
pub use grid::{BoundaryKind, ChartAxis, ChartGrid, Closure, Step};
pub use layer::{layer_geometry, LayerGeometry};
pub use sampled::{RefinementReport, SampledClosure, SampledSurface};
pub use transverse::TransverseGrid;

use serde::Serialize;
use thiserror::Error;

use crate::small::{self, M2, V3};
use grid::diff_grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("chart axis {axis} has {nodes} nodes, at least 8 are required")]
    GridTooSmall { axis: usize, nodes: usize },
    #[error("expected {expected} grid sizes, got {got}")]
    GridShape { expected: usize, got: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("degenerate parametrization at node {node:?}: |g| = {det:e}")]
    Degenerate { node: [usize; 2], det: f64 },
    #[error("normal flips between nodes {a:?} and {b:?}: surface is not orientable on this chart")]
    NonOrientable { a: [usize; 2], b: [usize; 2] },
    #[error("bad sampled geometry: {0}")]
    SampleShape(String),
    #[error("ε ≥ ρ_m (ε = {epsilon}, ρ_m = {rho_m})")]
    RadiusCondition { epsilon: f64, rho_m: f64 },
    #[error("layer factor 1 − εuκ_{mu} = {value:e} ≤ 0 at node {node:?}, u = {u}")]
    FactorNonPositive { node: [usize; 2], mu: usize, u: f64, value: f64 },
    #[error("transverse node count {0} must be odd and positive")]
    TransverseNodes(usize),
    #[error("half-width ε must be positive, got {0}")]
    NonPositiveEpsilon(f64),
}

/// Sampled chart of Σ with first and second fundamental form data.
///
/// Tensors use the padded 2×2 layout of [`crate::small`] and curvature
/// arrays hold `d − 1` meaningful entries.
#[derive(Clone, Debug)]
pub struct HypersurfacePatch {
    pub id: String,
    /// Ambient dimension d.
    pub dim: usize,
    pub grid: ChartGrid,
    pub positions: Vec<V3>,
    pub tangents: Vec<[V3; 2]>,
    pub normals: Vec<V3>,
    pub metric: Vec<M2>,
    pub metric_inv: Vec<M2>,
    pub sqrt_det_g: Vec<f64>,
    /// `h_μν = n · x_μν`.
    pub second_form: Vec<M2>,
    /// `L = g⁻¹ h`.
    pub weingarten: Vec<M2>,
    /// Principal curvatures, ascending.
    pub kappa: Vec<[f64; 2]>,
    pub mean_curvatures: Vec<[f64; 2]>,
    pub rho_m: f64,
}

impl HypersurfacePatch {
    /// Surface dimension d − 1.
    pub fn sdim(&self) -> usize {
        self.dim - 1
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn kappa_list(&self, s: usize) -> &[f64] {
        &self.kappa[s][..self.sdim()]
    }

    /// Quadrature weights `|g|^{1/2} h₁ [h₂]` of the surface measure.
    pub fn weights(&self) -> Vec<f64> {
        let cell = self.grid.cell();
        self.sqrt_det_g.iter().map(|w| w * cell).collect()
    }

    pub fn v_eff(&self) -> Vec<f64> {
        (0..self.len()).map(|s| v_eff(self.kappa_list(s))).collect()
    }
}

/// Build the patch for a family on a grid with the given node counts.
pub fn build_patch(family: &GeometryFamily, sizes: &[usize]) -> Result<HypersurfacePatch, GeometryError> {
    family.validate()?;
    let grid = family.chart(sizes)?;
    let dim = family.dim();
    let n = grid.len();
    let (xs, dxs, ddxs): (Vec<V3>, Vec<[V3; 2]>, Vec<[[V3; 2]; 2]>) = match family {
        GeometryFamily::UserSampled(s) => {
            let jets = s.jets();
            (s.positions.clone(), jets.dx, jets.ddx)
        }
        _ => {
            let mut xs = Vec::with_capacity(n);
            let mut dxs = Vec::with_capacity(n);
            let mut ddxs = Vec::with_capacity(n);
            for s in 0..n {
                let j = family.jet(grid.coords(s));
                xs.push(j.x);
                dxs.push(j.dx);
                ddxs.push(j.ddx);
            }
            (xs, dxs, ddxs)
        }
    };
    let mut patch = HypersurfacePatch {
        id: family.id(),
        dim,
        grid,
        positions: xs,
        tangents: dxs,
        normals: Vec::with_capacity(n),
        metric: Vec::with_capacity(n),
        metric_inv: Vec::with_capacity(n),
        sqrt_det_g: Vec::with_capacity(n),
        second_form: Vec::with_capacity(n),
        weingarten: Vec::with_capacity(n),
        kappa: Vec::with_capacity(n),
        mean_curvatures: Vec::with_capacity(n),
        rho_m: f64::INFINITY,
    };
    let k = dim - 1;
    let mut kmax: f64 = 0.0;
    for s in 0..n {
        let t = patch.tangents[s];
        let (normal, g) = if dim == 2 {
            let len = small::norm3(&t[0]);
            ([-t[0][1] / len, t[0][0] / len, 0.0], [[small::dot3(&t[0], &t[0]), 0.0], [0.0, 1.0]])
        } else {
            let c = small::cross3(&t[0], &t[1]);
            let len = small::norm3(&c);
            let g01 = small::dot3(&t[0], &t[1]);
            (small::scale3(&c, 1.0 / len), [[small::dot3(&t[0], &t[0]), g01], [g01, small::dot3(&t[1], &t[1])]])
        };
        let det = small::det2(&g);
        if !(det >= 1e-14) || normal.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Degenerate { node: patch.grid.multi(s), det });
        }
        let mut h = small::ZERO2;
        for a in 0..k {
            for b in 0..k {
                h[a][b] = small::dot3(&normal, &ddxs[s][a][b]);
            }
        }
        if k == 2 {
            let sym = 0.5 * (h[0][1] + h[1][0]);
            h[0][1] = sym;
            h[1][0] = sym;
        }
        let ginv = small::inv2(&g);
        let l = small::mul2(&ginv, &h);
        let kap = if k == 1 { [l[0][0], 0.0] } else { small::eig2_real(&l) };
        for &kv in &kap[..k] {
            kmax = kmax.max(kv.abs());
        }
        let mc = mean_curvatures(&kap[..k]);
        let mut mca = [0.0; 2];
        mca[..k].copy_from_slice(&mc);
        patch.normals.push(normal);
        patch.metric.push(g);
        patch.metric_inv.push(ginv);
        patch.sqrt_det_g.push(det.sqrt());
        patch.second_form.push(h);
        patch.weingarten.push(l);
        patch.kappa.push(kap);
        patch.mean_curvatures.push(mca);
    }
    patch.rho_m = if kmax > 0.0 { 1.0 / kmax } else { f64::INFINITY };
    if matches!(family, GeometryFamily::UserSampled(_)) {
        check_orientation(&patch)?;
    }
    Ok(patch)
}

fn check_orientation(patch: &HypersurfacePatch) -> Result<(), GeometryError> {
    for s in 0..patch.len() {
        for axis in 0..patch.grid.dim() {
            if let Step::Node(t) = patch.grid.step(s, axis, true) {
                if small::dot3(&patch.normals[s], &patch.normals[t]) < 0.0 {
                    return Err(GeometryError::NonOrientable { a: patch.grid.multi(s), b: patch.grid.multi(t) });
                }
            }
        }
    }
    Ok(())
}

/// Elementary symmetric functions of `kappa` normalized by binomials:
/// `K_k = σ_k(κ) / C(n, k)`, `k = 1..n`.
pub fn mean_curvatures(kappa: &[f64]) -> Vec<f64> {
    let n = kappa.len();
    let mut sigma = vec![0.0; n + 1];
    sigma[0] = 1.0;
    for &k in kappa {
        for j in (1..=n).rev() {
            sigma[j] += k * sigma[j - 1];
        }
    }
    let mut binom = 1.0;
    (1..=n)
        .map(|k| {
            binom = binom * (n + 1 - k) as f64 / k as f64;
            sigma[k] / binom
        })
        .collect()
}

/// Geometric potential `−½Σκ² + ¼(Σκ)²` for any number of curvatures.
pub fn v_eff(kappa: &[f64]) -> f64 {
    let s: f64 = kappa.iter().sum();
    let q: f64 = kappa.iter().map(|k| k * k).sum();
    -0.5 * q + 0.25 * s * s
}

/// Dimension-specific closed forms of [`v_eff`]: `−¼κ²` for curves and
/// `−¼(κ₁ − κ₂)²` for surfaces.
pub fn v_eff_reduced(kappa: &[f64]) -> f64 {
    match kappa {
        [k] => -0.25 * k * k,
        [a, b] => -0.25 * (a - b) * (a - b),
        _ => v_eff(kappa),
    }
}

/// Sup-norms of `|∇_g κ_μ|_g` and `Δ_g κ_μ` from second-order differences.
#[derive(Clone, Debug, Serialize)]
pub struct CurvatureRegularity {
    pub sup_grad_kappa: Vec<f64>,
    pub sup_laplace_kappa: Vec<f64>,
}

pub fn curvature_regularity(patch: &HypersurfacePatch) -> CurvatureRegularity {
    let k = patch.sdim();
    let grid = &patch.grid;
    let mut sup_grad = vec![0.0f64; k];
    let mut sup_lap = vec![0.0f64; k];
    for m in 0..k {
        let f: Vec<f64> = patch.kappa.iter().map(|v| v[m]).collect();
        let d: Vec<Vec<f64>> = (0..k).map(|a| diff_grid(grid, &f, a, 1, 2)).collect();
        let mut lap = vec![0.0; f.len()];
        for a in 0..k {
            let flux: Vec<f64> = (0..f.len())
                .map(|s| {
                    let gi = &patch.metric_inv[s];
                    patch.sqrt_det_g[s] * (0..k).map(|b| gi[a][b] * d[b][s]).sum::<f64>()
                })
                .collect();
            let div = diff_grid(grid, &flux, a, 1, 2);
            for s in 0..f.len() {
                lap[s] += div[s] / patch.sqrt_det_g[s];
            }
        }
        for s in 0..f.len() {
            let gi = &patch.metric_inv[s];
            let mut g2 = 0.0;
            for a in 0..k {
                for b in 0..k {
                    g2 += d[a][s] * gi[a][b] * d[b][s];
                }
            }
            sup_grad[m] = sup_grad[m].max(g2.max(0.0).sqrt());
            sup_lap[m] = sup_lap[m].max(lap[s].abs());
        }
    }
    CurvatureRegularity { sup_grad_kappa: sup_grad, sup_laplace_kappa: sup_lap }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn circle_curvature() {
        let p = build_patch(&GeometryFamily::Circle { radius: 1.0 }, &[32]).unwrap();
        for s in 0..p.len() {
            assert!((p.kappa[s][0] - 1.0).abs() < 1e-14);
            assert!((small::norm3(&p.normals[s]) - 1.0).abs() < 1e-12);
        }
        assert!((p.rho_m - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_mean_curvatures() {
        let p = build_patch(&GeometryFamily::FullSphere { radius: 2.0 }, &[16, 32]).unwrap();
        for s in 0..p.len() {
            assert!((p.kappa[s][0] - 0.5).abs() < 1e-13 && (p.kappa[s][1] - 0.5).abs() < 1e-13, "{s} {:?}", p.kappa[s]);
            assert!((p.mean_curvatures[s][0] - 0.5).abs() < 1e-13);
            assert!((p.mean_curvatures[s][1] - 0.25).abs() < 1e-13);
        }
    }

    #[test]
    fn v_eff_examples() {
        assert_eq!(v_eff(&[1.0]), -0.25);
        assert_eq!(v_eff(&[0.5, 0.5]), 0.0);
        assert!((v_eff(&[0.5, 0.0]) + 0.0625).abs() < 1e-16);
    }

    #[test]
    fn flat_patch_has_infinite_radius() {
        let p = build_patch(&GeometryFamily::PlaneRectangle { lx: 1.0, ly: 2.0 }, &[8, 8]).unwrap();
        assert!(p.rho_m.is_infinite());
    }

    #[test]
    fn small_grids_rejected() {
        let e = build_patch(&GeometryFamily::Circle { radius: 1.0 }, &[7]).unwrap_err();
        assert!(matches!(e, GeometryError::GridTooSmall { .. }));
    }

    proptest! {
        #[test]
        fn v_eff_forms_agree(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let scale = 1.0 + a * a + b * b;
            prop_assert!((v_eff(&[a]) - v_eff_reduced(&[a])).abs() <= 1e-14 * scale);
            prop_assert!((v_eff(&[a, b]) - v_eff_reduced(&[a, b])).abs() <= 1e-14 * scale);
        }

        #[test]
        fn mean_curvatures_are_symmetric_functions(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let k = mean_curvatures(&[a, b, c]);
            prop_assert!((k[0] - (a + b + c) / 3.0).abs() < 1e-12);
            prop_assert!((k[1] - (a * b + b * c + a * c) / 3.0).abs() < 1e-12);
            prop_assert!((k[2] - a * b * c).abs() < 1e-12);
        }
    }
}
