use super::grid::diff_grid;
use super::{GeometryError, HypersurfacePatch, TransverseGrid};
use crate::small::{self, M2};

/// Layer metric data on the (chart × transverse) grid, flat index
/// `s * m_u + j`.
#[derive(Clone, Debug)]
pub struct LayerGeometry {
    pub epsilon: f64,
    pub transverse: TransverseGrid,
    pub n_surface: usize,
    pub sdim: usize,
    /// Tangential block `G_μν = g (1 − εuL)²`; `G_dd = ε²` is implicit.
    pub metric: Vec<M2>,
    pub metric_inv: Vec<M2>,
    /// `|G|^{1/2}` of the full d×d metric.
    pub sqrt_det: Vec<f64>,
    /// `J = ½ Σ ln(1 − εuκ_μ)`.
    pub jacobian: Vec<f64>,
    pub dj_du: Vec<f64>,
    pub d2j_du2: Vec<f64>,
    /// Chart derivatives of J by centered differences.
    pub dj_dx: Vec<[f64; 2]>,
    /// `1 − εuκ_μ`.
    pub factors: Vec<[f64; 2]>,
}

impl LayerGeometry {
    pub fn m_u(&self) -> usize {
        self.transverse.m
    }

    pub fn idx(&self, s: usize, j: usize) -> usize {
        s * self.transverse.m + j
    }

    pub fn len(&self) -> usize {
        self.n_surface * self.transverse.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn layer_geometry(patch: &HypersurfacePatch, epsilon: f64, m_u: usize) -> Result<LayerGeometry, GeometryError> {
    if !(epsilon > 0.0) {
        return Err(GeometryError::NonPositiveEpsilon(epsilon));
    }
    if epsilon >= patch.rho_m {
        return Err(GeometryError::RadiusCondition { epsilon, rho_m: patch.rho_m });
    }
    let tg = TransverseGrid::new(m_u)?;
    let k = patch.sdim();
    let n = patch.len();
    let total = n * m_u;
    let mut lg = LayerGeometry {
        epsilon,
        transverse: tg.clone(),
        n_surface: n,
        sdim: k,
        metric: Vec::with_capacity(total),
        metric_inv: Vec::with_capacity(total),
        sqrt_det: Vec::with_capacity(total),
        jacobian: Vec::with_capacity(total),
        dj_du: Vec::with_capacity(total),
        d2j_du2: Vec::with_capacity(total),
        dj_dx: vec![[0.0; 2]; total],
        factors: Vec::with_capacity(total),
    };
    for s in 0..n {
        let g = &patch.metric[s];
        let l = &patch.weingarten[s];
        for &u in &tg.nodes {
            let mut f = [1.0; 2];
            let (mut j, mut dj, mut d2j) = (0.0, 0.0, 0.0);
            for mu in 0..k {
                let kap = patch.kappa[s][mu];
                let v = 1.0 - epsilon * u * kap;
                if !(v > 0.0) {
                    return Err(GeometryError::FactorNonPositive { node: patch.grid.multi(s), mu, u, value: v });
                }
                f[mu] = v;
                j += 0.5 * v.ln();
                let r = epsilon * kap / v;
                dj -= 0.5 * r;
                d2j -= 0.5 * r * r;
            }
            let a = small::sub2(&small::ID2, &small::scale2(l, epsilon * u));
            let mut gm = small::mul2(g, &small::mul2(&a, &a));
            if k == 2 {
                let sym = 0.5 * (gm[0][1] + gm[1][0]);
                gm[0][1] = sym;
                gm[1][0] = sym;
            }
            lg.metric_inv.push(small::inv2(&gm));
            lg.metric.push(gm);
            lg.sqrt_det.push(epsilon * patch.sqrt_det_g[s] * f[..k].iter().product::<f64>());
            lg.jacobian.push(j);
            lg.dj_du.push(dj);
            lg.d2j_du2.push(d2j);
            lg.factors.push(f);
        }
    }
    for jn in 0..m_u {
        let level: Vec<f64> = (0..n).map(|s| lg.jacobian[s * m_u + jn]).collect();
        for a in 0..k {
            let d = diff_grid(&patch.grid, &level, a, 1, 2);
            for s in 0..n {
                lg.dj_dx[s * m_u + jn][a] = d[s];
            }
        }
    }
    Ok(lg)
}
