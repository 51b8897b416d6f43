use std::collections::HashMap;

use serde::Serialize;

use super::{GeometryError, HypersurfacePatch};
use crate::small::{self, V3};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffendingPair {
    pub a: [usize; 2],
    pub b: [usize; 2],
    /// Distance between the normal segments `x ± εn` of the two nodes.
    pub segment_distance: f64,
    pub chart_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddingDiagnosis {
    pub epsilon: f64,
    pub rho_m: f64,
    pub margin: f64,
    pub radius_ok: bool,
    /// Closest pair among those violating the margin, if any.
    pub offending_pair: Option<OffendingPair>,
    pub pairs_checked: usize,
}

impl EmbeddingDiagnosis {
    pub fn passed(&self) -> bool {
        self.radius_ok && self.offending_pair.is_none()
    }

    pub fn reason(&self) -> Option<String> {
        if !self.radius_ok {
            Some("ε ≥ ρ_m".to_string())
        } else {
            self.offending_pair.as_ref().map(|p| {
                format!(
                    "layer self-approach between nodes {:?} and {:?} (distance {:.3e})",
                    p.a, p.b, p.segment_distance
                )
            })
        }
    }
}

/// [`check_embedding_with_margin`] with the default margin `0.5ε`.
pub fn check_embedding(patch: &HypersurfacePatch, epsilon: f64) -> Result<EmbeddingDiagnosis, GeometryError> {
    check_embedding_with_margin(patch, epsilon, 0.5 * epsilon)
}

/// Checks `ε < ρ_m` and samples injectivity of the layer map: node pairs
/// more than `3ε` apart along the chart must keep their normal segments
/// at least `margin` apart in ambient space.
pub fn check_embedding_with_margin(
    patch: &HypersurfacePatch,
    epsilon: f64,
    margin: f64,
) -> Result<EmbeddingDiagnosis, GeometryError> {
    if !(epsilon > 0.0) {
        return Err(GeometryError::NonPositiveEpsilon(epsilon));
    }
    let n = patch.len();
    let reach = 2.0 * epsilon + margin;
    let key = |p: &V3| -> (i64, i64, i64) {
        (
            (p[0] / reach).floor() as i64,
            (p[1] / reach).floor() as i64,
            (p[2] / reach).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (s, p) in patch.positions.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(s);
    }
    let sdim = patch.sdim();
    let mut worst: Option<OffendingPair> = None;
    let mut checked = 0usize;
    for i in 0..n {
        let pi = &patch.positions[i];
        let (kx, ky, kz) = key(pi);
        let mi = patch.grid.multi(i);
        let gi = &patch.metric[i];
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(list) = buckets.get(&(kx + dx, ky + dy, kz + dz)) else { continue };
                    for &j in list {
                        if j <= i {
                            continue;
                        }
                        let pj = &patch.positions[j];
                        if small::norm3(&small::sub3(pi, pj)) >= reach {
                            continue;
                        }
                        let mj = patch.grid.multi(j);
                        let mut delta = [0.0; 2];
                        for a in 0..sdim {
                            let ax = &patch.grid.axes[a];
                            delta[a] = ax.offset(mi[a], mj[a]) * ax.spacing;
                        }
                        let mut c2 = 0.0;
                        for a in 0..sdim {
                            for b in 0..sdim {
                                c2 += delta[a] * gi[a][b] * delta[b];
                            }
                        }
                        let chart = c2.sqrt();
                        if chart <= 3.0 * epsilon {
                            continue;
                        }
                        checked += 1;
                        let ni = small::scale3(&patch.normals[i], epsilon);
                        let nj = small::scale3(&patch.normals[j], epsilon);
                        let d = segment_distance(
                            &small::sub3(pi, &ni),
                            &small::axpy3(1.0, &ni, pi),
                            &small::sub3(pj, &nj),
                            &small::axpy3(1.0, &nj, pj),
                        );
                        if d < margin && worst.as_ref().is_none_or(|w| d < w.segment_distance) {
                            worst = Some(OffendingPair { a: mi, b: mj, segment_distance: d, chart_distance: chart });
                        }
                    }
                }
            }
        }
    }
    Ok(EmbeddingDiagnosis {
        epsilon,
        rho_m: patch.rho_m,
        margin,
        radius_ok: epsilon < patch.rho_m,
        offending_pair: worst,
        pairs_checked: checked,
    })
}

/// Euclidean distance between segments `[p0, p1]` and `[q0, q1]`.
pub(crate) fn segment_distance(p0: &V3, p1: &V3, q0: &V3, q1: &V3) -> f64 {
    let d1 = small::sub3(p1, p0);
    let d2 = small::sub3(q1, q0);
    let r = small::sub3(p0, q0);
    let a = small::dot3(&d1, &d1);
    let e = small::dot3(&d2, &d2);
    let f = small::dot3(&d2, &r);
    let c = small::dot3(&d1, &r);
    let b = small::dot3(&d1, &d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    let cp = small::axpy3(s, &d1, p0);
    let cq = small::axpy3(t, &d2, q0);
    small::norm3(&small::sub3(&cp, &cq))
}
