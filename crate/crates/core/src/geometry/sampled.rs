//! Hypersurfaces given as positions on a rectangular chart grid.

use std::io::Read;

use super::grid::{diff_grid, ChartAxis, ChartGrid};
use super::GeometryError;
use crate::small::V3;

/// Closure of one sampled chart direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampledClosure {
    Periodic,
    /// Open direction; the function vanishes one spacing beyond the first
    /// and last sample.
    Boundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledSurface {
    pub label: String,
    /// Ambient dimension, 2 or 3.
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub closures: Vec<SampledClosure>,
    pub spacing: Vec<f64>,
    /// Row-major positions (last chart index fastest); z = 0 for curves.
    pub positions: Vec<V3>,
}

/// Tangents and second derivatives from finite differences of positions.
pub(crate) struct SampledJets {
    pub dx: Vec<[V3; 2]>,
    pub ddx: Vec<[[V3; 2]; 2]>,
}

/// Outcome of comparing curvatures across three nested sample spacings.
#[derive(Clone, Debug, serde::Serialize)]
pub struct RefinementReport {
    /// sup |κ(2h) − κ(h)| over shared nodes.
    pub diff_coarse: f64,
    /// sup |κ(4h) − κ(h)| over shared nodes.
    pub diff_coarser: f64,
    /// Estimated convergence order of the curvature differences.
    pub observed_order: f64,
}

impl SampledSurface {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        sizes: Vec<usize>,
        closures: Vec<SampledClosure>,
        spacing: Vec<f64>,
        positions: Vec<V3>,
    ) -> Result<Self, GeometryError> {
        if !(dim == 2 || dim == 3) {
            return Err(GeometryError::SampleShape(format!("dimension {dim} is not 2 or 3")));
        }
        if sizes.len() != dim - 1 || closures.len() != dim - 1 || spacing.len() != dim - 1 {
            return Err(GeometryError::SampleShape(format!(
                "a {dim}-dimensional sample needs {} chart directions",
                dim - 1
            )));
        }
        let n: usize = sizes.iter().product();
        if positions.len() != n {
            return Err(GeometryError::SampleShape(format!("expected {n} samples, found {}", positions.len())));
        }
        for (axis, &s) in sizes.iter().enumerate() {
            if s < 8 {
                return Err(GeometryError::GridTooSmall { axis, nodes: s });
            }
        }
        if spacing.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(GeometryError::SampleShape("chart spacings must be positive".into()));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GeometryError::SampleShape("non-finite sample position".into()));
        }
        Ok(SampledSurface { label: label.into(), dim, sizes, closures, spacing, positions })
    }

    /// Parse CSV rows `i1[, i2], x, y[, z]` with a header line. Rows must be
    /// in row-major order; grid sizes are inferred from the indices.
    pub fn from_csv<R: Read>(
        label: impl Into<String>,
        dim: usize,
        closures: Vec<SampledClosure>,
        spacing: Vec<f64>,
        reader: R,
    ) -> Result<Self, GeometryError> {
        let k = dim - 1;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut idx: Vec<Vec<usize>> = Vec::new();
        let mut pos: Vec<V3> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| GeometryError::SampleShape(format!("csv: {e}")))?;
            if rec.len() != k + dim {
                return Err(GeometryError::SampleShape(format!(
                    "row {}: expected {} columns, found {}",
                    line + 2,
                    k + dim,
                    rec.len()
                )));
            }
            let num = |j: usize| -> Result<f64, GeometryError> {
                rec[j]
                    .parse::<f64>()
                    .map_err(|_| GeometryError::SampleShape(format!("row {}: bad number '{}'", line + 2, &rec[j])))
            };
            let mut ii = Vec::with_capacity(k);
            for j in 0..k {
                let v = num(j)?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(GeometryError::SampleShape(format!("row {}: bad chart index", line + 2)));
                }
                ii.push(v as usize);
            }
            let mut p = [0.0; 3];
            for (c, slot) in p.iter_mut().enumerate().take(dim) {
                *slot = num(k + c)?;
            }
            idx.push(ii);
            pos.push(p);
        }
        let sizes: Vec<usize> = (0..k).map(|a| idx.iter().map(|v| v[a]).max().map_or(0, |m| m + 1)).collect();
        for (r, ii) in idx.iter().enumerate() {
            let expect = if k == 1 { vec![r] } else { vec![r / sizes[1], r % sizes[1]] };
            if *ii != expect {
                return Err(GeometryError::SampleShape(format!("row {}: chart indices out of row-major order", r + 2)));
            }
        }
        Self::new(label, dim, sizes, closures, spacing, pos)
    }

    pub fn chart(&self) -> ChartGrid {
        let axes = (0..self.dim - 1)
            .map(|a| {
                let (n, h) = (self.sizes[a], self.spacing[a]);
                match self.closures[a] {
                    SampledClosure::Periodic => ChartAxis::periodic(0.0, n as f64 * h, n),
                    SampledClosure::Boundary => ChartAxis::dirichlet(0.0, (n + 1) as f64 * h, n),
                }
            })
            .collect();
        ChartGrid::new(axes)
    }

    /// Fourth-order finite-difference tangents and second derivatives.
    pub(crate) fn jets(&self) -> SampledJets {
        let grid = self.chart();
        let k = grid.dim();
        let n = grid.len();
        let comp = |c: usize| -> Vec<f64> { self.positions.iter().map(|p| p[c]).collect() };
        let mut dx = vec![[[0.0; 3]; 2]; n];
        let mut ddx = vec![[[[0.0; 3]; 2]; 2]; n];
        for c in 0..3 {
            let f = comp(c);
            for a in 0..k {
                let d1 = diff_grid(&grid, &f, a, 1, 4);
                let d2 = diff_grid(&grid, &f, a, 2, 4);
                for s in 0..n {
                    dx[s][a][c] = d1[s];
                    ddx[s][a][a][c] = d2[s];
                }
                if a == 0 && k == 2 {
                    let mixed = diff_grid(&grid, &d1, 1, 1, 4);
                    for s in 0..n {
                        ddx[s][0][1][c] = mixed[s];
                        ddx[s][1][0][c] = mixed[s];
                    }
                }
            }
        }
        SampledJets { dx, ddx }
    }

    /// Every `step`-th sample, keeping the node layout consistent with the
    /// closure. Returns the coarse sample and the fine index of each coarse
    /// node, or `None` if the sizes do not nest.
    fn subsample(&self, step: usize) -> Option<(SampledSurface, Vec<usize>)> {
        let grid = self.chart();
        let mut keep: Vec<Vec<usize>> = Vec::new();
        for a in 0..grid.dim() {
            let n = self.sizes[a];
            let kept: Vec<usize> = match self.closures[a] {
                SampledClosure::Periodic => {
                    if n % step != 0 {
                        return None;
                    }
                    (0..n).step_by(step).collect()
                }
                SampledClosure::Boundary => {
                    if (n + 1) % step != 0 {
                        return None;
                    }
                    (step - 1..n).step_by(step).collect()
                }
            };
            if kept.len() < 8 {
                return None;
            }
            keep.push(kept);
        }
        let mut fine = Vec::new();
        if grid.dim() == 1 {
            fine.extend(keep[0].iter().copied());
        } else {
            for &i in &keep[0] {
                for &j in &keep[1] {
                    fine.push(grid.index([i, j]));
                }
            }
        }
        let coarse = SampledSurface {
            label: self.label.clone(),
            dim: self.dim,
            sizes: keep.iter().map(Vec::len).collect(),
            closures: self.closures.clone(),
            spacing: self.spacing.iter().map(|h| h * step as f64).collect(),
            positions: fine.iter().map(|&s| self.positions[s]).collect(),
        };
        Some((coarse, fine))
    }

    /// Compare curvatures at spacings h, 2h and 4h on the shared nodes.
    /// Returns `None` when the grid sizes do not allow two coarsenings.
    pub fn refinement_self_test(&self) -> Option<Result<RefinementReport, GeometryError>> {
        let (c2, map2) = self.subsample(2)?;
        let (c4, map4) = self.subsample(4)?;
        let run = || -> Result<RefinementReport, GeometryError> {
            let fam = |s: &SampledSurface| super::GeometryFamily::UserSampled(s.clone());
            let p1 = super::build_patch(&fam(self), &self.sizes)?;
            let p2 = super::build_patch(&fam(&c2), &c2.sizes)?;
            let p4 = super::build_patch(&fam(&c4), &c4.sizes)?;
            let sup = |p: &super::HypersurfacePatch, map: &[usize]| {
                let mut e: f64 = 0.0;
                for (sc, &sf) in map.iter().enumerate() {
                    for m in 0..self.dim - 1 {
                        e = e.max((p.kappa[sc][m] - p1.kappa[sf][m]).abs());
                    }
                }
                e
            };
            let d2 = sup(&p2, &map2);
            let d4 = sup(&p4, &map4);
            let ratio = d4 / d2;
            let observed_order = if d2 > 0.0 && ratio > 1.0 { (ratio - 1.0).log2() } else { f64::INFINITY };
            Ok(RefinementReport { diff_coarse: d2, diff_coarser: d4, observed_order })
        };
        Some(run())
    }
}

