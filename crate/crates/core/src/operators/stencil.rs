//! Gauge-covariant finite-volume stencil of `|g|^{-1/2} D*_μ a^{μν} D_ν`,
//! `D = ∂ + iÃ`, on a chart grid.
//!
//! Entries are produced directly in the symmetrized form
//! `W^{-1/2} K W^{-1/2}`, where `K` is the matrix of the discrete quadratic
//! form `Σ_edges c_e |e^{iθ_e} ψ_b − ψ_a|²` and `W` the surface weights.

use crate::geometry::grid::{BoundaryKind, ChartGrid, Step};
use crate::small::M2;
use crate::C64;

pub(crate) struct SurfaceLevel<'a> {
    pub grid: &'a ChartGrid,
    /// `|g|^{1/2} a^{μν}` per node.
    pub coeff: &'a [M2],
    /// Surface quadrature weights `|g|^{1/2} h₁ [h₂]`.
    pub weights: &'a [f64],
    /// `Ã_μ` per node.
    pub potential: &'a [[f64; 2]],
    pub mixed: bool,
}

pub(crate) struct Edge {
    pub a: usize,
    pub b: Option<usize>,
    /// Form coefficient `c_e`.
    pub c: f64,
    pub theta: f64,
}

impl SurfaceLevel<'_> {
    pub fn edges(&self) -> Vec<Edge> {
        let k = self.grid.dim();
        let cell = self.grid.cell();
        let mut out = Vec::with_capacity(self.grid.len() * k);
        for s in 0..self.grid.len() {
            for axis in 0..k {
                let h = self.grid.axes[axis].spacing;
                let scale = cell / (h * h);
                match self.grid.step(s, axis, true) {
                    Step::Node(t) => {
                        let c = 0.5 * (self.coeff[s][axis][axis] + self.coeff[t][axis][axis]) * scale;
                        let theta = 0.5 * h * (self.potential[s][axis] + self.potential[t][axis]);
                        out.push(Edge { a: s, b: Some(t), c, theta });
                    }
                    Step::Wall(BoundaryKind::Dirichlet) => {
                        out.push(Edge { a: s, b: None, c: self.coeff[s][axis][axis] * scale, theta: 0.0 })
                    }
                    Step::Wall(BoundaryKind::Pole) => {}
                }
                if let Step::Wall(BoundaryKind::Dirichlet) = self.grid.step(s, axis, false) {
                    out.push(Edge { a: s, b: None, c: self.coeff[s][axis][axis] * scale, theta: 0.0 });
                }
            }
        }
        out
    }

    /// Append scaled entries to `out`, mapping node `s` to row `row(s)`.
    pub fn push_entries(&self, scale: f64, row: &dyn Fn(usize) -> usize, out: &mut Vec<(usize, usize, C64)>) {
        let w = self.weights;
        for e in self.edges() {
            let a = e.a;
            out.push((row(a), row(a), C64::new(scale * e.c / w[a], 0.0)));
            if let Some(b) = e.b {
                out.push((row(b), row(b), C64::new(scale * e.c / w[b], 0.0)));
                let v = C64::from_polar(-scale * e.c / (w[a] * w[b]).sqrt(), e.theta);
                out.push((row(a), row(b), v));
                out.push((row(b), row(a), v.conj()));
            }
        }
        if self.mixed && self.grid.dim() == 2 {
            self.push_mixed(scale, row, out);
        }
    }

    fn push_mixed(&self, scale: f64, row: &dyn Fn(usize) -> usize, out: &mut Vec<(usize, usize, C64)>) {
        let g = self.grid;
        let (h0, h1) = (g.axes[0].spacing, g.axes[1].spacing);
        let cell = g.cell();
        let p = self.potential;
        let w = self.weights;
        for s00 in 0..g.len() {
            let Step::Node(s10) = g.step(s00, 0, true) else { continue };
            let Step::Node(s01) = g.step(s00, 1, true) else { continue };
            let Step::Node(s11) = g.step(s10, 1, true) else { continue };
            let corners = [s00, s10, s01, s11];
            let a12 = 0.25 * corners.iter().map(|&c| self.coeff[c][0][1]).sum::<f64>();
            if a12 == 0.0 {
                continue;
            }
            let t10 = 0.5 * h0 * (p[s00][0] + p[s10][0]);
            let t01 = 0.5 * h1 * (p[s00][1] + p[s01][1]);
            let t10_11 = 0.5 * h1 * (p[s10][1] + p[s11][1]);
            let t01_11 = 0.5 * h0 * (p[s01][0] + p[s11][0]);
            let t11 = 0.5 * ((t10 + t10_11) + (t01 + t01_11));
            let u10 = C64::from_polar(1.0, t10);
            let u01 = C64::from_polar(1.0, t01);
            let u11 = C64::from_polar(1.0, t11);
            let one = C64::new(1.0, 0.0);
            let alpha = [-one / (2.0 * h0), u10 / (2.0 * h0), -u01 / (2.0 * h0), u11 / (2.0 * h0)];
            let beta = [-one / (2.0 * h1), -u10 / (2.0 * h1), u01 / (2.0 * h1), u11 / (2.0 * h1)];
            let f = scale * cell * a12;
            for c in 0..4 {
                for d in 0..4 {
                    let k = (alpha[c].conj() * beta[d] + beta[c].conj() * alpha[d]) * f;
                    let (sc, sd) = (corners[c], corners[d]);
                    out.push((row(sc), row(sd), k / (w[sc] * w[sd]).sqrt()));
                }
            }
        }
    }
}
