//! Rectangular chart grids and finite differences along their axes.

use serde::{Deserialize, Serialize};

/// How a bounded chart direction ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    /// The function vanishes one cell beyond the last node.
    Dirichlet,
    /// A coordinate singularity where the surface element vanishes; the
    /// last node sits half a cell from it and no flux crosses it.
    Pole,
}

impl BoundaryKind {
    fn offset(self) -> f64 {
        match self {
            BoundaryKind::Dirichlet => 1.0,
            BoundaryKind::Pole => 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Closure {
    Periodic,
    Bounded { start: BoundaryKind, end: BoundaryKind },
}

/// One chart direction: `nodes` samples with uniform `spacing`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartAxis {
    pub nodes: usize,
    pub spacing: f64,
    /// Coordinate of node 0.
    pub first: f64,
    pub closure: Closure,
}

/// Result of stepping from a node along an axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Node(usize),
    Wall(BoundaryKind),
}

impl ChartAxis {
    /// `n` nodes covering one period starting at `start`.
    pub fn periodic(start: f64, period: f64, n: usize) -> Self {
        ChartAxis { nodes: n, spacing: period / n as f64, first: start, closure: Closure::Periodic }
    }

    /// `n` interior nodes on `(a, b)` with the given end treatments.
    pub fn bounded(a: f64, b: f64, n: usize, start: BoundaryKind, end: BoundaryKind) -> Self {
        let h = (b - a) / (n as f64 - 1.0 + start.offset() + end.offset());
        ChartAxis {
            nodes: n,
            spacing: h,
            first: a + start.offset() * h,
            closure: Closure::Bounded { start, end },
        }
    }

    pub fn dirichlet(a: f64, b: f64, n: usize) -> Self {
        Self::bounded(a, b, n, BoundaryKind::Dirichlet, BoundaryKind::Dirichlet)
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.first + i as f64 * self.spacing
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.closure, Closure::Periodic)
    }

    pub fn step(&self, i: usize, forward: bool) -> Step {
        let n = self.nodes;
        match (self.closure, forward) {
            (Closure::Periodic, true) => Step::Node((i + 1) % n),
            (Closure::Periodic, false) => Step::Node((i + n - 1) % n),
            (Closure::Bounded { end, .. }, true) => {
                if i + 1 < n {
                    Step::Node(i + 1)
                } else {
                    Step::Wall(end)
                }
            }
            (Closure::Bounded { start, .. }, false) => {
                if i > 0 {
                    Step::Node(i - 1)
                } else {
                    Step::Wall(start)
                }
            }
        }
    }

    /// Signed index offset from `i` to `j`, wrapped to the shortest way
    /// around on periodic axes.
    pub fn offset(&self, i: usize, j: usize) -> f64 {
        let d = j as f64 - i as f64;
        if self.is_periodic() {
            let n = self.nodes as f64;
            d - n * (d / n).round()
        } else {
            d
        }
    }

    /// Same axis with twice the resolution.
    pub fn refined(&self) -> Self {
        match self.closure {
            Closure::Periodic => ChartAxis::periodic(self.first, self.spacing * self.nodes as f64, 2 * self.nodes),
            Closure::Bounded { start, end } => {
                let a = self.first - start.offset() * self.spacing;
                let b = self.coord(self.nodes - 1) + end.offset() * self.spacing;
                // Mixed pole/Dirichlet axes cannot halve exactly; round up.
                let s = start.offset() + end.offset();
                let n = (2.0 * (self.nodes as f64 - 1.0 + s) - s + 1.0).ceil() as usize;
                ChartAxis::bounded(a, b, n, start, end)
            }
        }
    }
}

/// Tensor-product chart grid with one or two axes, row-major (last axis
/// fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartGrid {
    pub axes: Vec<ChartAxis>,
}

impl ChartGrid {
    pub fn new(axes: Vec<ChartAxis>) -> Self {
        assert!(!axes.is_empty() && axes.len() <= 2, "chart grids have one or two axes");
        ChartGrid { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, m: [usize; 2]) -> usize {
        if self.axes.len() == 1 {
            m[0]
        } else {
            m[0] * self.axes[1].nodes + m[1]
        }
    }

    pub fn multi(&self, s: usize) -> [usize; 2] {
        if self.axes.len() == 1 {
            [s, 0]
        } else {
            let n1 = self.axes[1].nodes;
            [s / n1, s % n1]
        }
    }

    pub fn coords(&self, s: usize) -> [f64; 2] {
        let m = self.multi(s);
        let c0 = self.axes[0].coord(m[0]);
        let c1 = if self.axes.len() > 1 { self.axes[1].coord(m[1]) } else { 0.0 };
        [c0, c1]
    }

    pub fn step(&self, s: usize, axis: usize, forward: bool) -> Step {
        let mut m = self.multi(s);
        match self.axes[axis].step(m[axis], forward) {
            Step::Node(j) => {
                m[axis] = j;
                Step::Node(self.index(m))
            }
            w => w,
        }
    }

    /// Product of spacings, the chart cell volume.
    pub fn cell(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    pub fn refined(&self) -> Self {
        ChartGrid { axes: self.axes.iter().map(ChartAxis::refined).collect() }
    }

    /// Node index lines along `axis`: each entry lists the flat indices of
    /// one grid line in increasing axis order.
    pub fn lines(&self, axis: usize) -> Vec<Vec<usize>> {
        let n_axis = self.axes[axis].nodes;
        let n_other = self.len() / n_axis;
        let mut out = Vec::with_capacity(n_other);
        for o in 0..n_other {
            let line = (0..n_axis)
                .map(|i| {
                    let mut m = [0usize; 2];
                    m[axis] = i;
                    if self.axes.len() == 2 {
                        m[1 - axis] = o;
                    }
                    self.index(m)
                })
                .collect();
            out.push(line);
        }
        out
    }
}

/// Fornberg's recursion: weights `w[k][j]` of the `k`-th derivative at `z`
/// from samples at `x[j]`, for `k ≤ m`.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative of order `deriv` along one grid line with accuracy `order`
/// (2 or 4). Periodic lines use centered stencils everywhere; bounded lines
/// switch to shifted windows near the ends.
pub fn diff_line(axis: &ChartAxis, f: &[f64], deriv: usize, order: usize) -> Vec<f64> {
    let n = f.len();
    let centered = 2 * ((order + deriv - 1) / 2) + 1;
    let one_sided = order + deriv;
    let h = axis.spacing;
    let scale = h.powi(deriv as i32);
    let mut out = vec![0.0; n];
    if axis.is_periodic() {
        let half = (centered / 2) as isize;
        let offs: Vec<f64> = (-half..=half).map(|k| k as f64).collect();
        let w = &fd_weights(0.0, &offs, deriv)[deriv];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, wk) in (-half..=half).zip(w) {
                let j = (i as isize + k).rem_euclid(n as isize) as usize;
                acc += wk * f[j];
            }
            *o = acc / scale;
        }
        return out;
    }
    let half = centered / 2;
    for (i, o) in out.iter_mut().enumerate() {
        let (lo, width) = if i >= half && i + half < n {
            (i - half, centered)
        } else {
            let width = one_sided.min(n);
            let lo = if i < half { 0 } else { n - width };
            (lo, width)
        };
        let offs: Vec<f64> = (lo..lo + width).map(|j| j as f64 - i as f64).collect();
        let w = &fd_weights(0.0, &offs, deriv)[deriv];
        let mut acc = 0.0;
        for (k, wk) in w.iter().enumerate() {
            acc += wk * f[lo + k];
        }
        *o = acc / scale;
    }
    out
}

/// Derivative of a scalar grid function along one axis.
pub fn diff_grid(grid: &ChartGrid, f: &[f64], axis: usize, deriv: usize, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for line in grid.lines(axis) {
        let vals: Vec<f64> = line.iter().map(|&s| f[s]).collect();
        let d = diff_line(&grid.axes[axis], &vals, deriv, order);
        for (s, v) in line.iter().zip(d) {
            out[*s] = v;
        }
    }
    out
}
