use crate::geometry::TransverseGrid;
use crate::C64;

/// Lowest transverse mode `χ₁(u) = cos(πu/2)` on a transverse grid, with the
/// identification `ι: φ ↦ φ ⊗ χ₁` and its adjoint.
#[derive(Clone, Debug)]
pub struct TransverseMode {
    pub grid: TransverseGrid,
    /// Samples of χ₁, unit norm under the node weight `h`.
    pub chi: Vec<f64>,
}

impl TransverseMode {
    pub fn new(grid: TransverseGrid) -> Self {
        let chi = grid.chi1();
        TransverseMode { grid, chi }
    }

    pub fn m(&self) -> usize {
        self.grid.m
    }

    /// `Σ_j h χ₁(u_j)²`.
    pub fn norm(&self) -> f64 {
        (self.grid.h * self.chi.iter().map(|c| c * c).sum::<f64>()).sqrt()
    }

    /// `ι φ`, the layer vector `φ(s) χ₁(u_j)`.
    pub fn embed(&self, phi: &[C64]) -> Vec<C64> {
        phi.iter().flat_map(|p| self.chi.iter().map(move |c| p * *c)).collect()
    }

    /// `ι* v = Σ_j h χ₁(u_j) v(s, j)`.
    pub fn project(&self, v: &[C64]) -> Vec<C64> {
        let m = self.m();
        v.chunks(m)
            .map(|col| col.iter().zip(&self.chi).map(|(x, c)| x * *c).sum::<C64>() * self.grid.h)
            .collect()
    }

    /// `P₁ v = ι ι* v`.
    pub fn p1(&self, v: &[C64]) -> Vec<C64> {
        self.embed(&self.project(v))
    }

    /// `Q v = v − P₁ v`.
    pub fn q(&self, v: &[C64]) -> Vec<C64> {
        v.iter().zip(self.p1(v)).map(|(a, b)| a - b).collect()
    }

    /// Orthonormal (Euclidean) transverse basis vectors `√h · mode_k`,
    /// `k ∈ modes` (1-based).
    pub(crate) fn basis(&self, modes: std::ops::RangeInclusive<usize>) -> Vec<Vec<f64>> {
        let s = self.grid.h.sqrt();
        modes.map(|k| self.grid.mode(k).into_iter().map(|v| v * s).collect()).collect()
    }
}
