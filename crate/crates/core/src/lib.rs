//! Magnetic Dirichlet Laplacians on thin layers around curves (d=2) and
//! surfaces (d=3), the effective surface Hamiltonian, and ε-sweeps that
//! measure how fast the layer spectrum approaches the surface spectrum.
//!
//! The layer is parametrized as `x + ε u n(x)` with `x` on the hypersurface
//! and `u ∈ (−1, 1)`. All operators act on the ε-independent measure
//! `dΣ ∧ du`, so their matrices share one weighted inner product.

pub mod convergence;
pub mod eigensolve;
pub mod geometry;
pub mod magnetics;
pub mod operators;

mod small;

pub use num_complex::Complex64 as C64;

/// Lowest Dirichlet eigenvalue of `−∂²` on `(−1, 1)`.
pub const E1: f64 = std::f64::consts::PI * std::f64::consts::PI / 4.0;

/// Dirichlet eigenvalue `(mπ/2)²` of `−∂²` on `(−1, 1)`.
pub fn transverse_energy(m: usize) -> f64 {
    let k = m as f64 * std::f64::consts::FRAC_PI_2;
    k * k
}
