use std::f64::consts::PI;

use super::GeometryError;

/// Uniform interior nodes `u_j = −1 + (j+1)h`, `h = 2/(m+1)`, on `I = (−1, 1)`
/// with a sine-spectral Dirichlet second derivative.
///
/// The discrete sine modes are the exact samples of `sin(kπ(u+1)/2)`, so the
/// stiffness matrix reproduces `E_k = (kπ/2)²` exactly and χ₁ is an exact
/// eigenvector with unit norm under the weight `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransverseGrid {
    pub m: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    /// Index of the node at `u = 0`.
    pub center: usize,
    sine: Vec<f64>,
}

impl TransverseGrid {
    /// `m` must be odd so that `u = 0` is a node.
    pub fn new(m: usize) -> Result<Self, GeometryError> {
        if m == 0 || m % 2 == 0 {
            return Err(GeometryError::TransverseNodes(m));
        }
        let h = 2.0 / (m + 1) as f64;
        let nodes = (0..m).map(|j| -1.0 + (j + 1) as f64 * h).collect();
        let mut sine = vec![0.0; m * m];
        for j in 0..m {
            for k in 0..m {
                sine[j * m + k] = (((j + 1) * (k + 1)) as f64 * PI / (m + 1) as f64).sin();
            }
        }
        Ok(TransverseGrid { m, h, nodes, center: m / 2, sine })
    }

    /// Samples of the `k`-th Dirichlet mode (1-based), unit norm under `h`.
    pub fn mode(&self, k: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.sine[j * self.m + (k - 1)]).collect()
    }

    /// Samples of `χ₁(u) = cos(πu/2)`.
    pub fn chi1(&self) -> Vec<f64> {
        self.mode(1)
    }

    /// Dense symmetric matrix of `−∂_u²` in the nodal basis (row-major).
    pub fn stiffness(&self) -> Vec<f64> {
        let m = self.m;
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.sine[i * m + k] * crate::transverse_energy(k + 1) * self.sine[j * m + k];
                }
                let v = acc * self.h;
                d[i * m + j] = v;
                d[j * m + i] = v;
            }
        }
        d
    }

    pub fn refined(&self) -> TransverseGrid {
        TransverseGrid::new(2 * self.m + 1).expect("2m+1 is odd")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_are_orthonormal_and_exact() {
        let t = TransverseGrid::new(17).unwrap();
        let d = t.stiffness();
        for k in 1..=4 {
            let v = t.mode(k);
            let nrm: f64 = v.iter().map(|x| x * x * t.h).sum();
            assert!((nrm - 1.0).abs() < 1e-13);
            for i in 0..t.m {
                let dv: f64 = (0..t.m).map(|j| d[i * t.m + j] * v[j]).sum();
                assert!((dv - crate::transverse_energy(k) * v[i]).abs() < 1e-10);
            }
        }
        let chi = t.chi1();
        for (j, u) in t.nodes.iter().enumerate() {
            assert!((chi[j] - (PI * u / 2.0).cos()).abs() < 1e-14);
        }
        assert!(t.nodes[t.center].abs() < 1e-15);
    }
}
