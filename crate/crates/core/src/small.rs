//! Fixed-size helpers for per-node tensors.
//!
//! Surface tensors are stored as 2×2 arrays. Curves use only the `[0][0]`
//! slot; metric-like tensors carry a 1 in `[1][1]` and curvature-like tensors
//! a 0, so determinants, inverses and products come out right without
//! branching on the dimension.

pub type M2 = [[f64; 2]; 2];
pub type V3 = [f64; 3];

pub const ID2: M2 = [[1.0, 0.0], [0.0, 1.0]];
pub const ZERO2: M2 = [[0.0, 0.0], [0.0, 0.0]];

pub fn det2(a: &M2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn inv2(a: &M2) -> M2 {
    let d = det2(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

pub fn mul2(a: &M2, b: &M2) -> M2 {
    let mut c = ZERO2;
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn sub2(a: &M2, b: &M2) -> M2 {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

pub fn scale2(a: &M2, s: f64) -> M2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

/// Eigenvalues of a 2×2 matrix with real spectrum, ascending.
///
/// `L = g⁻¹h` is self-adjoint with respect to `g`, so its spectrum is real;
/// a slightly negative discriminant from rounding is clamped.
pub fn eig2_real(a: &M2) -> [f64; 2] {
    let tr = a[0][0] + a[1][1];
    let d = det2(a);
    let half = 0.5 * tr;
    let disc = (0.25 * (a[0][0] - a[1][1]).powi(2) + a[0][1] * a[1][0]).max(0.0).sqrt();
    // Avoid cancellation for the smaller-magnitude root.
    let big = if half >= 0.0 { half + disc } else { half - disc };
    let small = if big != 0.0 { d / big } else { 0.0 };
    let (lo, hi) = if big < small { (big, small) } else { (small, big) };
    [lo, hi]
}

pub fn dot3(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: &V3, b: &V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: &V3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn axpy3(a: f64, x: &V3, y: &V3) -> V3 {
    [a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2]]
}

pub fn sub3(a: &V3, b: &V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: &V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Determinant of the 3×3 matrix with the given columns.
pub fn det3_cols(a: &V3, b: &V3, c: &V3) -> f64 {
    dot3(a, &cross3(b, c))
}

/// Solve `M x = r` for the 3×3 matrix with columns `c0, c1, c2` (Cramer).
pub fn solve3_cols(c0: &V3, c1: &V3, c2: &V3, r: &V3) -> V3 {
    let d = det3_cols(c0, c1, c2);
    [
        det3_cols(r, c1, c2) / d,
        det3_cols(c0, r, c2) / d,
        det3_cols(c0, c1, r) / d,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig2_real_matches_trace_and_det() {
        let a = [[2.0, 1.0], [0.5, -1.0]];
        let e = eig2_real(&a);
        assert!((e[0] + e[1] - 1.0).abs() < 1e-14);
        assert!((e[0] * e[1] - det2(&a)).abs() < 1e-14);
        assert!(e[0] <= e[1]);
    }

    #[test]
    fn solve3_inverts() {
        let c0 = [1.0, 0.2, 0.0];
        let c1 = [0.0, 2.0, 0.3];
        let c2 = [0.1, 0.0, 1.5];
        let x = [0.7, -1.1, 2.0];
        let r = [
            c0[0] * x[0] + c1[0] * x[1] + c2[0] * x[2],
            c0[1] * x[0] + c1[1] * x[1] + c2[1] * x[2],
            c0[2] * x[0] + c1[2] * x[1] + c2[2] * x[2],
        ];
        let y = solve3_cols(&c0, &c1, &c2, &r);
        for i in 0..3 {
            assert!((x[i] - y[i]).abs() < 1e-13);
        }
    }
}
