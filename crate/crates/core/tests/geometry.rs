mod common;

use std::f64::consts::PI;

use common::patch;
use proptest::prelude::*;
use thinlayer::geometry::{
    build_patch, check_embedding, layer_geometry, v_eff, GeometryFamily, SampledClosure, SampledSurface,
};

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[test]
fn sphere_radius_two_is_umbilic() {
    let p = patch(GeometryFamily::FullSphere { radius: 2.0 }, &[16, 32]);
    for s in 0..p.len() {
        for k in p.kappa[s] {
            assert!((k - 0.5).abs() < 1e-12, "κ = {k}");
        }
        assert!((p.mean_curvatures[s][0] - 0.5).abs() < 1e-12);
        assert!((p.mean_curvatures[s][1] - 0.25).abs() < 1e-12);
    }
    assert!((p.rho_m - 2.0).abs() < 1e-12);
}

/// Principal curvatures from central differences of the emitted positions,
/// using only the periodic grid and no chart derivatives.
#[test]
fn torus_curvatures_match_difference_oracle() {
    let (n1, n2) = (64, 64);
    let p = patch(GeometryFamily::Torus { major: 2.0, minor: 0.5 }, &[n1, n2]);
    let (h1, h2) = (2.0 * PI / n1 as f64, 2.0 * PI / n2 as f64);
    let at = |i: isize, j: isize| p.positions[p.grid.index([i.rem_euclid(n1 as isize) as usize, j.rem_euclid(n2 as isize) as usize])];
    let mut worst: f64 = 0.0;
    for i in 0..n1 as isize {
        for j in 0..n2 as isize {
            let x = at(i, j);
            let x1 = sub(at(i + 1, j), at(i - 1, j)).map(|v| v / (2.0 * h1));
            let x2 = sub(at(i, j + 1), at(i, j - 1)).map(|v| v / (2.0 * h2));
            let x11 = [0, 1, 2].map(|c| (at(i + 1, j)[c] - 2.0 * x[c] + at(i - 1, j)[c]) / (h1 * h1));
            let x22 = [0, 1, 2].map(|c| (at(i, j + 1)[c] - 2.0 * x[c] + at(i, j - 1)[c]) / (h2 * h2));
            let x12 = [0, 1, 2].map(|c| {
                (at(i + 1, j + 1)[c] - at(i + 1, j - 1)[c] - at(i - 1, j + 1)[c] + at(i - 1, j - 1)[c]) / (4.0 * h1 * h2)
            });
            let nrm = cross(x1, x2);
            let l = dot(nrm, nrm).sqrt();
            let n = nrm.map(|v| v / l);
            let (e, f, g) = (dot(x1, x1), dot(x1, x2), dot(x2, x2));
            let (ll, mm, nn) = (dot(n, x11), dot(n, x12), dot(n, x22));
            let det = e * g - f * f;
            let gauss = (ll * nn - mm * mm) / det;
            let mean = (ll * g - 2.0 * mm * f + nn * e) / (2.0 * det);
            let disc = (mean * mean - gauss).max(0.0).sqrt();
            // Orientation-free comparison through |H| and K.
            let mut oracle = [mean.abs() - disc, mean.abs() + disc];
            oracle.sort_by(f64::total_cmp);
            let s = p.grid.index([i as usize, j as usize]);
            let k = p.kappa[s];
            let sign = if k[0] + k[1] >= 0.0 { 1.0 } else { -1.0 };
            let mut got = [sign * k[0], sign * k[1]];
            got.sort_by(f64::total_cmp);
            worst = worst.max((got[0] - oracle[0]).abs()).max((got[1] - oracle[1]).abs());
        }
    }
    assert!(worst < 2e-2, "difference oracle deviates by {worst}");
}

#[test]
fn torus_outer_equator_curvatures() {
    let p = patch(GeometryFamily::Torus { major: 2.0, minor: 0.5 }, &[64, 64]);
    let s = (0..p.len())
        .max_by(|&a, &b| {
            let r = |s: usize| p.positions[s][0].hypot(p.positions[s][1]);
            r(a).total_cmp(&r(b))
        })
        .unwrap();
    let mut k = p.kappa[s];
    k.sort_by(f64::total_cmp);
    assert!((k[0] - 0.4).abs() < 1e-12 && (k[1] - 2.0).abs() < 1e-12, "κ = {k:?}");
}

#[test]
fn circle_embedding_examples() {
    let p = patch(GeometryFamily::Circle { radius: 1.0 }, &[64]);
    assert!(check_embedding(&p, 0.5).unwrap().passed());
    let d = check_embedding(&p, 1.0).unwrap();
    assert!(!d.passed());
    assert_eq!(d.reason().as_deref(), Some("ε ≥ ρ_m"));
}

/// Closed bulb with two parallel arms 0.1 apart. The curvature stays at
/// most 2, so only the sampled injectivity test can catch the overlap.
fn u_shaped_sample() -> SampledSurface {
    let (r_small, alpha, arm) = (0.5, PI / 3.0, 1.0);
    let trace = |r_big: f64, ds: f64| -> Vec<[f64; 3]> {
        let segments = [(arm, 0.0), (r_small * alpha, -1.0 / r_small), (r_big * (PI + 2.0 * alpha), 1.0 / r_big), (r_small * alpha, -1.0 / r_small), (arm, 0.0)];
        let (mut x, mut y, mut t) = (-0.05, 1.0, -PI / 2.0);
        let mut out = vec![[x, y, 0.0]];
        for (len, kappa) in segments {
            let n = (len / ds).round().max(1.0) as usize;
            let h = len / n as f64;
            for _ in 0..n {
                let tm = t + 0.5 * h * kappa;
                x += h * tm.cos();
                y += h * tm.sin();
                t += h * kappa;
                out.push([x, y, 0.0]);
            }
        }
        out
    };
    // Bisect the bulb radius so that the right arm ends at x = +0.05.
    let (mut lo, mut hi) = (0.3, 2.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let end = *trace(mid, 1e-4).last().unwrap();
        if end[0] > 0.05 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let fine = trace(0.5 * (lo + hi), 1e-4);
    // Resample every 100th point: spacing ≈ 0.01.
    let pts: Vec<[f64; 3]> = fine.iter().step_by(100).copied().collect();
    let ds = 1e-2;
    SampledSurface::new("u-bulb", 2, vec![pts.len()], vec![SampledClosure::Boundary], vec![ds], pts).unwrap()
}

#[test]
fn u_shaped_sample_with_close_arms_fails() {
    let s = u_shaped_sample();
    let n = s.sizes[0];
    let p = build_patch(&GeometryFamily::UserSampled(s.clone()), &[n]).unwrap();
    assert!(p.rho_m > 0.2, "ρ_m = {}", p.rho_m);
    let d = check_embedding(&p, 0.2).unwrap();
    assert!(d.radius_ok);
    let pair = d.offending_pair.clone().expect("offending pair");
    let (a, b) = (s.positions[pair.a[0]], s.positions[pair.b[0]]);
    let direct = dot(sub(a, b), sub(a, b)).sqrt();
    assert!(direct < 2.0 * 0.2, "offending nodes are {direct} apart");
    assert!(d.reason().unwrap().contains("self-approach"));
    assert!(check_embedding(&p, 0.02).unwrap().passed());
}

fn spiral(turn_gap: f64) -> SampledSurface {
    let a = turn_gap / (2.0 * PI);
    let pts: Vec<[f64; 3]> = (0..2000)
        .map(|i| {
            let t = 4.0 * PI + i as f64 * 0.004;
            let r = a * t + 1.0;
            [r * t.cos(), r * t.sin(), 0.0]
        })
        .collect();
    SampledSurface::new("spiral", 2, vec![pts.len()], vec![SampledClosure::Boundary], vec![0.004], pts).unwrap()
}

#[test]
fn spiral_turns_overlap_only_for_thick_layers() {
    let s = spiral(0.3);
    let p = build_patch(&GeometryFamily::UserSampled(s.clone()), &[s.sizes[0]]).unwrap();
    let thick = check_embedding(&p, 0.2).unwrap();
    assert!(thick.radius_ok && thick.offending_pair.is_some());
    assert!(check_embedding(&p, 0.05).unwrap().passed());
}

#[test]
fn flat_layer_metric_is_trivial() {
    let p = patch(GeometryFamily::Segment { length: 1.0 }, &[32]);
    let l = layer_geometry(&p, 0.3, 9).unwrap();
    for s in 0..p.len() {
        for j in 0..9 {
            let i = l.idx(s, j);
            assert_eq!(l.metric[i][0][0], p.metric[s][0][0]);
            assert_eq!(l.jacobian[i], 0.0);
            assert!((l.sqrt_det[i] - 0.3 * p.sqrt_det_g[s]).abs() < 1e-15);
        }
    }
}

#[test]
fn torus_determinant_identity() {
    let p = patch(GeometryFamily::Torus { major: 2.0, minor: 0.5 }, &[24, 32]);
    let eps = 0.05;
    let l = layer_geometry(&p, eps, 17).unwrap();
    for s in 0..p.len() {
        let g = p.metric[s];
        let det_g = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        for (j, &u) in l.transverse.nodes.iter().enumerate() {
            let i = l.idx(s, j);
            let gm = l.metric[i];
            let det_big = eps * eps * (gm[0][0] * gm[1][1] - gm[0][1] * gm[1][0]);
            let prod: f64 = p.kappa[s].iter().map(|k| (1.0 - eps * u * k).powi(2)).product();
            let expect = eps * eps * det_g * prod;
            assert!((det_big - expect).abs() <= 1e-10 * expect, "{det_big} vs {expect}");
            assert!((l.sqrt_det[i].powi(2) - expect).abs() <= 1e-10 * expect);
        }
    }
}

fn metric_ratio_bounds(family: GeometryFamily, sizes: &[usize], eps: f64) {
    let p = patch(family, sizes);
    let l = layer_geometry(&p, eps, 9).unwrap();
    let r = eps / p.rho_m;
    let (c_minus, c_plus) = ((1.0 - r).powi(2), (1.0 + r).powi(2));
    for s in 0..p.len() {
        let gi = p.metric_inv[s];
        for j in 0..9 {
            let gm = l.metric[l.idx(s, j)];
            // Eigenvalues of g⁻¹G equal those of g^{-1/2} G g^{-1/2}.
            let a = [
                [gi[0][0] * gm[0][0] + gi[0][1] * gm[1][0], gi[0][0] * gm[0][1] + gi[0][1] * gm[1][1]],
                [gi[1][0] * gm[0][0] + gi[1][1] * gm[1][0], gi[1][0] * gm[0][1] + gi[1][1] * gm[1][1]],
            ];
            let tr = a[0][0] + a[1][1];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            for ev in [0.5 * tr - disc, 0.5 * tr + disc] {
                assert!(ev >= c_minus - 1e-12 && ev <= c_plus + 1e-12, "{ev} outside [{c_minus}, {c_plus}]");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn layer_metric_lies_between_bounds(eps in 0.01f64..0.45) {
        metric_ratio_bounds(GeometryFamily::Torus { major: 2.0, minor: 0.5 }, &[12, 16], eps);
        metric_ratio_bounds(GeometryFamily::BumpedPlane { lx: 2.0, ly: 2.0, amplitude: 0.3, width: 0.5 }, &[12, 12], eps.min(0.2));
    }

    #[test]
    fn v_eff_reductions(k1 in -20.0f64..20.0, k2 in -20.0f64..20.0) {
        prop_assert!((v_eff(&[k1, k2]) + 0.25 * (k1 - k2).powi(2)).abs() <= 1e-14 * (1.0 + k1 * k1 + k2 * k2));
        prop_assert!((v_eff(&[k1]) + 0.25 * k1 * k1).abs() <= 1e-14 * (1.0 + k1 * k1));
    }
}

fn sampled_ellipse(n: usize) -> SampledSurface {
    let h = 2.0 * PI / n as f64;
    let pts = (0..n).map(|i| {
        let t = i as f64 * h;
        [2.0 * t.cos(), t.sin(), 0.0]
    });
    SampledSurface::new("ellipse", 2, vec![n], vec![SampledClosure::Periodic], vec![h], pts.collect()).unwrap()
}

#[test]
fn sampled_curvatures_converge_at_second_order() {
    let err = |n: usize| {
        let p = build_patch(&GeometryFamily::UserSampled(sampled_ellipse(n)), &[n]).unwrap();
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                let exact = 2.0 / (4.0 * t.sin().powi(2) + t.cos().powi(2)).powf(1.5);
                (p.kappa[i][0].abs() - exact).abs()
            })
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(32), err(64));
    assert!((e1 / e2).log2() >= 2.0, "errors {e1} → {e2}");
}
