mod common;

use common::{eigs, heff, layer, patch};
use thinlayer::geometry::{layer_geometry, GeometryFamily};
use thinlayer::magnetics::{effective_field, gauge_fix, pullback, two_form, AmbientField, Monomial, Polynomial};

fn mono(coef: f64, powers: [u32; 3]) -> Monomial {
    Monomial { coef, powers }
}

fn poly(terms: Vec<Monomial>) -> Polynomial {
    Polynomial::new(terms)
}

#[test]
fn zero_field_pulls_back_to_zero() {
    let p = patch(GeometryFamily::Torus { major: 2.0, minor: 0.5 }, &[12, 16]);
    let l = layer_geometry(&p, 0.1, 9).unwrap();
    let raw = pullback(&AmbientField::zero(), &l, &p).unwrap();
    assert!(raw.tangential.iter().flatten().all(|v| *v == 0.0));
    assert!(raw.transverse.iter().all(|v| *v == 0.0));
}

#[test]
fn segment_pullback_is_linear_in_u() {
    let p = patch(GeometryFamily::Segment { length: 1.0 }, &[16]);
    let eps = 0.2;
    let l = layer_geometry(&p, eps, 9).unwrap();
    let field = AmbientField::polynomial([poly(vec![mono(-1.0, [0, 1, 0])]), poly(vec![]), poly(vec![])]);
    let raw = pullback(&field, &l, &p).unwrap();
    for s in 0..p.len() {
        let ny = p.normals[s][1];
        assert!((ny.abs() - 1.0).abs() < 1e-15);
        for (j, &u) in l.transverse.nodes.iter().enumerate() {
            let a1 = raw.tangential[l.idx(s, j)][0];
            assert!((a1 + eps * u * ny).abs() < 1e-14, "Ã₁ = {a1} at u = {u}");
        }
        assert_eq!(raw.tangential[l.idx(s, l.transverse.center)][0], 0.0);
    }
}

#[test]
fn sphere_trace_matches_chain_rule() {
    let p = patch(GeometryFamily::FullSphere { radius: 1.0 }, &[16, 32]);
    let eff = effective_field(&AmbientField::constant([0.0, 0.0, 1.0]), &p).unwrap();
    let l = layer_geometry(&p, 0.1, 9).unwrap();
    let pot = gauge_fix(&pullback(&AmbientField::constant([0.0, 0.0, 1.0]), &l, &p).unwrap(), &p);
    let mut checked = 0;
    for s in (0..p.len()).step_by(p.len() / 16) {
        let [t, f] = p.grid.coords(s);
        // x_φ = (−sin θ sin φ, sin θ cos φ, 0), A = ½(−y, x, 0).
        let x = [t.sin() * f.cos(), t.sin() * f.sin(), t.cos()];
        let a = [-0.5 * x[1], 0.5 * x[0], 0.0];
        let x_phi = [-t.sin() * f.sin(), t.sin() * f.cos(), 0.0];
        let oracle = x_phi[0] * a[0] + x_phi[1] * a[1];
        assert!((oracle - 0.5 * t.sin().powi(2)).abs() < 1e-15);
        assert!((eff.alpha[s][1] - oracle).abs() < 1e-14);
        assert!(eff.alpha[s][0].abs() < 1e-14);
        assert!((pot.trace[s][1] - oracle).abs() < 1e-14);
        checked += 1;
    }
    assert!(checked >= 16);
}

#[test]
fn gauge_fix_is_idempotent_and_keeps_trace() {
    let p = patch(GeometryFamily::Torus { major: 2.0, minor: 0.5 }, &[16, 24]);
    let l = layer_geometry(&p, 0.1, 9).unwrap();
    let field = AmbientField::constant([0.3, -0.4, 1.0]);
    let raw = pullback(&field, &l, &p).unwrap();
    let once = gauge_fix(&raw, &p);
    let twice = gauge_fix(&once.as_raw(), &p);
    assert!(once.transverse.iter().all(|v| *v == 0.0));
    let d = once.tangential.iter().zip(&twice.tangential).map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs())).fold(0.0, f64::max);
    assert!(d <= 1e-13, "second fix moved Ã by {d}");
    let c = l.transverse.center;
    for s in 0..p.len() {
        for a in 0..2 {
            assert!((raw.tangential[l.idx(s, c)][a] - once.trace[s][a]).abs() < 1e-14);
        }
    }
}

#[test]
fn pure_gauge_on_plane_is_removed() {
    let p = patch(GeometryFamily::PlaneRectangle { lx: 1.0, ly: 1.0 }, &[12, 12]);
    let field = AmbientField::polynomial([poly(vec![]), poly(vec![]), poly(vec![mono(1.0, [0, 0, 1])])]);
    let l = layer_geometry(&p, 0.2, 9).unwrap();
    let raw = pullback(&field, &l, &p).unwrap();
    assert!(raw.transverse.iter().any(|v| v.abs() > 1e-3));
    let pot = gauge_fix(&raw, &p);
    let sup = pot.tangential.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(sup < 1e-14, "Ã = {sup}");
    let z = AmbientField::zero();
    let with = eigs(&layer(&p, &field, 0.2, 9), 4);
    let without = eigs(&layer(&p, &z, 0.2, 9), 4);
    for (a, b) in with.iter().zip(&without) {
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
    }
}

#[test]
fn field_is_invariant_under_gauge_fix() {
    let p = patch(GeometryFamily::Torus { major: 2.0, minor: 0.5 }, &[24, 32]);
    let field = AmbientField::constant([0.2, 0.5, 1.0]);
    let l = layer_geometry(&p, 0.1, 17).unwrap();
    let raw = pullback(&field, &l, &p).unwrap();
    let fixed = gauge_fix(&raw, &p);
    let (b0, b1) = (two_form(&raw), two_form(&fixed.as_raw()));
    let scale = b0.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    let d = b0.iter().zip(&b1).map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    assert!(d <= 1e-12 * scale, "2-form changed by {d} (scale {scale})");
}

#[test]
fn cylinder_along_field_has_no_effective_field() {
    let p = patch(GeometryFamily::CylinderSection { radius: 1.0, length: 2.0, angle: std::f64::consts::TAU }, &[12, 24]);
    let eff = effective_field(&AmbientField::constant([0.0, 0.0, 1.5]), &p).unwrap();
    for route in [&eff.b_eff, &eff.b_eff_transformed] {
        assert!(route.as_ref().unwrap().iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn circle_flux_is_pi_b() {
    let p = patch(GeometryFamily::Circle { radius: 1.0 }, &[64]);
    for b in [1.0, 0.5, -2.0] {
        let eff = effective_field(&AmbientField::constant([0.0, 0.0, b]), &p).unwrap();
        let flux = eff.flux.unwrap();
        assert!((flux - std::f64::consts::PI * b).abs() < 1e-12);
        assert!(!eff.gauged_out);
    }
    let seg = patch(GeometryFamily::Segment { length: 1.0 }, &[16]);
    let eff = effective_field(&AmbientField::constant([0.0, 0.0, 1.0]), &seg).unwrap();
    assert!(eff.gauged_out && eff.flux.is_none());
}

fn remainder_grid(family: GeometryFamily, sizes: &[usize], eps: f64) -> Vec<[f64; 2]> {
    let p = patch(family, sizes);
    let l = layer_geometry(&p, eps, 9).unwrap();
    gauge_fix(&pullback(&AmbientField::constant([0.3, -0.5, 1.0]), &l, &p).unwrap(), &p).remainder
}

fn max_diff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs())).fold(0.0, f64::max)
}

#[test]
fn remainder_depends_on_eps_only_through_the_layer_point() {
    let plane = GeometryFamily::PlaneRectangle { lx: 1.0, ly: 1.0 };
    let d = max_diff(&remainder_grid(plane.clone(), &[10, 10], 0.1), &remainder_grid(plane, &[10, 10], 0.05));
    assert!(d < 1e-12, "plane: {d}");

    let torus = GeometryFamily::Torus { major: 2.0, minor: 0.5 };
    let r = |e| remainder_grid(torus.clone(), &[16, 24], e);
    let (d1, d2) = (max_diff(&r(0.1), &r(0.05)), max_diff(&r(0.05), &r(0.025)));
    assert!(d1 / 0.1 < 10.0 && d2 / 0.05 < 10.0);
    assert!(d1 / d2 > 1.5, "A′ differences {d1} → {d2} do not shrink like ε");
}

#[test]
fn diamagnetic_inequality_on_effective_operators() {
    let p = patch(GeometryFamily::BumpedPlane { lx: 2.0, ly: 2.0, amplitude: 0.3, width: 0.5 }, &[20, 20]);
    let base = eigs(&heff(&p, &AmbientField::zero()), 1)[0];
    for b in [[0.0, 0.0, 1.0], [0.5, 0.2, 2.0], [1.0, -1.0, 0.3]] {
        let lam = eigs(&heff(&p, &AmbientField::constant(b)), 1)[0];
        assert!(lam >= base - 1e-9, "{lam} < {base}");
    }
}
