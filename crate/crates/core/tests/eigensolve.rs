mod common;

use common::*;
use thinlayer::convergence::TransverseMode;
use thinlayer::eigensolve::{lowest_eigenpairs, opnorm_estimate, random_vector, resolvent_apply, Method, SolverSettings};
use thinlayer::geometry::{layer_geometry, GeometryFamily};
use thinlayer::magnetics::{gauge_fix, pullback, AmbientField};
use thinlayer::operators::{weighted_inner, AssembledOperator, ComparisonConstants, Sign};
use thinlayer::C64;

fn lanczos(seed: u64) -> SolverSettings {
    SolverSettings { dense_threshold: 0, seed, ..SolverSettings::default() }
}

fn wnorm(op: &AssembledOperator, v: &[C64]) -> f64 {
    weighted_inner(&op.weights, v, v).re.sqrt()
}

#[test]
fn dense_and_iterative_paths_agree() {
    let circle = patch(GeometryFamily::Circle { radius: 1.0 }, &[64]);
    let torus = patch(GeometryFamily::Torus { major: 2.0, minor: 0.5 }, &[16, 24]);
    let sphere = patch(GeometryFamily::FullSphere { radius: 1.0 }, &[16, 32]);
    let b = AmbientField::constant([0.0, 0.3, 1.0]);
    let ops = [
        layer(&circle, &AmbientField::zero(), 0.1, 9),
        comparison(&circle, &AmbientField::constant([0.0, 0.0, 1.0]), 0.1, 9, Sign::Minus).0,
        heff(&torus, &b),
        heff(&sphere, &b),
    ];
    for op in &ops {
        let d = lowest_eigenpairs(op, 6, &SolverSettings { dense_threshold: usize::MAX, ..Default::default() }).unwrap();
        let l = lowest_eigenpairs(op, 6, &lanczos(42)).unwrap();
        assert_eq!(d.meta.method, Method::Dense);
        assert_eq!(l.meta.method, Method::ShiftInvertLanczos);
        for (a, b) in d.eigenvalues.iter().zip(&l.eigenvalues) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{op:?}: {a} vs {b}");
        }
    }
}

#[test]
fn shift_invert_is_seed_independent_and_orthonormal() {
    let p = patch(GeometryFamily::Circle { radius: 1.0 }, &[128]);
    let op = layer(&p, &AmbientField::zero(), 0.05, 17);
    let runs: Vec<_> = [1, 2, 3].iter().map(|&s| lowest_eigenpairs(&op, 5, &lanczos(s)).unwrap()).collect();
    for r in &runs[1..] {
        for (a, b) in runs[0].eigenvalues.iter().zip(&r.eigenvalues) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
    for r in &runs {
        assert!(r.residuals.iter().all(|x| x.is_finite()));
        for i in 0..5 {
            for j in 0..5 {
                let g = op.inner(&r.eigenvectors[i], &r.eigenvectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - C64::new(want, 0.0)).norm() < 1e-10, "⟨ψ{i}, ψ{j}⟩ = {g}");
            }
        }
    }
}

fn harness_k(p: &thinlayer::geometry::HypersurfacePatch, eps: f64, m: usize) -> f64 {
    let l = layer_geometry(p, eps, m).unwrap();
    let pot = gauge_fix(&pullback(&AmbientField::zero(), &l, p).unwrap(), p);
    let c = ComparisonConstants::compute(p, &l, &pot, None);
    let v_min = p.v_eff().iter().copied().fold(f64::INFINITY, f64::min);
    (2.0 * v_min.abs() + 1.0 + c.script_zero).max(1.0)
}

#[test]
fn resolvent_identity_on_circle() {
    let p = patch(GeometryFamily::Circle { radius: 1.0 }, &[128]);
    let op = layer(&p, &AmbientField::zero(), 0.1, 17);
    let k = harness_k(&p, 0.1, 17);
    for seed in [7, 8] {
        let v = random_vector(op.dim(), seed);
        let x = resolvent_apply(&op, k, &v).unwrap();
        let back: Vec<C64> = op.apply(&x).iter().zip(&x).map(|(hx, x)| hx + x * k).collect();
        let r: Vec<C64> = back.iter().zip(&v).map(|(a, b)| a - b).collect();
        assert!(wnorm(&op, &r) <= 1e-10 * wnorm(&op, &v));
    }
}

/// The difference map of the harness on a coarse grid, compared with the
/// norm of its dense matrix.
#[test]
fn opnorm_of_resolvent_difference_matches_dense_oracle() {
    let (eps, m) = (0.1, 9);
    let p = patch(GeometryFamily::Circle { radius: 1.0 }, &[32]);
    let z = AmbientField::zero();
    let ren = layer(&p, &z, eps, m);
    let eff = heff(&p, &z);
    let k = harness_k(&p, eps, m);
    let mode = TransverseMode::new(thinlayer::geometry::TransverseGrid::new(m).unwrap());
    let map = |v: &[C64]| -> Vec<C64> {
        let a = resolvent_apply(&ren, k, v).unwrap();
        let b = mode.embed(&resolvent_apply(&eff, k, &mode.project(v)).unwrap());
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    };
    let est = opnorm_estimate(&map, &ren.weights, 60, 42);

    let n = ren.dim();
    let w = &ren.weights;
    let mut dense = faer::Mat::<C64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0 / w[j].sqrt(), 0.0);
        let col = map(&e);
        for i in 0..n {
            dense[(i, j)] = col[i] * w[i].sqrt();
        }
    }
    let ev = dense.self_adjoint_eigen(faer::Side::Lower).unwrap();
    let exact = (0..n).map(|i| ev.S()[i].re.abs()).fold(0.0, f64::max);
    assert!(exact > 0.0 && exact < 1.0, "‖D‖ = {exact}");
    assert!(est.value <= exact * (1.0 + 1e-9), "{} > {exact}", est.value);
    assert!((est.value - exact).abs() <= 1e-2 * exact, "{} vs {exact}", est.value);
    assert!(est.monotone);
}
