mod common;

use common::*;
use thinlayer::convergence::{gap_bound_check, run_sweep, SweepConfig, SweepError, TransverseMode};
use thinlayer::eigensolve::SolverSettings;
use thinlayer::geometry::{GeometryFamily, TransverseGrid};
use thinlayer::magnetics::AmbientField;

fn circle_sweep(seed: u64) -> SweepConfig {
    let mut cfg = SweepConfig::new(GeometryFamily::Circle { radius: 1.0 }, vec![64], vec![0.2, 0.1, 0.05], 3);
    cfg.transverse_nodes = 9;
    cfg.discretization_check = false;
    cfg.solver = SolverSettings { dense_threshold: 0, seed, ..SolverSettings::default() };
    cfg
}

#[test]
fn circle_sweep_rows_fits_and_sandwich() {
    let rep = run_sweep(&circle_sweep(42)).unwrap();
    let eps: Vec<f64> = rep.rows.iter().map(|r| r.epsilon).collect();
    assert!(eps.windows(2).all(|w| w[0] >= w[1]), "rows not sorted by descending ε");
    assert_eq!(rep.rows.len(), 9);
    for s in &rep.epsilons {
        assert!(s.sandwich.as_ref().unwrap().holds, "sandwich at ε = {}", s.epsilon);
        let r = s.resolvent.as_ref().unwrap();
        assert!(r.value > 0.0 && r.value < 1.0);
    }
    for c in 1..=rep.clusters.len() {
        if let Some(f) = rep.fit("leakage", Some(c)) {
            if let Some(fit) = &f.fit {
                assert!(fit.slope >= 0.9, "leakage slope {} for cluster {c}", fit.slope);
            }
        }
    }
    let gap = rep.fit("gap", Some(1)).unwrap();
    assert!(gap.within_window, "{gap:?}");
}

#[test]
fn discrepancy_ignores_eigenvector_phases() {
    let a = run_sweep(&circle_sweep(1)).unwrap();
    let b = run_sweep(&circle_sweep(2)).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((x.discrepancy - y.discrepancy).abs() <= 1e-8 + 1e-4 * x.discrepancy, "{} vs {}", x.discrepancy, y.discrepancy);
        assert!((x.leakage - y.leakage).abs() <= 1e-8 + 1e-4 * x.leakage);
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let rep = run_sweep(&circle_sweep(42)).unwrap();
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let hdr = rd.headers().unwrap().clone();
    let col = |name: &str| hdr.iter().position(|h| h == name).unwrap();
    let recs: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(recs.len(), rep.rows.len());
    for (rec, row) in recs.iter().zip(&rep.rows) {
        let f = |n: &str| rec[col(n)].parse::<f64>().unwrap();
        assert_eq!(f("epsilon"), row.epsilon);
        assert_eq!(f("lambda"), row.lambda);
        assert_eq!(f("mu"), row.mu);
        assert_eq!(f("gap"), row.gap);
        assert_eq!(f("discrepancy"), row.discrepancy);
        assert_eq!(f("leakage"), row.leakage);
        assert_eq!(rec[col("n")].parse::<usize>().unwrap(), row.n);
    }
}

#[test]
fn flat_gap_bound_quadruples_when_eps_halves() {
    let p = patch(GeometryFamily::Segment { length: 1.0 }, &[32]);
    let z = AmbientField::zero();
    let m = 17;
    let mode = TransverseMode::new(TransverseGrid::new(m).unwrap());
    let r1 = gap_bound_check(&layer(&p, &z, 0.1, m), &mode, 1.0, 50, 42).unwrap();
    let r2 = gap_bound_check(&layer(&p, &z, 0.05, m), &mode, 1.0, 50, 42).unwrap();
    assert!((r1.bound - 740.220_330_08).abs() < 1e-6, "bound {}", r1.bound);
    assert!((r2.bound / r1.bound - 4.0).abs() < 1e-12);
    assert!(r1.passed() && r2.passed());
    assert!(r1.sampled_min >= r1.q_min - 1e-9 * r1.q_min);
    assert!((r2.excitation / r1.excitation - 4.0).abs() < 0.05, "{} / {}", r2.excitation, r1.excitation);
}

#[test]
fn sweep_configuration_errors() {
    let circle = GeometryFamily::Circle { radius: 1.0 };
    let bad_order = SweepConfig::new(circle.clone(), vec![32], vec![0.1, 0.2], 2);
    assert!(matches!(run_sweep(&bad_order), Err(SweepError::Config(_))));
    let thick = SweepConfig::new(circle, vec![32], vec![1.5, 0.1], 2);
    assert!(matches!(run_sweep(&thick), Err(SweepError::Embedding(_))));
}
