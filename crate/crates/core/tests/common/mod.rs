#![allow(dead_code)]

use thinlayer::eigensolve::{lowest_eigenpairs, SolverSettings, Spectrum};
use thinlayer::geometry::{build_patch, layer_geometry, GeometryFamily, HypersurfacePatch};
use thinlayer::magnetics::{effective_field, gauge_fix, pullback, AmbientField};
use thinlayer::operators::{
    assemble_comparison, assemble_effective, assemble_full, renormalize, AssembledOperator, ComparisonConstants, Sign,
};

pub fn patch(family: GeometryFamily, sizes: &[usize]) -> HypersurfacePatch {
    build_patch(&family, sizes).expect("patch")
}

pub fn heff(patch: &HypersurfacePatch, field: &AmbientField) -> AssembledOperator {
    let eff = effective_field(field, patch).expect("effective field");
    assemble_effective(patch, &eff, None).expect("h_eff")
}

pub fn layer(patch: &HypersurfacePatch, field: &AmbientField, eps: f64, m: usize) -> AssembledOperator {
    let layer = layer_geometry(patch, eps, m).expect("layer");
    let pot = gauge_fix(&pullback(field, &layer, patch).expect("pullback"), patch);
    renormalize(assemble_full(patch, &layer, &pot, None).expect("H")).expect("renormalize")
}

pub fn comparison(
    patch: &HypersurfacePatch,
    field: &AmbientField,
    eps: f64,
    m: usize,
    sign: Sign,
) -> (AssembledOperator, ComparisonConstants) {
    let layer = layer_geometry(patch, eps, m).expect("layer");
    let pot = gauge_fix(&pullback(field, &layer, patch).expect("pullback"), patch);
    let (op, c) = assemble_comparison(patch, &layer, &pot, sign, None).expect("H0");
    (renormalize(op).expect("renormalize"), c)
}

pub fn spectrum(op: &AssembledOperator, n: usize) -> Spectrum {
    lowest_eigenpairs(op, n, &SolverSettings::from_env()).expect("eigensolve")
}

pub fn eigs(op: &AssembledOperator, n: usize) -> Vec<f64> {
    spectrum(op, n).eigenvalues
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn dense_eigs(op: &AssembledOperator, n: usize) -> Vec<f64> {
    let settings = SolverSettings { dense_threshold: usize::MAX, ..SolverSettings::default() };
    lowest_eigenpairs(op, n, &settings).expect("dense eigensolve").eigenvalues
}
