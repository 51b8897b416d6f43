use std::path::{Path, PathBuf};

use serde_json::json;
use thinlayer::convergence::{run_sweep, SweepConfig, SweepError};
use thinlayer::eigensolve::{lowest_eigenpairs, SolverError, SolverSettings, Spectrum};
use thinlayer::geometry::{
    build_patch, check_embedding, curvature_regularity, layer_geometry, GeometryError, GeometryFamily, HypersurfacePatch,
};
use thinlayer::magnetics::{
    effective_field, electric_layer, electric_trace, gauge_fix, pullback, AmbientField, MagneticsError,
};
use thinlayer::operators::{
    assemble_comparison, assemble_effective, assemble_full, renormalize, with_field_label, AssembledOperator,
    AssemblyError, Sign,
};

use crate::config::{self, ConfigError, RunConfig};
use crate::output::{num, Outputs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_ACCEPTANCE: u8 = 4;

pub struct Options {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub verbose: bool,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn config(m: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_CONFIG, message: format!("config: {m}") }
    }
    fn solver(m: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_SOLVER, message: format!("solver: {m}") }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}
impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::config(e)
    }
}
impl From<MagneticsError> for Failure {
    fn from(e: MagneticsError) -> Self {
        Failure::config(e)
    }
}
impl From<AssemblyError> for Failure {
    fn from(e: AssemblyError) -> Self {
        Failure::solver(e)
    }
}
impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        Failure::solver(e)
    }
}
impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Assembly(_) | SweepError::Solver(_) => Failure::solver(e),
            _ => Failure::config(e),
        }
    }
}

struct Loaded {
    cfg: RunConfig,
    family: GeometryFamily,
    field: AmbientField,
    solver: SolverSettings,
    seed: u64,
}

fn load(opts: &Options) -> Result<Loaded, Failure> {
    let text = std::fs::read_to_string(&opts.config)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", opts.config.display())))?;
    let cfg = config::parse(&text)?;
    let base = opts.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let family = config::family(&cfg.geometry, &base)?;
    let field = config::field(cfg.field.as_ref(), family.dim(), &base)?;
    let seed = opts.seed.or(cfg.solver.seed).unwrap_or(42);
    let solver = config::solver(&cfg.solver, seed);
    Ok(Loaded { cfg, family, field, solver, seed })
}

fn commit(opts: &Options, out: Outputs) -> Result<(), Failure> {
    let written = out.commit(&opts.out).map_err(|e| Failure::config(format!("cannot write to {}: {e}", opts.out.display())))?;
    if opts.verbose {
        for p in written {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn geometry(opts: &Options) -> Result<u8, Failure> {
    let l = load(opts)?;
    let patch = build_patch(&l.family, &l.cfg.geometry.grid)?;
    let k = patch.sdim();
    let with_field = l.cfg.field.is_some();
    let eff = if with_field { Some(effective_field(&l.field, &patch)?) } else { None };
    let v_eff = patch.v_eff();

    let mut header: Vec<String> = vec!["node".into()];
    for a in 0..k {
        header.push(format!("i{}", a + 1));
    }
    for a in 0..k {
        header.push(format!("c{}", a + 1));
    }
    header.extend(["x", "y", "z"].map(String::from));
    for a in 0..k {
        header.push(format!("kappa_{}", a + 1));
    }
    for a in 0..k {
        header.push(format!("K_{}", a + 1));
    }
    header.push("v_eff".into());
    let b_cols = eff.as_ref().and_then(|e| e.b_eff.as_ref()).is_some();
    if b_cols {
        header.extend(["b_eff", "b_eff_transformed", "b_eff_curl"].map(String::from));
    }
    let mut rows = Vec::with_capacity(patch.len());
    for s in 0..patch.len() {
        let idx = patch.grid.multi(s);
        let c = patch.grid.coords(s);
        let mut r = vec![s.to_string()];
        r.extend((0..k).map(|a| idx[a].to_string()));
        r.extend((0..k).map(|a| num(c[a])));
        r.extend(patch.positions[s].iter().map(|v| num(*v)));
        r.extend((0..k).map(|a| num(patch.kappa[s][a])));
        r.extend((0..k).map(|a| num(patch.mean_curvatures[s][a])));
        r.push(num(v_eff[s]));
        if let Some(e) = eff.as_ref().filter(|_| b_cols) {
            let col = |v: &Option<Vec<f64>>| v.as_ref().map(|v| num(v[s])).unwrap_or_default();
            r.push(col(&e.b_eff));
            r.push(col(&e.b_eff_transformed));
            r.push(col(&e.b_eff_curl));
        }
        rows.push(r);
    }

    let mut epsilons: Vec<f64> = l.cfg.sweep.as_ref().map(|s| s.epsilons.clone()).unwrap_or_default();
    if let Some(e) = l.cfg.spectrum.as_ref().and_then(|s| s.epsilon) {
        epsilons.push(e);
    }
    let mut embedding = Vec::new();
    for e in epsilons {
        if e > 0.0 {
            let d = check_embedding(&patch, e)?;
            embedding.push(json!({ "epsilon": e, "passed": d.passed(), "reason": d.reason(), "diagnosis": d }));
        }
    }
    let refinement = match &l.family {
        GeometryFamily::UserSampled(s) => match s.refinement_self_test() {
            Some(Ok(r)) => json!(r),
            Some(Err(e)) => json!({ "error": e.to_string() }),
            None => json!(null),
        },
        _ => json!(null),
    };
    let summary = json!({
        "geometry": patch.id,
        "dim": patch.dim,
        "grid": l.cfg.geometry.grid,
        "nodes": patch.len(),
        "rho_m": if patch.rho_m.is_finite() { json!(patch.rho_m) } else { json!("infinity") },
        "curvature_regularity": curvature_regularity(&patch),
        "sup_kappa": (0..k).map(|a| patch.kappa.iter().map(|v| v[a].abs()).fold(0.0, f64::max)).collect::<Vec<_>>(),
        "sup_v_eff": v_eff.iter().map(|v| v.abs()).fold(0.0, f64::max),
        "field": if with_field { json!(l.field.id()) } else { json!(null) },
        "flux": eff.as_ref().and_then(|e| e.flux),
        "gauged_out": eff.as_ref().map(|e| e.gauged_out),
        "embedding": embedding,
        "refinement_self_test": refinement,
    });
    let mut out = Outputs::default();
    out.add(l.cfg.geometry.csv.clone(), csv_bytes(&header, &rows));
    out.add_json(l.cfg.geometry.summary.clone(), &summary);
    commit(opts, out)?;
    Ok(EXIT_OK)
}

fn operator(
    name: &str,
    patch: &HypersurfacePatch,
    field: &AmbientField,
    epsilon: Option<f64>,
    m: usize,
    renorm: bool,
) -> Result<(AssembledOperator, serde_json::Value), Failure> {
    if name == "h-eff" {
        let eff = effective_field(field, patch)?;
        let trace = electric_trace(field, patch)?;
        let op = assemble_effective(patch, &eff, trace.as_deref())?;
        return Ok((with_field_label(op, &field.id()), json!(null)));
    }
    let eps = epsilon.ok_or_else(|| Failure::config(format!("spectrum.epsilon: required for operator {name}")))?;
    let layer = layer_geometry(patch, eps, m)?;
    let raw = pullback(field, &layer, patch)?;
    let pot = gauge_fix(&raw, patch);
    let full = electric_layer(field, &layer, patch)?;
    let trace = electric_trace(field, patch)?;
    let (op, extra) = match name {
        "full-h" => (assemble_full(patch, &layer, &pot, full.as_deref())?, json!(null)),
        _ => {
            let sign = if name == "comparison-plus" { Sign::Plus } else { Sign::Minus };
            let e = full.as_deref().zip(trace.as_deref());
            let (op, c) = assemble_comparison(patch, &layer, &pot, sign, e)?;
            (op, json!(c))
        }
    };
    let op = if renorm { renormalize(op)? } else { op };
    Ok((with_field_label(op, &field.id()), extra))
}

fn eigenvector_csv(op: &AssembledOperator, sp: &Spectrum) -> Vec<u8> {
    let mut header: Vec<String> = ["dof", "surface_node", "transverse_node"].map(String::from).to_vec();
    for n in 0..sp.eigenvalues.len() {
        header.push(format!("re_{}", n + 1));
        header.push(format!("im_{}", n + 1));
    }
    let m = op.dofs.transverse_nodes;
    let rows: Vec<Vec<String>> = (0..op.dim())
        .map(|i| {
            let (s, j) = match m {
                Some(m) => (i / m, Some(i % m)),
                None => (i, None),
            };
            let mut r = vec![i.to_string(), s.to_string(), j.map(|j| j.to_string()).unwrap_or_default()];
            for v in &sp.eigenvectors {
                r.push(num(v[i].re));
                r.push(num(v[i].im));
            }
            r
        })
        .collect();
    csv_bytes(&header, &rows)
}

pub fn spectrum(opts: &Options) -> Result<u8, Failure> {
    let l = load(opts)?;
    let Some(block) = &l.cfg.spectrum else {
        return Err(Failure::config("spectrum: block required for the spectrum command"));
    };
    let patch = build_patch(&l.family, &l.cfg.geometry.grid)?;
    let n = l.cfg.solver.n;
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for name in &block.operators {
        let (op, extra) = operator(name, &patch, &l.field, block.epsilon, block.transverse_nodes, block.renormalize)?;
        if opts.verbose {
            eprintln!("{name}: {} dofs, {} nonzeros", op.dim(), op.matrix.nnz());
        }
        let sp = lowest_eigenpairs(&op, n.min(op.dim()), &l.solver)?;
        for (i, (lam, res)) in sp.eigenvalues.iter().zip(&sp.residuals).enumerate() {
            rows.push(vec![name.clone(), (i + 1).to_string(), num(*lam), num(*res)]);
        }
        if block.eigenvectors {
            out.add(format!("eigenvectors_{name}.csv"), eigenvector_csv(&op, &sp));
        }
        if block.matrix_market {
            let mut buf = Vec::new();
            op.write_matrix_market(&mut buf).map_err(|e| Failure::solver(format!("matrix market: {e}")))?;
            out.add(format!("{name}.mtx"), buf);
            out.add_json(format!("{name}.json"), &op.sidecar());
        }
        reports.push(json!({
            "operator": name,
            "meta": op.meta,
            "dofs": op.dim(),
            "nnz": op.matrix.nnz(),
            "lower_bound": op.lower_bound,
            "hermitian_residual": op.hermitian_residual,
            "solver": sp.meta,
            "eigenvalues": sp.eigenvalues,
            "residuals": sp.residuals,
            "comparison_constants": extra,
        }));
    }
    let header = ["operator", "n", "eigenvalue", "residual"].map(String::from).to_vec();
    out.add(block.csv.clone(), csv_bytes(&header, &rows));
    out.add_json(
        "spectrum.json",
        &json!({ "geometry": patch.id, "field": l.field.id(), "epsilon": block.epsilon, "seed": l.seed, "operators": reports }),
    );
    commit(opts, out)?;
    Ok(EXIT_OK)
}

pub fn converge(opts: &Options) -> Result<u8, Failure> {
    let l = load(opts)?;
    let Some(block) = &l.cfg.sweep else {
        return Err(Failure::config("sweep: block required for the converge command"));
    };
    let mut cfg = SweepConfig::new(l.family.clone(), l.cfg.geometry.grid.clone(), block.epsilons.clone(), l.cfg.solver.n);
    cfg.transverse_nodes = block.transverse_nodes;
    cfg.field = l.field.clone();
    cfg.extra = block.extra;
    cfg.solver = l.solver.clone();
    cfg.k_override = block.k;
    cfg.resolvent_iterations = block.resolvent_iterations;
    cfg.discretization_check = block.discretization_check;
    cfg.gap_check = block.gap_check;
    cfg.seed = l.seed;
    if opts.verbose {
        eprintln!("sweep over {} values of ε on {}", cfg.epsilons.len(), cfg.family.id());
    }
    let report = run_sweep(&cfg)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| Failure::solver(format!("csv: {e}")))?;
    let mut out = Outputs::default();
    out.add(block.csv.clone(), csv);
    out.add_json(block.summary.clone(), &report.summary_json());
    commit(opts, out)?;
    if report.acceptance.ok {
        Ok(EXIT_OK)
    } else {
        for v in &report.acceptance.violations {
            eprintln!("acceptance: {v}");
        }
        Ok(EXIT_ACCEPTANCE)
    }
}
