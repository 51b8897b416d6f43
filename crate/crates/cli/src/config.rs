//! Run configuration: JSON with a versioned schema, validated before any
//! computation.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use thinlayer::eigensolve::SolverSettings;
use thinlayer::geometry::{Closure, GeometryFamily, SampledClosure, SampledSurface};
use thinlayer::magnetics::{AmbientField, Monomial, Polynomial, SampledGrid, ScalarPotential, VectorPotential};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub field: Option<FieldBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub spectrum: Option<SpectrumBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub family: String,
    #[serde(default)]
    pub params: Value,
    pub grid: Vec<usize>,
    /// One of "periodic" or "boundary" per chart direction.
    #[serde(default)]
    pub closure: Option<Vec<String>>,
    #[serde(default = "default_geometry_csv")]
    pub csv: String,
    #[serde(default = "default_geometry_json")]
    pub summary: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub electric: Option<ElectricBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectricBlock {
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub dense_threshold: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        SolverBlock { n: default_n(), tol: default_tol(), dense_threshold: None, seed: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub epsilons: Vec<f64>,
    #[serde(default = "default_m")]
    pub transverse_nodes: usize,
    /// Overrides the default k policy.
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default = "default_extra")]
    pub extra: usize,
    #[serde(default = "default_true")]
    pub discretization_check: bool,
    #[serde(default)]
    pub gap_check: bool,
    #[serde(default = "default_iters")]
    pub resolvent_iterations: usize,
    #[serde(default = "default_sweep_csv")]
    pub csv: String,
    #[serde(default = "default_sweep_json")]
    pub summary: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_m")]
    pub transverse_nodes: usize,
    /// Any of "full-h", "h-eff", "comparison-plus", "comparison-minus".
    #[serde(default = "default_operators")]
    pub operators: Vec<String>,
    #[serde(default = "default_true")]
    pub renormalize: bool,
    #[serde(default)]
    pub eigenvectors: bool,
    #[serde(default)]
    pub matrix_market: bool,
    #[serde(default = "default_spectrum_csv")]
    pub csv: String,
}

fn default_n() -> usize {
    4
}
fn default_tol() -> f64 {
    1e-9
}
fn default_m() -> usize {
    17
}
fn default_extra() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_iters() -> usize {
    60
}
fn default_operators() -> Vec<String> {
    vec!["h-eff".into()]
}
fn default_geometry_csv() -> String {
    "geometry.csv".into()
}
fn default_geometry_json() -> String {
    "geometry.json".into()
}
fn default_sweep_csv() -> String {
    "convergence.csv".into()
}
fn default_sweep_json() -> String {
    "convergence.json".into()
}
fn default_spectrum_csv() -> String {
    "spectrum.csv".into()
}

/// Parse and validate; `base` resolves relative data paths.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| ConfigError(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return err(format!("schema_version: expected {SCHEMA_VERSION}, found {}", cfg.schema_version));
    }
    if cfg.solver.n == 0 {
        return err("solver.n: must be at least 1");
    }
    finite("solver.tol", cfg.solver.tol)?;
    if cfg.solver.tol <= 0.0 {
        return err("solver.tol: must be positive");
    }
    if let Some(s) = &cfg.sweep {
        for (i, e) in s.epsilons.iter().enumerate() {
            finite(&format!("sweep.epsilons[{i}]"), *e)?;
        }
        if let Some(k) = s.k {
            finite("sweep.k", k)?;
        }
        check_file_name("sweep.csv", &s.csv)?;
        check_file_name("sweep.summary", &s.summary)?;
    }
    if let Some(s) = &cfg.spectrum {
        if let Some(e) = s.epsilon {
            finite("spectrum.epsilon", e)?;
        }
        for o in &s.operators {
            if !["full-h", "h-eff", "comparison-plus", "comparison-minus"].contains(&o.as_str()) {
                return err(format!("spectrum.operators: unknown operator {o:?}"));
            }
        }
        check_file_name("spectrum.csv", &s.csv)?;
    }
    check_file_name("geometry.csv", &cfg.geometry.csv)?;
    check_file_name("geometry.summary", &cfg.geometry.summary)?;
    Ok(cfg)
}

fn check_file_name(field: &str, name: &str) -> Result<(), ConfigError> {
    let p = Path::new(name);
    if name.is_empty() || p.is_absolute() || p.components().count() != 1 {
        return err(format!("{field}: expected a plain file name, found {name:?}"));
    }
    Ok(())
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        err(format!("{field}: value must be finite"))
    }
}

fn params<T: DeserializeOwned>(field: &str, v: &Value) -> Result<T, ConfigError> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| ConfigError(format!("{field}: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Length {
    length: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Radius {
    radius: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Axes {
    a: f64,
    b: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Catenary {
    c: f64,
    half_length: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Rect {
    lx: f64,
    ly: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Bump {
    lx: f64,
    ly: f64,
    amplitude: f64,
    width: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Cap {
    radius: f64,
    polar_angle: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Cylinder {
    radius: f64,
    length: f64,
    angle: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TorusP {
    major: f64,
    minor: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Sampled {
    path: String,
    dim: usize,
    spacing: Vec<f64>,
    #[serde(default)]
    label: Option<String>,
}

fn closures(list: &[String]) -> Result<Vec<SampledClosure>, ConfigError> {
    list.iter()
        .enumerate()
        .map(|(i, c)| match c.as_str() {
            "periodic" => Ok(SampledClosure::Periodic),
            "boundary" => Ok(SampledClosure::Boundary),
            other => err(format!("geometry.closure[{i}]: expected \"periodic\" or \"boundary\", found {other:?}")),
        })
        .collect()
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn family(g: &GeometryBlock, base: &Path) -> Result<GeometryFamily, ConfigError> {
    let f = "geometry.params";
    let fam = match g.family.as_str() {
        "segment" => GeometryFamily::Segment { length: params::<Length>(f, &g.params)?.length },
        "circle" => GeometryFamily::Circle { radius: params::<Radius>(f, &g.params)?.radius },
        "ellipse" => {
            let p: Axes = params(f, &g.params)?;
            GeometryFamily::Ellipse { a: p.a, b: p.b }
        }
        "catenary" => {
            let p: Catenary = params(f, &g.params)?;
            GeometryFamily::CatenaryCurve { c: p.c, half_length: p.half_length }
        }
        "plane-rectangle" => {
            let p: Rect = params(f, &g.params)?;
            GeometryFamily::PlaneRectangle { lx: p.lx, ly: p.ly }
        }
        "bumped-plane" => {
            let p: Bump = params(f, &g.params)?;
            GeometryFamily::BumpedPlane { lx: p.lx, ly: p.ly, amplitude: p.amplitude, width: p.width }
        }
        "sphere-cap" => {
            let p: Cap = params(f, &g.params)?;
            GeometryFamily::SphereCap { radius: p.radius, polar_angle: p.polar_angle }
        }
        "full-sphere" => GeometryFamily::FullSphere { radius: params::<Radius>(f, &g.params)?.radius },
        "cylinder-section" => {
            let p: Cylinder = params(f, &g.params)?;
            GeometryFamily::CylinderSection { radius: p.radius, length: p.length, angle: p.angle }
        }
        "torus" => {
            let p: TorusP = params(f, &g.params)?;
            GeometryFamily::Torus { major: p.major, minor: p.minor }
        }
        "user-sampled" => {
            let p: Sampled = params(f, &g.params)?;
            let Some(cl) = &g.closure else {
                return err("geometry.closure: required for user-sampled geometry");
            };
            let path = resolve(base, &p.path);
            let file = std::fs::File::open(&path)
                .map_err(|e| ConfigError(format!("geometry.params.path: cannot open {}: {e}", path.display())))?;
            let label = p.label.unwrap_or_else(|| p.path.clone());
            let s = SampledSurface::from_csv(label, p.dim, closures(cl)?, p.spacing, file)
                .map_err(|e| ConfigError(format!("geometry.params.path: {e}")))?;
            GeometryFamily::UserSampled(s)
        }
        other => return err(format!("geometry.family: unknown family {other:?}")),
    };
    if let Err(e) = fam.validate() {
        return err(format!("geometry.params: {e}"));
    }
    let chart = fam.chart(&g.grid).map_err(|e| ConfigError(format!("geometry.grid: {e}")))?;
    if let (Some(cl), false) = (&g.closure, matches!(fam, GeometryFamily::UserSampled(_))) {
        let want = closures(cl)?;
        if want.len() != chart.axes.len() {
            return err(format!("geometry.closure: expected {} entries", chart.axes.len()));
        }
        for (i, (w, a)) in want.iter().zip(&chart.axes).enumerate() {
            let periodic = matches!(a.closure, Closure::Periodic);
            if periodic != (*w == SampledClosure::Periodic) {
                return err(format!("geometry.closure[{i}]: does not match the {} chart", g.family));
            }
        }
    }
    Ok(fam)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Term {
    coef: f64,
    powers: [u32; 3],
}

fn poly(field: &str, terms: Vec<Term>) -> Result<Polynomial, ConfigError> {
    for (i, t) in terms.iter().enumerate() {
        finite(&format!("{field}[{i}].coef"), t.coef)?;
    }
    Ok(Polynomial::new(terms.into_iter().map(|t| Monomial { coef: t.coef, powers: t.powers }).collect()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantB {
    b: [f64; 3],
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyVector {
    components: [Vec<Term>; 3],
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyScalar {
    terms: Vec<Term>,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampledField {
    path: String,
    dim: usize,
}

fn sampled_grid(field: &str, p: SampledField, components: usize, base: &Path) -> Result<SampledGrid, ConfigError> {
    let path = resolve(base, &p.path);
    let file = std::fs::File::open(&path).map_err(|e| ConfigError(format!("{field}.path: cannot open {}: {e}", path.display())))?;
    SampledGrid::from_csv(p.dim, components, file).map_err(|e| ConfigError(format!("{field}.path: {e}")))
}

pub fn field(block: Option<&FieldBlock>, dim: usize, base: &Path) -> Result<AmbientField, ConfigError> {
    let Some(b) = block else { return Ok(AmbientField::zero()) };
    let f = "field.params";
    let potential = match b.kind.as_str() {
        "zero" => VectorPotential::Zero,
        "constant" => {
            let p: ConstantB = params(f, &b.params)?;
            for (i, v) in p.b.iter().enumerate() {
                finite(&format!("field.params.b[{i}]"), *v)?;
            }
            VectorPotential::ConstantB { b: p.b }
        }
        "polynomial" => {
            let p: PolyVector = params(f, &b.params)?;
            let [a, bb, c] = p.components;
            VectorPotential::Polynomial([
                poly("field.params.components[0]", a)?,
                poly("field.params.components[1]", bb)?,
                poly("field.params.components[2]", c)?,
            ])
        }
        "sampled" => VectorPotential::Sampled(sampled_grid(f, params(f, &b.params)?, dim, base)?),
        other => return err(format!("field.kind: unknown field kind {other:?}")),
    };
    let electric = match &b.electric {
        None => None,
        Some(e) => {
            let f = "field.electric.params";
            Some(match e.kind.as_str() {
                "polynomial" => ScalarPotential::Polynomial(poly("field.electric.params.terms", params::<PolyScalar>(f, &e.params)?.terms)?),
                "sampled" => ScalarPotential::Sampled(sampled_grid(f, params(f, &e.params)?, 1, base)?),
                other => return err(format!("field.electric.kind: unknown kind {other:?}")),
            })
        }
    };
    Ok(AmbientField { potential, electric })
}

pub fn solver(b: &SolverBlock, seed: u64) -> SolverSettings {
    let mut s = SolverSettings::from_env();
    s.tol = b.tol;
    if std::env::var("THINLAYER_DENSE_THRESHOLD").is_err() {
        if let Some(t) = b.dense_threshold {
            s.dense_threshold = t;
        }
    }
    s.seed = seed;
    s
}
