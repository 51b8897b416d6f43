//! Ambient vector and scalar potentials.

use std::io::Read;

use super::MagneticsError;
use crate::small::V3;

/// `coef · y₁^p₁ y₂^p₂ y₃^p₃`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: [u32; 3],
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

fn ipow(x: f64, p: u32) -> f64 {
    x.powi(p as i32)
}

impl Polynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        Polynomial { terms }
    }

    pub fn value(&self, y: &V3) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * ipow(y[0], t.powers[0]) * ipow(y[1], t.powers[1]) * ipow(y[2], t.powers[2]))
            .sum()
    }

    pub fn partial(&self, y: &V3, axis: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.powers[axis] > 0)
            .map(|t| {
                let mut v = t.coef * t.powers[axis] as f64;
                for (a, &p) in t.powers.iter().enumerate() {
                    let p = if a == axis { p - 1 } else { p };
                    v *= ipow(y[a], p);
                }
                v
            })
            .sum()
    }

    /// Polynomial whose value is the `axis` partial derivative.
    pub fn derivative(&self, axis: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[axis] > 0)
            .map(|t| {
                let mut powers = t.powers;
                powers[axis] -= 1;
                Monomial { coef: t.coef * t.powers[axis] as f64, powers }
            })
            .collect();
        Polynomial { terms }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Polynomial { terms }
    }
}

/// Values on a regular ambient grid with multilinear interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledGrid {
    pub origin: V3,
    pub spacing: V3,
    /// Node counts per ambient axis; unused axes have one node.
    pub dims: [usize; 3],
    pub components: usize,
    /// Values at node `(i, j, k)` start at `((i * dims[1] + j) * dims[2] + k) * components`.
    pub values: Vec<f64>,
}

impl SampledGrid {
    pub fn new(origin: V3, spacing: V3, dims: [usize; 3], components: usize, values: Vec<f64>) -> Result<Self, MagneticsError> {
        let n = dims.iter().product::<usize>() * components;
        if values.len() != n {
            return Err(MagneticsError::SampleShape(format!("expected {n} values, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MagneticsError::SampleShape("non-finite sample value".into()));
        }
        for a in 0..3 {
            if dims[a] == 0 || (dims[a] > 1 && !(spacing[a] > 0.0)) {
                return Err(MagneticsError::SampleShape(format!("bad grid along axis {a}")));
            }
        }
        Ok(SampledGrid { origin, spacing, dims, components, values })
    }

    /// Parse CSV rows `x, y[, z], v₁, ..., v_c` with a header line. The points
    /// must form a complete rectangular grid; row order is free.
    pub fn from_csv<R: Read>(dim: usize, components: usize, reader: R) -> Result<Self, MagneticsError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<(V3, Vec<f64>)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| MagneticsError::SampleShape(format!("csv: {e}")))?;
            if rec.len() != dim + components {
                return Err(MagneticsError::SampleShape(format!(
                    "row {}: expected {} columns, found {}",
                    line + 2,
                    dim + components,
                    rec.len()
                )));
            }
            let mut vals = Vec::with_capacity(rec.len());
            for f in rec.iter() {
                vals.push(
                    f.parse::<f64>()
                        .map_err(|_| MagneticsError::SampleShape(format!("row {}: bad number '{f}'", line + 2)))?,
                );
            }
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(&vals[..dim]);
            rows.push((p, vals[dim..].to_vec()));
        }
        let mut axes: Vec<Vec<f64>> = Vec::new();
        for a in 0..3 {
            let mut c: Vec<f64> = rows.iter().map(|r| r.0[a]).collect();
            c.sort_by(f64::total_cmp);
            c.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
            axes.push(c);
        }
        let dims = [axes[0].len(), axes[1].len(), axes[2].len()];
        let origin = [axes[0][0], axes[1][0], axes[2][0]];
        let mut spacing = [1.0; 3];
        for a in 0..3 {
            if dims[a] > 1 {
                spacing[a] = (axes[a][dims[a] - 1] - axes[a][0]) / (dims[a] - 1) as f64;
            }
        }
        let total = dims.iter().product::<usize>();
        if rows.len() != total {
            return Err(MagneticsError::SampleShape(format!(
                "{} rows do not form a complete {}x{}x{} grid",
                rows.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        let mut values = vec![f64::NAN; total * components];
        for (p, v) in rows {
            let mut idx = [0usize; 3];
            for a in 0..3 {
                if dims[a] > 1 {
                    let t = (p[a] - origin[a]) / spacing[a];
                    let r = t.round();
                    if (t - r).abs() > 1e-6 {
                        return Err(MagneticsError::SampleShape("sample points are not uniformly spaced".into()));
                    }
                    idx[a] = r as usize;
                }
            }
            let base = ((idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]) * components;
            values[base..base + components].copy_from_slice(&v);
        }
        Self::new(origin, spacing, dims, components, values)
    }

    /// Multilinear interpolation of all components at `y`.
    pub fn interpolate(&self, y: &V3) -> Result<Vec<f64>, MagneticsError> {
        let mut lo = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            if self.dims[a] == 1 {
                continue;
            }
            let t = (y[a] - self.origin[a]) / self.spacing[a];
            let top = (self.dims[a] - 1) as f64;
            if !(t >= -1e-9 && t <= top + 1e-9) {
                return Err(MagneticsError::OutsideSample { point: *y });
            }
            let t = t.clamp(0.0, top);
            let i = (t.floor() as usize).min(self.dims[a] - 2);
            lo[a] = i;
            frac[a] = t - i as f64;
        }
        let c = self.components;
        let mut out = vec![0.0; c];
        for corner in 0..8usize {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            let mut skip = false;
            for a in 0..3 {
                let bit = (corner >> a) & 1;
                if self.dims[a] == 1 {
                    if bit == 1 {
                        skip = true;
                    }
                    continue;
                }
                idx[a] = lo[a] + bit;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if skip || w == 0.0 {
                continue;
            }
            let base = ((idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]) * c;
            for k in 0..c {
                out[k] += w * self.values[base + k];
            }
        }
        Ok(out)
    }

    /// Centered difference of the interpolant along `axis`, with step equal
    /// to the grid spacing (one-sided at the grid edge).
    fn partial(&self, y: &V3, axis: usize) -> Result<Vec<f64>, MagneticsError> {
        if self.dims[axis] == 1 {
            return Ok(vec![0.0; self.components]);
        }
        let h = self.spacing[axis];
        let lo_edge = self.origin[axis];
        let hi_edge = self.origin[axis] + h * (self.dims[axis] - 1) as f64;
        let mut yp = *y;
        let mut ym = *y;
        yp[axis] = (y[axis] + h).min(hi_edge);
        ym[axis] = (y[axis] - h).max(lo_edge);
        let span = yp[axis] - ym[axis];
        let fp = self.interpolate(&yp)?;
        let fm = self.interpolate(&ym)?;
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / span).collect())
    }
}

/// The vector potential `A(y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum VectorPotential {
    Zero,
    /// Constant field `b`, stored in the gauge `A = ½ b × y`. For curves only
    /// `b₃` (the out-of-plane field) matters.
    ConstantB { b: V3 },
    /// Explicit polynomial components `A_i(y)`.
    Polynomial([Polynomial; 3]),
    /// Samples of `A` on an ambient grid (`dim` components).
    Sampled(SampledGrid),
}

/// The scalar electric potential `W(y)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarPotential {
    Polynomial(Polynomial),
    Sampled(SampledGrid),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AmbientField {
    pub potential: VectorPotential,
    pub electric: Option<ScalarPotential>,
}

impl AmbientField {
    pub fn zero() -> Self {
        AmbientField { potential: VectorPotential::Zero, electric: None }
    }

    pub fn constant(b: V3) -> Self {
        AmbientField { potential: VectorPotential::ConstantB { b }, electric: None }
    }

    pub fn polynomial(components: [Polynomial; 3]) -> Self {
        AmbientField { potential: VectorPotential::Polynomial(components), electric: None }
    }

    pub fn with_electric(mut self, w: ScalarPotential) -> Self {
        self.electric = Some(w);
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.potential, VectorPotential::Zero)
    }

    pub fn id(&self) -> String {
        let a = match &self.potential {
            VectorPotential::Zero => "zero".to_string(),
            VectorPotential::ConstantB { b } => format!("constant-b({},{},{})", b[0], b[1], b[2]),
            VectorPotential::Polynomial(_) => "polynomial".to_string(),
            VectorPotential::Sampled(g) => format!("sampled({}x{}x{})", g.dims[0], g.dims[1], g.dims[2]),
        };
        if self.electric.is_some() {
            format!("{a}+electric")
        } else {
            a
        }
    }

    /// `A(y)`; unused components are zero for curves.
    pub fn vector_potential(&self, y: &V3) -> Result<V3, MagneticsError> {
        match &self.potential {
            VectorPotential::Zero => Ok([0.0; 3]),
            VectorPotential::ConstantB { b } => Ok(crate::small::scale3(&crate::small::cross3(b, y), 0.5)),
            VectorPotential::Polynomial(p) => Ok([p[0].value(y), p[1].value(y), p[2].value(y)]),
            VectorPotential::Sampled(g) => {
                let v = g.interpolate(y)?;
                let mut a = [0.0; 3];
                for (k, x) in v.iter().enumerate().take(3) {
                    a[k] = *x;
                }
                Ok(a)
            }
        }
    }

    /// `B = curl A`. For curves the in-plane field is stored in component 2
    /// as `∂₁A₂ − ∂₂A₁`.
    pub fn magnetic_field(&self, y: &V3) -> Result<V3, MagneticsError> {
        match &self.potential {
            VectorPotential::Zero => Ok([0.0; 3]),
            VectorPotential::ConstantB { b } => Ok(*b),
            VectorPotential::Polynomial(p) => {
                let d = |i: usize, j: usize| p[i].partial(y, j);
                Ok([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)])
            }
            VectorPotential::Sampled(g) => {
                let dx = g.partial(y, 0)?;
                let dy = g.partial(y, 1)?;
                let dz = g.partial(y, 2)?;
                let c = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(0.0);
                Ok([
                    c(&dy, 2) - c(&dz, 1),
                    c(&dz, 0) - c(&dx, 2),
                    c(&dx, 1) - c(&dy, 0),
                ])
            }
        }
    }

    pub fn electric_potential(&self, y: &V3) -> Result<Option<f64>, MagneticsError> {
        let v = match &self.electric {
            None => return Ok(None),
            Some(ScalarPotential::Polynomial(p)) => p.value(y),
            Some(ScalarPotential::Sampled(g)) => g.interpolate(y)?[0],
        };
        if v.is_finite() {
            Ok(Some(v))
        } else {
            Err(MagneticsError::SingularPotential { point: *y })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_partials() {
        // 3 x² y + z
        let p = Polynomial::new(vec![
            Monomial { coef: 3.0, powers: [2, 1, 0] },
            Monomial { coef: 1.0, powers: [0, 0, 1] },
        ]);
        let y = [2.0, -1.0, 0.5];
        assert_eq!(p.value(&y), -12.0 + 0.5);
        assert_eq!(p.partial(&y, 0), -12.0);
        assert_eq!(p.partial(&y, 1), 12.0);
        assert_eq!(p.partial(&y, 2), 1.0);
        assert_eq!(p.derivative(0).value(&y), -12.0);
    }

    #[test]
    fn sampled_grid_is_exact_for_linear_data() {
        let dims = [4, 5, 3];
        let mut vals = Vec::new();
        for i in 0..4 {
            for j in 0..5 {
                for k in 0..3 {
                    let (x, y, z) = (i as f64 * 0.5, -1.0 + j as f64 * 0.25, k as f64);
                    vals.push(2.0 * x - y + 0.5 * z);
                }
            }
        }
        let g = SampledGrid::new([0.0, -1.0, 0.0], [0.5, 0.25, 1.0], dims, 1, vals).unwrap();
        let v = g.interpolate(&[0.7, -0.3, 1.4]).unwrap()[0];
        assert!((v - (1.4 + 0.3 + 0.7)).abs() < 1e-14);
        assert!(g.interpolate(&[5.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn constant_b_gauge() {
        let f = AmbientField::constant([0.0, 0.0, 2.0]);
        let a = f.vector_potential(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(a, [0.0, 1.0, 0.0]);
        let p = AmbientField::polynomial([
            Polynomial::new(vec![Monomial { coef: -1.0, powers: [0, 1, 0] }]),
            Polynomial::new(vec![Monomial { coef: 1.0, powers: [1, 0, 0] }]),
            Polynomial::default(),
        ]);
        assert_eq!(p.magnetic_field(&[0.3, 0.2, 0.0]).unwrap(), [0.0, 0.0, 2.0]);
    }
}
