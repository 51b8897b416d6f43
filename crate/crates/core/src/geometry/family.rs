use std::f64::consts::{PI, TAU};

use super::grid::{BoundaryKind, ChartAxis, ChartGrid};
use super::sampled::SampledSurface;
use super::GeometryError;
use crate::small::V3;

/// Built-in curves and surfaces plus user-sampled input.
///
/// Charts are oriented so that `n = x₁ × x₂ / |x₁ × x₂|` (or the rotated
/// tangent for curves) points to the concave side, which makes the
/// principal curvatures of convex shapes positive.
#[derive(Clone, Debug, PartialEq)]
pub enum GeometryFamily {
    /// Straight segment `(s, 0)`, `s ∈ (0, length)`.
    Segment { length: f64 },
    /// Circle of the given radius, angle chart.
    Circle { radius: f64 },
    /// Ellipse `(a cos t, b sin t)`.
    Ellipse { a: f64, b: f64 },
    /// Catenary `y = c cosh(x/c)` parametrized by arclength from the vertex,
    /// `s ∈ (−half_length, half_length)`.
    CatenaryCurve { c: f64, half_length: f64 },
    /// Flat rectangle `(0, lx) × (0, ly)` in the plane `z = 0`.
    PlaneRectangle { lx: f64, ly: f64 },
    /// Graph of a Gaussian bump centred in the rectangle.
    BumpedPlane { lx: f64, ly: f64, amplitude: f64, width: f64 },
    /// Spherical cap around the south pole, polar angle `θ ∈ (0, polar_angle)`.
    SphereCap { radius: f64, polar_angle: f64 },
    FullSphere { radius: f64 },
    /// Cylinder around the z axis, `z ∈ (0, length)`, `φ ∈ (0, angle)`;
    /// closed in φ when `angle = 2π`.
    CylinderSection { radius: f64, length: f64, angle: f64 },
    /// Torus with tube angle θ and azimuth φ.
    Torus { major: f64, minor: f64 },
    UserSampled(SampledSurface),
}

/// Analytic position and derivatives at one chart point.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub x: V3,
    pub dx: [V3; 2],
    pub ddx: [[V3; 2]; 2],
}

const Z3: V3 = [0.0; 3];

impl GeometryFamily {
    /// Ambient dimension d.
    pub fn dim(&self) -> usize {
        match self {
            GeometryFamily::Segment { .. }
            | GeometryFamily::Circle { .. }
            | GeometryFamily::Ellipse { .. }
            | GeometryFamily::CatenaryCurve { .. } => 2,
            GeometryFamily::UserSampled(s) => s.dim,
            _ => 3,
        }
    }

    pub fn id(&self) -> String {
        match self {
            GeometryFamily::Segment { length } => format!("segment(L={length})"),
            GeometryFamily::Circle { radius } => format!("circle(R={radius})"),
            GeometryFamily::Ellipse { a, b } => format!("ellipse(a={a},b={b})"),
            GeometryFamily::CatenaryCurve { c, half_length } => format!("catenary(c={c},w={half_length})"),
            GeometryFamily::PlaneRectangle { lx, ly } => format!("plane-rectangle({lx}x{ly})"),
            GeometryFamily::BumpedPlane { lx, ly, amplitude, width } => {
                format!("bumped-plane({lx}x{ly},a={amplitude},w={width})")
            }
            GeometryFamily::SphereCap { radius, polar_angle } => format!("sphere-cap(R={radius},theta={polar_angle})"),
            GeometryFamily::FullSphere { radius } => format!("full-sphere(R={radius})"),
            GeometryFamily::CylinderSection { radius, length, angle } => {
                format!("cylinder-section(R={radius},L={length},phi={angle})")
            }
            GeometryFamily::Torus { major, minor } => format!("torus(R={major},r={minor})"),
            GeometryFamily::UserSampled(s) => format!("user-sampled({})", s.label),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GeometryError::InvalidParameter { name, value: v })
            }
        };
        match *self {
            GeometryFamily::Segment { length } => positive("length", length),
            GeometryFamily::Circle { radius } => positive("radius", radius),
            GeometryFamily::Ellipse { a, b } => positive("a", a).and(positive("b", b)),
            GeometryFamily::CatenaryCurve { c, half_length } => positive("c", c).and(positive("half_length", half_length)),
            GeometryFamily::PlaneRectangle { lx, ly } => positive("lx", lx).and(positive("ly", ly)),
            GeometryFamily::BumpedPlane { lx, ly, amplitude, width } => {
                positive("lx", lx)?;
                positive("ly", ly)?;
                positive("width", width)?;
                if amplitude.is_finite() {
                    Ok(())
                } else {
                    Err(GeometryError::InvalidParameter { name: "amplitude", value: amplitude })
                }
            }
            GeometryFamily::SphereCap { radius, polar_angle } => {
                positive("radius", radius)?;
                if polar_angle > 0.0 && polar_angle < PI {
                    Ok(())
                } else {
                    Err(GeometryError::InvalidParameter { name: "polar_angle", value: polar_angle })
                }
            }
            GeometryFamily::FullSphere { radius } => positive("radius", radius),
            GeometryFamily::CylinderSection { radius, length, angle } => {
                positive("radius", radius)?;
                positive("length", length)?;
                if angle > 0.0 && angle <= TAU + 1e-12 {
                    Ok(())
                } else {
                    Err(GeometryError::InvalidParameter { name: "angle", value: angle })
                }
            }
            GeometryFamily::Torus { major, minor } => {
                positive("major", major)?;
                positive("minor", minor)?;
                if minor < major {
                    Ok(())
                } else {
                    Err(GeometryError::InvalidParameter { name: "minor", value: minor })
                }
            }
            GeometryFamily::UserSampled(_) => Ok(()),
        }
    }

    /// Chart grid for the requested node counts.
    pub fn chart(&self, sizes: &[usize]) -> Result<ChartGrid, GeometryError> {
        let want = self.dim() - 1;
        if sizes.len() != want {
            return Err(GeometryError::GridShape { expected: want, got: sizes.len() });
        }
        for (axis, &n) in sizes.iter().enumerate() {
            if n < 8 {
                return Err(GeometryError::GridTooSmall { axis, nodes: n });
            }
        }
        use BoundaryKind::{Dirichlet, Pole};
        let axes = match *self {
            GeometryFamily::Segment { length } => vec![ChartAxis::dirichlet(0.0, length, sizes[0])],
            GeometryFamily::Circle { .. } | GeometryFamily::Ellipse { .. } => vec![ChartAxis::periodic(0.0, TAU, sizes[0])],
            GeometryFamily::CatenaryCurve { half_length, .. } => {
                vec![ChartAxis::dirichlet(-half_length, half_length, sizes[0])]
            }
            GeometryFamily::PlaneRectangle { lx, ly } | GeometryFamily::BumpedPlane { lx, ly, .. } => {
                vec![ChartAxis::dirichlet(0.0, lx, sizes[0]), ChartAxis::dirichlet(0.0, ly, sizes[1])]
            }
            GeometryFamily::SphereCap { polar_angle, .. } => vec![
                ChartAxis::bounded(0.0, polar_angle, sizes[0], Pole, Dirichlet),
                ChartAxis::periodic(0.0, TAU, sizes[1]),
            ],
            GeometryFamily::FullSphere { .. } => vec![
                ChartAxis::bounded(0.0, PI, sizes[0], Pole, Pole),
                ChartAxis::periodic(0.0, TAU, sizes[1]),
            ],
            GeometryFamily::CylinderSection { length, angle, .. } => {
                let phi = if (angle - TAU).abs() < 1e-12 {
                    ChartAxis::periodic(0.0, TAU, sizes[1])
                } else {
                    ChartAxis::dirichlet(0.0, angle, sizes[1])
                };
                vec![ChartAxis::dirichlet(0.0, length, sizes[0]), phi]
            }
            GeometryFamily::Torus { .. } => {
                vec![ChartAxis::periodic(0.0, TAU, sizes[0]), ChartAxis::periodic(0.0, TAU, sizes[1])]
            }
            GeometryFamily::UserSampled(ref s) => return Ok(s.chart()),
        };
        Ok(ChartGrid::new(axes))
    }

    /// Position and chart derivatives at chart coordinates `c`.
    pub fn jet(&self, c: [f64; 2]) -> Jet {
        let (p, q) = (c[0], c[1]);
        match *self {
            GeometryFamily::Segment { .. } => Jet { x: [p, 0.0, 0.0], dx: [[1.0, 0.0, 0.0], Z3], ddx: [[Z3; 2]; 2] },
            GeometryFamily::Circle { radius: r } => {
                let (s, co) = p.sin_cos();
                Jet {
                    x: [r * co, r * s, 0.0],
                    dx: [[-r * s, r * co, 0.0], Z3],
                    ddx: [[[-r * co, -r * s, 0.0], Z3], [Z3; 2]],
                }
            }
            GeometryFamily::Ellipse { a, b } => {
                let (s, co) = p.sin_cos();
                Jet {
                    x: [a * co, b * s, 0.0],
                    dx: [[-a * s, b * co, 0.0], Z3],
                    ddx: [[[-a * co, -b * s, 0.0], Z3], [Z3; 2]],
                }
            }
            GeometryFamily::CatenaryCurve { c, .. } => {
                let r = (c * c + p * p).sqrt();
                let r3 = r * r * r;
                Jet {
                    x: [c * (p / c).asinh(), r, 0.0],
                    dx: [[c / r, p / r, 0.0], Z3],
                    ddx: [[[-c * p / r3, c * c / r3, 0.0], Z3], [Z3; 2]],
                }
            }
            GeometryFamily::PlaneRectangle { .. } => Jet {
                x: [p, q, 0.0],
                dx: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                ddx: [[Z3; 2]; 2],
            },
            GeometryFamily::BumpedPlane { lx, ly, amplitude, width } => {
                let (x, y) = (p - 0.5 * lx, q - 0.5 * ly);
                let w2 = width * width;
                let f = amplitude * (-(x * x + y * y) / w2).exp();
                let fx = -2.0 * x / w2 * f;
                let fy = -2.0 * y / w2 * f;
                let fxx = (4.0 * x * x / (w2 * w2) - 2.0 / w2) * f;
                let fyy = (4.0 * y * y / (w2 * w2) - 2.0 / w2) * f;
                let fxy = 4.0 * x * y / (w2 * w2) * f;
                Jet {
                    x: [p, q, f],
                    dx: [[1.0, 0.0, fx], [0.0, 1.0, fy]],
                    ddx: [[[0.0, 0.0, fxx], [0.0, 0.0, fxy]], [[0.0, 0.0, fxy], [0.0, 0.0, fyy]]],
                }
            }
            GeometryFamily::SphereCap { radius: r, .. } | GeometryFamily::FullSphere { radius: r } => {
                let (st, ct) = p.sin_cos();
                let (sp, cp) = q.sin_cos();
                Jet {
                    x: [r * st * cp, r * st * sp, -r * ct],
                    dx: [[r * ct * cp, r * ct * sp, r * st], [-r * st * sp, r * st * cp, 0.0]],
                    ddx: [
                        [[-r * st * cp, -r * st * sp, r * ct], [-r * ct * sp, r * ct * cp, 0.0]],
                        [[-r * ct * sp, r * ct * cp, 0.0], [-r * st * cp, -r * st * sp, 0.0]],
                    ],
                }
            }
            GeometryFamily::CylinderSection { radius: r, .. } => {
                let (sp, cp) = q.sin_cos();
                Jet {
                    x: [r * cp, r * sp, p],
                    dx: [[0.0, 0.0, 1.0], [-r * sp, r * cp, 0.0]],
                    ddx: [[Z3, Z3], [Z3, [-r * cp, -r * sp, 0.0]]],
                }
            }
            GeometryFamily::Torus { major, minor: r } => {
                let (st, ct) = p.sin_cos();
                let (sp, cp) = q.sin_cos();
                let rho = major + r * ct;
                Jet {
                    x: [rho * cp, rho * sp, r * st],
                    dx: [[-r * st * cp, -r * st * sp, r * ct], [-rho * sp, rho * cp, 0.0]],
                    ddx: [
                        [[-r * ct * cp, -r * ct * sp, -r * st], [r * st * sp, -r * st * cp, 0.0]],
                        [[r * st * sp, -r * st * cp, 0.0], [-rho * cp, -rho * sp, 0.0]],
                    ],
                }
            }
            GeometryFamily::UserSampled(_) => panic!("sampled geometry has no analytic jet"),
        }
    }
}
