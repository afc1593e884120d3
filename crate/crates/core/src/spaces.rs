//! Points of the supported spaces and the continuous CND kernels defined on them.
//!
//! Three spaces are supported: Euclidean space `R^m`, the hyperboloid model of real
//! hyperbolic space (ambient coordinates `(x, t)` with `t^2 - |x|^2 = 1`, `t > 0`) and the
//! unit sphere. The dimension is a runtime value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::GramMatrix;

/// The space a [`Point`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Euclidean,
    Hyperboloid,
    Sphere,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Euclidean => "euclidean",
            Space::Hyperboloid => "hyperboloid",
            Space::Sphere => "sphere",
        }
    }
}

/// An element of one of the supported spaces.
///
/// Construction validates and renormalizes: hyperboloid points get `t = sqrt(1 + |x|^2)`,
/// sphere points are scaled to unit norm. Values are immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point {
    space: Space,
    coords: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
}

fn check_coords(coords: &[f64]) -> Result<()> {
    if coords.is_empty() {
        return Err(Error::InvalidInput("point dimension must be at least 1".into()));
    }
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("point coordinates"));
    }
    Ok(())
}

impl Point {
    pub fn euclidean(coords: Vec<f64>) -> Result<Self> {
        check_coords(&coords)?;
        Ok(Point {
            space: Space::Euclidean,
            coords,
            t: None,
        })
    }

    /// Hyperboloid point from spatial coordinates and a supplied time coordinate.
    ///
    /// `t` must be finite and positive (it selects the upper sheet); it is then replaced by
    /// `sqrt(1 + |x|^2)`.
    pub fn hyperboloid(coords: Vec<f64>, t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFinite("hyperboloid time coordinate"));
        }
        if t <= 0.0 {
            return Err(Error::Domain(format!(
                "hyperboloid time coordinate must be positive, got {t}"
            )));
        }
        Self::hyperboloid_lift(coords)
    }

    /// Lift `x` to the upper sheet: `(x, sqrt(1 + |x|^2))`.
    pub fn hyperboloid_lift(coords: Vec<f64>) -> Result<Self> {
        check_coords(&coords)?;
        let norm_sq: f64 = coords.iter().map(|c| c * c).sum();
        let t = (1.0 + norm_sq).sqrt();
        if !t.is_finite() {
            return Err(Error::NonFinite("hyperboloid time coordinate"));
        }
        Ok(Point {
            space: Space::Hyperboloid,
            coords,
            t: Some(t),
        })
    }

    /// Unit-sphere point; `coords` is scaled to unit norm.
    pub fn sphere(mut coords: Vec<f64>) -> Result<Self> {
        check_coords(&coords)?;
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero vector onto the sphere".into()));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(Point {
            space: Space::Sphere,
            coords,
            t: None,
        })
    }

    /// Build a point of `space` from its ambient coordinates: for the hyperboloid the last
    /// entry is `t`.
    pub fn from_ambient(space: Space, ambient: Vec<f64>) -> Result<Self> {
        match space {
            Space::Euclidean => Self::euclidean(ambient),
            Space::Sphere => Self::sphere(ambient),
            Space::Hyperboloid => {
                let mut coords = ambient;
                let t = coords
                    .pop()
                    .ok_or_else(|| Error::InvalidInput("empty hyperboloid row".into()))?;
                Self::hyperboloid(coords, t)
            }
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    /// Spatial coordinates (for the hyperboloid, without `t`).
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Time coordinate of a hyperboloid point.
    pub fn t(&self) -> Option<f64> {
        self.t
    }

    /// Coordinates in the ambient vector space (`(x, t)` for the hyperboloid).
    pub fn ambient(&self) -> Vec<f64> {
        let mut v = self.coords.clone();
        v.extend(self.t);
        v
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    fn same_space(&self, other: &Point) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch {
                expected: self.space.name(),
                found: other.space.name(),
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lorentz product `[x, y] = t_x t_y - <x, y>`; equals `cosh(d_H(x, y))`.
pub fn lorentz_product(x: &Point, y: &Point) -> Result<f64> {
    for p in [x, y] {
        if p.space != Space::Hyperboloid {
            return Err(Error::SpaceMismatch {
                expected: Space::Hyperboloid.name(),
                found: p.space.name(),
            });
        }
    }
    x.same_space(y)?;
    let (tx, ty) = (x.t.unwrap_or(1.0), y.t.unwrap_or(1.0));
    Ok(tx * ty - dot(&x.coords, &y.coords))
}

/// `[x, y] - 1`, computed as half the Minkowski norm of `x - y`. This avoids the
/// cancellation in `t_x t_y - <x, y> - 1` for nearby points.
pub fn lorentz_product_minus_one(x: &Point, y: &Point) -> Result<f64> {
    lorentz_product(x, y)?;
    Ok(lorentz_excess(x, y))
}

fn lorentz_excess(x: &Point, y: &Point) -> f64 {
    let dt = x.t.unwrap_or(1.0) - y.t.unwrap_or(1.0);
    0.5 * (dist_sq(&x.coords, &y.coords) - dt * dt)
}

/// Hyperbolic distance on the hyperboloid. The Lorentz excess is clamped at zero, so
/// the result is `arccosh(max(1, [x, y]))`.
fn hyperbolic_distance(x: &Point, y: &Point) -> f64 {
    let e = lorentz_excess(x, y).max(0.0);
    // arccosh(1 + e) = log1p(e + sqrt(e (e + 2)))
    (e + (e * (e + 2.0)).sqrt()).ln_1p()
}

/// Great-circle distance, `2 atan2(|x - y|, |x + y|)` for unit vectors.
fn sphere_distance(x: &Point, y: &Point) -> f64 {
    let minus = dist_sq(&x.coords, &y.coords).sqrt();
    let plus: f64 = x
        .coords
        .iter()
        .zip(&y.coords)
        .map(|(a, b)| (a + b) * (a + b))
        .sum::<f64>()
        .sqrt();
    2.0 * minus.atan2(plus)
}

/// Result of [`arccosh_series`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArccoshSeries {
    pub value: f64,
    /// First omitted term `c_{K+1} t^{-2(K+1)}`.
    pub first_omitted: f64,
    /// Bound on `value - arccosh(t)`: the first omitted term times the geometric factor
    /// `1 / (1 - t^{-2})` (the coefficients decrease), plus a rounding allowance of
    /// `8 eps (log 2 + log t + 1)`.
    pub error_bound: f64,
}

/// Coefficient `(2k)! / (2^{2k} (k!)^2 2k)` of the large-argument arccosh expansion,
/// for `k = 1..=count`.
pub fn arccosh_coefficients(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    // central binomial over 4^k, updated by the ratio (2k + 1) / (2k + 2)
    let mut central = 1.0_f64;
    for k in 1..=count {
        central *= (2 * k - 1) as f64 / (2 * k) as f64;
        out.push(central / (2 * k) as f64);
    }
    out
}

/// Truncated expansion `log 2 + log t - sum_{k=1}^{K} c_k t^{-2k}` of `arccosh(t)`, `t > 1`.
///
/// All omitted terms are positive, so the value is nonincreasing in `K` and never below
/// `arccosh(t)` (up to rounding).
pub fn arccosh_series(t: f64, terms: usize) -> Result<ArccoshSeries> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "arccosh series requires finite t > 1, got {t}"
        )));
    }
    let coeffs = arccosh_coefficients(terms + 1);
    let inv_sq = 1.0 / (t * t);
    let mut power = 1.0;
    let mut sum = 0.0;
    for c in &coeffs[..terms] {
        power *= inv_sq;
        sum += c * power;
    }
    let leading = std::f64::consts::LN_2 + t.ln();
    let value = leading - sum;
    let first_omitted = coeffs[terms] * power * inv_sq;
    let error_bound = first_omitted / (1.0 - inv_sq) + 8.0 * f64::EPSILON * (leading + 1.0);
    Ok(ArccoshSeries {
        value,
        first_omitted,
        error_bound,
    })
}

/// A continuous conditionally negative definite kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CndKernel {
    /// `|x - y|^2 + shift` on Euclidean space; diagonal `shift`.
    EuclideanSquared { shift: f64 },
    /// `|x - y|` on Euclidean space (a CND metric).
    Euclidean,
    /// Hyperbolic distance on the hyperboloid.
    Hyperbolic,
    /// Great-circle distance on the unit sphere.
    SphereGeodesic,
}

impl CndKernel {
    pub fn euclidean_squared() -> Self {
        CndKernel::EuclideanSquared { shift: 0.0 }
    }

    /// Parse `euclidean_squared`, `euclidean_squared:<shift>`, `euclidean`, `hyperbolic`
    /// or `sphere_geodesic`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let kernel = match (head, arg) {
            ("euclidean_squared", None) => CndKernel::euclidean_squared(),
            ("euclidean_squared", Some(a)) => {
                let shift: f64 = a
                    .parse()
                    .map_err(|_| Error::UnknownKernel(spec.to_string()))?;
                if !(shift >= 0.0) || !shift.is_finite() {
                    return Err(Error::Domain(format!(
                        "kernel shift must be finite and >= 0, got {a}"
                    )));
                }
                CndKernel::EuclideanSquared { shift }
            }
            ("euclidean", None) => CndKernel::Euclidean,
            ("hyperbolic", None) => CndKernel::Hyperbolic,
            ("sphere_geodesic", None) => CndKernel::SphereGeodesic,
            _ => return Err(Error::UnknownKernel(spec.to_string())),
        };
        Ok(kernel)
    }

    pub fn name(&self) -> String {
        match self {
            CndKernel::EuclideanSquared { shift } if *shift == 0.0 => "euclidean_squared".into(),
            CndKernel::EuclideanSquared { shift } => format!("euclidean_squared:{shift}"),
            CndKernel::Euclidean => "euclidean".into(),
            CndKernel::Hyperbolic => "hyperbolic".into(),
            CndKernel::SphereGeodesic => "sphere_geodesic".into(),
        }
    }

    pub fn space(&self) -> Space {
        match self {
            CndKernel::EuclideanSquared { .. } | CndKernel::Euclidean => Space::Euclidean,
            CndKernel::Hyperbolic => Space::Hyperboloid,
            CndKernel::SphereGeodesic => Space::Sphere,
        }
    }

    /// The constant value `gamma(x, x)`.
    pub fn diagonal(&self) -> f64 {
        match self {
            CndKernel::EuclideanSquared { shift } => *shift,
            _ => 0.0,
        }
    }

    /// True when the kernel is itself a metric (zero diagonal, triangle inequality).
    pub fn is_metric(&self) -> bool {
        !matches!(self, CndKernel::EuclideanSquared { .. })
    }

    /// A canonical point of the kernel's space in dimension `dim`: the origin, the
    /// hyperboloid apex `(0, 1)` or the first basis vector of the sphere.
    pub fn base_point(&self, dim: usize) -> Result<Point> {
        let zeros = vec![0.0; dim];
        match self.space() {
            Space::Euclidean => Point::euclidean(zeros),
            Space::Hyperboloid => Point::hyperboloid_lift(zeros),
            Space::Sphere => {
                let mut e1 = zeros;
                if let Some(first) = e1.first_mut() {
                    *first = 1.0;
                }
                Point::sphere(e1)
            }
        }
    }

    /// Check that `p` lives in this kernel's space.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.space() != self.space() {
            return Err(Error::SpaceMismatch {
                expected: self.space().name(),
                found: p.space().name(),
            });
        }
        Ok(())
    }

    /// Evaluate `gamma(x, y)`.
    ///
    /// The expression is symmetric in its arguments operation by operation, so
    /// `eval(x, y) == eval(y, x)` holds exactly.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        x.same_space(y)?;
        let value = match self {
            CndKernel::EuclideanSquared { shift } => dist_sq(&x.coords, &y.coords) + shift,
            CndKernel::Euclidean => dist_sq(&x.coords, &y.coords).sqrt(),
            CndKernel::Hyperbolic => hyperbolic_distance(x, y),
            CndKernel::SphereGeodesic => sphere_distance(x, y),
        };
        if !value.is_finite() {
            return Err(Error::NonFinite("kernel value"));
        }
        Ok(value)
    }
}

/// Free-function form of [`CndKernel::eval`].
pub fn eval_kernel(kernel: &CndKernel, x: &Point, y: &Point) -> Result<f64> {
    kernel.eval(x, y)
}

/// Check that all points share one space and dimension.
pub fn check_homogeneous(points: &[Point]) -> Result<()> {
    if let Some(first) = points.first() {
        for p in &points[1..] {
            first.same_space(p)?;
        }
    }
    Ok(())
}

/// Gram matrix `G[i][j] = gamma(pts[i], pts[j])`.
pub fn gram(kernel: &CndKernel, points: &[Point]) -> Result<GramMatrix> {
    if points.is_empty() {
        return Err(Error::InvalidInput("gram matrix needs at least one point".into()));
    }
    check_homogeneous(points)?;
    kernel.check_point(&points[0])?;
    GramMatrix::try_from_fn(points, &kernel.name(), |x, y| kernel.eval(x, y))
}
