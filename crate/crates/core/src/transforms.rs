//! Radial reflections, their compositions, and coefficient pushforwards.
//!
//! The Kelvin transform through `∂B_rc` is `x ↦ rc² x / |x|²`; the power-law
//! generalization uses exponent `α > 1`. A reflection with exponent `α` is
//! inverted by the reflection with exponent `β = α/(α−1)` through the same
//! circle, and two reflections compose to the pure dilation `x ↦ m x` exactly
//! when `αβ − α − β = 0`.
//!
//! Coefficients transported under a change of variables `T`:
//! `T_*M = DT M DTᵀ / |det DT|` for matrices and `T_*h = h / |det DT|` for
//! scalars, both evaluated at `x = T⁻¹(y)`. Derivatives are closed-form; the
//! pushforward identities downstream must hold to near machine precision.

use num_complex::Complex64;
use thiserror::Error;

use crate::numeric::SmallMat;

/// Points closer to the origin than this are rejected: the maps are singular
/// there and nothing in the artifact needs them.
pub const ORIGIN_GUARD: f64 = 1e-10;

/// Relative slack when checking which side of the fixed circle a point is on.
const SIDE_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("reflection exponent must exceed 1 (got {0})")]
    BadExponent(f64),
    #[error("fixed-circle radius must be positive (got {0})")]
    BadRadius(f64),
    #[error("point at or too close to the origin (|x| = {0:.3e})")]
    OriginPoint(f64),
    #[error("point on the wrong side of the fixed circle (|x| = {r:.6e}, circle radius {rc:.6e})")]
    WrongSide { r: f64, rc: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("reflections are not domain-compatible: range of F (outside B_{0:.6e}) vs domain of G (outside B_{1:.6e})")]
    Incompatible(f64, f64),
    #[error("map derivative is singular at the requested point")]
    SingularJacobian,
}

/// Which side of the fixed circle the map sends inward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Domain inside `B_rc`, range outside (the lens map `F`).
    InwardToOutward,
    /// Domain outside `B_rc`, range inside (the lens map `G`).
    OutwardToInward,
}

/// The radial reflection `x ↦ rc^α x / |x|^α` restricted to one side of its
/// fixed circle `∂B_rc`.
#[derive(Clone, Copy, Debug)]
pub struct RadialReflection {
    pub center_radius: f64,
    pub exponent: f64,
    pub orientation: Orientation,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl RadialReflection {
    pub fn new(
        center_radius: f64,
        exponent: f64,
        orientation: Orientation,
    ) -> Result<Self, TransformError> {
        if !(exponent > 1.0) {
            return Err(TransformError::BadExponent(exponent));
        }
        if !(center_radius > 0.0) {
            return Err(TransformError::BadRadius(center_radius));
        }
        Ok(RadialReflection {
            center_radius,
            exponent,
            orientation,
        })
    }

    /// Kelvin transform (α = 2) through `∂B_rc`.
    pub fn kelvin(center_radius: f64, orientation: Orientation) -> Result<Self, TransformError> {
        Self::new(center_radius, 2.0, orientation)
    }

    fn check_domain(&self, x: &[f64]) -> Result<f64, TransformError> {
        let r = norm(x);
        if r < ORIGIN_GUARD {
            return Err(TransformError::OriginPoint(r));
        }
        let rc = self.center_radius;
        let ok = match self.orientation {
            Orientation::InwardToOutward => r <= rc * (1.0 + SIDE_SLACK),
            Orientation::OutwardToInward => r >= rc * (1.0 - SIDE_SLACK),
        };
        if !ok {
            return Err(TransformError::WrongSide { r, rc });
        }
        Ok(r)
    }

    /// Apply the map: `rc^α x / |x|^α`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, TransformError> {
        let r = self.check_domain(x)?;
        let factor = (self.center_radius / r).powf(self.exponent);
        Ok(x.iter().map(|v| v * factor).collect())
    }

    /// Image radius of a point at radius `r`.
    pub fn image_radius(&self, r: f64) -> f64 {
        self.center_radius * (self.center_radius / r).powf(self.exponent - 1.0)
    }

    /// The inverse map: the reflection with exponent `β = α/(α−1)` through the
    /// same circle, oriented the opposite way. For α = 2 the map is its own
    /// inverse.
    pub fn inverse(&self) -> RadialReflection {
        let beta = self.exponent / (self.exponent - 1.0);
        RadialReflection {
            center_radius: self.center_radius,
            exponent: beta,
            orientation: match self.orientation {
                Orientation::InwardToOutward => Orientation::OutwardToInward,
                Orientation::OutwardToInward => Orientation::InwardToOutward,
            },
        }
    }

    /// Closed-form derivative `DT(x) = (rc/|x|)^α (I − α x̂ x̂ᵀ)`.
    pub fn grad(&self, x: &[f64]) -> Result<SmallMat, TransformError> {
        let r = self.check_domain(x)?;
        let d = x.len();
        let factor = (self.center_radius / r).powf(self.exponent);
        let a = self.exponent;
        let mut m = SmallMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                let er = x[i] * x[j] / (r * r);
                m.a[i][j] = Complex64::new(factor * (delta - a * er), 0.0);
            }
        }
        Ok(m)
    }

    /// `|det DT(x)| = (α−1) (rc/|x|)^{αd}`.
    pub fn jacobian(&self, x: &[f64]) -> Result<f64, TransformError> {
        let r = self.check_domain(x)?;
        let d = x.len() as f64;
        Ok((self.exponent - 1.0) * (self.center_radius / r).powf(self.exponent * d))
    }
}

/// A change of variables assembled from reflections and dilations.
#[derive(Clone, Debug)]
pub enum RadialMap {
    Reflection(RadialReflection),
    /// `x ↦ factor * x`.
    Dilation { factor: f64 },
    /// `Composed(g, f)` is `g ∘ f`.
    Composed(Box<RadialMap>, Box<RadialMap>),
}

impl RadialMap {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, TransformError> {
        match self {
            RadialMap::Reflection(t) => t.apply(x),
            RadialMap::Dilation { factor } => Ok(x.iter().map(|v| v * factor).collect()),
            RadialMap::Composed(g, f) => g.apply(&f.apply(x)?),
        }
    }

    pub fn inverse_apply(&self, y: &[f64]) -> Result<Vec<f64>, TransformError> {
        match self {
            RadialMap::Reflection(t) => t.inverse().apply(y),
            RadialMap::Dilation { factor } => Ok(y.iter().map(|v| v / factor).collect()),
            RadialMap::Composed(g, f) => f.inverse_apply(&g.inverse_apply(y)?),
        }
    }

    /// Derivative at `x` (chain rule for compositions).
    pub fn grad(&self, x: &[f64]) -> Result<SmallMat, TransformError> {
        match self {
            RadialMap::Reflection(t) => t.grad(x),
            RadialMap::Dilation { factor } => {
                Ok(SmallMat::identity(x.len()).scale(Complex64::new(*factor, 0.0)))
            }
            RadialMap::Composed(g, f) => {
                let fx = f.apply(x)?;
                Ok(g.grad(&fx)?.mul(&f.grad(x)?))
            }
        }
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<f64, TransformError> {
        match self {
            RadialMap::Reflection(t) => t.jacobian(x),
            RadialMap::Dilation { factor } => Ok(factor.abs().powi(x.len() as i32)),
            RadialMap::Composed(g, f) => {
                let fx = f.apply(x)?;
                Ok(g.jacobian(&fx)? * f.jacobian(x)?)
            }
        }
    }
}

/// A matrix- and scalar-valued coefficient pair evaluated lazily at points.
pub trait CoefficientField {
    fn dim(&self) -> usize;
    fn matrix_at(&self, x: &[f64]) -> SmallMat;
    fn scalar_at(&self, x: &[f64]) -> Complex64;
}

/// Constant `(c_m * I, c_s)` field, mostly for tests and identities.
pub struct ConstantField {
    pub dim: usize,
    pub matrix: Complex64,
    pub scalar: Complex64,
}

impl CoefficientField for ConstantField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn matrix_at(&self, _x: &[f64]) -> SmallMat {
        SmallMat::identity(self.dim).scale(self.matrix)
    }
    fn scalar_at(&self, _x: &[f64]) -> Complex64 {
        self.scalar
    }
}

/// A field given by closures; convenient for one-off oracles.
pub struct FnField<M, S>
where
    M: Fn(&[f64]) -> SmallMat,
    S: Fn(&[f64]) -> Complex64,
{
    pub dim: usize,
    pub matrix: M,
    pub scalar: S,
}

impl<M, S> CoefficientField for FnField<M, S>
where
    M: Fn(&[f64]) -> SmallMat,
    S: Fn(&[f64]) -> Complex64,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn matrix_at(&self, x: &[f64]) -> SmallMat {
        (self.matrix)(x)
    }
    fn scalar_at(&self, x: &[f64]) -> Complex64 {
        (self.scalar)(x)
    }
}

/// `T_*M(y) = DT(x) M(x) DTᵀ(x) / |det DT(x)|` at `x = T⁻¹(y)`.
pub fn pushforward_matrix(
    map: &RadialMap,
    field: &dyn CoefficientField,
    y: &[f64],
) -> Result<SmallMat, TransformError> {
    if y.len() != field.dim() {
        return Err(TransformError::DimensionMismatch {
            expected: field.dim(),
            got: y.len(),
        });
    }
    let x = map.inverse_apply(y)?;
    let dt = map.grad(&x)?;
    let j = map.jacobian(&x)?;
    if !(j.is_finite() && j > 0.0) {
        return Err(TransformError::SingularJacobian);
    }
    let m = field.matrix_at(&x);
    Ok(dt
        .mul(&m)
        .mul(&dt.transpose())
        .scale(Complex64::new(1.0 / j, 0.0)))
}

/// `T_*h(y) = h(x) / |det DT(x)|` at `x = T⁻¹(y)`.
pub fn pushforward_scalar(
    map: &RadialMap,
    field: &dyn CoefficientField,
    y: &[f64],
) -> Result<Complex64, TransformError> {
    let x = map.inverse_apply(y)?;
    let j = map.jacobian(&x)?;
    if !(j.is_finite() && j > 0.0) {
        return Err(TransformError::SingularJacobian);
    }
    Ok(field.scalar_at(&x) / j)
}

/// Result of composing two radial reflections.
#[derive(Clone, Debug)]
pub struct Composition {
    pub map: RadialMap,
    /// `Some(m)` when the composition is the pure dilation `x ↦ m x`, which
    /// happens exactly when the exponents satisfy `αβ − α − β = 0`.
    pub dilation_factor: Option<f64>,
}

/// Compose `g ∘ f` for reflections `f` (inward→outward at `r_f`) and `g`
/// (outward→inward at `r_g > r_f`).
pub fn compose_reflections(
    g: &RadialReflection,
    f: &RadialReflection,
) -> Result<Composition, TransformError> {
    if f.orientation != Orientation::InwardToOutward
        || g.orientation != Orientation::OutwardToInward
        || g.center_radius <= f.center_radius
    {
        return Err(TransformError::Incompatible(
            f.center_radius,
            g.center_radius,
        ));
    }
    let alpha = f.exponent;
    let beta = g.exponent;
    let defect = alpha * beta - alpha - beta;
    let map = RadialMap::Composed(
        Box::new(RadialMap::Reflection(*g)),
        Box::new(RadialMap::Reflection(*f)),
    );
    if defect.abs() < 1e-12 {
        // g∘f(x) = r_g^β r_f^{α(1−β)} x |x|^{αβ−α−β} degenerates to m x with
        // m = (r_g / r_f)^β.
        let m = (g.center_radius / f.center_radius).powf(beta);
        Ok(Composition {
            map: RadialMap::Dilation { factor: m },
            dilation_factor: Some(m),
        })
    } else {
        Ok(Composition {
            map,
            dilation_factor: None,
        })
    }
}
