//! Lens construction: radii, the piecewise media `(s_δ A, s_δ Σ)` for the
//! Kelvin lens and the generalized power-law lens, and the effective
//! magnified medium `(Â, Σ̂)`.
//!
//! For magnification `m > 1`, object radius `r0` and reflection exponent
//! `α > 1` (Kelvin: α = 2), the radii are
//!
//! ```text
//! r1 = r0 m^{(α−1)/2α},  r2 = r0 m^{(α+1)/2α},  r3 = r0 m^{(3α−1)/2α},
//! r* = m r0 = √(r2 r3)
//! ```
//!
//! and the lens is the pullback of vacuum under the reflections
//! `F(x) = r2^α x/|x|^α` and `G(x) = r3^β x/|x|^β` with `β = α/(α−1)`:
//! anisotropic `A = (r2/r)^{α(d−2)} [ e_r⊗e_r/(α−1) + (α−1)(I − e_r⊗e_r) ]`
//! and `Σ = (α−1)(r2/r)^{αd}` on the shell `r1 < |x| ≤ r2`, the matched layer
//! `(m^{d−2} I, m^d)` on `r0 < |x| ≤ r1`, the object `(a, σ)` on `B_r0`, and
//! vacuum outside. The loss sits only on the shell: `s_δ = −1 + iδ` there,
//! `1` elsewhere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::SmallMat;
use crate::transforms::{
    compose_reflections, pushforward_matrix, pushforward_scalar, CoefficientField, Orientation,
    RadialMap, RadialReflection, TransformError,
};

#[derive(Debug, Error)]
pub enum LensError {
    #[error("magnification must exceed 1 (got {0})")]
    BadMagnification(f64),
    #[error("object radius must be positive (got {0})")]
    BadObjectRadius(f64),
    #[error("reflection exponent must exceed 1 (got {0})")]
    BadExponent(f64),
    #[error("dimension must be 2 or 3 (got {0})")]
    BadDimension(usize),
    #[error("wavenumber must be nonnegative (got {0})")]
    BadWavenumber(f64),
    #[error("loss must be nonnegative (got {0})")]
    BadLoss(f64),
    #[error("domain radius R = {r} must exceed r3 = {r3}")]
    DomainTooSmall { r: f64, r3: f64 },
    #[error("object profile layers must tile (0, r0]: {0}")]
    BadObjectProfile(String),
    #[error("object coefficients must be positive: {0}")]
    BadObjectCoefficient(String),
    #[error("invalid lens JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// One annular piece of a radially layered object: `a = diag(a_r, a_t) r^p`
/// in the radial/tangential frame on `(r_in, r_out]`, density `sigma`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObjectLayer {
    pub r_out: f64,
    pub a_r: f64,
    pub a_t: f64,
    #[serde(default)]
    pub p: f64,
    pub sigma: f64,
}

/// One angular harmonic of a non-radial object coefficient.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub n: u32,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

/// The object occupying `B_r0`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectSpec {
    /// `a = a·I`, `σ = sigma`, constant.
    Constant { a: f64, sigma: f64 },
    /// Piecewise power-law radial profile; layers ordered by `r_out`, the
    /// last `r_out` must equal `r0`.
    RadialProfile { layers: Vec<ObjectLayer> },
    /// `a(x) = (base + Σ amp·cos(nθ + phase))·I`, `σ = sigma`; the non-radial
    /// object family served by the FEM path.
    FemGrid {
        base: f64,
        harmonics: Vec<Harmonic>,
        #[serde(default = "one")]
        sigma: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    2.0
}

/// Full lens specification. JSON field names are fixed; unknown keys are
/// rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LensSpec {
    pub m: f64,
    pub r0: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub d: usize,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(rename = "R")]
    pub outer_radius: f64,
    pub object: ObjectSpec,
    /// Omit the matched layer on `B_r1 \ B_r0` (replace it by vacuum).
    /// Exposed for numerical experimentation only; no claim is made about
    /// the resulting lens.
    #[serde(default)]
    pub omit_inner_layer: bool,
}

/// Derived lens radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r_star: f64,
    pub beta: f64,
}

impl LensSpec {
    pub fn from_json(text: &str) -> Result<LensSpec, LensError> {
        let spec: LensSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LensError> {
        if !(self.m > 1.0) {
            return Err(LensError::BadMagnification(self.m));
        }
        if !(self.r0 > 0.0) {
            return Err(LensError::BadObjectRadius(self.r0));
        }
        if !(self.alpha > 1.0) {
            return Err(LensError::BadExponent(self.alpha));
        }
        if self.d != 2 && self.d != 3 {
            return Err(LensError::BadDimension(self.d));
        }
        if !(self.k >= 0.0) {
            return Err(LensError::BadWavenumber(self.k));
        }
        if !(self.delta >= 0.0) {
            return Err(LensError::BadLoss(self.delta));
        }
        let radii = derive_radii_unchecked(self.m, self.r0, self.alpha);
        if !(self.outer_radius > radii.r3) {
            return Err(LensError::DomainTooSmall {
                r: self.outer_radius,
                r3: radii.r3,
            });
        }
        match &self.object {
            ObjectSpec::Constant { a, sigma } => {
                if !(*a > 0.0) || !(*sigma > 0.0) {
                    return Err(LensError::BadObjectCoefficient(format!(
                        "a = {a}, sigma = {sigma}"
                    )));
                }
            }
            ObjectSpec::RadialProfile { layers } => {
                if layers.is_empty() {
                    return Err(LensError::BadObjectProfile("no layers".into()));
                }
                let mut prev = 0.0;
                for l in layers {
                    if !(l.r_out > prev) {
                        return Err(LensError::BadObjectProfile(format!(
                            "r_out = {} does not increase past {}",
                            l.r_out, prev
                        )));
                    }
                    if !(l.a_r > 0.0) || !(l.a_t > 0.0) || !(l.sigma > 0.0) {
                        return Err(LensError::BadObjectCoefficient(format!(
                            "a_r = {}, a_t = {}, sigma = {}",
                            l.a_r, l.a_t, l.sigma
                        )));
                    }
                    prev = l.r_out;
                }
                if (prev - self.r0).abs() > 1e-12 * self.r0 {
                    return Err(LensError::BadObjectProfile(format!(
                        "profile ends at {prev}, expected r0 = {}",
                        self.r0
                    )));
                }
            }
            ObjectSpec::FemGrid {
                base,
                harmonics,
                sigma,
            } => {
                let total: f64 = harmonics.iter().map(|h| h.amp.abs()).sum();
                if !(base - total > 0.0) || !(*sigma > 0.0) {
                    return Err(LensError::BadObjectCoefficient(format!(
                        "base = {base} must exceed the harmonic amplitude sum {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn radii(&self) -> Result<Radii, LensError> {
        self.validate()?;
        Ok(derive_radii_unchecked(self.m, self.r0, self.alpha))
    }

    pub fn s_delta(&self) -> Complex64 {
        Complex64::new(-1.0, self.delta)
    }
}

fn derive_radii_unchecked(m: f64, r0: f64, alpha: f64) -> Radii {
    let r1 = r0 * m.powf((alpha - 1.0) / (2.0 * alpha));
    let r2 = r0 * m.powf((alpha + 1.0) / (2.0 * alpha));
    let r3 = r0 * m.powf((3.0 * alpha - 1.0) / (2.0 * alpha));
    Radii {
        r1,
        r2,
        r3,
        r_star: m * r0,
        beta: alpha / (alpha - 1.0),
    }
}

/// Radii `(r1, r2, r3, r*)` and the conjugate exponent `β = α/(α−1)`.
pub fn derive_radii(spec: &LensSpec) -> Result<Radii, LensError> {
    spec.radii()
}

/// `c · r^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerCoef {
    pub c: f64,
    pub p: f64,
}

impl PowerCoef {
    pub const ONE: PowerCoef = PowerCoef { c: 1.0, p: 0.0 };

    pub fn constant(c: f64) -> Self {
        PowerCoef { c, p: 0.0 }
    }

    pub fn at(&self, r: f64) -> f64 {
        if self.p == 0.0 {
            self.c
        } else {
            self.c * r.powf(self.p)
        }
    }
}

/// Multiplicative angular factor `base + Σ amp cos(nθ + phase)` for
/// non-radial objects.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFactor {
    pub base: f64,
    pub harmonics: Vec<Harmonic>,
}

impl AngularFactor {
    pub fn at(&self, theta: f64) -> f64 {
        self.base
            + self
                .harmonics
                .iter()
                .map(|h| h.amp * (h.n as f64 * theta + h.phase).cos())
                .sum::<f64>()
    }
}

/// Basis family for the per-mode radial solutions of a layer at `k > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisHint {
    /// Quasistatic (or anisotropic power-law) layer: basis `r^{γ±}`.
    PowerLaw,
    /// Constant isotropic layer: basis `Ĵ_n(k̃ r), Ŷ_n(k̃ r)` with
    /// `k̃ = k √(σ/c)`.
    HelmholtzConstant { coef: f64, sigma: f64 },
    /// Pullback of vacuum under the reflection at `r_c` with exponent `α`:
    /// basis `Ĵ_n(k ρ(r)), Ŷ_n(k ρ(r))`, `ρ(r) = r_c^α / r^{α−1}`.
    HelmholtzReflected { r_c: f64, alpha: f64 },
}

/// One annulus `(r_in, r_out]` of a piecewise medium. The matrix coefficient
/// is `s · angular(θ) · (a_r(r) e_r⊗e_r + a_t(r) (I − e_r⊗e_r))`, the scalar
/// is `s · sigma(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumLayer {
    pub r_in: f64,
    pub r_out: f64,
    pub a_r: PowerCoef,
    pub a_t: PowerCoef,
    pub sigma: PowerCoef,
    pub s: Complex64,
    pub angular: Option<AngularFactor>,
    pub basis: BasisHint,
}

/// A piecewise radially layered medium on the disk `B_R`, evaluated lazily.
///
/// Interface convention: annuli are closed on the inside, i.e. layer `i`
/// owns `(r_{i-1}, r_i]` (the innermost owns `[0, r_1]`), so a point exactly
/// on an interface is evaluated by the layer on the inside.
#[derive(Debug, Clone, PartialEq)]
pub struct LensMedium {
    pub d: usize,
    pub k: f64,
    pub outer_radius: f64,
    pub layers: Vec<MediumLayer>,
}

impl LensMedium {
    pub fn layer_at(&self, r: f64) -> &MediumLayer {
        for l in &self.layers {
            if r <= l.r_out {
                return l;
            }
        }
        self.layers.last().expect("medium has at least one layer")
    }

    /// The positive coefficient `A(x)` (no loss factor).
    pub fn coefficient_a(&self, x: &[f64]) -> SmallMat {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let l = self.layer_at(r);
        let ang = match &l.angular {
            Some(a) => a.at(x[1].atan2(x[0])),
            None => 1.0,
        };
        let cr = Complex64::new(l.a_r.at(r) * ang, 0.0);
        let ct = Complex64::new(l.a_t.at(r) * ang, 0.0);
        if r == 0.0 {
            return SmallMat::identity(self.d).scale(cr);
        }
        SmallMat::radial_tangential(x, cr, ct)
    }

    /// The positive density `Σ(x)`.
    pub fn coefficient_sigma(&self, x: &[f64]) -> Complex64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Complex64::new(self.layer_at(r).sigma.at(r), 0.0)
    }

    /// The loss factor `s_δ(x)`.
    pub fn loss_at(&self, x: &[f64]) -> Complex64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.layer_at(r).s
    }
}

/// `(s_δ A, s_δ Σ)` as one lazily evaluated field.
impl CoefficientField for LensMedium {
    fn dim(&self) -> usize {
        self.d
    }
    fn matrix_at(&self, x: &[f64]) -> SmallMat {
        let s = self.loss_at(x);
        self.coefficient_a(x).scale(s)
    }
    fn scalar_at(&self, x: &[f64]) -> Complex64 {
        self.loss_at(x) * self.coefficient_sigma(x)
    }
}

/// View of the positive part `(A, Σ)` only, for the complementarity checks.
pub struct UnsignedMedium<'a>(pub &'a LensMedium);

impl CoefficientField for UnsignedMedium<'_> {
    fn dim(&self) -> usize {
        self.0.d
    }
    fn matrix_at(&self, x: &[f64]) -> SmallMat {
        self.0.coefficient_a(x)
    }
    fn scalar_at(&self, x: &[f64]) -> Complex64 {
        self.0.coefficient_sigma(x)
    }
}

fn object_layers(spec: &LensSpec) -> Vec<MediumLayer> {
    let k = spec.k;
    match &spec.object {
        ObjectSpec::Constant { a, sigma } => vec![MediumLayer {
            r_in: 0.0,
            r_out: spec.r0,
            a_r: PowerCoef::constant(*a),
            a_t: PowerCoef::constant(*a),
            sigma: PowerCoef::constant(*sigma),
            s: Complex64::ONE,
            angular: None,
            basis: if k > 0.0 {
                BasisHint::HelmholtzConstant {
                    coef: *a,
                    sigma: *sigma,
                }
            } else {
                BasisHint::PowerLaw
            },
        }],
        ObjectSpec::RadialProfile { layers } => {
            let mut out = Vec::new();
            let mut r_in = 0.0;
            for l in layers {
                out.push(MediumLayer {
                    r_in,
                    r_out: l.r_out,
                    a_r: PowerCoef { c: l.a_r, p: l.p },
                    a_t: PowerCoef { c: l.a_t, p: l.p },
                    sigma: PowerCoef::constant(l.sigma),
                    s: Complex64::ONE,
                    angular: None,
                    basis: if k > 0.0 && l.p == 0.0 && l.a_r == l.a_t {
                        BasisHint::HelmholtzConstant {
                            coef: l.a_r,
                            sigma: l.sigma,
                        }
                    } else {
                        BasisHint::PowerLaw
                    },
                });
                r_in = l.r_out;
            }
            out
        }
        ObjectSpec::FemGrid {
            base,
            harmonics,
            sigma,
        } => vec![MediumLayer {
            r_in: 0.0,
            r_out: spec.r0,
            a_r: PowerCoef::ONE,
            a_t: PowerCoef::ONE,
            sigma: PowerCoef::constant(*sigma),
            s: Complex64::ONE,
            angular: Some(AngularFactor {
                base: *base,
                harmonics: harmonics.clone(),
            }),
            basis: BasisHint::PowerLaw,
        }],
    }
}

fn spacer_layer(spec: &LensSpec, radii: &Radii) -> MediumLayer {
    let d = spec.d as f64;
    let (a, sigma) = if spec.omit_inner_layer {
        (1.0, 1.0)
    } else {
        (spec.m.powf(d - 2.0), spec.m.powi(spec.d as i32))
    };
    MediumLayer {
        r_in: spec.r0,
        r_out: radii.r1,
        a_r: PowerCoef::constant(a),
        a_t: PowerCoef::constant(a),
        sigma: PowerCoef::constant(sigma),
        s: Complex64::ONE,
        angular: None,
        basis: if spec.k > 0.0 {
            BasisHint::HelmholtzConstant { coef: a, sigma }
        } else {
            BasisHint::PowerLaw
        },
    }
}

fn vacuum_layer(r_in: f64, r_out: f64, k: f64) -> MediumLayer {
    MediumLayer {
        r_in,
        r_out,
        a_r: PowerCoef::ONE,
        a_t: PowerCoef::ONE,
        sigma: PowerCoef::ONE,
        s: Complex64::ONE,
        angular: None,
        basis: if k > 0.0 {
            BasisHint::HelmholtzConstant {
                coef: 1.0,
                sigma: 1.0,
            }
        } else {
            BasisHint::PowerLaw
        },
    }
}

/// The lens medium `(s_δ A, s_δ Σ)` from the general power-law construction;
/// at α = 2 this coincides with the explicit Kelvin-lens formulas (see
/// [`build_medium_kelvin`]).
pub fn build_medium(spec: &LensSpec) -> Result<LensMedium, LensError> {
    let radii = spec.radii()?;
    let d = spec.d as f64;
    let alpha = spec.alpha;
    let mut layers = object_layers(spec);
    layers.push(spacer_layer(spec, &radii));

    // sign-changing shell (r1, r2]: pullback of vacuum under F
    let w = radii.r2.powf(alpha * (d - 2.0));
    layers.push(MediumLayer {
        r_in: radii.r1,
        r_out: radii.r2,
        a_r: PowerCoef {
            c: w / (alpha - 1.0),
            p: -alpha * (d - 2.0),
        },
        a_t: PowerCoef {
            c: w * (alpha - 1.0),
            p: -alpha * (d - 2.0),
        },
        sigma: PowerCoef {
            c: (alpha - 1.0) * radii.r2.powf(alpha * d),
            p: -alpha * d,
        },
        s: spec.s_delta(),
        angular: None,
        basis: if spec.k > 0.0 {
            BasisHint::HelmholtzReflected {
                r_c: radii.r2,
                alpha,
            }
        } else {
            BasisHint::PowerLaw
        },
    });

    layers.push(vacuum_layer(radii.r2, spec.outer_radius, spec.k));
    Ok(LensMedium {
        d: spec.d,
        k: spec.k,
        outer_radius: spec.outer_radius,
        layers,
    })
}

/// The Kelvin-lens medium written from the explicit α = 2 formulas
/// `A = (r2²/|x|²)^{d−2} I`, `Σ = (r2²/|x|²)^d` on the shell. Only valid for
/// α = 2; used to pin the general construction against the special one.
pub fn build_medium_kelvin(spec: &LensSpec) -> Result<LensMedium, LensError> {
    if (spec.alpha - 2.0).abs() > 1e-12 {
        return Err(LensError::BadExponent(spec.alpha));
    }
    let radii = spec.radii()?;
    let d = spec.d as f64;
    let mut layers = object_layers(spec);
    layers.push(spacer_layer(spec, &radii));
    let r2sq = radii.r2 * radii.r2;
    layers.push(MediumLayer {
        r_in: radii.r1,
        r_out: radii.r2,
        a_r: PowerCoef {
            c: r2sq.powf(d - 2.0),
            p: -2.0 * (d - 2.0),
        },
        a_t: PowerCoef {
            c: r2sq.powf(d - 2.0),
            p: -2.0 * (d - 2.0),
        },
        sigma: PowerCoef {
            c: r2sq.powi(spec.d as i32),
            p: -2.0 * d,
        },
        s: spec.s_delta(),
        angular: None,
        basis: if spec.k > 0.0 {
            BasisHint::HelmholtzReflected {
                r_c: radii.r2,
                alpha: 2.0,
            }
        } else {
            BasisHint::PowerLaw
        },
    });
    layers.push(vacuum_layer(radii.r2, spec.outer_radius, spec.k));
    Ok(LensMedium {
        d: spec.d,
        k: spec.k,
        outer_radius: spec.outer_radius,
        layers,
    })
}

/// The effective magnified medium: `(m^{2−d} a(x/m), m^{−d} σ(x/m))` on
/// `B_{m r0}`, vacuum outside.
pub fn build_effective_medium(spec: &LensSpec) -> Result<LensMedium, LensError> {
    spec.validate()?;
    let m = spec.m;
    let d = spec.d as f64;
    let scale_a = m.powf(2.0 - d);
    let scale_sigma = m.powi(-(spec.d as i32));
    let k = spec.k;
    let mut layers: Vec<MediumLayer> = object_layers(spec)
        .into_iter()
        .map(|l| {
            let a_r = PowerCoef {
                c: scale_a * l.a_r.c * m.powf(-l.a_r.p),
                p: l.a_r.p,
            };
            let a_t = PowerCoef {
                c: scale_a * l.a_t.c * m.powf(-l.a_t.p),
                p: l.a_t.p,
            };
            let sigma = PowerCoef {
                c: scale_sigma * l.sigma.c * m.powf(-l.sigma.p),
                p: l.sigma.p,
            };
            let basis = if k > 0.0 && a_r.p == 0.0 && a_r.c == a_t.c {
                BasisHint::HelmholtzConstant {
                    coef: a_r.c,
                    sigma: sigma.c,
                }
            } else {
                BasisHint::PowerLaw
            };
            MediumLayer {
                r_in: l.r_in * m,
                r_out: l.r_out * m,
                a_r,
                a_t,
                sigma,
                s: Complex64::ONE,
                angular: l.angular,
                basis,
            }
        })
        .collect();
    layers.push(vacuum_layer(m * spec.r0, spec.outer_radius, k));
    Ok(LensMedium {
        d: spec.d,
        k,
        outer_radius: spec.outer_radius,
        layers,
    })
}

/// Ellipticity constant of the object, sampled on a 64×64 polar grid over
/// `B_r0`: the smallest Λ with `1/Λ ≤ eig(a), σ ≤ Λ` on the samples.
pub fn object_ellipticity(spec: &LensSpec) -> Result<f64, LensError> {
    spec.validate()?;
    let medium = build_medium(spec)?;
    let mut lambda = 1.0_f64;
    for i in 0..64 {
        let r = spec.r0 * (i as f64 + 0.5) / 64.0;
        let layer = medium.layer_at(r);
        for j in 0..64 {
            let theta = std::f64::consts::TAU * j as f64 / 64.0;
            let ang = layer.angular.as_ref().map_or(1.0, |a| a.at(theta));
            for v in [
                layer.a_r.at(r) * ang,
                layer.a_t.at(r) * ang,
                layer.sigma.at(r),
            ] {
                lambda = lambda.max(v).max(1.0 / v);
            }
        }
    }
    Ok(lambda)
}

/// Residuals of the complementarity identities at random sample points:
/// `F_*A = I`, `F_*Σ = 1` on `B_r3 \ B_r2` and `G_*F_*A = I`, `G_*F_*Σ = 1`
/// on `B_r3 \ B_r*`.
#[derive(Debug, Clone, Copy)]
pub struct ComplementarityReport {
    pub res_f: f64,
    pub res_gf: f64,
    pub points: usize,
}

pub fn complementarity_residual(
    spec: &LensSpec,
    n_points: usize,
    seed: u64,
) -> Result<ComplementarityReport, LensError> {
    let radii = spec.radii()?;
    let medium = build_medium(spec)?;
    let unsigned = UnsignedMedium(&medium);
    let f = RadialReflection::new(radii.r2, spec.alpha, Orientation::InwardToOutward)?;
    let g = RadialReflection::new(radii.r3, radii.beta, Orientation::OutwardToInward)?;
    let gf = compose_reflections(&g, &f)?;
    debug_assert!(gf.dilation_factor.is_some());
    // the raw composition, not the simplified dilation: exercises the chain rule
    let gf_raw = RadialMap::Composed(
        Box::new(RadialMap::Reflection(g)),
        Box::new(RadialMap::Reflection(f)),
    );
    let fmap = RadialMap::Reflection(f);

    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / (1u64 << 53) as f64
    };
    let d = spec.d;
    let mut sample = move |r_lo: f64, r_hi: f64| -> Vec<f64> {
        let r = r_lo + (r_hi - r_lo) * (0.01 + 0.98 * next());
        let t = std::f64::consts::TAU * next();
        if d == 2 {
            vec![r * t.cos(), r * t.sin()]
        } else {
            let c = 2.0 * next() - 1.0;
            let s = (1.0 - c * c).sqrt();
            vec![r * s * t.cos(), r * s * t.sin(), r * c]
        }
    };

    let identity = SmallMat::identity(spec.d);
    let mut res_f = 0.0_f64;
    let mut res_gf = 0.0_f64;
    for _ in 0..n_points {
        let y = sample(radii.r2, radii.r3);
        let pm = pushforward_matrix(&fmap, &unsigned, &y)?;
        let ps = pushforward_scalar(&fmap, &unsigned, &y)?;
        res_f = res_f
            .max(pm.rel_distance(&identity))
            .max((ps - Complex64::ONE).norm());

        let y = sample(radii.r_star, radii.r3);
        let pm = pushforward_matrix(&gf_raw, &unsigned, &y)?;
        let ps = pushforward_scalar(&gf_raw, &unsigned, &y)?;
        res_gf = res_gf
            .max(pm.rel_distance(&identity))
            .max((ps - Complex64::ONE).norm());
    }
    Ok(ComplementarityReport {
        res_f,
        res_gf,
        points: n_points,
    })
}
