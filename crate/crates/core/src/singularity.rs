//! The reflection/de-singularization machinery: reflected fields `u_{1,δ}`,
//! `u_{2,δ}`, the exact interface coefficient relations, the removable
//! singular part `û_δ`, the de-singularized field `U_δ`, and mode-weighted
//! fractional trace norms.
//!
//! On the annulus `r2 < |x| < r3` the field, its reflection through `∂B_r2`
//! and the second reflection through `∂B_r3` expand in the layer bases with
//! coefficients `(a, b)`, `(c, d)` and `(e, f)` per mode. Transmission
//! matching gives the closed 2×2 maps (quasistatic, d = 2, n ≥ 1)
//!
//! ```text
//! a = (2−iδ)/2 · c + (iδ/2) r2^{−2n} · d      e = (2−iδ)/2 · c + (iδ/2) r3^{−2n} · d
//! b = (iδ/2) r2^{2n} · c + (2−iδ)/2 · d       f = (iδ/2) r3^{2n} · c + (2−iδ)/2 · d
//! ```
//!
//! with n = 0, d = 3 and finite-frequency analogues below. The singular
//! part collects the decaying-basis content of `u_δ − u_{2,δ}`; removing it
//! from `u_δ` outside `B_{r*}` (and using `u_{2,δ}` inside) yields `U_δ`,
//! whose jump across `∂B_{r*}` stays bounded as δ → 0.
//!
//! Coefficient sequences scale like `r^{±2n}` and overflow doubles around
//! mode 40, so everything here is carried in log-polar complex form.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::lens_design::{LensSpec, Radii};
use crate::numeric::LogComplex;
use crate::radial_solver::{
    angular_weight, mode_measure, power_pair_integral, ModeField, SolverError,
};
use crate::special_functions::{hatted_jy, SpecialFnError};

#[derive(Debug, Error)]
pub enum SingularityError {
    #[error("source must lie outside B_r3 for the reflection machinery (r_s = {r_s}, r3 = {r3})")]
    SourceInsideLens { r_s: f64, r3: f64 },
    #[error("field does not contain the sign-changing shell of the given lens")]
    NotALensField,
    #[error(
        "reflected coefficients disagree with the shell pullback at mode {n}: residual {residual:.3e}"
    )]
    ReflectionResidual { n: i64, residual: f64 },
    #[error("interface Wronskian denominator vanishes at mode {0}")]
    DegenerateWronskian(u32),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
    #[error(transparent)]
    Lens(#[from] crate::lens_design::LensError),
    #[error(transparent)]
    Numeric(#[from] crate::numeric::NumericError),
}

fn lc(v: Complex64) -> LogComplex {
    LogComplex::from_c64(v)
}

fn lc_real(v: f64) -> LogComplex {
    LogComplex::from_c64(Complex64::new(v, 0.0))
}

/// Accumulator for sums of nonnegative terms with huge dynamic range,
/// carried as ln of the running sum.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogSum {
    ln: f64,
}

impl LogSum {
    pub fn new() -> Self {
        LogSum {
            ln: f64::NEG_INFINITY,
        }
    }

    pub fn add_ln(&mut self, term_ln: f64) {
        if term_ln == f64::NEG_INFINITY {
            return;
        }
        if self.ln == f64::NEG_INFINITY {
            self.ln = term_ln;
        } else {
            let hi = self.ln.max(term_ln);
            let lo = self.ln.min(term_ln);
            self.ln = hi + (lo - hi).exp().ln_1p();
        }
    }

    pub fn value(&self) -> f64 {
        if self.ln == f64::NEG_INFINITY {
            0.0
        } else {
            self.ln.exp()
        }
    }
}

/// The 2×2 map taking the reflected-side coefficients `(c, d)` to the
/// physical-side pair at an interface of radius `r`: `(a, b)` at `r2`,
/// `(e, f)` at `r3`. All entries in log-polar form.
pub fn interface_matrix(
    n: u32,
    d: usize,
    k: f64,
    delta: f64,
    r: f64,
) -> Result<[[LogComplex; 2]; 2], SingularityError> {
    let i_delta = Complex64::new(0.0, delta);
    if k > 0.0 {
        // a = c + iδ(AC c + AD d), b = d + iδ(BC c + BD d)
        let e = table_entry_at(n, k * r)?;
        let one = lc(Complex64::ONE);
        let idl = lc(i_delta);
        return Ok([
            [one.add(&idl.mul(&e.ac)), idl.mul(&e.ad)],
            [idl.mul(&e.bc), one.add(&idl.mul(&e.bd))],
        ]);
    }
    match (d, n) {
        (2, 0) => {
            // a0 = c0 + iδ ln(r) d0, b0 = (1 − iδ) d0
            Ok([
                [lc(Complex64::ONE), lc(i_delta * r.ln())],
                [LogComplex::zero(), lc(Complex64::new(1.0, -delta))],
            ])
        }
        (2, _) => {
            let nf = n as f64;
            let half = lc(Complex64::new(1.0, -delta / 2.0)); // (2 − iδ)/2
            let id2 = lc(i_delta / 2.0);
            Ok([
                [half, id2.scale_ln(-2.0 * nf * r.ln())],
                [id2.scale_ln(2.0 * nf * r.ln()), half],
            ])
        }
        (3, 0) => Ok([
            [lc(Complex64::ONE), lc(i_delta / r)],
            [LogComplex::zero(), lc(Complex64::new(1.0, -delta))],
        ]),
        (3, _) => {
            let nf = n as f64;
            let w = 2.0 * nf + 1.0;
            Ok([
                [
                    lc(Complex64::ONE - i_delta * (nf / w)),
                    lc(i_delta * ((nf + 1.0) / w)).scale_ln(-w * r.ln()),
                ],
                [
                    lc(i_delta * (nf / w)).scale_ln(w * r.ln()),
                    lc(Complex64::ONE - i_delta * ((nf + 1.0) / w)),
                ],
            ])
        }
        _ => unreachable!("dimension validated upstream"),
    }
}

fn det2(m: &[[LogComplex; 2]; 2]) -> LogComplex {
    m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0]))
}

fn apply2(m: &[[LogComplex; 2]; 2], v: &[LogComplex; 2]) -> [LogComplex; 2] {
    [
        m[0][0].mul(&v[0]).add(&m[0][1].mul(&v[1])),
        m[1][0].mul(&v[0]).add(&m[1][1].mul(&v[1])),
    ]
}

fn solve2(m: &[[LogComplex; 2]; 2], v: &[LogComplex; 2]) -> [LogComplex; 2] {
    let det = det2(m);
    [
        m[1][1].mul(&v[0]).sub(&m[0][1].mul(&v[1])).div(&det),
        m[0][0].mul(&v[1]).sub(&m[1][0].mul(&v[0])).div(&det),
    ]
}

/// One mode's coefficient set: `(a, b)` for `u_δ`, `(c, d)` for `u_{1,δ}`,
/// `(e, f)` for `u_{2,δ}`, in the `B_r3 \ B_r2` resp. `B_r3 \ B_r*` bases.
#[derive(Debug, Clone, Copy)]
pub struct ModeCoefficients {
    pub a: LogComplex,
    pub b: LogComplex,
    pub c: LogComplex,
    pub d: LogComplex,
    pub e: LogComplex,
    pub f: LogComplex,
}

/// Reflected coefficients of a solved lens field.
#[derive(Debug, Clone)]
pub struct ReflectedCoefficients {
    pub d: usize,
    pub k: f64,
    pub delta: f64,
    pub radii: Radii,
    pub big_r: f64,
    pub modes: BTreeMap<i64, ModeCoefficients>,
}

/// Decaying-basis exponent of mode n outside the lens: `−n` in 2D,
/// `−n−1` in 3D.
fn decay_exponent(n: u32, d: usize) -> f64 {
    if d == 2 {
        -(n as f64)
    } else {
        -(n as f64) - 1.0
    }
}

/// Extract the paper-convention coefficients `(a, b)` of a mode on the
/// annulus `(r2, r3)` from the solved field: `a` rides the growing basis
/// (`r^n`, or `Ĵ_n(k·)`), `b` the decaying one (`r^{−n}`/`r^{−n−1}`/`Ŷ_n`).
fn outer_coefficients(
    field: &ModeField,
    n: i64,
    radii: &Radii,
) -> Result<(LogComplex, LogComplex), SingularityError> {
    let mid = 0.5 * (radii.r2 + radii.r3);
    let li = field.layer_index_at(mid);
    let layer = &field.layers[li];
    if layer.r_in > radii.r2 * (1.0 + 1e-12) || layer.r_out < radii.r3 * (1.0 - 1e-12) {
        return Err(SingularityError::SourceInsideLens {
            r_s: field.source_radius,
            r3: radii.r3,
        });
    }
    if field.k == 0.0 && n == 0 && field.d == 2 {
        // n=0 basis is {1, ln(r/ρ2)}: a0 = x1 − x2 ln ρ2, b0 = x2
        let sol = &field.modes[&n];
        let [x1, x2] = sol.coeffs[li];
        let rho2 = layer.r_in;
        return Ok((lc(x1 - x2 * rho2.ln()), lc(x2)));
    }
    let un = field.unnormalized_coeffs(n, li)?;
    Ok((un.c1, un.c2))
}

/// Shell-pullback oracle for `(c, d)`: the reflected field `u_{1,δ} =
/// u_δ ∘ F⁻¹` read directly off the sign-changing shell layer coefficients.
fn pullback_coefficients(
    field: &ModeField,
    n: i64,
    radii: &Radii,
) -> Result<(LogComplex, LogComplex), SingularityError> {
    let li = field
        .layers
        .iter()
        .position(|l| l.s.re < 0.0)
        .ok_or(SingularityError::NotALensField)?;
    let n_abs = n.unsigned_abs() as u32;
    if field.k > 0.0 {
        // shell basis is the pullback of the hatted pair: coefficients map
        // across unchanged (c = x_J, d = x_Y)
        let un = field.unnormalized_coeffs(n, li)?;
        return Ok((un.c1, un.c2));
    }
    let sol = &field.modes[&n];
    let [x1, x2] = sol.coeffs[li];
    let beta = radii.beta;
    if n_abs == 0 && field.d == 2 {
        // shell n=0 basis {1, ln(r/ρ2)}: through F⁻¹, ln|x| = β ln r2 +
        // (1−β) ln|y|, so d0 = x2(1−β) and c0 = x1 + x2(β ln r2 − ln ρ2)
        let layer = &field.layers[li];
        let rho2 = layer.r_in;
        let c0 = lc(x1 + x2 * (beta * radii.r2.ln() - rho2.ln()));
        let d0 = lc(x2 * (1.0 - beta));
        return Ok((c0, d0));
    }
    // power shell: u = x̃1 r^{g1} + x̃2 r^{g2}; composing with F⁻¹
    // (|x| = r2^β |y|^{1−β}) sends r^g to r2^{βg} |y|^{(1−β)g}, and the
    // shell exponents satisfy (1−β)g ∈ {n, −n} (2D) resp. {n, −n−1} (3D)
    let un = field.unnormalized_coeffs(n, li)?;
    let map_branch = |coef: LogComplex, g: f64| -> (f64, LogComplex) {
        ((1.0 - beta) * g, coef.scale_ln(beta * g * radii.r2.ln()))
    };
    let (e1, c1m) = map_branch(un.c1, un.g1);
    let (e2, c2m) = map_branch(un.c2, un.g2);
    let pick = |target: f64| -> Result<LogComplex, SingularityError> {
        if (e1 - target).abs() < 1e-6 {
            Ok(c1m)
        } else if (e2 - target).abs() < 1e-6 {
            Ok(c2m)
        } else {
            Err(SingularityError::NotALensField)
        }
    };
    let c = pick(n_abs as f64)?;
    let d = pick(decay_exponent(n_abs, field.d))?;
    Ok((c, d))
}

fn rel_distance(a: &LogComplex, b: &LogComplex, scale_ln: f64) -> f64 {
    let diff = a.sub(b);
    if diff.is_zero() {
        return 0.0;
    }
    (diff.ln_mag - a.ln_mag.max(b.ln_mag).max(scale_ln)).exp()
}

/// Compute `(c, d)` and `(e, f)` from the solved field's `(a, b)` through
/// the interface relations, verifying against the shell pullback.
pub fn reflect_solution(
    field: &ModeField,
    spec: &LensSpec,
) -> Result<ReflectedCoefficients, SingularityError> {
    let radii = spec.radii()?;
    if field.source_radius <= radii.r3 {
        return Err(SingularityError::SourceInsideLens {
            r_s: field.source_radius,
            r3: radii.r3,
        });
    }
    let mut modes = BTreeMap::new();
    for &n in field.modes.keys() {
        let n_abs = n.unsigned_abs() as u32;
        let (a, b) = outer_coefficients(field, n, &radii)?;
        let m2 = interface_matrix(n_abs, field.d, field.k, spec.delta, radii.r2)?;
        let cd = solve2(&m2, &[a, b]);
        let m3 = interface_matrix(n_abs, field.d, field.k, spec.delta, radii.r3)?;
        let ef = apply2(&m3, &cd);
        // residual check against the direct shell pullback
        let (cp, dp) = pullback_coefficients(field, n, &radii)?;
        let scale = cd[0].ln_mag.max(cd[1].ln_mag);
        let res = rel_distance(&cd[0], &cp, scale).max(rel_distance(&cd[1], &dp, scale));
        if !(res < 1e-7) {
            return Err(SingularityError::ReflectionResidual { n, residual: res });
        }
        modes.insert(
            n,
            ModeCoefficients {
                a,
                b,
                c: cd[0],
                d: cd[1],
                e: ef[0],
                f: ef[1],
            },
        );
    }
    Ok(ReflectedCoefficients {
        d: field.d,
        k: field.k,
        delta: spec.delta,
        radii,
        big_r: field.outer_radius,
        modes,
    })
}

/// The singular part `û_δ` of `u_δ − u_{2,δ}` on `|x| ≥ r*`: per mode the
/// decaying-basis coefficient (for n = 0 a constant instead).
#[derive(Debug, Clone)]
pub struct SingularPart {
    pub d: usize,
    pub k: f64,
    pub radii: Radii,
    pub big_r: f64,
    /// decaying-basis coefficients (`r^{−n}`, `r^{−n−1}` or `Ŷ_n(k·)`)
    pub modes: BTreeMap<i64, LogComplex>,
    /// the n = 0 part is a constant in the quasistatic regimes
    pub constant: Complex64,
}

pub fn singular_part(coeffs: &ReflectedCoefficients) -> Result<SingularPart, SingularityError> {
    let r2 = coeffs.radii.r2;
    let r3 = coeffs.radii.r3;
    let i_delta = Complex64::new(0.0, coeffs.delta);
    let mut modes = BTreeMap::new();
    let mut constant = Complex64::ZERO;
    for (&n, mc) in &coeffs.modes {
        let n_abs = n.unsigned_abs() as u32;
        let nf = n_abs as f64;
        if coeffs.k > 0.0 {
            // iδ[(BC(r2) − BC(r3)) c + (BD(r2) − BD(r3)) d] on Ŷ_n
            let t2 = table_entry_at(n_abs, coeffs.k * r2)?;
            let t3 = table_entry_at(n_abs, coeffs.k * r3)?;
            let w = t2
                .bc
                .sub(&t3.bc)
                .mul(&mc.c)
                .add(&t2.bd.sub(&t3.bd).mul(&mc.d))
                .mul(&lc(i_delta));
            modes.insert(n, w);
            continue;
        }
        match (coeffs.d, n_abs) {
            (2, 0) => {
                constant += i_delta * (r2.ln() - r3.ln()) * mc.d.to_c64()?;
            }
            (2, _) => {
                // (iδ/2) c (r2^{2n} − r3^{2n}) on r^{−n}
                let diff = lc_real(1.0)
                    .scale_ln(2.0 * nf * r2.ln())
                    .sub(&lc_real(1.0).scale_ln(2.0 * nf * r3.ln()));
                modes.insert(n, lc(i_delta / 2.0).mul(&mc.c).mul(&diff));
            }
            (3, 0) => {
                constant += i_delta * (1.0 / r2 - 1.0 / r3) * mc.d.to_c64()?;
            }
            (3, _) => {
                // iδ n/(2n+1) c (r2^{2n+1} − r3^{2n+1}) on r^{−n−1}
                let w = 2.0 * nf + 1.0;
                let diff = lc_real(1.0)
                    .scale_ln(w * r2.ln())
                    .sub(&lc_real(1.0).scale_ln(w * r3.ln()));
                modes.insert(n, lc(i_delta * (nf / w)).mul(&mc.c).mul(&diff));
            }
            _ => unreachable!(),
        }
    }
    Ok(SingularPart {
        d: coeffs.d,
        k: coeffs.k,
        radii: coeffs.radii,
        big_r: coeffs.big_r,
        modes,
        constant,
    })
}

impl SingularPart {
    /// Value and radial derivative of mode n of `û_δ` at radius r ≥ r*.
    pub fn mode_value(&self, n: i64, r: f64) -> Result<(Complex64, Complex64), SingularityError> {
        let n_abs = n.unsigned_abs() as u32;
        if self.k > 0.0 {
            let w = match self.modes.get(&n) {
                Some(w) if !w.is_zero() => *w,
                _ => return Ok((Complex64::ZERO, Complex64::ZERO)),
            };
            let h = hatted_jy(n_abs, self.k * r)?;
            let y = Complex64::from_polar((w.ln_mag + h.y.ln_abs).exp() * h.y.sign, w.arg);
            let yp =
                Complex64::from_polar((w.ln_mag + h.yp.ln_abs).exp() * h.yp.sign, w.arg) * self.k;
            return Ok((y, yp));
        }
        let g = decay_exponent(n_abs, self.d);
        let mut u = if n_abs == 0 {
            self.constant
        } else {
            Complex64::ZERO
        };
        let mut du = Complex64::ZERO;
        if let Some(w) = self.modes.get(&n) {
            if !w.is_zero() {
                let v = w.scale_ln(g * r.ln()).to_c64()?;
                u += v;
                du += v * g / r;
            }
        }
        Ok((u, du))
    }

    /// Squared H¹ norm of `û_δ` over the annulus (r_a, r_b) ⊂ Ω \ B_{r*}.
    pub fn h1_norm_sq(&self, r_a: f64, r_b: f64) -> Result<f64, SingularityError> {
        let mut total = 0.0;
        let meas = mode_measure(self.d);
        for (&n, w) in &self.modes {
            let n_abs = n.unsigned_abs() as u32;
            let g = decay_exponent(n_abs, self.d);
            let aw = angular_weight(n_abs, self.d);
            if self.k > 0.0 {
                // midpoint rule; the integrand is smooth and the budget tiny
                let quad = 128;
                let mut s = 0.0;
                for i in 0..quad {
                    let r = r_a + (r_b - r_a) * (i as f64 + 0.5) / quad as f64;
                    let (u, du) = self.mode_value(n, r)?;
                    s += (du.norm_sqr() + aw * u.norm_sqr() / (r * r) + u.norm_sqr())
                        * r.powi(self.d as i32 - 1);
                }
                total += s * (r_b - r_a) / quad as f64 * meas;
                continue;
            }
            if w.is_zero() {
                continue;
            }
            let c2 = (2.0 * w.ln_mag).exp();
            let grad = c2
                * (g * g + aw)
                * power_pair_integral(g, 1.0, g, 1.0, self.d as f64 - 3.0, r_a, r_b);
            let l2 = c2 * power_pair_integral(g, 1.0, g, 1.0, self.d as f64 - 1.0, r_a, r_b);
            total += (grad + l2) * meas;
        }
        // constant part (n = 0): only the L² term contributes
        if self.constant != Complex64::ZERO {
            let vol = power_pair_integral(0.0, 1.0, 0.0, 1.0, self.d as f64 - 1.0, r_a, r_b);
            total += self.constant.norm_sqr() * vol * meas;
        }
        Ok(total)
    }
}

/// The de-singularized field `U_δ`: `u_δ − û_δ` outside `B_{r*}`, `u_{2,δ}`
/// inside, with two-sided trace data on `∂B_{r*}`.
pub struct Desingularized<'a> {
    pub field: &'a ModeField,
    pub coeffs: &'a ReflectedCoefficients,
    pub uhat: SingularPart,
}

pub fn desingularize<'a>(
    field: &'a ModeField,
    coeffs: &'a ReflectedCoefficients,
) -> Result<Desingularized<'a>, SingularityError> {
    let uhat = singular_part(coeffs)?;
    Ok(Desingularized {
        field,
        coeffs,
        uhat,
    })
}

/// Jumps of `U_δ` and of its conormal flux across `∂B_{r*}`, per mode:
/// outside value `(u_δ − û_δ)(r*⁺)` minus inside value `u_{2,δ}(r*⁻)`.
#[derive(Debug, Clone)]
pub struct JumpData {
    pub d: usize,
    pub value: BTreeMap<i64, Complex64>,
    pub flux: BTreeMap<i64, Complex64>,
}

impl Desingularized<'_> {
    pub fn jumps(&self) -> Result<JumpData, SingularityError> {
        let r = self.coeffs.radii.r_star;
        let mut value = BTreeMap::new();
        let mut flux = BTreeMap::new();
        for (&n, mc) in &self.coeffs.modes {
            let n_abs = n.unsigned_abs() as u32;
            let (u_out, _) = self.field.mode_value(n, r)?;
            let du_out = self.field.mode_value(n, r)?.1; // vacuum side: flux = ∂_r u
            let (uh, duh) = self.uhat.mode_value(n, r)?;
            let (u2, du2) = eval_pair(&mc.e, &mc.f, n_abs, self.coeffs.d, self.coeffs.k, r)?;
            value.insert(n, u_out - uh - u2);
            // conormal flux: Â = I on the vacuum side of ∂B_{r*}, and the
            // (e, f) expansion carries the conormal flux of u_{2,δ} across it
            flux.insert(n, du_out - duh - du2);
        }
        Ok(JumpData {
            d: self.coeffs.d,
            value,
            flux,
        })
    }

    /// Squared H¹ norm of `U_δ = u_δ − û_δ` over (r_a, r_b) ⊂ Ω \ B_{r*},
    /// assembled from layer pieces with the singular part folded out of the
    /// decaying coefficients.
    pub fn u_h1_norm_sq(&self, r_a: f64, r_b: f64) -> Result<f64, SingularityError> {
        let field = self.field;
        let r_a = r_a.max(self.coeffs.radii.r_star);
        let mut total = 0.0;
        for (i, layer) in field.layers.iter().enumerate() {
            let a = r_a.max(layer.r_in);
            let b = r_b.min(layer.r_out);
            if b <= a {
                continue;
            }
            for &n in self.coeffs.modes.keys() {
                let un = field.unnormalized_coeffs(n, i)?;
                let n_abs = n.unsigned_abs() as u32;
                let (mut x1, mut x2) = {
                    let sol = &field.modes[&n];
                    (sol.coeffs[i][0], sol.coeffs[i][1])
                };
                // subtract û: its decaying-basis (resp. constant) content
                if field.k > 0.0 {
                    if let Some(w) = self.uhat.modes.get(&n) {
                        if !w.is_zero() {
                            x2 -= w.scale_ln(un.l2).to_c64()?;
                        }
                    }
                } else if n_abs == 0 {
                    x1 -= self.uhat.constant; // n=0 branch 1 is the constant
                } else if let Some(w) = self.uhat.modes.get(&n) {
                    if !w.is_zero() {
                        // raw coefficient → this layer's normalized slot
                        x2 -= w.scale_ln(un.l2).to_c64()?;
                    }
                }
                total += piece_h1(field, i, n, x1, x2, a, b)?;
            }
        }
        Ok(total)
    }
}

/// Gradient + plain L² of one coefficient pair over a piece of one layer,
/// routed through the solver's closed-form integrals via a shallow
/// single-mode field.
fn piece_h1(
    field: &ModeField,
    layer_index: usize,
    n: i64,
    x1: Complex64,
    x2: Complex64,
    a: f64,
    b: f64,
) -> Result<f64, SingularityError> {
    let mut coeffs = vec![[Complex64::ZERO; 2]; field.layers.len()];
    coeffs[layer_index] = [x1, x2];
    let mut modes = BTreeMap::new();
    modes.insert(
        n,
        crate::radial_solver::ModeSolution {
            coeffs,
            pivot_ratio: 1.0,
        },
    );
    let clone = ModeField {
        d: field.d,
        k: field.k,
        outer_radius: field.outer_radius,
        layers: field.layers.clone(),
        source_radius: field.source_radius,
        modes,
    };
    let grad = crate::radial_solver::energy(&clone, a, b)?.gradient;
    let l2 = crate::radial_solver::l2_norm_sq(&clone, a, b)?;
    Ok(grad + l2)
}

/// Evaluate `e·φ_grow + f·φ_decay` and its radial derivative at r, for the
/// unnormalized outer-annulus basis.
fn eval_pair(
    e: &LogComplex,
    f: &LogComplex,
    n: u32,
    d: usize,
    k: f64,
    r: f64,
) -> Result<(Complex64, Complex64), SingularityError> {
    if k > 0.0 {
        let h = hatted_jy(n, k * r)?;
        let from =
            |c: &LogComplex, s: crate::numeric::SignLog| -> Result<Complex64, SingularityError> {
                if c.is_zero() || s.is_zero() {
                    return Ok(Complex64::ZERO);
                }
                Ok(Complex64::from_polar(
                    (c.ln_mag + s.ln_abs).exp() * s.sign,
                    c.arg,
                ))
            };
        let u = from(e, h.j)? + from(f, h.y)?;
        let du = (from(e, h.jp)? + from(f, h.yp)?) * k;
        return Ok((u, du));
    }
    if n == 0 && d == 2 {
        // e + f ln r
        let ev = e.to_c64()?;
        let fv = f.to_c64()?;
        return Ok((ev + fv * r.ln(), fv / r));
    }
    let g1 = n as f64;
    let g2 = decay_exponent(n, d);
    let t1 = e.scale_ln(g1 * r.ln()).to_c64()?;
    let t2 = f.scale_ln(g2 * r.ln()).to_c64()?;
    Ok((t1 + t2, t1 * g1 / r + t2 * g2 / r))
}

/// Discrete fractional trace norms on mode data: `‖g‖²_{H^{1/2}} =
/// Σ (1+|n|)|g_n|²` and `‖g‖²_{H^{−1/2}} = Σ |g_n|²/(1+|n|)`.
pub fn h_half_norm_sq(modes: &BTreeMap<i64, Complex64>) -> f64 {
    modes
        .iter()
        .map(|(n, v)| (1.0 + n.unsigned_abs() as f64) * v.norm_sqr())
        .sum()
}

pub fn h_minus_half_norm_sq(modes: &BTreeMap<i64, Complex64>) -> f64 {
    modes
        .iter()
        .map(|(n, v)| v.norm_sqr() / (1.0 + n.unsigned_abs() as f64))
        .sum()
}

/// Both jump norms of a de-singularized field: `(‖[U]‖_{H^{1/2}},
/// ‖[flux]‖_{H^{−1/2}})` on `∂B_{r*}`.
pub fn jump_norms(jumps: &JumpData) -> (f64, f64) {
    (
        h_half_norm_sq(&jumps.value).sqrt(),
        h_minus_half_norm_sq(&jumps.flux).sqrt(),
    )
}

/// The finite-frequency interface coefficients at argument t = k·r:
/// `AC = Ĵ'Ŷ/W`, `AD = ŶŶ'/W`, `BC = −ĴĴ'/W`, `BD = −ĴŶ'/W` with
/// `W = ĴŶ' − Ĵ'Ŷ`; the same table evaluated at r3 serves `EC…FD`.
#[derive(Debug, Clone, Copy)]
pub struct TableEntry {
    pub ac: LogComplex,
    pub ad: LogComplex,
    pub bc: LogComplex,
    pub bd: LogComplex,
}

fn table_entry_at(n: u32, t: f64) -> Result<TableEntry, SingularityError> {
    let h = hatted_jy(n, t)?;
    let sl = |s: crate::numeric::SignLog| LogComplex::from_ln_real(s.ln_abs, s.sign < 0.0);
    let (j, jp, y, yp) = (sl(h.j), sl(h.jp), sl(h.y), sl(h.yp));
    let w = j.mul(&yp).sub(&jp.mul(&y));
    if w.is_zero() || w.ln_mag < -650.0 {
        return Err(SingularityError::DegenerateWronskian(n));
    }
    Ok(TableEntry {
        ac: jp.mul(&y).div(&w),
        ad: y.mul(&yp).div(&w),
        bc: j.mul(&jp).div(&w).neg(),
        bd: j.mul(&yp).div(&w).neg(),
    })
}

/// All eight interface coefficient sequences up to `n_max`, at `r2` and
/// `r3`, overflow-safe.
#[derive(Debug, Clone)]
pub struct InterfaceCoefficientTable {
    pub k: f64,
    pub r2: f64,
    pub r3: f64,
    pub at_r2: Vec<TableEntry>,
    pub at_r3: Vec<TableEntry>,
}

pub fn interface_table(
    n_max: u32,
    k: f64,
    r2: f64,
    r3: f64,
) -> Result<InterfaceCoefficientTable, SingularityError> {
    let mut at_r2 = Vec::with_capacity(n_max as usize + 1);
    let mut at_r3 = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        at_r2.push(table_entry_at(n, k * r2)?);
        at_r3.push(table_entry_at(n, k * r3)?);
    }
    Ok(InterfaceCoefficientTable {
        k,
        r2,
        r3,
        at_r2,
        at_r3,
    })
}

/// Both sides of the Hölder step: for the solved coefficient sequence,
/// `lhs = δ² Σ n |d_n|² r2^{−4n} r*^{2n}` and
/// `rhs = δ (δ² Σ n |d_n|² r2^{−4n} r3^{2n})^{1/2} (Σ n |d_n|² r2^{−2n})^{1/2}`.
pub fn holder_step(coeffs: &ReflectedCoefficients) -> (f64, f64) {
    let r2 = coeffs.radii.r2;
    let r3 = coeffs.radii.r3;
    let rs = coeffs.radii.r_star;
    let delta = coeffs.delta;
    let mut lhs = LogSum::new();
    let mut s1 = LogSum::new();
    let mut s2 = LogSum::new();
    for (&n, mc) in &coeffs.modes {
        let nf = n.unsigned_abs() as f64;
        if nf == 0.0 || mc.d.is_zero() {
            continue;
        }
        let d2 = 2.0 * mc.d.ln_mag;
        let nln = nf.ln();
        lhs.add_ln(nln + d2 - 4.0 * nf * r2.ln() + 2.0 * nf * rs.ln());
        s1.add_ln(nln + d2 - 4.0 * nf * r2.ln() + 2.0 * nf * r3.ln());
        s2.add_ln(nln + d2 - 2.0 * nf * r2.ln());
    }
    let lhs_v = delta * delta * lhs.value();
    let rhs_v = delta * (delta * delta * s1.value()).sqrt() * s2.value().sqrt();
    (lhs_v, rhs_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lens_design::{build_medium, LensSpec, ObjectSpec};
    use crate::numeric::solve_dense;
    use crate::radial_solver::{solve_field, RingSource};

    fn lens(m: f64, alpha: f64, d: usize, a: f64, k: f64, delta: f64, big_r: f64) -> LensSpec {
        LensSpec {
            m,
            r0: 1.0,
            alpha,
            d,
            k,
            delta,
            outer_radius: big_r,
            object: ObjectSpec::Constant { a, sigma: 1.0 },
            omit_inner_layer: false,
        }
    }

    /// Brute-force interface oracle: solve the raw 2×2 transmission system
    /// {continuity; flux with the (1−iδ) weight} in scaled variables.
    fn brute_force_ab(
        n: u32,
        d: usize,
        k: f64,
        delta: f64,
        r: f64,
        c: Complex64,
        dd: Complex64,
    ) -> (Complex64, Complex64) {
        let (pg, pgp, pd, pdp) = if k > 0.0 {
            let h = hatted_jy(n, k * r).unwrap();
            let s = |v: crate::numeric::SignLog, off: f64| v.sign * (v.ln_abs - off).exp();
            (
                s(h.j, h.j.ln_abs),
                k * s(h.jp, h.j.ln_abs),
                s(h.y, h.y.ln_abs),
                k * s(h.yp, h.y.ln_abs),
            )
        } else if n == 0 && d == 2 {
            (1.0, 0.0, r.ln(), 1.0 / r)
        } else {
            let g1 = n as f64;
            let g2 = if d == 2 { -(n as f64) } else { -(n as f64) - 1.0 };
            // scaled basis (value 1 at the interface)
            (1.0, g1 / r, 1.0, g2 / r)
        };
        // continuity: ã φg + b̃ φd = c̃ φg + d̃ φd
        // flux:       ã φg' + b̃ φd' = (1−iδ)(c̃ φg' + d̃ φd')
        let one_min = Complex64::new(1.0, -delta);
        let mut m = [
            Complex64::new(pg, 0.0),
            Complex64::new(pd, 0.0),
            Complex64::new(pgp, 0.0),
            Complex64::new(pdp, 0.0),
        ];
        let mut b = [c * pg + dd * pd, one_min * (c * pgp + dd * pdp)];
        solve_dense(&mut m, &mut b, 2).unwrap();
        (b[0], b[1])
    }

    /// ln-scales converting scaled coefficients (basis of value 1 at r) to
    /// the raw convention the interface matrices use.
    fn raw_scales(n: u32, d: usize, k: f64, r: f64) -> (f64, f64) {
        if k > 0.0 {
            let h = hatted_jy(n, k * r).unwrap();
            (h.j.ln_abs, h.y.ln_abs)
        } else if n == 0 && d == 2 {
            (0.0, 0.0)
        } else {
            let g2 = if d == 2 { -(n as f64) } else { -(n as f64) - 1.0 };
            (n as f64 * r.ln(), g2 * r.ln())
        }
    }

    #[test]
    fn closed_forms_match_brute_force() {
        // 2D/3D quasistatic and 2D Helmholtz, random (c, d, δ, n ≤ 40).
        let mut state = 0xfeedfaceu64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / (1u64 << 53) as f64
        };
        for trial in 0..400 {
            let n = (next() * 41.0) as u32;
            let delta = 10f64.powf(-6.0 + 5.0 * next());
            let c = Complex64::new(next() * 2.0 - 1.0, next() * 2.0 - 1.0);
            let dd = Complex64::new(next() * 2.0 - 1.0, next() * 2.0 - 1.0);
            for (d, k, r) in [(2usize, 0.0, 8.0), (3, 0.0, 8.0), (2, 1.0, 8.0), (2, 1.0, 32.0)] {
                if k > 0.0 && n == 0 && d == 2 {
                    // covered, but the scaled oracle needs J0 ≠ 0 at r; skip
                    // the measure-zero hazard by perturbing the order
                }
                let m = interface_matrix(n, d, k, delta, r).unwrap();
                // scaled input (c, dd) → raw, apply closed form, rescale
                let (lg, ld) = raw_scales(n, d, k, r);
                let raw = apply2(&m, &[lc(c).scale_ln(-lg), lc(dd).scale_ln(-ld)]);
                let a_scaled = raw[0].scale_ln(lg).to_c64().unwrap();
                let b_scaled = raw[1].scale_ln(ld).to_c64().unwrap();
                let (a_bf, b_bf) = brute_force_ab(n, d, k, delta, r, c, dd);
                let scale = a_bf.norm().max(b_bf.norm()).max(1e-30);
                assert!(
                    (a_scaled - a_bf).norm() / scale < 1e-12
                        && (b_scaled - b_bf).norm() / scale < 1e-12,
                    "mismatch trial {trial} n={n} d={d} k={k}: ({a_scaled}, {b_scaled}) vs ({a_bf}, {b_bf})"
                );
            }
        }
    }

    #[test]
    fn paper_arithmetic_example_abcd() {
        // c₁=1, d₁=0, δ=0.1, r2=8 → a₁ = 1 − 0.05i, b₁ = 3.2i.
        let m = interface_matrix(1, 2, 0.0, 0.1, 8.0).unwrap();
        let out = apply2(&m, &[lc(Complex64::ONE), LogComplex::zero()]);
        let a = out[0].to_c64().unwrap();
        let b = out[1].to_c64().unwrap();
        assert!((a - Complex64::new(1.0, -0.05)).norm() < 1e-15);
        assert!((b - Complex64::new(0.0, 3.2)).norm() < 1e-14);
    }

    #[test]
    fn delta_zero_is_identity() {
        for (d, k) in [(2usize, 0.0), (3, 0.0), (2, 1.0)] {
            for n in [0u32, 1, 5, 17] {
                let m = interface_matrix(n, d, k, 0.0, 8.0).unwrap();
                let c = lc(Complex64::new(0.3, -1.2));
                let dd = lc(Complex64::new(-2.0, 0.7));
                let out = apply2(&m, &[c, dd]);
                assert!((out[0].to_c64().unwrap() - c.to_c64().unwrap()).norm() < 1e-14);
                assert!((out[1].to_c64().unwrap() - dd.to_c64().unwrap()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_part_paper_values() {
        // c₁ = 1 only, δ=0.01, r2=8, r3=32 → coefficient −4.8i on r^{−1};
        // d₀ = 1 only → constant iδ ln(r2/r3) = −0.013862944i.
        let spec = lens(16.0, 2.0, 2, 4.0, 0.0, 0.01, 64.0);
        let radii = spec.radii().unwrap();
        let zero = LogComplex::zero();
        let mut modes = BTreeMap::new();
        modes.insert(
            1i64,
            ModeCoefficients {
                a: zero,
                b: zero,
                c: lc(Complex64::ONE),
                d: zero,
                e: zero,
                f: zero,
            },
        );
        modes.insert(
            0i64,
            ModeCoefficients {
                a: zero,
                b: zero,
                c: zero,
                d: lc(Complex64::ONE),
                e: zero,
                f: zero,
            },
        );
        let coeffs = ReflectedCoefficients {
            d: 2,
            k: 0.0,
            delta: 0.01,
            radii,
            big_r: 64.0,
            modes,
        };
        let uhat = singular_part(&coeffs).unwrap();
        let w1 = uhat.modes[&1].to_c64().unwrap();
        assert!((w1 - Complex64::new(0.0, -4.8)).norm() < 1e-13, "w1 = {w1}");
        let c0 = uhat.constant;
        assert!(
            (c0 - Complex64::new(0.0, 0.01 * (8.0f64 / 32.0).ln())).norm() < 1e-15,
            "c0 = {c0}"
        );
        // all c = d = 0 → û = 0
        let empty = ReflectedCoefficients {
            modes: BTreeMap::new(),
            ..coeffs
        };
        let uh0 = singular_part(&empty).unwrap();
        assert!(uh0.modes.is_empty() && uh0.constant == Complex64::ZERO);
    }

    #[test]
    fn reflected_coefficients_roundtrip_on_lens_solve() {
        // the pullback verification is built into reflect_solution; exercise
        // it across dimensions, exponents and frequencies
        for (spec, rs, mode) in [
            (lens(16.0, 2.0, 2, 4.0, 0.0, 1e-3, 64.0), 40.0, 2i64),
            (lens(16.0, 1.5, 2, 4.0, 0.0, 1e-3, 64.0), 40.0, 3),
            (lens(8.0, 2.0, 3, 2.0, 0.0, 1e-2, 32.0), 16.0, 1),
            (lens(16.0, 2.0, 2, 1.0, 1.0, 1e-3, 64.0), 40.0, 2),
        ] {
            let medium = build_medium(&spec).unwrap();
            let source = RingSource {
                radius: rs,
                amplitudes: vec![(0, Complex64::ONE), (mode, Complex64::ONE)],
            };
            let field = solve_field(&medium, &source, None).unwrap();
            let coeffs = reflect_solution(&field, &spec).unwrap();
            assert_eq!(coeffs.modes.len(), 2);
        }
    }

    #[test]
    fn jump_formula_matches_two_sided_evaluation() {
        // [U_δ] mode n = (iδ/2) d_n (r2^{−2n} − r3^{−2n}) r*^n.
        let spec = lens(16.0, 2.0, 2, 4.0, 0.0, 1e-3, 64.0);
        let radii = spec.radii().unwrap();
        let medium = build_medium(&spec).unwrap();
        let source = RingSource {
            radius: 40.0,
            amplitudes: vec![(1, Complex64::ONE), (3, Complex64::new(0.0, 2.0))],
        };
        let field = solve_field(&medium, &source, None).unwrap();
        let coeffs = reflect_solution(&field, &spec).unwrap();
        let desing = desingularize(&field, &coeffs).unwrap();
        let jumps = desing.jumps().unwrap();
        for (&n, mc) in &coeffs.modes {
            let nf = n.unsigned_abs() as f64;
            let want = Complex64::new(0.0, spec.delta / 2.0)
                * mc.d.to_c64().unwrap()
                * (radii.r2.powf(-2.0 * nf) - radii.r3.powf(-2.0 * nf))
                * radii.r_star.powf(nf);
            let got = jumps.value[&n];
            assert!(
                (got - want).norm() <= 1e-10 * want.norm().max(1e-18),
                "mode {n}: {got} vs {want}"
            );
            // flux jump = (n/r*)·[U] in the quasistatic 2D case
            let fwant = want * nf / radii.r_star;
            let fgot = jumps.flux[&n];
            assert!(
                (fgot - fwant).norm() <= 1e-9 * fwant.norm().max(1e-18),
                "flux mode {n}: {fgot} vs {fwant}"
            );
        }
    }

    #[test]
    fn continuous_field_has_zero_jumps() {
        // δ = 0: û = 0 and u, u₂ analytically continue each other.
        let spec = lens(16.0, 2.0, 2, 1.0, 0.0, 0.0, 64.0);
        let medium = build_medium(&spec).unwrap();
        let source = RingSource::single(40.0, 2, Complex64::ONE);
        let field = solve_field(&medium, &source, None).unwrap();
        let coeffs = reflect_solution(&field, &spec).unwrap();
        let desing = desingularize(&field, &coeffs).unwrap();
        let jumps = desing.jumps().unwrap();
        let (ju, jf) = jump_norms(&jumps);
        let scale = field.trace(16.0).unwrap().l2_norm();
        assert!(ju <= 1e-11 * scale.max(1.0), "ju = {ju}");
        assert!(jf <= 1e-11 * scale.max(1.0), "jf = {jf}");
    }

    #[test]
    fn synthetic_single_mode_jump_norm() {
        let mut value = BTreeMap::new();
        value.insert(5i64, Complex64::ONE);
        assert!((h_half_norm_sq(&value) - 6.0).abs() < 1e-15);
        assert!((h_minus_half_norm_sq(&value) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn interface_table_asymptotics() {
        // AC_n → −1/2, BD_n → −1/2, AD_n r2^{2n} → 1/2, BC_n r2^{−2n} → 1/2.
        let t = interface_table(30, 1.0, 8.0, 32.0).unwrap();
        let e = &t.at_r2[30];
        let ac = e.ac.to_c64().unwrap();
        let bd = e.bd.to_c64().unwrap();
        assert!((ac.re + 0.5).abs() < 0.01 && ac.im.abs() < 1e-12, "AC_30 = {ac}");
        assert!((bd.re + 0.5).abs() < 0.01, "BD_30 = {bd}");
        // AD_n r2^{2n} and BC_n r2^{−2n} approach 1/2 slowly (the relative
        // correction is ~t²/4n); assert the approach rather than a window
        let t60 = interface_table(60, 1.0, 8.0, 32.0).unwrap();
        let ad_dev = |tab: &InterfaceCoefficientTable, n: usize| {
            let v = tab.at_r2[n]
                .ad
                .scale_ln(2.0 * n as f64 * 8.0f64.ln())
                .to_c64()
                .unwrap();
            (v.re - 0.5).abs()
        };
        assert!(ad_dev(&t60, 60) < ad_dev(&t60, 30));
        let bc_dev = |tab: &InterfaceCoefficientTable, n: usize| {
            let v = tab.at_r2[n]
                .bc
                .scale_ln(-2.0 * n as f64 * 8.0f64.ln())
                .to_c64()
                .unwrap();
            (v.re - 0.5).abs()
        };
        assert!(bc_dev(&t60, 60) < bc_dev(&t60, 30));
        // r3 analogue: kr3 = 32, so the evanescent asymptotics need n > kr3
        let t60 = interface_table(60, 1.0, 8.0, 32.0).unwrap();
        let ec = t60.at_r3[60].ac.to_c64().unwrap();
        let fd = t60.at_r3[60].bd.to_c64().unwrap();
        assert!((ec.re + 0.5).abs() < 0.01, "EC_60 = {ec}");
        assert!((fd.re + 0.5).abs() < 0.01, "FD_60 = {fd}");
    }

    #[test]
    fn holder_step_inequality_holds() {
        let spec = lens(16.0, 2.0, 2, 4.0, 0.0, 1e-3, 64.0);
        let medium = build_medium(&spec).unwrap();
        let source = RingSource {
            radius: 40.0,
            amplitudes: (1..=6).map(|n| (n, Complex64::ONE)).collect(),
        };
        let field = solve_field(&medium, &source, None).unwrap();
        let coeffs = reflect_solution(&field, &spec).unwrap();
        let (lhs, rhs) = holder_step(&coeffs);
        assert!(lhs <= rhs * (1.0 + 1e-12), "lhs = {lhs}, rhs = {rhs}");
        assert!(lhs > 0.0);
    }

    #[test]
    fn uhat_decays_and_u_stays_bounded_along_sweep() {
        let mut spec = lens(16.0, 2.0, 2, 4.0, 0.0, 1e-2, 64.0);
        let source = RingSource {
            radius: 40.0,
            amplitudes: (0..=3).map(|n| (n, Complex64::ONE)).collect(),
        };
        let radii = spec.radii().unwrap();
        let mut uhat_norms = Vec::new();
        let mut u_norms = Vec::new();
        for delta in [1e-2, 1e-3, 1e-4, 1e-5] {
            spec.delta = delta;
            let medium = build_medium(&spec).unwrap();
            let field = solve_field(&medium, &source, None).unwrap();
            let coeffs = reflect_solution(&field, &spec).unwrap();
            let desing = desingularize(&field, &coeffs).unwrap();
            uhat_norms.push(desing.uhat.h1_norm_sq(radii.r3, 64.0).unwrap().sqrt());
            u_norms.push(desing.u_h1_norm_sq(radii.r_star, 64.0).unwrap().sqrt());
        }
        for w in uhat_norms.windows(2) {
            assert!(w[1] <= 2.0 * w[0], "uhat not decaying: {uhat_norms:?}");
        }
        assert!(uhat_norms[3] < 0.1 * uhat_norms[0]);
        let umax = u_norms.iter().cloned().fold(0.0f64, f64::max);
        let umin = u_norms.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(umax / umin <= 2.0, "U norms vary too much: {u_norms:?}");
    }
}
