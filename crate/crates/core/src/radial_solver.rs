//! Exact per-mode solution of the transmission problem on radially layered
//! media in `Ω = B_R` with zero Dirichlet boundary and ring sources.
//!
//! Fields are expanded per angular mode `n` (Fourier modes `e^{±inθ}` in 2D,
//! spherical-harmonic degrees in 3D, which decouple from the order). On each
//! annular layer the mode has a two-dimensional solution space:
//!
//! * quasistatic constant layer, d=2: `{r^n, r^{−n}}` (`{1, ln r}` at n=0),
//! * d=3: `{r^n, r^{−n−1}}`,
//! * power-law layer `a = diag(c_r, c_t) r^p`: `{r^{γ+}, r^{γ−}}` with
//!   `γ(γ + p + d − 2) = (c_t/c_r) n(n+d−2)`,
//! * Helmholtz constant layer (d=2): `{Ĵ_n(k̃r), Ŷ_n(k̃r)}`,
//! * Helmholtz reflected layer: `{Ĵ_n(kρ(r)), Ŷ_n(kρ(r))}`, `ρ = r_c^α/r^{α−1}`.
//!
//! Transmission across every interface imposes continuity of `u` and of the
//! conormal flux `s a_r ∂_r u`; the ring source at `r_s` prescribes a jump
//! `[s a_r ∂_r u]_{ext−int} = g_n`. Regularity at the origin removes one
//! unknown, the Dirichlet wall at `R` closes the system, leaving `2L−1`
//! unknowns per mode for `L` layers.
//!
//! Basis functions are normalized at the layer edge where they are largest,
//! so matrix entries stay O(1) even at mode 60 over decade-wide annuli.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use thiserror::Error;

use crate::lens_design::{BasisHint, LensMedium, MediumLayer};
#[cfg(test)]
use crate::lens_design::PowerCoef;
use crate::numeric::{solve_dense, LogComplex, NumericError};
use crate::special_functions::{hatted_jy, ln_factorial, SpecialFnError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("plasmonic resonance at mode n = {n}, delta = {delta:.3e} (pivot ratio {pivot:.3e})")]
    ResonantMode { n: i64, delta: f64, pivot: f64 },
    #[error("layer not solvable in this regime: {0}")]
    UnsupportedLayer(String),
    #[error("source radius {r_s} outside the domain (0, {big_r})")]
    SourceOutsideDomain { r_s: f64, big_r: f64 },
    #[error("well-posedness screen failed at mode n = {n}: normalized determinant {det:.3e}")]
    WellPosedness { n: i64, det: f64 },
    #[error("radius range [{a}, {b}] invalid or outside the domain")]
    BadRange { a: f64, b: f64 },
    #[error("field has no solved mode n = {0}")]
    MissingMode(i64),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Ring source on `∂B_{r_s}`: prescribed jump of conormal flux, given by its
/// signed-mode amplitudes.
#[derive(Debug, Clone)]
pub struct RingSource {
    pub radius: f64,
    pub amplitudes: Vec<(i64, Complex64)>,
}

impl RingSource {
    pub fn single(radius: f64, n: i64, g: Complex64) -> Self {
        RingSource {
            radius,
            amplitudes: vec![(n, g)],
        }
    }

    pub fn mode_amplitude(&self, n: i64) -> Complex64 {
        self.amplitudes
            .iter()
            .filter(|(m, _)| *m == n)
            .map(|(_, g)| *g)
            .sum()
    }

    pub fn modes(&self) -> BTreeSet<i64> {
        self.amplitudes.iter().map(|(n, _)| *n).collect()
    }
}

/// n(n+d−2): the angular eigenvalue of mode n.
pub(crate) fn angular_weight(n: u32, d: usize) -> f64 {
    let nf = n as f64;
    nf * (nf + d as f64 - 2.0)
}

/// Radial basis for one (layer, |n|) pair. Basis values are real; each
/// function carries its own normalization so evaluations stay O(1) inside
/// the layer.
#[derive(Debug, Clone)]
enum ModeBasis {
    /// φ1 = (r/ρ1)^{γ1}, φ2 = (r/ρ2)^{γ2}; φ1 is the branch regular at 0.
    Power {
        g1: f64,
        g2: f64,
        rho1: f64,
        rho2: f64,
    },
    /// Double root: φ1 = (r/ρ1)^{γ}, φ2 = (r/ρ2)^{γ} ln(r/ρ2).
    PowerLog { g: f64, rho1: f64, rho2: f64 },
    /// φ1 = Ĵ_n(k̃ r)·e^{−lj}, φ2 = Ŷ_n(k̃ r)·e^{−ly}.
    Bessel { n: u32, kk: f64, lj: f64, ly: f64 },
    /// Arguments through ρ(r) = r_c^α/r^{α−1} (decreasing in r).
    BesselReflected {
        n: u32,
        k: f64,
        r_c: f64,
        alpha: f64,
        lj: f64,
        ly: f64,
    },
}

/// Values and radial derivatives of the two basis functions at r.
#[derive(Debug, Clone, Copy)]
struct BasisEval {
    f1: f64,
    df1: f64,
    f2: f64,
    df2: f64,
}

fn hatted_envelope_j(n: u32) -> f64 {
    n as f64 * std::f64::consts::LN_2 + ln_factorial(n)
}

fn hatted_envelope_y(n: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        std::f64::consts::PI.ln() - n as f64 * std::f64::consts::LN_2 - ln_factorial(n - 1)
    }
}

impl ModeBasis {
    fn build(layer: &MediumLayer, n: u32, k: f64, d: usize) -> Result<ModeBasis, SolverError> {
        let inner = layer.r_in <= 0.0;
        if k == 0.0 || layer.basis == BasisHint::PowerLaw {
            if k > 0.0 {
                return Err(SolverError::UnsupportedLayer(format!(
                    "layer [{}, {}] has no Helmholtz basis (anisotropic power law at k > 0)",
                    layer.r_in, layer.r_out
                )));
            }
            // γ² + (p + d − 2) γ − (c_t/c_r) n(n+d−2) = 0
            let p = layer.a_r.p;
            let ratio = layer.a_t.c / layer.a_r.c;
            let b = p + d as f64 - 2.0;
            let w = ratio * angular_weight(n, d);
            let disc = b * b + 4.0 * w;
            if disc < 0.0 {
                return Err(SolverError::UnsupportedLayer(format!(
                    "complex radial exponents in layer [{}, {}]",
                    layer.r_in, layer.r_out
                )));
            }
            let sq = disc.sqrt();
            let (mut g1, mut g2) = ((-b + sq) / 2.0, (-b - sq) / 2.0);
            if n == 0 {
                // zero-flux branch first: {1, r^{−b}}
                g1 = 0.0;
                g2 = -b;
            }
            if (g1 - g2).abs() < 1e-9 {
                return Ok(ModeBasis::PowerLog {
                    g: g1,
                    rho1: layer.r_out,
                    rho2: if inner { layer.r_out } else { layer.r_in },
                });
            }
            // normalize each branch at the edge where it is largest
            let rho = |g: f64| {
                if g >= 0.0 || inner {
                    layer.r_out
                } else {
                    layer.r_in
                }
            };
            return Ok(ModeBasis::Power {
                g1,
                g2,
                rho1: rho(g1),
                rho2: rho(g2),
            });
        }
        if d != 2 {
            return Err(SolverError::UnsupportedLayer(
                "finite frequency is only supported in 2D".into(),
            ));
        }
        match layer.basis {
            BasisHint::HelmholtzConstant { coef, sigma } => {
                let kk = k * (sigma / coef).sqrt();
                let t_lo = (kk * layer.r_in).max(crate::special_functions::MIN_ARG);
                let (lj, ly) = bessel_normalizers(n, t_lo, kk * layer.r_out)?;
                Ok(ModeBasis::Bessel { n, kk, lj, ly })
            }
            BasisHint::HelmholtzReflected { r_c, alpha } => {
                let rho_lo = reflected_radius(r_c, alpha, layer.r_out); // smaller argument
                let rho_hi = reflected_radius(r_c, alpha, layer.r_in.max(1e-12));
                let (lj, ly) = bessel_normalizers(n, k * rho_lo, k * rho_hi)?;
                Ok(ModeBasis::BesselReflected {
                    n,
                    k,
                    r_c,
                    alpha,
                    lj,
                    ly,
                })
            }
            BasisHint::PowerLaw => unreachable!(),
        }
    }

    fn eval(&self, r: f64) -> Result<BasisEval, SolverError> {
        match *self {
            ModeBasis::Power { g1, g2, rho1, rho2 } => {
                let f1 = (r / rho1).powf(g1);
                let f2 = (r / rho2).powf(g2);
                Ok(BasisEval {
                    f1,
                    df1: g1 * f1 / r,
                    f2,
                    df2: g2 * f2 / r,
                })
            }
            ModeBasis::PowerLog { g, rho1, rho2 } => {
                let f1 = (r / rho1).powf(g);
                let b = (r / rho2).powf(g);
                let l = (r / rho2).ln();
                Ok(BasisEval {
                    f1,
                    df1: g * f1 / r,
                    f2: b * l,
                    df2: b * (g * l + 1.0) / r,
                })
            }
            ModeBasis::Bessel { n, kk, lj, ly } => {
                let h = hatted_jy(n, kk * r)?;
                Ok(BasisEval {
                    f1: h.j.sign * (h.j.ln_abs - lj).exp(),
                    df1: kk * h.jp.sign * (h.jp.ln_abs - lj).exp(),
                    f2: h.y.sign * (h.y.ln_abs - ly).exp(),
                    df2: kk * h.yp.sign * (h.yp.ln_abs - ly).exp(),
                })
            }
            ModeBasis::BesselReflected {
                n,
                k,
                r_c,
                alpha,
                lj,
                ly,
            } => {
                let rho = reflected_radius(r_c, alpha, r);
                let drho = -(alpha - 1.0) * rho / r;
                let h = hatted_jy(n, k * rho)?;
                Ok(BasisEval {
                    f1: h.j.sign * (h.j.ln_abs - lj).exp(),
                    df1: k * drho * h.jp.sign * (h.jp.ln_abs - lj).exp(),
                    f2: h.y.sign * (h.y.ln_abs - ly).exp(),
                    df2: k * drho * h.yp.sign * (h.yp.ln_abs - ly).exp(),
                })
            }
        }
    }

    /// ln of the divisor applied to each branch relative to the unnormalized
    /// convention (plain powers `r^γ`, or hatted Bessel functions).
    fn ln_normalizers(&self) -> (f64, f64) {
        match *self {
            ModeBasis::Power { g1, g2, rho1, rho2 } => (g1 * rho1.ln(), g2 * rho2.ln()),
            ModeBasis::PowerLog { g, rho1, .. } => (g * rho1.ln(), f64::NAN),
            ModeBasis::Bessel { lj, ly, .. } => (lj, ly),
            ModeBasis::BesselReflected { lj, ly, .. } => (lj, ly),
        }
    }
}

fn reflected_radius(r_c: f64, alpha: f64, r: f64) -> f64 {
    r_c * (r_c / r).powf(alpha - 1.0)
}

/// Normalizers for the hatted pair over argument range [t_lo, t_hi]: each
/// branch is divided by (roughly) its largest magnitude there, with the
/// oscillatory envelope as a floor so a zero at an endpoint cannot inflate
/// the basis.
fn bessel_normalizers(n: u32, t_lo: f64, t_hi: f64) -> Result<(f64, f64), SpecialFnError> {
    let a = hatted_jy(n, t_lo)?;
    let b = hatted_jy(n, t_hi)?;
    let env_j = hatted_envelope_j(n) - 0.5 * t_hi.max(1.0).ln();
    let env_y = hatted_envelope_y(n) - 0.5 * t_hi.max(1.0).ln();
    Ok((
        a.j.ln_abs.max(b.j.ln_abs).max(env_j),
        a.y.ln_abs.max(b.y.ln_abs).max(env_y),
    ))
}

/// The conormal flux weight `a_r(r)` of a layer.
fn radial_coef(layer: &MediumLayer, r: f64) -> f64 {
    layer.a_r.at(r)
}

/// A solver-ready layering: the medium layers with the source circle
/// inserted as an interface.
#[derive(Debug, Clone)]
pub struct Layout {
    pub d: usize,
    pub k: f64,
    pub outer_radius: f64,
    pub layers: Vec<MediumLayer>,
    /// Index of the interface (between `layers[i]` and `layers[i+1]`)
    /// carrying the source flux jump.
    pub source_interface: usize,
    pub source_radius: f64,
}

pub fn build_layout(medium: &LensMedium, source: &RingSource) -> Result<Layout, SolverError> {
    let r_s = source.radius;
    if !(r_s > 0.0 && r_s < medium.outer_radius) {
        return Err(SolverError::SourceOutsideDomain {
            r_s,
            big_r: medium.outer_radius,
        });
    }
    let mut layers: Vec<MediumLayer> = Vec::with_capacity(medium.layers.len() + 1);
    let mut source_interface = None;
    for l in &medium.layers {
        if r_s > l.r_in && r_s < l.r_out {
            let mut inner = l.clone();
            inner.r_out = r_s;
            let mut outer = l.clone();
            outer.r_in = r_s;
            source_interface = Some(layers.len());
            layers.push(inner);
            layers.push(outer);
        } else {
            if r_s == l.r_out {
                source_interface = Some(layers.len());
            }
            layers.push(l.clone());
        }
    }
    let source_interface = source_interface.ok_or(SolverError::SourceOutsideDomain {
        r_s,
        big_r: medium.outer_radius,
    })?;
    Ok(Layout {
        d: medium.d,
        k: medium.k,
        outer_radius: medium.outer_radius,
        layers,
        source_interface,
        source_radius: r_s,
    })
}

/// Assembled per-mode linear system (banded structure, stored dense:
/// 2L−1 unknowns for L layers).
pub struct ModeSystem {
    pub n: i64,
    pub dim: usize,
    pub matrix: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
}

/// Column index of basis function `j` (0 or 1) of layer `i`: the innermost
/// layer contributes only its regular branch.
fn col(i: usize, j: usize) -> usize {
    if i == 0 {
        debug_assert_eq!(j, 0);
        0
    } else {
        2 * i - 1 + j
    }
}

pub fn assemble_mode_system(
    layout: &Layout,
    source: &RingSource,
    n: i64,
) -> Result<ModeSystem, SolverError> {
    let nl = layout.layers.len();
    let dim = 2 * nl - 1;
    let mut matrix = vec![Complex64::ZERO; dim * dim];
    let mut rhs = vec![Complex64::ZERO; dim];
    let n_abs = n.unsigned_abs() as u32;
    let bases: Vec<ModeBasis> = layout
        .layers
        .iter()
        .map(|l| ModeBasis::build(l, n_abs, layout.k, layout.d))
        .collect::<Result<_, _>>()?;

    let mut row = 0;
    for i in 0..nl - 1 {
        let r_if = layout.layers[i].r_out;
        let ei = bases[i].eval(r_if)?;
        let eo = bases[i + 1].eval(r_if)?;
        let (si, so) = (layout.layers[i].s, layout.layers[i + 1].s);
        let (ai, ao) = (
            radial_coef(&layout.layers[i], r_if),
            radial_coef(&layout.layers[i + 1], r_if),
        );
        // continuity of u
        matrix[row * dim + col(i, 0)] = Complex64::new(ei.f1, 0.0);
        if i > 0 {
            matrix[row * dim + col(i, 1)] = Complex64::new(ei.f2, 0.0);
        }
        matrix[row * dim + col(i + 1, 0)] = Complex64::new(-eo.f1, 0.0);
        matrix[row * dim + col(i + 1, 1)] = Complex64::new(-eo.f2, 0.0);
        row += 1;
        // conormal flux: s_i a_i u_i' − s_o a_o u_o' = −g at the source ring
        matrix[row * dim + col(i, 0)] = si * ai * ei.df1;
        if i > 0 {
            matrix[row * dim + col(i, 1)] = si * ai * ei.df2;
        }
        matrix[row * dim + col(i + 1, 0)] = -(so * ao * eo.df1);
        matrix[row * dim + col(i + 1, 1)] = -(so * ao * eo.df2);
        if i == layout.source_interface {
            rhs[row] = -source.mode_amplitude(n);
        }
        row += 1;
    }
    // Dirichlet wall at R
    let e = bases[nl - 1].eval(layout.outer_radius)?;
    matrix[row * dim + col(nl - 1, 0)] = Complex64::new(e.f1, 0.0);
    matrix[row * dim + col(nl - 1, 1)] = Complex64::new(e.f2, 0.0);
    Ok(ModeSystem {
        n,
        dim,
        matrix,
        rhs,
    })
}

/// Per-mode solution: normalized-basis coefficient pair per layer, plus a
/// conditioning proxy from the LU pivots.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub coeffs: Vec<[Complex64; 2]>,
    pub pivot_ratio: f64,
}

/// The discrete representation of a solved field.
#[derive(Debug, Clone)]
pub struct ModeField {
    pub d: usize,
    pub k: f64,
    pub outer_radius: f64,
    pub layers: Vec<MediumLayer>,
    pub source_radius: f64,
    pub modes: BTreeMap<i64, ModeSolution>,
}

/// Default mode truncation: coupling across the lens decays like
/// `(r2/r3)^{2n}`, so `N = max(32, ⌈ln(1/ε)/ln(r3/r2)⌉)` at ε = 1e−12.
pub fn default_truncation(r2: f64, r3: f64) -> u32 {
    let ratio = (r3 / r2).ln();
    if ratio <= 0.0 {
        return 32;
    }
    32u32.max(((1e12f64).ln() / ratio).ceil() as u32)
}

pub fn solve_mode(
    layout: &Layout,
    source: &RingSource,
    n: i64,
) -> Result<ModeSolution, SolverError> {
    let sys = assemble_mode_system(layout, source, n)?;
    let mut a = sys.matrix;
    let mut b = sys.rhs;
    let pivot_ratio = solve_dense(&mut a, &mut b, sys.dim).map_err(|e| match e {
        NumericError::SingularMatrix { pivot, .. } => SolverError::ResonantMode {
            n,
            delta: layout
                .layers
                .iter()
                .map(|l| l.s.im)
                .fold(0.0f64, |m, v| m.max(v.abs())),
            pivot,
        },
        other => SolverError::Numeric(other),
    })?;
    let nl = layout.layers.len();
    let mut coeffs = vec![[Complex64::ZERO; 2]; nl];
    coeffs[0][0] = b[0];
    for i in 1..nl {
        coeffs[i][0] = b[2 * i - 1];
        coeffs[i][1] = b[2 * i];
    }
    Ok(ModeSolution {
        coeffs,
        pivot_ratio,
    })
}

/// Solve all source modes (each mode decouples). `n_max`, when given, caps
/// the solved modes and errors if the source carries a higher one.
pub fn solve_field(
    medium: &LensMedium,
    source: &RingSource,
    n_max: Option<u32>,
) -> Result<ModeField, SolverError> {
    let layout = build_layout(medium, source)?;
    let mut modes = BTreeMap::new();
    for n in source.modes() {
        if let Some(cap) = n_max {
            if n.unsigned_abs() as u32 > cap {
                return Err(SolverError::UnsupportedLayer(format!(
                    "source mode {n} exceeds truncation {cap}"
                )));
            }
        }
        let sol = solve_mode(&layout, source, n)?;
        modes.insert(n, sol);
    }
    Ok(ModeField {
        d: layout.d,
        k: layout.k,
        outer_radius: layout.outer_radius,
        layers: layout.layers,
        source_radius: layout.source_radius,
        modes,
    })
}

/// Fourier data of a field and its conormal flux on a circle `∂B_r`.
#[derive(Debug, Clone)]
pub struct CircleTrace {
    pub radius: f64,
    pub d: usize,
    pub entries: BTreeMap<i64, (Complex64, Complex64)>,
}

impl CircleTrace {
    /// Surface measure factor: 2πr in 2D, r² in 3D (orthonormal harmonics).
    fn measure(&self) -> f64 {
        if self.d == 2 {
            std::f64::consts::TAU * self.radius
        } else {
            self.radius * self.radius
        }
    }

    pub fn l2_norm(&self) -> f64 {
        (self
            .entries
            .values()
            .map(|(u, _)| u.norm_sqr())
            .sum::<f64>()
            * self.measure())
        .sqrt()
    }

    /// L² distance of the field values, over the union of carried modes.
    pub fn l2_distance(&self, other: &CircleTrace) -> f64 {
        let modes: BTreeSet<i64> = self
            .entries
            .keys()
            .chain(other.entries.keys())
            .copied()
            .collect();
        let zero = (Complex64::ZERO, Complex64::ZERO);
        let mut s = 0.0;
        for n in modes {
            let a = self.entries.get(&n).unwrap_or(&zero).0;
            let b = other.entries.get(&n).unwrap_or(&zero).0;
            s += (a - b).norm_sqr();
        }
        (s * self.measure()).sqrt()
    }
}

impl ModeField {
    pub fn layer_index_at(&self, r: f64) -> usize {
        for (i, l) in self.layers.iter().enumerate() {
            if r <= l.r_out {
                return i;
            }
        }
        self.layers.len() - 1
    }

    /// Evaluate u and conormal flux of one mode at radius r.
    pub fn mode_value(&self, n: i64, r: f64) -> Result<(Complex64, Complex64), SolverError> {
        let sol = self.modes.get(&n).ok_or(SolverError::MissingMode(n))?;
        let i = self.layer_index_at(r);
        let layer = &self.layers[i];
        let basis = ModeBasis::build(layer, n.unsigned_abs() as u32, self.k, self.d)?;
        let e = basis.eval(r)?;
        let [x1, x2] = sol.coeffs[i];
        let mut u = x1 * e.f1;
        let mut du = x1 * e.df1;
        if x2 != Complex64::ZERO {
            u += x2 * e.f2;
            du += x2 * e.df2;
        }
        let flux = layer.s * radial_coef(layer, r) * du;
        Ok((u, flux))
    }

    pub fn trace(&self, r: f64) -> Result<CircleTrace, SolverError> {
        if !(r > 0.0 && r <= self.outer_radius) {
            return Err(SolverError::BadRange { a: r, b: r });
        }
        let mut entries = BTreeMap::new();
        for &n in self.modes.keys() {
            entries.insert(n, self.mode_value(n, r)?);
        }
        Ok(CircleTrace {
            radius: r,
            d: self.d,
            entries,
        })
    }

    /// Coefficients of mode n in the given layer, converted to the
    /// unnormalized basis convention (plain powers `r^γ` with the stated
    /// exponents, or hatted Bessel functions).
    pub fn unnormalized_coeffs(
        &self,
        n: i64,
        layer_index: usize,
    ) -> Result<UnnormalizedCoeffs, SolverError> {
        let sol = self.modes.get(&n).ok_or(SolverError::MissingMode(n))?;
        let layer = &self.layers[layer_index];
        let basis = ModeBasis::build(layer, n.unsigned_abs() as u32, self.k, self.d)?;
        let (l1, l2) = basis.ln_normalizers();
        let [x1, x2] = sol.coeffs[layer_index];
        let (g1, g2) = match basis {
            ModeBasis::Power { g1, g2, .. } => (g1, g2),
            ModeBasis::PowerLog { g, .. } => (g, f64::NAN),
            _ => (f64::NAN, f64::NAN),
        };
        Ok(UnnormalizedCoeffs {
            c1: LogComplex::from_c64(x1).scale_ln(-l1),
            c2: LogComplex::from_c64(x2).scale_ln(-l2),
            g1,
            g2,
            l1,
            l2,
        })
    }
}

/// Coefficients w.r.t. the unnormalized layer basis (see
/// [`ModeField::unnormalized_coeffs`]).
#[derive(Debug, Clone, Copy)]
pub struct UnnormalizedCoeffs {
    pub c1: LogComplex,
    pub c2: LogComplex,
    pub g1: f64,
    pub g2: f64,
    /// ln of the normalization divisors (coefficients convert back by
    /// `x_i = c_i · exp(l_i)`).
    pub l1: f64,
    pub l2: f64,
}

/// Gradient energy and the k²Σ-weighted L² mass of a field over an annulus.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnergyReport {
    pub gradient: f64,
    pub k2_sigma_l2: f64,
}

/// ∫ over the annulus a<r<b of |∇u|² (and k²Σ|u|², reported separately),
/// summed over solved modes, by closed-form layer integrals.
pub fn energy(field: &ModeField, r_a: f64, r_b: f64) -> Result<EnergyReport, SolverError> {
    bilinear_norms(field, r_a, r_b).map(|(g, m, _)| EnergyReport {
        gradient: g,
        k2_sigma_l2: field.k * field.k * m,
    })
}

/// Squared H¹ norm over the annulus: gradient energy + plain ∫|u|².
pub fn h1_norm_sq(field: &ModeField, r_a: f64, r_b: f64) -> Result<f64, SolverError> {
    bilinear_norms(field, r_a, r_b).map(|(g, _, l2)| g + l2)
}

/// Plain squared L² norm over the annulus.
pub fn l2_norm_sq(field: &ModeField, r_a: f64, r_b: f64) -> Result<f64, SolverError> {
    bilinear_norms(field, r_a, r_b).map(|(_, _, l2)| l2)
}

/// Returns (gradient energy, Σ-weighted L², plain L²) over [r_a, r_b].
fn bilinear_norms(field: &ModeField, r_a: f64, r_b: f64) -> Result<(f64, f64, f64), SolverError> {
    if !(r_a >= 0.0 && r_b > r_a && r_b <= field.outer_radius * (1.0 + 1e-12)) {
        return Err(SolverError::BadRange { a: r_a, b: r_b });
    }
    let mut grad = 0.0;
    let mut sig_l2 = 0.0;
    let mut plain_l2 = 0.0;
    for (i, layer) in field.layers.iter().enumerate() {
        let a = r_a.max(layer.r_in);
        let b = r_b.min(layer.r_out);
        if b <= a {
            continue;
        }
        for (&n, sol) in &field.modes {
            let n_abs = n.unsigned_abs() as u32;
            let basis = ModeBasis::build(layer, n_abs, field.k, field.d)?;
            let [x1, x2] = sol.coeffs[i];
            if x1 == Complex64::ZERO && x2 == Complex64::ZERO {
                continue;
            }
            let (g, sl2, pl2) = piece_integrals(&basis, layer, x1, x2, a, b, n_abs, field.d)?;
            grad += g;
            sig_l2 += sl2;
            plain_l2 += pl2;
        }
    }
    Ok((grad, sig_l2, plain_l2))
}

/// Angular measure of one mode: 2π in 2D (Fourier `e^{inθ}`), 1 in 3D
/// (orthonormal spherical harmonics).
pub(crate) fn mode_measure(d: usize) -> f64 {
    if d == 2 {
        std::f64::consts::TAU
    } else {
        1.0
    }
}

/// ∫_a^b r^q lnʲ(r/ρ) dr for j ∈ {0, 1, 2}, by the closed antiderivatives.
fn powlog_integral(q: f64, j: u32, rho: f64, a: f64, b: f64) -> f64 {
    let l = |r: f64| (r / rho).ln();
    if (q + 1.0).abs() < 1e-12 {
        return match j {
            0 => (b / a).ln(),
            1 => (l(b).powi(2) - l(a).powi(2)) / 2.0,
            _ => (l(b).powi(3) - l(a).powi(3)) / 3.0,
        };
    }
    let e = q + 1.0;
    let anti = |r: f64| -> f64 {
        let p = r.powf(e) / e;
        match j {
            0 => p,
            1 => p * (l(r) - 1.0 / e),
            _ => p * (l(r) * l(r) - 2.0 * l(r) / e + 2.0 / (e * e)),
        }
    };
    anti(b) - anti(a)
}

/// ∫_a^b (r/ρi)^{gi} (r/ρj)^{gj} r^{q} dr, computed stably in log space.
pub(crate) fn power_pair_integral(gi: f64, rhoi: f64, gj: f64, rhoj: f64, q: f64, a: f64, b: f64) -> f64 {
    let e = gi + gj + q + 1.0;
    let ln_norm = -gi * rhoi.ln() - gj * rhoj.ln();
    if e.abs() < 1e-12 {
        (b / a).ln() * ln_norm.exp()
    } else {
        let hi = (e * b.ln() + ln_norm).exp();
        let lo = (e * a.ln() + ln_norm).exp();
        (hi - lo) / e
    }
}

#[allow(clippy::too_many_arguments)]
fn piece_integrals(
    basis: &ModeBasis,
    layer: &MediumLayer,
    x1: Complex64,
    x2: Complex64,
    a: f64,
    b: f64,
    n: u32,
    d: usize,
) -> Result<(f64, f64, f64), SolverError> {
    let w = angular_weight(n, d);
    let meas = mode_measure(d);
    match *basis {
        ModeBasis::Power { g1, g2, rho1, rho2 } => {
            let pairs = [
                (g1, rho1, g1, rho1, x1.norm_sqr()),
                (g2, rho2, g2, rho2, x2.norm_sqr()),
                (g1, rho1, g2, rho2, 2.0 * (x1 * x2.conj()).re),
            ];
            let mut grad = 0.0;
            let mut sig = 0.0;
            let mut plain = 0.0;
            for (gi, ri, gj, rj, c) in pairs {
                if c == 0.0 {
                    continue;
                }
                // (φi' φj' + w φiφj/r²) r^{d−1}
                let gcoef = gi * gj + w;
                grad += c * gcoef * power_pair_integral(gi, ri, gj, rj, d as f64 - 3.0, a, b);
                sig += c
                    * layer.sigma.c
                    * power_pair_integral(gi, ri, gj, rj, d as f64 - 1.0 + layer.sigma.p, a, b);
                plain += c * power_pair_integral(gi, ri, gj, rj, d as f64 - 1.0, a, b);
            }
            Ok((grad * meas, sig * meas, plain * meas))
        }
        ModeBasis::PowerLog { g, rho2, .. } => {
            if g.abs() > 1e-12 {
                return Err(SolverError::UnsupportedLayer(
                    "log-basis energy only implemented for the n=0 double root".into(),
                ));
            }
            // φ1 = 1, φ2 = ln(r/ρ2): |∇u|² = |x2|²/r²; masses need
            // ∫ r^q lnʲ(r/ρ2) dr for j ≤ 2.
            let df = d as f64;
            let grad = x2.norm_sqr() * powlog_integral(df - 3.0, 0, rho2, a, b);
            let mass_with = |q: f64| {
                x1.norm_sqr() * powlog_integral(q, 0, rho2, a, b)
                    + 2.0 * (x1 * x2.conj()).re * powlog_integral(q, 1, rho2, a, b)
                    + x2.norm_sqr() * powlog_integral(q, 2, rho2, a, b)
            };
            let mass = mass_with(df - 1.0);
            let sig = layer.sigma.c * mass_with(df - 1.0 + layer.sigma.p);
            Ok((grad * meas, sig * meas, mass * meas))
        }
        ModeBasis::Bessel { n, kk, lj, ly } => {
            let zw = |t: f64| -> Result<[f64; 4], SolverError> {
                let h = hatted_jy(n, t)?;
                Ok([
                    h.j.sign * (h.j.ln_abs - lj).exp(),
                    h.jp.sign * (h.jp.ln_abs - lj).exp(),
                    h.y.sign * (h.y.ln_abs - ly).exp(),
                    h.yp.sign * (h.yp.ln_abs - ly).exp(),
                ])
            };
            let lo = zw(kk * a)?;
            let hi = zw(kk * b)?;
            let nf = n as f64;
            // antiderivative of (Z'W' + n²ZW/t²) t: t(ZW'+Z'W)/2 + t²/2 (Z'W' + (1−n²/t²) ZW)
            let grad_anti = |v: &[f64; 4], t: f64, zi: usize, wi: usize| {
                let (z, zp, wv, wp) = (v[zi], v[zi + 1], v[wi], v[wi + 1]);
                t * (z * wp + zp * wv) / 2.0
                    + t * t / 2.0 * (zp * wp + (1.0 - nf * nf / (t * t)) * z * wv)
            };
            // antiderivative of ZW t: t²/2 (Z'W' + (1−n²/t²) ZW)
            let mass_anti = |v: &[f64; 4], t: f64, zi: usize, wi: usize| {
                let (z, zp, wv, wp) = (v[zi], v[zi + 1], v[wi], v[wi + 1]);
                t * t / 2.0 * (zp * wp + (1.0 - nf * nf / (t * t)) * z * wv)
            };
            let pairs = [
                (0usize, 0usize, x1.norm_sqr()),
                (2, 2, x2.norm_sqr()),
                (0, 2, 2.0 * (x1 * x2.conj()).re),
            ];
            let mut grad = 0.0;
            let mut mass_t = 0.0;
            for (zi, wi, c) in pairs {
                if c == 0.0 {
                    continue;
                }
                grad += c * (grad_anti(&hi, kk * b, zi, wi) - grad_anti(&lo, kk * a, zi, wi));
                mass_t += c * (mass_anti(&hi, kk * b, zi, wi) - mass_anti(&lo, kk * a, zi, wi));
            }
            // ∫ZW r dr = (1/kk²) ∫ZW t dt; Σ is constant on these layers.
            let plain = mass_t / (kk * kk);
            let sig = layer.sigma.c * plain;
            Ok((grad * meas, sig * meas, plain * meas))
        }
        ModeBasis::BesselReflected { .. } => {
            // the argument substitution only yields the Lommel forms at α=2;
            // integrate numerically (the integrand is smooth and cheap)
            let quad = gauss_legendre_64(a, b);
            let mut grad = 0.0;
            let mut sig = 0.0;
            let mut plain = 0.0;
            for (r, wq) in quad {
                let e = basis.eval(r)?;
                let u = x1 * e.f1 + x2 * e.f2;
                let du = x1 * e.df1 + x2 * e.df2;
                let rd = r.powi(d as i32 - 1);
                grad += wq * (du.norm_sqr() + w * u.norm_sqr() / (r * r)) * rd;
                sig += wq * layer.sigma.at(r) * u.norm_sqr() * rd;
                plain += wq * u.norm_sqr() * rd;
            }
            Ok((grad * meas, sig * meas, plain * meas))
        }
    }
}

/// 64-point Gauss–Legendre rule on [a, b], nodes by Newton iteration.
fn gauss_legendre_64(a: f64, b: f64) -> Vec<(f64, f64)> {
    let n = 64usize;
    let mut out = Vec::with_capacity(n);
    let xm = 0.5 * (b + a);
    let xl = 0.5 * (b - a);
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        let wq = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        out.push((xm - xl * z, wq));
        if n - 1 - i != i {
            out.push((xm + xl * z, wq));
        }
    }
    out
}

/// Numerical screen of the finite-frequency well-posedness hypothesis: for
/// each mode n ≤ n_max, the Dirichlet system on the annulus (r2, R) must be
/// nonsingular at wavenumber k. Fails with the offending mode.
pub fn wp1_screen(k: f64, r2: f64, big_r: f64, n_max: u32) -> Result<(), SolverError> {
    for n in 0..=n_max {
        let a = hatted_jy(n, k * r2)?;
        let b = hatted_jy(n, k * big_r)?;
        // det [[Ĵ(kr2), Ŷ(kr2)], [Ĵ(kR), Ŷ(kR)]], normalized by the larger product
        let t1 = a.j.mul(&b.y);
        let t2 = a.y.mul(&b.j);
        let det = t1.add(&t2.neg());
        let scale = t1.ln_abs.max(t2.ln_abs);
        let norm_det = if det.is_zero() {
            0.0
        } else {
            (det.ln_abs - scale).exp()
        };
        if norm_det < 1e-8 {
            return Err(SolverError::WellPosedness {
                n: n as i64,
                det: norm_det,
            });
        }
    }
    Ok(())
}
