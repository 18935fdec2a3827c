//! Simulation library for magnifying superlenses built from complementary media.
//!
//! A lens occupying the annulus `r1 < |x| < r2` with a sign-changing (lossy)
//! coefficient `s_delta * A`, `s_delta = -1 + i*delta`, together with a matched
//! inner layer on `r0 < |x| < r1`, magnifies an arbitrary object in `B_r0` by a
//! factor `m`: as the loss `delta` tends to zero, observers outside `B_r3` see
//! the field of the dilated object `(m^{2-d} a(x/m), m^{-d} sigma(x/m))` on
//! `B_{m r0}`.
//!
//! The crate provides
//! * [`transforms`]: radial reflections (Kelvin and power-law), their
//!   compositions and coefficient pushforwards,
//! * [`lens_design`]: lens radii and piecewise media, plus the effective
//!   magnified medium,
//! * [`special_functions`]: Bessel/Neumann functions and their hatted
//!   normalizations,
//! * [`radial_solver`]: exact per-mode transmission solves on radially layered
//!   media with ring sources,
//! * [`singularity`]: reflected fields, the removable singular part, the
//!   de-singularized field and mode-weighted trace norms,
//! * [`fem2d`]: a small complex-coefficient P1 finite-element solver on a
//!   structured disk mesh for non-radial objects.

pub mod fem2d;
pub mod lens_design;
pub mod numeric;
pub mod radial_solver;
pub mod singularity;
pub mod special_functions;
pub mod transforms;

pub use num_complex::Complex64;
