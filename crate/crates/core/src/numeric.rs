//! Small shared numeric helpers: tiny complex matrices, sign/log scaled
//! reals, log-polar complex numbers, and a dense complex LU solve.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericError {
    #[error("matrix is singular (pivot magnitude {pivot:.3e} at step {step})")]
    SingularMatrix { pivot: f64, step: usize },
    #[error("value overflows f64: ln|x| = {ln_abs:.3e}")]
    Overflow { ln_abs: f64 },
}

/// Dense complex matrix of dimension `dim` <= 3, stored row-major in a fixed
/// 3x3 block. Used for coefficient matrices and map derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMat {
    pub dim: usize,
    pub a: [[Complex64; 3]; 3],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        SmallMat {
            dim,
            a: [[Complex64::ZERO; 3]; 3],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = Complex64::ONE;
        }
        m
    }

    /// c_r * e_r(x) ⊗ e_r(x) + c_t * (I - e_r(x) ⊗ e_r(x)).
    pub fn radial_tangential(x: &[f64], c_r: Complex64, c_t: Complex64) -> Self {
        let dim = x.len();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                let er = x[i] * x[j] / (norm * norm);
                let delta = if i == j { 1.0 } else { 0.0 };
                m.a[i][j] = c_r * er + c_t * (delta - er);
            }
        }
        m
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.a[i][j] = self.a[i][j] * c;
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.a[i][j] = self.a[i][j] - other.a[i][j];
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = Complex64::ZERO;
                for k in 0..self.dim {
                    s += self.a[i][k] * other.a[k][j];
                }
                out.a[i][j] = s;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.a[i][j] = self.a[j][i];
            }
        }
        out
    }

    /// Largest entry magnitude; used for relative comparisons.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self.a[i][j].norm());
            }
        }
        m
    }

    /// max_ij |self - other| / max(1, |self|, |other|)
    pub fn rel_distance(&self, other: &Self) -> f64 {
        let scale = self.max_abs().max(other.max_abs()).max(1.0);
        self.sub(other).max_abs() / scale
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1e-300);
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if (self.a[i][j] - self.a[j][i]).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

/// A real number carried as `sign * exp(ln_abs)`. `sign == 0` encodes zero.
#[derive(Clone, Copy, Debug)]
pub struct SignLog {
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignLog {
    pub fn zero() -> Self {
        SignLog {
            sign: 0.0,
            ln_abs: f64::NEG_INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            Self::zero()
        } else {
            SignLog {
                sign: v.signum(),
                ln_abs: v.abs().ln(),
            }
        }
    }

    /// sign * exp(ln_abs + ln_shift) packed from parts.
    pub fn from_parts(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 {
            Self::zero()
        } else {
            SignLog {
                sign: sign.signum(),
                ln_abs,
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0.0
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_parts(self.sign * other.sign, self.ln_abs + other.ln_abs)
    }

    pub fn div(&self, other: &Self) -> Self {
        Self::from_parts(self.sign * other.sign, self.ln_abs - other.ln_abs)
    }

    /// self + other, computed by factoring out the larger magnitude.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.ln_abs >= other.ln_abs {
            (self, other)
        } else {
            (other, self)
        };
        let v = big.sign + small.sign * (small.ln_abs - big.ln_abs).exp();
        if v == 0.0 {
            Self::zero()
        } else {
            Self::from_parts(v.signum(), big.ln_abs + v.abs().ln())
        }
    }

    pub fn neg(&self) -> Self {
        Self::from_parts(-self.sign, self.ln_abs)
    }

    pub fn to_f64(&self) -> Result<f64, NumericError> {
        if self.is_zero() {
            return Ok(0.0);
        }
        if self.ln_abs > 709.0 {
            return Err(NumericError::Overflow {
                ln_abs: self.ln_abs,
            });
        }
        Ok(self.sign * self.ln_abs.exp())
    }
}

/// Complex number in log-polar form: `exp(ln_mag) * exp(i arg)`.
/// Coefficient sequences like `c_n r^{2n}` overflow doubles well before the
/// quantities built from them do, so intermediate algebra is carried here.
#[derive(Clone, Copy, Debug)]
pub struct LogComplex {
    pub ln_mag: f64,
    pub arg: f64,
}

impl LogComplex {
    pub fn zero() -> Self {
        LogComplex {
            ln_mag: f64::NEG_INFINITY,
            arg: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_mag == f64::NEG_INFINITY
    }

    pub fn from_c64(v: Complex64) -> Self {
        let r = v.norm();
        if r == 0.0 {
            Self::zero()
        } else {
            LogComplex {
                ln_mag: r.ln(),
                arg: v.arg(),
            }
        }
    }

    pub fn from_ln_real(ln_mag: f64, negative: bool) -> Self {
        LogComplex {
            ln_mag,
            arg: if negative { std::f64::consts::PI } else { 0.0 },
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        LogComplex {
            ln_mag: self.ln_mag + other.ln_mag,
            arg: self.arg + other.arg,
        }
    }

    pub fn div(&self, other: &Self) -> Self {
        LogComplex {
            ln_mag: self.ln_mag - other.ln_mag,
            arg: self.arg - other.arg,
        }
    }

    /// Multiply by exp(t); exact in the log representation.
    pub fn scale_ln(&self, t: f64) -> Self {
        if self.is_zero() {
            return *self;
        }
        LogComplex {
            ln_mag: self.ln_mag + t,
            arg: self.arg,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (big, small) = if self.ln_mag >= other.ln_mag {
            (self, other)
        } else {
            (other, self)
        };
        let rel = (small.ln_mag - big.ln_mag).exp();
        let v = Complex64::from_polar(1.0, big.arg) + Complex64::from_polar(rel, small.arg);
        let r = v.norm();
        if r == 0.0 {
            Self::zero()
        } else {
            LogComplex {
                ln_mag: big.ln_mag + r.ln(),
                arg: v.arg(),
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        LogComplex {
            ln_mag: self.ln_mag,
            arg: self.arg + std::f64::consts::PI,
        }
    }

    pub fn norm_ln(&self) -> f64 {
        self.ln_mag
    }

    pub fn to_c64(&self) -> Result<Complex64, NumericError> {
        if self.is_zero() {
            return Ok(Complex64::ZERO);
        }
        if self.ln_mag > 709.0 {
            return Err(NumericError::Overflow {
                ln_abs: self.ln_mag,
            });
        }
        Ok(Complex64::from_polar(self.ln_mag.exp(), self.arg))
    }
}

/// In-place dense complex LU solve with partial pivoting; `a` is row-major
/// n x n, `b` the right-hand side. Returns the pivot-ratio proxy
/// (min |pivot| / max |pivot|) for conditioning reports.
pub fn solve_dense(
    a: &mut [Complex64],
    b: &mut [Complex64],
    n: usize,
) -> Result<f64, NumericError> {
    let mut min_piv = f64::INFINITY;
    let mut max_piv = 0.0_f64;
    let scale: f64 = a
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let mut pr = col;
        let mut pm = a[col * n + col].norm();
        for r in (col + 1)..n {
            let m = a[r * n + col].norm();
            if m > pm {
                pm = m;
                pr = r;
            }
        }
        if pm <= scale * 1e-14 {
            return Err(NumericError::SingularMatrix {
                pivot: pm / scale,
                step: col,
            });
        }
        if pr != col {
            for c in 0..n {
                a.swap(col * n + c, pr * n + c);
            }
            b.swap(col, pr);
        }
        min_piv = min_piv.min(pm);
        max_piv = max_piv.max(pm);
        let inv = a[col * n + col].inv();
        for r in (col + 1)..n {
            let f = a[r * n + col] * inv;
            if f == Complex64::ZERO {
                continue;
            }
            for c in (col + 1)..n {
                let v = a[col * n + c];
                a[r * n + c] -= f * v;
            }
            a[r * n + col] = Complex64::ZERO;
            let bv = b[col];
            b[r] -= f * bv;
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in (col + 1)..n {
            s -= a[col * n + c] * b[c];
        }
        b[col] = s * a[col * n + col].inv();
    }
    Ok(min_piv / max_piv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signlog_add_cancels() {
        let a = SignLog::from_f64(3.0);
        let b = SignLog::from_f64(-3.0);
        assert!(a.add(&b).is_zero());
    }

    #[test]
    fn logcomplex_roundtrip() {
        let v = Complex64::new(-2.5, 1.75);
        let lc = LogComplex::from_c64(v);
        let back = lc.to_c64().unwrap();
        assert!((back - v).norm() < 1e-14);
    }

    #[test]
    fn logcomplex_add_matches_c64() {
        let x = Complex64::new(1.0, -2.0);
        let y = Complex64::new(-0.25, 0.5);
        let got = LogComplex::from_c64(x)
            .add(&LogComplex::from_c64(y))
            .to_c64()
            .unwrap();
        assert!((got - (x + y)).norm() < 1e-13);
    }

    #[test]
    fn dense_solve_recovers_known_solution() {
        // 3x3 system with a random-ish complex matrix and known x.
        let n = 3;
        let m = [
            Complex64::new(2.0, 1.0),
            Complex64::new(-1.0, 0.5),
            Complex64::new(0.25, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, -0.5),
            Complex64::new(-2.0, 2.0),
        ];
        let x = [
            Complex64::new(1.0, 1.0),
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.5, -3.0),
        ];
        let mut b = [Complex64::ZERO; 3];
        for i in 0..n {
            for j in 0..n {
                b[i] += m[i * n + j] * x[j];
            }
        }
        let mut a = m;
        solve_dense(&mut a, &mut b, n).unwrap();
        for i in 0..n {
            assert!((b[i] - x[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_solve_flags_singular() {
        let mut a = [Complex64::ONE, Complex64::ONE, Complex64::ONE, Complex64::ONE];
        let mut b = [Complex64::ONE, Complex64::ONE];
        assert!(solve_dense(&mut a, &mut b, 2).is_err());
    }
}
