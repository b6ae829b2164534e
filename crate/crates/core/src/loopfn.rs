//! Smooth `d×d`-matrix valued functions on the circle, stored as truncated
//! Fourier series `f(x) = Σ_{|m| ≤ M} c_m e^{imx}`.
//!
//! This is the coefficient ring for every symbol in the crate. Products are
//! computed by convolution and then silently truncated back to `|m| ≤ M`;
//! callers that need exact identities must budget their modes.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, PartialEq)]
pub struct LoopFn {
    dim: usize,
    modes: usize,
    // mode-major: block (m + M) holds the d×d matrix c_m in row-major order
    coeffs: Vec<Complex64>,
}

impl LoopFn {
    pub fn zero(dim: usize, modes: usize) -> Self {
        assert!(dim >= 1 && modes >= 1, "LoopFn needs d >= 1 and M >= 1");
        LoopFn {
            dim,
            modes,
            coeffs: vec![Complex64::new(0.0, 0.0); (2 * modes + 1) * dim * dim],
        }
    }

    /// The constant function `c·Id`.
    pub fn constant(dim: usize, modes: usize, c: Complex64) -> Self {
        let mut f = Self::zero(dim, modes);
        for r in 0..dim {
            f.coeff_mut(0)[r * dim + r] = c;
        }
        f
    }

    pub fn identity(dim: usize, modes: usize) -> Self {
        Self::constant(dim, modes, Complex64::new(1.0, 0.0))
    }

    /// Scalar function from a sparse list of `(mode, coefficient)` pairs.
    /// Repeated modes accumulate.
    pub fn from_modes(modes: usize, entries: &[(i32, Complex64)]) -> Result<Self> {
        let mut f = Self::zero(1, modes);
        for &(m, c) in entries {
            if m.unsigned_abs() as usize > modes {
                return Err(Error::ShapeMismatch(format!(
                    "mode {m} exceeds cutoff {modes}"
                )));
            }
            f.coeff_mut(m)[0] += c;
        }
        Ok(f)
    }

    /// Matrix-valued function from `(mode, matrix)` pairs.
    pub fn from_matrix_modes(
        dim: usize,
        modes: usize,
        entries: &[(i32, DMatrix<Complex64>)],
    ) -> Result<Self> {
        let mut f = Self::zero(dim, modes);
        for (m, mat) in entries {
            if m.unsigned_abs() as usize > modes {
                return Err(Error::ShapeMismatch(format!(
                    "mode {m} exceeds cutoff {modes}"
                )));
            }
            if mat.nrows() != dim || mat.ncols() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "expected {dim}x{dim} block, got {}x{}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            let block = f.coeff_mut(*m);
            for r in 0..dim {
                for c in 0..dim {
                    block[r * dim + c] += mat[(r, c)];
                }
            }
        }
        Ok(f)
    }

    /// `amp · cos(kx)` (scalar).
    pub fn cos(modes: usize, k: i32, amp: f64) -> Self {
        let h = Complex64::new(amp / 2.0, 0.0);
        Self::from_modes(modes, &[(k, h), (-k, h)]).expect("mode within cutoff")
    }

    /// `amp · sin(kx)` (scalar).
    pub fn sin(modes: usize, k: i32, amp: f64) -> Self {
        let h = Complex64::new(0.0, -amp / 2.0);
        Self::from_modes(modes, &[(k, h), (-k, -h)]).expect("mode within cutoff")
    }

    /// `amp · e^{ikx}` (scalar).
    pub fn exp_mode(modes: usize, k: i32, amp: f64) -> Self {
        Self::from_modes(modes, &[(k, Complex64::new(amp, 0.0))]).expect("mode within cutoff")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    fn block(&self) -> usize {
        self.dim * self.dim
    }

    /// The `d×d` block `c_m`, row-major. Panics if `|m| > M`.
    pub fn coeff(&self, m: i32) -> &[Complex64] {
        let b = self.block();
        let idx = (m + self.modes as i32) as usize;
        &self.coeffs[idx * b..(idx + 1) * b]
    }

    pub fn coeff_mut(&mut self, m: i32) -> &mut [Complex64] {
        let b = self.block();
        let idx = (m + self.modes as i32) as usize;
        &mut self.coeffs[idx * b..(idx + 1) * b]
    }

    /// Scalar coefficient `c_m` (entry (0,0) of the block).
    pub fn scalar_coeff(&self, m: i32) -> Complex64 {
        if m.unsigned_abs() as usize > self.modes {
            return Complex64::new(0.0, 0.0);
        }
        self.coeff(m)[0]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Largest `|m|` carrying a nonzero coefficient, or `None` for zero.
    pub fn max_mode(&self) -> Option<usize> {
        (0..=self.modes).rev().find(|&k| {
            let k = k as i32;
            self.coeff(k).iter().chain(self.coeff(-k)).any(|c| c.norm_sqr() > 0.0)
        })
    }

    fn check_compatible(&self, other: &LoopFn) -> Result<()> {
        if self.dim != other.dim || self.modes != other.modes {
            return Err(Error::ShapeMismatch(format!(
                "(d={}, M={}) vs (d={}, M={})",
                self.dim, self.modes, other.dim, other.modes
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &LoopFn) -> Result<LoopFn> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_scaled(other, Complex64::new(1.0, 0.0));
        Ok(out)
    }

    pub fn checked_sub(&self, other: &LoopFn) -> Result<LoopFn> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_scaled(other, Complex64::new(-1.0, 0.0));
        Ok(out)
    }

    /// `self += c · other`. Panics on shape mismatch.
    pub fn add_scaled(&mut self, other: &LoopFn, c: Complex64) {
        assert_eq!(
            (self.dim, self.modes),
            (other.dim, other.modes),
            "LoopFn shape mismatch"
        );
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
    }

    pub fn scale(&self, c: Complex64) -> LoopFn {
        LoopFn {
            dim: self.dim,
            modes: self.modes,
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> LoopFn {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Pointwise (matrix) product by direct Fourier convolution, truncated
    /// to `|m| ≤ M`.
    pub fn checked_mul(&self, other: &LoopFn) -> Result<LoopFn> {
        self.check_compatible(other)?;
        let d = self.dim;
        let mm = self.modes as i32;
        let mut out = LoopFn::zero(d, self.modes);
        let (Some(fa), Some(fb)) = (self.max_mode(), other.max_mode()) else {
            return Ok(out);
        };
        let (fa, fb) = (fa as i32, fb as i32);
        for p in -fa..=fa {
            let a = self.coeff(p);
            if a.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            for q in -fb..=fb {
                let m = p + q;
                if m.abs() > mm {
                    continue;
                }
                let b = other.coeff(q);
                let c = out.coeff_mut(m);
                for r in 0..d {
                    for l in 0..d {
                        let arl = a[r * d + l];
                        if arl.norm_sqr() == 0.0 {
                            continue;
                        }
                        for s in 0..d {
                            c[r * d + s] += arl * b[l * d + s];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Derivative: mode `m` scaled by `im`.
    pub fn dx(&self) -> LoopFn {
        self.dx_n(1)
    }

    /// `k`-th derivative.
    pub fn dx_n(&self, k: u32) -> LoopFn {
        let mut out = self.clone();
        let mm = self.modes as i32;
        for m in -mm..=mm {
            let f = (I * m as f64).powu(k);
            for z in out.coeff_mut(m) {
                *z *= f;
            }
        }
        out
    }

    /// Translation `x ↦ f(x + τ)`.
    pub fn translate(&self, tau: f64) -> LoopFn {
        let mut out = self.clone();
        let mm = self.modes as i32;
        for m in -mm..=mm {
            let f = Complex64::from_polar(1.0, m as f64 * tau);
            for z in out.coeff_mut(m) {
                *z *= f;
            }
        }
        out
    }

    /// `Σ c_m e^{imx}` as a `d×d` matrix.
    pub fn eval_at(&self, x: f64) -> DMatrix<Complex64> {
        let d = self.dim;
        let mm = self.modes as i32;
        let mut out = DMatrix::zeros(d, d);
        for m in -mm..=mm {
            let e = Complex64::from_polar(1.0, m as f64 * x);
            let c = self.coeff(m);
            for r in 0..d {
                for s in 0..d {
                    out[(r, s)] += c[r * d + s] * e;
                }
            }
        }
        out
    }

    /// ℓ² norm of the coefficients (Frobenius per block).
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Σ_m ‖c_m‖_F`, an upper bound for the sup norm on the circle.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs
            .chunks(self.block())
            .map(|b| b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
            .sum()
    }

    /// Antiderivative of a zero-mean function, normalized to zero mean.
    pub fn antideriv_zero_mean(&self, tol: f64) -> Result<LoopFn> {
        let mean = self.coeff(0).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if mean > tol {
            return Err(Error::NonZeroMean { mean, tol });
        }
        let mut out = self.clone();
        let mm = self.modes as i32;
        for m in -mm..=mm {
            let f = if m == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                1.0 / (I * m as f64)
            };
            for z in out.coeff_mut(m) {
                *z *= f;
            }
        }
        Ok(out)
    }

    /// Checks `c_{-m} = conj(c_m)` entrywise, i.e. that the function is real.
    pub fn is_real(&self, tol: f64) -> bool {
        let mm = self.modes as i32;
        (0..=mm).all(|m| {
            self.coeff(m)
                .iter()
                .zip(self.coeff(-m))
                .all(|(a, b)| (a - b.conj()).norm() <= tol)
        })
    }
}

impl fmt::Debug for LoopFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mm = self.modes as i32;
        let mut list = f.debug_map();
        for m in -mm..=mm {
            let c = self.coeff(m);
            if c.iter().any(|z| z.norm_sqr() > 0.0) {
                list.entry(&m, &c);
            }
        }
        list.finish()
    }
}

impl Add for &LoopFn {
    type Output = LoopFn;
    fn add(self, rhs: &LoopFn) -> LoopFn {
        self.checked_add(rhs).expect("LoopFn shape mismatch")
    }
}

impl Sub for &LoopFn {
    type Output = LoopFn;
    fn sub(self, rhs: &LoopFn) -> LoopFn {
        self.checked_sub(rhs).expect("LoopFn shape mismatch")
    }
}

impl Mul for &LoopFn {
    type Output = LoopFn;
    fn mul(self, rhs: &LoopFn) -> LoopFn {
        self.checked_mul(rhs).expect("LoopFn shape mismatch")
    }
}

impl Neg for &LoopFn {
    type Output = LoopFn;
    fn neg(self) -> LoopFn {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&LoopFn> for LoopFn {
    fn add_assign(&mut self, rhs: &LoopFn) {
        self.add_scaled(rhs, Complex64::new(1.0, 0.0));
    }
}

impl SubAssign<&LoopFn> for LoopFn {
    fn sub_assign(&mut self, rhs: &LoopFn) {
        self.add_scaled(rhs, Complex64::new(-1.0, 0.0));
    }
}
