//! Truncated odd-class classical pseudo-differential symbols on the circle.
//!
//! A [`Symbol`] is `Σ_{lo ≤ n ≤ hi} a_n(x) ξⁿ`, one [`LoopFn`] per integer
//! order, where `ξ` is the symbol of `d/dx`. Odd class is automatic in this
//! representation: an odd-class symbol is determined by one function per
//! order, so there are no separate `ξ > 0` / `ξ < 0` rays to keep in sync.
//!
//! Everything is computed down to the *working floor* `lo = F - g` and
//! claimed exact only on orders `≥ F`. Composition follows the Leibniz rule
//!
//! ```text
//! (A∘B)(x, ξ) = Σ_{k≥0} ħ^k/k! · ∂_ξ^k A · ∂_x^k B
//! ```
//!
//! with `ħ = 1` unless the parameters say otherwise. Terms whose ξ-order
//! falls below the working floor are dropped.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{grid_size, GridFn};
use crate::loopfn::LoopFn;
use crate::params::TruncParams;

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// The part of [`TruncParams`] a single symbol depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolSpace {
    pub dim: usize,
    pub modes: usize,
    /// Reported floor `F`.
    pub floor: i32,
    /// Working floor `F - g`.
    pub lo: i32,
    pub ceiling: i32,
    pub hbar: f64,
}

impl From<&TruncParams> for SymbolSpace {
    fn from(p: &TruncParams) -> Self {
        SymbolSpace {
            dim: p.dim,
            modes: p.modes,
            floor: p.floor,
            lo: p.working_floor(),
            ceiling: p.ceiling,
            hbar: p.hbar,
        }
    }
}

impl From<TruncParams> for SymbolSpace {
    fn from(p: TruncParams) -> Self {
        SymbolSpace::from(&p)
    }
}

#[derive(Clone, PartialEq)]
pub struct Symbol {
    space: SymbolSpace,
    // coefficient of ξⁿ lives at index n - lo; orders above `hi` are zero
    hi: i32,
    coeffs: Vec<LoopFn>,
}

impl Symbol {
    pub fn zero(space: impl Into<SymbolSpace>) -> Self {
        let space = space.into();
        Symbol {
            space,
            hi: space.lo - 1,
            coeffs: Vec::new(),
        }
    }

    /// Multiplication by the identity matrix.
    pub fn identity(space: impl Into<SymbolSpace>) -> Self {
        let space = space.into();
        Self::xi_power(space, 0)
    }

    /// `ξⁿ · Id`.
    pub fn xi_power(space: impl Into<SymbolSpace>, n: i32) -> Self {
        let space = space.into();
        let mut s = Self::zero(space);
        if n >= space.lo && n <= space.ceiling {
            s.set_coeff(n, LoopFn::identity(space.dim, space.modes))
                .expect("order in range");
        }
        s
    }

    /// The single term `f(x) ξⁿ`.
    pub fn monomial(space: impl Into<SymbolSpace>, n: i32, f: LoopFn) -> Result<Self> {
        let mut s = Self::zero(space);
        s.set_coeff(n, f)?;
        Ok(s)
    }

    pub fn from_terms(space: impl Into<SymbolSpace>, terms: &[(i32, LoopFn)]) -> Result<Self> {
        let mut s = Self::zero(space);
        for (n, f) in terms {
            let cur = s.coeff_or_zero(*n);
            s.set_coeff(*n, cur.checked_add(f)?)?;
        }
        Ok(s)
    }

    pub fn space(&self) -> SymbolSpace {
        self.space
    }

    /// Highest stored order (may carry a zero coefficient only transiently).
    pub fn ceiling(&self) -> i32 {
        self.hi
    }

    /// Highest order with a nonzero coefficient; `None` for the zero symbol.
    pub fn order(&self) -> Option<i32> {
        (self.space.lo..=self.hi)
            .rev()
            .find(|&n| !self.coeffs[(n - self.space.lo) as usize].is_zero())
    }

    /// Lowest order with a nonzero coefficient.
    pub fn lowest_order(&self) -> Option<i32> {
        (self.space.lo..=self.hi).find(|&n| !self.coeffs[(n - self.space.lo) as usize].is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.order().is_none()
    }

    pub fn coeff(&self, n: i32) -> Option<&LoopFn> {
        if n < self.space.lo || n > self.hi {
            None
        } else {
            Some(&self.coeffs[(n - self.space.lo) as usize])
        }
    }

    pub fn coeff_or_zero(&self, n: i32) -> LoopFn {
        self.coeff(n)
            .cloned()
            .unwrap_or_else(|| LoopFn::zero(self.space.dim, self.space.modes))
    }

    /// Iterates `(order, coefficient)` over stored nonzero coefficients,
    /// lowest order first.
    pub fn terms(&self) -> impl Iterator<Item = (i32, &LoopFn)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, f)| (self.space.lo + i as i32, f))
            .filter(|(_, f)| !f.is_zero())
    }

    pub fn set_coeff(&mut self, n: i32, f: LoopFn) -> Result<()> {
        if f.dim() != self.space.dim || f.modes() != self.space.modes {
            return Err(Error::ShapeMismatch(format!(
                "coefficient is (d={}, M={}), symbol is (d={}, M={})",
                f.dim(),
                f.modes(),
                self.space.dim,
                self.space.modes
            )));
        }
        if n < self.space.lo || n > self.space.ceiling {
            return Err(Error::Order(format!(
                "order {n} outside [{}, {}]",
                self.space.lo, self.space.ceiling
            )));
        }
        while self.hi < n {
            self.coeffs
                .push(LoopFn::zero(self.space.dim, self.space.modes));
            self.hi += 1;
        }
        self.coeffs[(n - self.space.lo) as usize] = f;
        self.trim();
        Ok(())
    }

    fn trim(&mut self) {
        while self.hi >= self.space.lo && self.coeffs.last().is_some_and(|f| f.is_zero()) {
            self.coeffs.pop();
            self.hi -= 1;
        }
    }

    fn check(&self, other: &Symbol) -> Result<()> {
        if self.space != other.space {
            return Err(Error::ParamMismatch(format!(
                "{:?} vs {:?}",
                self.space, other.space
            )));
        }
        Ok(())
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(i32, &LoopFn) -> LoopFn) -> Symbol {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            *c = f(self.space.lo + i as i32, c);
        }
        out.trim();
        out
    }

    pub fn scale(&self, c: Complex64) -> Symbol {
        self.map_coeffs(|_, f| f.scale(c))
    }

    pub fn scale_real(&self, c: f64) -> Symbol {
        self.scale(Complex64::new(c, 0.0))
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &Symbol, c: Complex64) -> Result<()> {
        self.check(other)?;
        for (n, f) in other.terms() {
            if n > self.hi {
                self.set_coeff(n, f.scale(c))?;
            } else {
                self.coeffs[(n - self.space.lo) as usize].add_scaled(f, c);
            }
        }
        self.trim();
        Ok(())
    }

    pub fn checked_add(&self, other: &Symbol) -> Result<Symbol> {
        let mut out = self.clone();
        out.add_scaled(other, ONE)?;
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Symbol) -> Result<Symbol> {
        let mut out = self.clone();
        out.add_scaled(other, -ONE)?;
        Ok(out)
    }

    /// Zeroes every order below `order`.
    pub fn truncated_below(&self, order: i32) -> Symbol {
        self.map_coeffs(|n, f| {
            if n < order {
                LoopFn::zero(f.dim(), f.modes())
            } else {
                f.clone()
            }
        })
    }

    /// ℓ² norm over orders `≥ floor` of the coefficient norms.
    pub fn norm_from(&self, floor: i32) -> f64 {
        self.terms()
            .filter(|(n, _)| *n >= floor)
            .map(|(_, f)| f.norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Norm over the reported range, orders `≥ F`.
    pub fn norm(&self) -> f64 {
        self.norm_from(self.space.floor)
    }

    /// Largest `Σ_m ‖c_m‖` over the stored coefficients.
    pub fn sup_bound(&self) -> f64 {
        self.terms().map(|(_, f)| f.sup_bound()).fold(0.0, f64::max)
    }

    /// Composition by the truncated Leibniz rule.
    ///
    /// Products of coefficients are accumulated on a collocation grid per
    /// output order and transformed back once, which is equivalent to
    /// summing truncated convolutions.
    pub fn compose(&self, other: &Symbol) -> Result<Symbol> {
        self.check(other)?;
        let sp = self.space;
        let lo = sp.lo;
        let (Some(na), Some(nb)) = (self.order(), other.order()) else {
            return Ok(Symbol::zero(sp));
        };
        let hi = (na + nb).min(sp.ceiling);
        if hi < lo {
            return Ok(Symbol::zero(sp));
        }
        let n = grid_size(sp.modes);
        let a_grids: Vec<(i32, usize, GridFn)> = self
            .terms()
            .map(|(i, f)| (i, f.max_mode().unwrap_or(0), GridFn::from_loopfn(f, n)))
            .collect();
        let mut acc: Vec<Option<(usize, GridFn)>> = vec![None; (hi - lo + 1) as usize];

        for (j, bj) in other.terms() {
            let support_b = bj.max_mode().unwrap_or(0);
            // ∂_x^k b_j sampled on the grid, built on demand
            let mut derivs: Vec<GridFn> = Vec::new();
            for (i, support_a, ga) in &a_grids {
                let (i, base) = (*i, *i + j);
                if base < lo {
                    continue;
                }
                let kmax = if i >= 0 { (base - lo).min(i) } else { base - lo };
                let mut coef = 1.0f64;
                for k in 0..=kmax {
                    let o = base - k;
                    if coef != 0.0 && o <= hi {
                        while derivs.len() <= k as usize {
                            let kk = derivs.len() as u32;
                            derivs.push(GridFn::from_loopfn_weighted(bj, n, |m| {
                                (I * m as f64).powu(kk)
                            }));
                        }
                        let slot = acc[(o - lo) as usize]
                            .get_or_insert_with(|| (0, GridFn::zeros(sp.dim, n)));
                        slot.0 = slot.0.max(support_a + support_b);
                        slot.1
                            .add_product(Complex64::new(coef, 0.0), ga, &derivs[k as usize]);
                    }
                    coef *= sp.hbar * (i - k) as f64 / (k + 1) as f64;
                }
            }
        }

        let mut out = Symbol::zero(sp);
        for (idx, g) in acc.into_iter().enumerate().rev() {
            if let Some((support, g)) = g {
                let f = g.to_loopfn_support(sp.modes, support);
                if !f.is_zero() {
                    out.set_coeff(lo + idx as i32, f)?;
                }
            }
        }
        Ok(out)
    }

    /// Same product as [`Symbol::compose`], computed term by term with
    /// direct convolutions. Slow; kept as an independent cross-check.
    pub fn compose_reference(&self, other: &Symbol) -> Result<Symbol> {
        self.check(other)?;
        let sp = self.space;
        let mut out = Symbol::zero(sp);
        for (i, a) in self.terms() {
            for (j, b) in other.terms() {
                let mut coef = 1.0f64;
                let mut k = 0;
                while i + j - k >= sp.lo {
                    let o = i + j - k;
                    if coef != 0.0 && o <= sp.ceiling {
                        let term = a.checked_mul(&b.dx_n(k as u32))?.scale_real(coef);
                        let cur = out.coeff_or_zero(o);
                        out.set_coeff(o, &cur + &term)?;
                    }
                    coef *= sp.hbar * (i - k) as f64 / (k + 1) as f64;
                    k += 1;
                }
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &Symbol) -> Result<Symbol> {
        self.compose(other)?.checked_sub(&other.compose(self)?)
    }

    /// Differential part: orders `≥ 0`.
    pub fn d_part(&self) -> Symbol {
        self.map_coeffs(|n, f| {
            if n >= 0 {
                f.clone()
            } else {
                LoopFn::zero(f.dim(), f.modes())
            }
        })
    }

    /// Smoothing-direction part: orders `≤ -1`.
    pub fn s_part(&self) -> Symbol {
        self.map_coeffs(|n, f| {
            if n <= -1 {
                f.clone()
            } else {
                LoopFn::zero(f.dim(), f.modes())
            }
        })
    }

    /// `(π_D A, π_S A)`; the two parts sum back to `A` exactly.
    pub fn split_ds(&self) -> (Symbol, Symbol) {
        (self.d_part(), self.s_part())
    }

    pub fn power(&self, n: u32) -> Result<Symbol> {
        if n == 0 {
            return Err(Error::InvalidArgument("power needs n >= 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.compose(self)?;
        }
        Ok(acc)
    }

    /// Inverse of a symbol of order `≤ 0` with pointwise invertible `a_0`.
    ///
    /// `A = a₀∘(1 + Q)` with `Q = a₀⁻¹∘(A - a₀)` of order `≤ -1`, so
    /// `A⁻¹ = Σ_k (-Q)^k ∘ a₀⁻¹`; the sum is finite because `Q^k` falls
    /// below the working floor. A non-constant `a₀` is inverted on the
    /// collocation grid, which is exact only up to mode truncation.
    pub fn invert(&self) -> Result<Symbol> {
        let sp = self.space;
        match self.order() {
            None => return Err(Error::NotInvertible("zero symbol".into())),
            Some(n) if n > 0 => {
                return Err(Error::NotInvertible(format!(
                    "symbol has positive order {n}"
                )))
            }
            _ => {}
        }
        let a0 = self.coeff_or_zero(0);
        let a0_inv = invert_function(&a0)?;
        let a0_inv_sym = Symbol::monomial(sp, 0, a0_inv)?;
        let rest = self.s_part();
        let q = a0_inv_sym.compose(&rest)?;
        let minus_q = q.scale_real(-1.0);

        let mut total = a0_inv_sym.clone();
        let mut term = a0_inv_sym;
        loop {
            term = minus_q.compose(&term)?;
            if term.is_zero() {
                break;
            }
            total.add_scaled(&term, ONE)?;
        }
        Ok(total)
    }

    /// `S∘A∘S⁻¹`.
    pub fn conj(&self, a: &Symbol) -> Result<Symbol> {
        let s_inv = self.invert()?;
        self.compose(a)?.compose(&s_inv)
    }

    /// Matrix of the operator on the Fourier modes `m ∈ [-Mr, Mr] \ {0}`,
    /// `d×d` blocks, mode order `-Mr, …, -1, 1, …, Mr`. The basis vector
    /// `e^{imx}` is sent to `Σ_n a_n(x) (iħm)ⁿ e^{imx}`, truncated to the
    /// retained modes. The zero mode is left out so negative powers make
    /// sense.
    pub fn realize_matrix(&self, mr: usize) -> Result<DMatrix<Complex64>> {
        let sp = self.space;
        if mr == 0 || mr > sp.modes {
            return Err(Error::InvalidArgument(format!(
                "realization cutoff {mr} must lie in [1, {}]",
                sp.modes
            )));
        }
        let d = sp.dim;
        let mr_i = mr as i32;
        let index = |m: i32| -> usize {
            let k = if m < 0 { m + mr_i } else { m + mr_i - 1 };
            k as usize
        };
        let size = 2 * mr * d;
        let mut out = DMatrix::zeros(size, size);
        let terms: Vec<(i32, &LoopFn, Option<usize>)> =
            self.terms().map(|(n, f)| (n, f, f.max_mode())).collect();
        for m in (-mr_i..=mr_i).filter(|&m| m != 0) {
            let col = index(m) * d;
            for &(n, f, budget) in &terms {
                let Some(budget) = budget else { continue };
                let factor = (I * (sp.hbar * m as f64)).powi(n);
                let budget = budget as i32;
                for p in -budget..=budget {
                    let target = m + p;
                    if target == 0 || target.abs() > mr_i {
                        continue;
                    }
                    let row = index(target) * d;
                    let block = f.coeff(p);
                    for r in 0..d {
                        for s in 0..d {
                            out[(row + r, col + s)] += block[r * d + s] * factor;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `tr(R(A) R(B)ᴴ)` for the realizations at cutoff `Mr`.
    pub fn hs_inner(&self, other: &Symbol, mr: usize) -> Result<Complex64> {
        self.check(other)?;
        for s in [self, other] {
            if s.order().is_some_and(|n| n > -1) {
                log::warn!("hs_inner on a symbol of order >= 0: not Hilbert-Schmidt, value depends on Mr");
            }
        }
        let ra = self.realize_matrix(mr)?;
        let rb = other.realize_matrix(mr)?;
        Ok(ra.iter().zip(rb.iter()).map(|(a, b)| a * b.conj()).sum())
    }
}

/// Pointwise inverse of a matrix-valued function.
pub(crate) fn invert_function(f: &LoopFn) -> Result<LoopFn> {
    let d = f.dim();
    match f.max_mode() {
        None => Err(Error::NotInvertible("a_0 vanishes identically".into())),
        Some(0) => {
            let m = DMatrix::from_row_slice(d, d, f.coeff(0));
            let inv = m
                .try_inverse()
                .ok_or_else(|| Error::NotInvertible("constant a_0 is singular".into()))?;
            let mut out = LoopFn::zero(d, f.modes());
            for r in 0..d {
                for s in 0..d {
                    out.coeff_mut(0)[r * d + s] = inv[(r, s)];
                }
            }
            Ok(out)
        }
        Some(_) => {
            let n = grid_size(f.modes());
            GridFn::from_loopfn(f, n)
                .pointwise_inverse()
                .map(|g| g.to_loopfn(f.modes()))
                .ok_or_else(|| Error::NotInvertible("a_0 is singular at a collocation point".into()))
        }
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (n, c) in self.terms() {
            m.entry(&format_args!("ξ^{n}"), c);
        }
        m.finish()
    }
}

impl Add for &Symbol {
    type Output = Symbol;
    fn add(self, rhs: &Symbol) -> Symbol {
        self.checked_add(rhs).expect("symbol parameter mismatch")
    }
}

impl Sub for &Symbol {
    type Output = Symbol;
    fn sub(self, rhs: &Symbol) -> Symbol {
        self.checked_sub(rhs).expect("symbol parameter mismatch")
    }
}

impl Mul for &Symbol {
    type Output = Symbol;
    fn mul(self, rhs: &Symbol) -> Symbol {
        self.compose(rhs).expect("symbol parameter mismatch")
    }
}

impl Neg for &Symbol {
    type Output = Symbol;
    fn neg(self) -> Symbol {
        self.scale_real(-1.0)
    }
}
