//! Series in the times `t₁, …, t_K` with symbol coefficients, graded by the
//! valuation `val(t_n) = n` and truncated at `val ≤ V`.
//!
//! A series with base order `N₀` satisfies the growth condition when the
//! coefficient of every monomial `α` has order `≤ val(α) + N₀`. Group
//! elements (`U`, `S`, `Y`) have `N₀ = 0`, which is exactly the requirement
//! that a valuation-`v` coefficient be a symbol of order `≤ v`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::TruncParams;
use crate::symbol::{Symbol, SymbolSpace};

/// A monomial `t^α = Π t_n^{α_n}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TMono(Vec<u32>);

impl TMono {
    pub fn one(times: usize) -> Self {
        TMono(vec![0; times])
    }

    /// The monomial `t_n` (1-based).
    pub fn t(times: usize, n: usize) -> Self {
        let mut e = vec![0; times];
        e[n - 1] = 1;
        TMono(e)
    }

    pub fn from_exponents(exps: &[u32]) -> Self {
        TMono(exps.to_vec())
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn times(&self) -> usize {
        self.0.len()
    }

    pub fn val(&self) -> u32 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &a)| (i as u32 + 1) * a)
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn mul(&self, other: &TMono) -> TMono {
        TMono(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &TMono) -> Option<TMono> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(TMono)
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &a)| t.get(i).copied().unwrap_or(0.0).powi(a as i32))
            .product()
    }
}

impl Ord for TMono {
    // graded lexicographic: valuation first, then exponents
    fn cmp(&self, other: &Self) -> Ordering {
        self.val()
            .cmp(&other.val())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for TMono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for TMono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TMono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(i, &a)| {
                if a == 1 {
                    format!("t{}", i + 1)
                } else {
                    format!("t{}^{}", i + 1, a)
                }
            })
            .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("·"))
        }
    }
}

/// Every monomial in `times` variables with valuation `≤ cap`, in
/// graded-lexicographic order.
pub fn monomials(times: usize, cap: u32) -> Vec<TMono> {
    fn rec(i: usize, times: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<TMono>) {
        if i == times {
            out.push(TMono(cur.clone()));
            return;
        }
        let w = i as u32 + 1;
        for a in 0..=left / w {
            cur[i] = a;
            rec(i + 1, times, left - a * w, cur, out);
        }
        cur[i] = 0;
    }
    let mut out = Vec::new();
    rec(0, times, cap, &mut vec![0; times], &mut out);
    out.sort();
    out
}

#[derive(Clone, PartialEq)]
pub struct TSeries {
    params: TruncParams,
    base: i32,
    terms: BTreeMap<TMono, Symbol>,
}

impl TSeries {
    pub fn zero(params: TruncParams, base: i32) -> Self {
        TSeries {
            params,
            base,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(params: TruncParams) -> Self {
        Self::constant(params, Symbol::identity(params), 0)
    }

    /// `A` as a series constant in time.
    pub fn constant(params: TruncParams, a: Symbol, base: i32) -> Self {
        let mut s = Self::zero(params, base);
        s.insert(TMono::one(params.times), a);
        s
    }

    /// The single term `t^α · A`; dropped when `val(α) > V`.
    pub fn monomial(params: TruncParams, mono: TMono, a: Symbol, base: i32) -> Self {
        let mut s = Self::zero(params, base);
        s.insert(mono, a);
        s
    }

    fn insert(&mut self, mono: TMono, a: Symbol) {
        assert_eq!(mono.times(), self.params.times, "monomial has wrong number of times");
        assert_eq!(a.space(), SymbolSpace::from(&self.params), "coefficient lives elsewhere");
        if mono.val() > self.params.val_cap || a.is_zero() {
            self.terms.remove(&mono);
            return;
        }
        self.terms.insert(mono, a);
    }

    pub fn params(&self) -> &TruncParams {
        &self.params
    }

    pub fn space(&self) -> SymbolSpace {
        SymbolSpace::from(&self.params)
    }

    /// Declared base order `N₀` of the growth condition.
    pub fn base(&self) -> i32 {
        self.base
    }

    pub fn with_base(mut self, base: i32) -> Self {
        self.base = base;
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TMono, &Symbol)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, mono: &TMono) -> Option<&Symbol> {
        self.terms.get(mono)
    }

    pub fn coeff_or_zero(&self, mono: &TMono) -> Symbol {
        self.terms
            .get(mono)
            .cloned()
            .unwrap_or_else(|| Symbol::zero(self.space()))
    }

    pub fn set_coeff(&mut self, mono: TMono, a: Symbol) -> Result<()> {
        if mono.times() != self.params.times {
            return Err(Error::InvalidArgument(format!(
                "monomial {mono} has {} times, series has {}",
                mono.times(),
                self.params.times
            )));
        }
        if a.space() != self.space() {
            return Err(Error::ParamMismatch("coefficient lives in another symbol space".into()));
        }
        self.insert(mono, a);
        Ok(())
    }

    /// The valuation-0 coefficient.
    pub fn val0(&self) -> Symbol {
        self.coeff_or_zero(&TMono::one(self.params.times))
    }

    /// Lowest valuation present.
    pub fn min_val(&self) -> Option<u32> {
        self.terms.keys().map(TMono::val).min()
    }

    /// The terms of valuation exactly `v`.
    pub fn val_part(&self, v: u32) -> TSeries {
        self.filter(|m| m.val() == v)
    }

    /// Drops every term of valuation `> cap`.
    pub fn truncate_val(&self, cap: u32) -> TSeries {
        self.filter(|m| m.val() <= cap)
    }

    fn filter(&self, keep: impl Fn(&TMono) -> bool) -> TSeries {
        TSeries {
            params: self.params,
            base: self.base,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, a)| (m.clone(), a.clone()))
                .collect(),
        }
    }

    pub fn map_symbols(&self, f: impl Fn(&Symbol) -> Symbol) -> TSeries {
        let mut out = TSeries::zero(self.params, self.base);
        for (m, a) in &self.terms {
            out.insert(m.clone(), f(a));
        }
        out
    }

    fn check(&self, other: &TSeries) -> Result<()> {
        if self.params != other.params {
            return Err(Error::ParamMismatch(format!(
                "{:?} vs {:?}",
                self.params, other.params
            )));
        }
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &TSeries, c: Complex64) -> Result<()> {
        self.check(other)?;
        for (m, a) in &other.terms {
            let mut cur = self.coeff_or_zero(m);
            cur.add_scaled(a, c)?;
            self.insert(m.clone(), cur);
        }
        self.base = self.base.max(other.base);
        Ok(())
    }

    pub fn checked_add(&self, other: &TSeries) -> Result<TSeries> {
        let mut out = self.clone();
        out.add_scaled(other, Complex64::new(1.0, 0.0))?;
        Ok(out)
    }

    pub fn checked_sub(&self, other: &TSeries) -> Result<TSeries> {
        let mut out = self.clone();
        out.add_scaled(other, Complex64::new(-1.0, 0.0))?;
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> TSeries {
        self.map_symbols(|a| a.scale(c))
    }

    pub fn scale_real(&self, c: f64) -> TSeries {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Cauchy product; coefficients multiply by symbol composition and
    /// monomials above the valuation cap are dropped.
    pub fn tmul(&self, other: &TSeries) -> Result<TSeries> {
        self.check(other)?;
        let cap = self.params.val_cap;
        let space = self.space();
        let targets: Vec<TMono> = {
            let mut set = std::collections::BTreeSet::new();
            for a in self.terms.keys() {
                for b in other.terms.keys() {
                    if a.val() + b.val() <= cap {
                        set.insert(a.mul(b));
                    }
                }
            }
            set.into_iter().collect()
        };
        let products: Vec<Result<(TMono, Symbol)>> = targets
            .into_par_iter()
            .map(|gamma| {
                let mut acc = Symbol::zero(space);
                for (a, xa) in &self.terms {
                    if let Some(b) = gamma.div(a) {
                        if let Some(yb) = other.terms.get(&b) {
                            acc.add_scaled(&xa.compose(yb)?, Complex64::new(1.0, 0.0))?;
                        }
                    }
                }
                Ok((gamma, acc))
            })
            .collect();
        let mut out = TSeries::zero(self.params, self.base + other.base);
        for r in products {
            let (m, a) = r?;
            out.insert(m, a);
        }
        Ok(out)
    }

    /// `Xⁿ` for `n ≥ 1`.
    pub fn tpow(&self, n: u32) -> Result<TSeries> {
        if n == 0 {
            return Err(Error::InvalidArgument("power must be >= 1".into()));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.tmul(self)?;
        }
        Ok(acc)
    }

    /// Termwise differential part (orders `≥ 0`).
    pub fn d_part(&self) -> TSeries {
        self.map_symbols(Symbol::d_part)
    }

    /// Termwise part of order `≤ -1`.
    pub fn s_part(&self) -> TSeries {
        self.map_symbols(Symbol::s_part)
    }

    /// `[X, Y] = XY - YX`.
    pub fn commutator(&self, other: &TSeries) -> Result<TSeries> {
        self.tmul(other)?.checked_sub(&other.tmul(self)?)
    }

    /// Exponential of a series without valuation-0 part: the finite sum
    /// `Σ_{k ≤ V} X^k / k!`.
    pub fn texp(&self) -> Result<TSeries> {
        if self.min_val() == Some(0) {
            return Err(Error::Valuation(
                "exponential needs every term to have valuation >= 1".into(),
            ));
        }
        let mut acc = TSeries::one(self.params);
        let mut term = TSeries::one(self.params);
        for k in 1..=self.params.val_cap {
            term = term.tmul(self)?.scale_real(1.0 / k as f64).with_base(0);
            if term.is_empty() {
                break;
            }
            acc.add_scaled(&term, Complex64::new(1.0, 0.0))?;
        }
        Ok(acc.with_base(self.base.max(0)))
    }

    /// Inverse of a unit: `(X₀ + R)⁻¹ = Σ_k (-X₀⁻¹R)^k X₀⁻¹`.
    pub fn inverse(&self) -> Result<TSeries> {
        let x0_inv = self.val0().invert()?;
        let x0_inv = TSeries::constant(self.params, x0_inv, 0);
        let rest = self.filter(|m| m.val() > 0);
        let q = x0_inv.tmul(&rest)?.scale_real(-1.0);
        let mut acc = x0_inv.clone();
        let mut term = x0_inv;
        loop {
            term = q.tmul(&term)?;
            if term.is_empty() {
                break;
            }
            acc.add_scaled(&term, Complex64::new(1.0, 0.0))?;
        }
        Ok(acc.with_base(self.base))
    }

    /// `S X S⁻¹` for a unit `S`.
    pub fn conj_by(&self, s: &TSeries) -> Result<TSeries> {
        let s_inv = s.inverse()?;
        Ok(s.tmul(self)?.tmul(&s_inv)?.with_base(self.base))
    }

    /// `∂/∂t_n`, termwise. The valuation of every term drops by `n`, so the
    /// declared base order rises by `n`.
    pub fn ddt(&self, n: usize) -> Result<TSeries> {
        if n == 0 || n > self.params.times {
            return Err(Error::InvalidArgument(format!(
                "time index {n} outside [1, {}]",
                self.params.times
            )));
        }
        let mut out = TSeries::zero(self.params, self.base + n as i32);
        for (m, a) in &self.terms {
            let e = m.0[n - 1];
            if e == 0 {
                continue;
            }
            let mut lower = m.clone();
            lower.0[n - 1] -= 1;
            out.insert(lower, a.scale_real(e as f64));
        }
        Ok(out)
    }

    /// Evaluates the jet at concrete times; missing trailing times are 0.
    pub fn eval_t(&self, t: &[f64]) -> Symbol {
        let mut acc = Symbol::zero(self.space());
        for (m, a) in &self.terms {
            let w = m.eval(t);
            if w != 0.0 {
                acc.add_scaled(a, Complex64::new(w, 0.0))
                    .expect("coefficients share the series space");
            }
        }
        acc
    }

    /// The h-scaling `t_n ↦ hⁿ t_n`, `ξ ↦ hξ`: the monomial `α` picks up
    /// `h^{val α}` and the order-`n` coefficient `hⁿ`.
    ///
    /// Scaling `ξ` by `h` intertwines the Leibniz product of weight `ħ` with
    /// the one of weight `ħ/h`, so the result lives in parameters with
    /// `hbar / h`.
    pub fn scale_h(&self, h: f64) -> Result<TSeries> {
        if h == 0.0 || !h.is_finite() {
            return Err(Error::InvalidArgument("scaling needs a finite h != 0".into()));
        }
        let params = TruncParams {
            hbar: self.params.hbar / h,
            ..self.params
        };
        let mut out = TSeries::zero(params, self.base);
        for (m, a) in &self.terms {
            let w = h.powi(m.val() as i32);
            out.insert(m.clone(), scale_symbol_h(a, h, w, &params));
        }
        Ok(out)
    }

    /// Max over monomials of the symbol norm on orders `≥ F`.
    pub fn norm(&self) -> f64 {
        self.norm_upto(self.params.val_cap)
    }

    /// As [`TSeries::norm`], restricted to valuations `≤ cap`.
    pub fn norm_upto(&self, cap: u32) -> f64 {
        self.terms
            .iter()
            .filter(|(m, _)| m.val() <= cap)
            .map(|(_, a)| a.norm())
            .fold(0.0, f64::max)
    }

    /// Structural growth check: the coefficient of `α` has order
    /// `≤ val(α) + N₀`.
    pub fn check_growth(&self) -> Result<()> {
        for (m, a) in &self.terms {
            if let Some(ord) = a.order() {
                let bound = m.val() as i32 + self.base;
                if ord > bound {
                    return Err(Error::Growth {
                        monomial: m.to_string(),
                        ceiling: ord,
                        bound,
                    });
                }
            }
        }
        Ok(())
    }

    /// Ordered product `Π_{i=1}^{n} (1 + v((n-i)/n)/n)`, the discretized
    /// path exponential evaluated at `s = 1` (latest time on the left).
    pub fn product_integral(path: &Path, steps: usize) -> Result<TSeries> {
        if steps == 0 {
            return Err(Error::InvalidArgument("need at least one step".into()));
        }
        let first = path.at(0.0);
        let params = *first.params();
        let one = TSeries::one(params);
        let mut acc = one.clone();
        for i in 1..=steps {
            let s = (steps - i) as f64 / steps as f64;
            let v = if i == steps { first.clone() } else { path.at(s) };
            if v.min_val() == Some(0) {
                return Err(Error::Valuation(format!(
                    "path has valuation-0 content at s = {s}"
                )));
            }
            let factor = one.checked_add(&v.scale_real(1.0 / steps as f64))?;
            acc = acc.tmul(&factor)?.with_base(0);
        }
        Ok(acc)
    }
}

fn scale_symbol_h(a: &Symbol, h: f64, w: f64, params: &TruncParams) -> Symbol {
    let mut out = Symbol::zero(SymbolSpace::from(params));
    for (n, f) in a.terms() {
        out.set_coeff(n, f.scale_real(w * h.powi(n)))
            .expect("same orders and shape");
    }
    out
}

impl fmt::Debug for TSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

/// A path `s ∈ [0, 1] ↦ v(s)` of series with valuation `≥ 1`.
#[derive(Clone)]
pub struct Path {
    f: Arc<dyn Fn(f64) -> TSeries + Send + Sync>,
}

impl Path {
    pub fn constant(x: TSeries) -> Self {
        Path {
            f: Arc::new(move |_| x.clone()),
        }
    }

    pub fn from_fn(f: impl Fn(f64) -> TSeries + Send + Sync + 'static) -> Self {
        Path { f: Arc::new(f) }
    }

    pub fn at(&self, s: f64) -> TSeries {
        (self.f)(s)
    }
}
