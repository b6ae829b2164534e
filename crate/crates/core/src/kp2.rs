//! The KP-II reduction: `u₋₁`, `u₋₂` read off `L = ξ + Σ_{k≤-1} u_k ξᵏ`,
//! the component equations of the `(t₁,t₂)`, `(t₁,t₃)`, `(t₂,t₃)`
//! zero-curvature conditions, and numeric integration of the hierarchy
//! `dL/dt_n = -[π_S Lⁿ, L]` for comparison with the jet.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factorization::KPJet;
use crate::loopfn::LoopFn;
use crate::symbol::{Symbol, SymbolSpace};
use crate::tseries::{TMono, TSeries};

/// Tolerance on the unit leading coefficient and on a vanishing `σ₀`.
const SHAPE_TOL: f64 = 1e-10;

/// A jet in the times with loop-function coefficients, truncated at
/// valuation `≤ cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct FnJet {
    times: usize,
    cap: u32,
    dim: usize,
    modes: usize,
    terms: BTreeMap<TMono, LoopFn>,
}

impl FnJet {
    pub fn zero(times: usize, cap: u32, dim: usize, modes: usize) -> Self {
        FnJet {
            times,
            cap,
            dim,
            modes,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(times: usize, cap: u32, f: LoopFn) -> Self {
        let mut j = FnJet::zero(times, cap, f.dim(), f.modes());
        j.set(TMono::one(times), f);
        j
    }

    /// Sets the coefficient of `mono`; terms above the cap are dropped.
    pub fn set(&mut self, mono: TMono, f: LoopFn) {
        assert_eq!(mono.times(), self.times, "monomial has wrong number of times");
        if mono.val() > self.cap || f.is_zero() {
            self.terms.remove(&mono);
        } else {
            self.terms.insert(mono, f);
        }
    }

    pub fn coeff_or_zero(&self, mono: &TMono) -> LoopFn {
        self.terms
            .get(mono)
            .cloned()
            .unwrap_or_else(|| LoopFn::zero(self.dim, self.modes))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TMono, &LoopFn)> {
        self.terms.iter()
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn map(&self, f: impl Fn(&LoopFn) -> LoopFn) -> FnJet {
        let mut out = FnJet::zero(self.times, self.cap, self.dim, self.modes);
        for (m, a) in &self.terms {
            out.set(m.clone(), f(a));
        }
        out
    }

    pub fn dx(&self) -> FnJet {
        self.map(LoopFn::dx)
    }

    pub fn dx_n(&self, k: u32) -> FnJet {
        self.map(|f| f.dx_n(k))
    }

    pub fn scale_real(&self, c: f64) -> FnJet {
        self.map(|f| f.scale_real(c))
    }

    pub fn add_scaled(&mut self, other: &FnJet, c: f64) {
        for (m, a) in &other.terms {
            let mut cur = self.coeff_or_zero(m);
            cur.add_scaled(a, Complex64::new(c, 0.0));
            self.set(m.clone(), cur);
        }
    }

    pub fn sub(&self, other: &FnJet) -> FnJet {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    pub fn add(&self, other: &FnJet) -> FnJet {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn ddt(&self, n: usize) -> Result<FnJet> {
        if n == 0 || n > self.times {
            return Err(Error::InvalidArgument(format!(
                "time index {n} outside [1, {}]",
                self.times
            )));
        }
        let mut out = FnJet::zero(self.times, self.cap, self.dim, self.modes);
        for (m, a) in &self.terms {
            let e = m.exponents()[n - 1];
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[n - 1] -= 1;
            out.set(TMono::from_exponents(&exps), a.scale_real(e as f64));
        }
        Ok(out)
    }

    /// Cauchy product with pointwise function products.
    pub fn mul(&self, other: &FnJet) -> FnJet {
        let mut out = FnJet::zero(self.times, self.cap.min(other.cap), self.dim, self.modes);
        for (a, fa) in &self.terms {
            for (b, fb) in &other.terms {
                if a.val() + b.val() > out.cap {
                    continue;
                }
                let m = a.mul(b);
                let mut cur = out.coeff_or_zero(&m);
                cur += &(fa * fb);
                out.set(m, cur);
            }
        }
        out
    }

    pub fn eval_t(&self, t: &[f64]) -> LoopFn {
        let mut acc = LoopFn::zero(self.dim, self.modes);
        for (m, a) in &self.terms {
            acc.add_scaled(a, Complex64::new(m.eval(t), 0.0));
        }
        acc
    }

    /// Max over monomials of valuation `≤ cap` of the coefficient norm.
    pub fn norm_upto(&self, cap: u32) -> f64 {
        self.terms
            .iter()
            .filter(|(m, _)| m.val() <= cap)
            .map(|(_, a)| a.norm())
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.norm_upto(self.cap)
    }
}

/// The pair `(u₋₁, u₋₂)`, either numeric (`LoopFn`) or a jet (`FnJet`).
#[derive(Debug, Clone, PartialEq)]
pub struct UPair<T> {
    pub u1: T,
    pub u2: T,
}

fn check_lax_shape(l: &Symbol) -> Result<()> {
    let sp = l.space();
    if l.order() != Some(1) {
        return Err(Error::Order(format!("L must have order 1, has {:?}", l.order())));
    }
    let off = (&l.coeff_or_zero(1) - &LoopFn::identity(sp.dim, sp.modes)).norm();
    if off > SHAPE_TOL {
        return Err(Error::Order(format!(
            "L must have leading coefficient Id (off by {off:.3e})"
        )));
    }
    let s0 = l.coeff_or_zero(0).norm();
    if s0 > SHAPE_TOL {
        log::warn!("order-0 coefficient of L is {s0:.3e}, expected 0");
    }
    Ok(())
}

/// `(a₋₁, a₋₂)` of `L = ξ + Σ_{k≤-1} a_k ξᵏ`.
pub fn extract_u(l: &Symbol) -> Result<UPair<LoopFn>> {
    check_lax_shape(l)?;
    Ok(UPair {
        u1: l.coeff_or_zero(-1),
        u2: l.coeff_or_zero(-2),
    })
}

/// `ξ + u₋₁ξ⁻¹ + u₋₂ξ⁻²`.
pub fn embed_u(u: &UPair<LoopFn>, space: SymbolSpace) -> Result<Symbol> {
    Symbol::from_terms(
        space,
        &[
            (1, LoopFn::identity(space.dim, space.modes)),
            (-1, u.u1.clone()),
            (-2, u.u2.clone()),
        ],
    )
}

/// Jet version of [`extract_u`]: the valuation-0 term must have the Lax
/// shape and higher terms must not touch orders 1 and 0.
pub fn extract_u_jet(l: &TSeries) -> Result<UPair<FnJet>> {
    let p = *l.params();
    check_lax_shape(&l.val0())?;
    let mut u1 = FnJet::zero(p.times, p.val_cap, p.dim, p.modes);
    let mut u2 = u1.clone();
    for (m, a) in l.terms() {
        if m.val() > 0 {
            let top = a.coeff_or_zero(1).norm().max(a.coeff_or_zero(0).norm());
            if top > SHAPE_TOL {
                return Err(Error::Order(format!(
                    "coefficient of {m} has orders 0..1 content {top:.3e}"
                )));
            }
        }
        u1.set(m.clone(), a.coeff_or_zero(-1));
        u2.set(m.clone(), a.coeff_or_zero(-2));
    }
    Ok(UPair { u1, u2 })
}

fn jet_u(jet: &KPJet, min_times: usize) -> Result<UPair<FnJet>> {
    let times = jet.l.params().times;
    if times < min_times {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_times} times, have {times}"
        )));
    }
    extract_u_jet(&jet.l)
}

/// `‖∂₁u₋₁ - ∂ₓu₋₁‖` over valuations `≤ V - 1`.
pub fn check_t12(jet: &KPJet) -> Result<f64> {
    let u = jet_u(jet, 2)?;
    t12_residual(&u)
}

pub fn t12_residual(u: &UPair<FnJet>) -> Result<f64> {
    let cap = u.u1.cap().saturating_sub(1);
    Ok(u.u1.ddt(1)?.sub(&u.u1.dx()).norm_upto(cap))
}

/// Residuals of `∂₁u₋₁ = ∂ₓu₋₁` and `∂₁u₋₂ = ∂ₓu₋₂` over valuations `≤ V - 1`.
pub fn check_t13(jet: &KPJet) -> Result<[f64; 2]> {
    let u = jet_u(jet, 3)?;
    t13_residual(&u)
}

pub fn t13_residual(u: &UPair<FnJet>) -> Result<[f64; 2]> {
    let cap = u.u1.cap().saturating_sub(1);
    Ok([
        u.u1.ddt(1)?.sub(&u.u1.dx()).norm_upto(cap),
        u.u2.ddt(1)?.sub(&u.u2.dx()).norm_upto(cap),
    ])
}

// ∂₂u₋₁ - u₋₁'' - 2u₋₂'
fn t23_first(u: &UPair<FnJet>) -> Result<FnJet> {
    Ok(u.u1
        .ddt(2)?
        .sub(&u.u1.dx_n(2))
        .sub(&u.u2.dx().scale_real(2.0)))
}

// 3∂₂u₋₂ - 2∂₃u₋₁ + 6u₋₁'u₋₁ + 2u₋₁''' + 3u₋₂''
fn t23_second(u: &UPair<FnJet>) -> Result<FnJet> {
    let lhs = u.u2.ddt(2)?.scale_real(3.0).sub(&u.u1.ddt(3)?.scale_real(2.0));
    let rhs = u
        .u1
        .dx()
        .mul(&u.u1)
        .scale_real(-6.0)
        .sub(&u.u1.dx_n(3).scale_real(2.0))
        .sub(&u.u2.dx_n(2).scale_real(3.0));
    Ok(lhs.sub(&rhs))
}

// 3∂₂u₋₂ + 3∂₂u₋₁' - 2∂₃u₋₁ + 6u₋₁'u₋₁ - u₋₁''' - 3u₋₂''
fn t23_second_primed(u: &UPair<FnJet>) -> Result<FnJet> {
    let lhs = u
        .u2
        .ddt(2)?
        .scale_real(3.0)
        .add(&u.u1.ddt(2)?.dx().scale_real(3.0))
        .sub(&u.u1.ddt(3)?.scale_real(2.0));
    let rhs = u
        .u1
        .dx()
        .mul(&u.u1)
        .scale_real(-6.0)
        .add(&u.u1.dx_n(3))
        .add(&u.u2.dx_n(2).scale_real(3.0));
    Ok(lhs.sub(&rhs))
}

/// Residuals of both equations of the `(t₂,t₃)` system over valuations
/// `≤ V - 3`.
pub fn check_t23(jet: &KPJet) -> Result<[f64; 2]> {
    let u = jet_u(jet, 3)?;
    t23_residual(&u)
}

pub fn t23_residual(u: &UPair<FnJet>) -> Result<[f64; 2]> {
    let cap = u.u1.cap().saturating_sub(3);
    Ok([t23_first(u)?.norm_upto(cap), t23_second(u)?.norm_upto(cap)])
}

/// Discrepancy between the second equation as it comes out of the
/// commutator (with the mixed term `∂₂u₋₁'`) and its reduced form. The two
/// differ by `3∂ₓ` of the first equation, so this vanishes exactly when the
/// first equation holds (up to a function of time alone).
pub fn equiv_t23(u: &UPair<FnJet>) -> Result<f64> {
    let cap = u.u1.cap().saturating_sub(3);
    Ok(t23_second_primed(u)?
        .sub(&t23_second(u)?)
        .norm_upto(cap))
}

/// State of a numeric flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub l: Symbol,
    pub t: f64,
    /// Flow direction.
    pub n: usize,
    pub dt: f64,
}

/// Options of [`flow_delinearized`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Step size; the step count is `ceil(t_end / dt)` with the last step
    /// shortened so the flow ends exactly at `t_end`.
    pub dt: f64,
    /// Largest allowed coefficient sup-norm on orders `≥ F`.
    pub blow_up: f64,
    /// Use the D-form `[π_D Lⁿ, L]` instead of the S-form. Only meant as a
    /// cross-check: the D-form does not manifestly keep orders 1 and 0.
    pub d_form: bool,
    /// Sign of the leading term `ξⁿ` of `π_D Lⁿ`, read by the D-form only.
    /// 1 integrates the hierarchy; -1 adds the free flow `-2[ξⁿ, L]` and is
    /// only useful as a negative control.
    pub leading_sign: f64,
}

impl FlowOptions {
    pub fn with_dt(dt: f64) -> Self {
        FlowOptions {
            dt,
            blow_up: 1e6,
            d_form: false,
            leading_sign: 1.0,
        }
    }
}

/// `-[π_S Lⁿ, L]` (or `[π_D Lⁿ, L]` for the D-form).
pub fn flow_rhs(l: &Symbol, n: usize, d_form: bool) -> Result<Symbol> {
    let ln = l.power(n as u32)?;
    if d_form {
        ln.d_part().commutator(l)
    } else {
        Ok(ln.s_part().commutator(l)?.scale_real(-1.0))
    }
}

fn rhs_with(l: &Symbol, n: usize, opts: &FlowOptions) -> Result<Symbol> {
    if !opts.d_form || opts.leading_sign == 1.0 {
        return flow_rhs(l, n, opts.d_form);
    }
    let mut a = l.power(n as u32)?.d_part();
    let lead = Symbol::xi_power(l.space(), n as i32);
    a.add_scaled(&lead, Complex64::new(opts.leading_sign - 1.0, 0.0))?;
    a.commutator(l)
}

fn reported_sup(l: &Symbol) -> f64 {
    l.truncated_below(l.space().floor).sup_bound()
}

/// Integrates `dL/dt_n = -[π_S Lⁿ, L]` from `L(0) = L0` to `t_end` with the
/// classical fourth-order Runge–Kutta scheme.
///
/// The Lax shape of `L0` is checked unless the leading sign is flipped: the
/// free flow does not preserve it, and [`flows_commute`] composes two flows.
pub fn flow_delinearized(l0: &Symbol, n: usize, t_end: f64, opts: &FlowOptions) -> Result<FlowState> {
    if opts.leading_sign == 1.0 {
        check_lax_shape(l0)?;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("flow direction must be >= 1".into()));
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) || !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and t_end >= 0, got dt {} t_end {t_end}",
            opts.dt
        )));
    }
    let steps = (t_end / opts.dt - 1e-9).ceil().max(0.0) as usize;
    let mut l = l0.clone();
    let mut t = 0.0;
    for s in 0..steps {
        let h = if s + 1 == steps { t_end - t } else { opts.dt };
        let rhs = |x: &Symbol| rhs_with(x, n, opts);
        let k1 = rhs(&l)?;
        let k2 = rhs(&axpy(&l, &k1, h / 2.0)?)?;
        let k3 = rhs(&axpy(&l, &k2, h / 2.0)?)?;
        let k4 = rhs(&axpy(&l, &k3, h)?)?;
        let mut next = l.clone();
        next.add_scaled(&k1, Complex64::new(h / 6.0, 0.0))?;
        next.add_scaled(&k2, Complex64::new(h / 3.0, 0.0))?;
        next.add_scaled(&k3, Complex64::new(h / 3.0, 0.0))?;
        next.add_scaled(&k4, Complex64::new(h / 6.0, 0.0))?;
        t += h;
        let norm = reported_sup(&next);
        if norm.is_nan() || norm > opts.blow_up {
            return Err(Error::BlowUp {
                t,
                norm,
                bound: opts.blow_up,
            });
        }
        l = next;
    }
    Ok(FlowState {
        l,
        t: t_end,
        n,
        dt: opts.dt,
    })
}

fn axpy(x: &Symbol, y: &Symbol, c: f64) -> Result<Symbol> {
    let mut out = x.clone();
    out.add_scaled(y, Complex64::new(c, 0.0))?;
    Ok(out)
}

/// `‖flow_m(t)(flow_n(t)(L0)) - flow_n(t)(flow_m(t)(L0))‖` on orders `≥ F`.
pub fn flows_commute(l0: &Symbol, n: usize, m: usize, t: f64, opts: &FlowOptions) -> Result<f64> {
    let nm = flow_delinearized(&flow_delinearized(l0, n, t, opts)?.l, m, t, opts)?;
    let mn = flow_delinearized(&flow_delinearized(l0, m, t, opts)?.l, n, t, opts)?;
    Ok((&nm.l - &mn.l).norm())
}

/// Distance between `flow(t)` and `eval_t(jet, t)` on `u₋₁`, `u₋₂`:
/// `max(‖Δu₋₁‖, ‖Δu₋₂‖)`.
pub fn u_distance(a: &Symbol, b: &Symbol) -> Result<f64> {
    let ua = extract_u(a)?;
    let ub = extract_u(b)?;
    Ok((&ua.u1 - &ub.u1).norm().max((&ua.u2 - &ub.u2).norm()))
}

/// Applies `x ↦ x + τ` to every coefficient.
pub fn translate_symbol(l: &Symbol, tau: f64) -> Symbol {
    l.map_coeffs(|_, f| f.translate(tau))
}

/// Builds the jet restricted to one time axis, `t_n = τ` and the other
/// times zero, evaluated at `τ`.
pub fn jet_on_axis(l: &TSeries, n: usize, tau: f64) -> Symbol {
    let mut t = vec![0.0; l.params().times];
    if let Some(slot) = t.get_mut(n.wrapping_sub(1)) {
        *slot = tau;
    }
    l.eval_t(&t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::kp_solve;
    use crate::params::TruncParams;

    fn params() -> TruncParams {
        TruncParams {
            modes: 12,
            floor: -6,
            guard: 6,
            val_cap: 4,
            ..TruncParams::default()
        }
    }

    fn cos_jet(p: &TruncParams) -> KPJet {
        let s0 = Symbol::from_terms(
            *p,
            &[(0, LoopFn::identity(1, p.modes)), (-1, LoopFn::cos(p.modes, 1, 1.0))],
        )
        .unwrap();
        kp_solve(&s0, p).unwrap()
    }

    #[test]
    fn extract_examples() {
        let p = params();
        let sp = SymbolSpace::from(p);
        let u = extract_u(&Symbol::xi_power(p, 1)).unwrap();
        assert!(u.u1.is_zero() && u.u2.is_zero());
        let pair = UPair {
            u1: LoopFn::sin(p.modes, 1, 1.0),
            u2: LoopFn::cos(p.modes, 2, 0.5),
        };
        assert_eq!(extract_u(&embed_u(&pair, sp).unwrap()).unwrap(), pair);
        let jet = cos_jet(&p);
        let u = extract_u(&jet.l0).unwrap();
        assert!((&u.u1 - &LoopFn::sin(p.modes, 1, 1.0)).norm() < 1e-12);
        assert!(extract_u(&Symbol::xi_power(p, 2)).is_err());
    }

    #[test]
    fn component_equations_hold_on_the_jet() {
        let p = params();
        let trivial = kp_solve(&Symbol::identity(p), &p).unwrap();
        assert_eq!(check_t12(&trivial).unwrap(), 0.0);
        let jet = cos_jet(&p);
        assert!(check_t12(&jet).unwrap() < 1e-9);
        let [a, b] = check_t13(&jet).unwrap();
        assert!(a < 1e-9 && b < 1e-9);
        let [a, b] = check_t23(&jet).unwrap();
        assert!(a < 1e-9 && b < 1e-9, "{a} {b}");
        let u = extract_u_jet(&jet.l).unwrap();
        assert!(equiv_t23(&u).unwrap() < 1e-9);
    }

    #[test]
    fn corrupted_jet_is_detected() {
        let p = params();
        let jet = cos_jet(&p);
        let mut u = extract_u_jet(&jet.l).unwrap();
        let t1 = TMono::t(3, 1);
        // a constant bump has no x-derivative, so only ∂₁ sees it
        let bump = LoopFn::constant(1, p.modes, Complex64::new(1e-3, 0.0));
        let bumped = &u.u1.coeff_or_zero(&t1) + &bump;
        u.u1.set(t1, bumped);
        let r = t12_residual(&u).unwrap();
        assert!((r - 1e-3).abs() < 1e-9, "{r}");
        assert!(equiv_t23(&u).unwrap() < 1e-9);
        let mut v = extract_u_jet(&jet.l).unwrap();
        let t2 = TMono::t(3, 2);
        let bumped = &v.u1.coeff_or_zero(&t2) + &LoopFn::cos(p.modes, 1, 1e-3);
        v.u1.set(t2, bumped);
        // 3∂ₓ of the bump in ∂₂u₋₁
        let e = equiv_t23(&v).unwrap();
        assert!((e - 3e-3 / 2f64.sqrt()).abs() < 1e-9, "{e}");
    }

    #[test]
    fn trivial_flow_is_constant() {
        let p = params();
        let xi = Symbol::xi_power(p, 1);
        let out = flow_delinearized(&xi, 2, 0.01, &FlowOptions::with_dt(0.01 / 16.0)).unwrap();
        assert_eq!(out.l, xi);
        assert!(flow_delinearized(&xi, 2, 0.01, &FlowOptions::with_dt(0.0)).is_err());
    }

    #[test]
    fn flow_keeps_the_differential_part() {
        let p = params();
        let jet = cos_jet(&p);
        let out = flow_delinearized(&jet.l0, 2, 0.01, &FlowOptions::with_dt(0.01 / 32.0)).unwrap();
        assert!((&out.l.coeff_or_zero(1) - &LoopFn::identity(1, p.modes)).norm() < 1e-10);
        assert!(out.l.coeff_or_zero(0).norm() < 1e-10);
    }
}
