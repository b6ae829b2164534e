//! Birkhoff–Mulase splitting `U = S⁻¹Y` and the KP jet built from it.
//!
//! With `U = exp(Σ t_n L₀ⁿ)` the recursion solves `S∘U = Y` one valuation
//! at a time: writing `W_v = U_v + Σ_{0<w<v} S_w∘U_{v-w}`, the level-`v`
//! equation reads `S_v + W_v = Y_v`, so `Y_v = π_D W_v` and `S_v = -π_S W_v`.
//! The dressed operator `L = S L₀ S⁻¹` then solves the hierarchy
//! `∂L/∂t_n = [π_D Lⁿ, L]`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::TruncParams;
use crate::symbol::{Symbol, SymbolSpace};
use crate::tseries::{monomials, TMono, TSeries};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance for the structural checks on leading coefficients.
const LEADING_TOL: f64 = 1e-12;

/// A solved KP jet.
#[derive(Debug, Clone)]
pub struct KPJet {
    /// Dressing datum, `S₀ - 1` of order `≤ -1`.
    pub s0: Symbol,
    /// `S₀ ξ S₀⁻¹`.
    pub l0: Symbol,
    pub u: TSeries,
    pub s: TSeries,
    pub y: TSeries,
    /// `S L₀ S⁻¹`, base order 1.
    pub l: TSeries,
    /// `Y L₀ Y⁻¹`, kept for the consistency check.
    pub l_from_y: TSeries,
}

/// Per-component KP residuals for one time direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpResidual {
    /// `‖∂_n L - [π_D Lⁿ, L]‖`.
    pub d_form: f64,
    /// `‖∂_n L + [π_S Lⁿ, L]‖`.
    pub s_form: f64,
    /// `‖[π_D Lⁿ, L] + [π_S Lⁿ, L]‖`, the distance between the two right-hand sides.
    pub forms_agree: f64,
}

impl KpResidual {
    pub fn max(&self) -> f64 {
        self.d_form.max(self.s_form).max(self.forms_agree)
    }
}

fn check_leading(l0: &Symbol, lead: f64) -> Result<()> {
    if l0.order() != Some(1) {
        return Err(Error::Order(format!(
            "L0 must have order 1, has {:?}",
            l0.order()
        )));
    }
    let sp = l0.space();
    let want = crate::LoopFn::identity(sp.dim, sp.modes).scale_real(lead);
    let err = (&l0.coeff_or_zero(1) - &want).norm();
    if err > LEADING_TOL * lead.abs().max(1.0) {
        return Err(Error::Order(format!(
            "L0 must have leading coefficient {lead}·Id (off by {err:.3e})"
        )));
    }
    Ok(())
}

/// `U = exp(Σ_{n≤K} t_n L₀ⁿ)` for `L₀` of order 1 with leading coefficient `Id`.
pub fn build_u(l0: &Symbol, params: &TruncParams) -> Result<TSeries> {
    params.validate()?;
    if l0.space() != SymbolSpace::from(params) {
        return Err(Error::ParamMismatch("L0 lives in another symbol space".into()));
    }
    check_leading(l0, 1.0)?;
    build_u_weighted(l0, params, 1.0)
}

// exp(Σ hⁿ t_n L₀ⁿ); h = 1 is the plain hierarchy
fn build_u_weighted(l0: &Symbol, params: &TruncParams, h: f64) -> Result<TSeries> {
    let mut gen = TSeries::zero(*params, 0);
    let mut pow = l0.clone();
    for n in 1..=params.times {
        if n > 1 {
            pow = pow.compose(l0)?;
        }
        if n as u32 > params.val_cap {
            break;
        }
        let mono = TMono::t(params.times, n);
        gen.set_coeff(mono, pow.scale_real(h.powi(n as i32)))?;
    }
    gen.texp()
}

/// Splits a unit `U` (valuation-0 term 1, growth condition with base 0)
/// into `(S, Y)` with `S∘U = Y`, `S - 1` of order `≤ -1` and `Y`
/// differential.
pub fn mulase_factorize(u: &TSeries) -> Result<(TSeries, TSeries)> {
    let p = *u.params();
    let one = Symbol::identity(p);
    let off = (&u.val0() - &one).norm_from(p.working_floor());
    if off > LEADING_TOL {
        return Err(Error::InvalidArgument(format!(
            "U must start with 1 (valuation-0 term off by {off:.3e})"
        )));
    }
    if u.base() != 0 {
        return Err(Error::InvalidArgument(format!(
            "U must have base order 0, has {}",
            u.base()
        )));
    }
    u.check_growth()?;

    let all = monomials(p.times, p.val_cap);
    let mut s = TSeries::one(p);
    let mut y = TSeries::one(p);
    for v in 1..=p.val_cap {
        let level: Vec<&TMono> = all.iter().filter(|m| m.val() == v).collect();
        let solved: Vec<Result<(TMono, Symbol, Symbol)>> = level
            .par_iter()
            .map(|&gamma| {
                let mut w = u.coeff_or_zero(gamma);
                for (a, sa) in s.terms() {
                    if a.val() == 0 {
                        continue;
                    }
                    if let Some(ub) = gamma.div(a).and_then(|b| u.coeff(&b)) {
                        w.add_scaled(&sa.compose(ub)?, ONE)?;
                    }
                }
                let (d, sp) = w.split_ds();
                if let Some(ord) = d.order() {
                    if ord > v as i32 {
                        return Err(Error::Growth {
                            monomial: gamma.to_string(),
                            ceiling: ord,
                            bound: v as i32,
                        });
                    }
                }
                Ok((gamma.clone(), sp.scale_real(-1.0), d))
            })
            .collect();
        for r in solved {
            let (gamma, sv, yv) = r?;
            s.set_coeff(gamma.clone(), sv)?;
            y.set_coeff(gamma, yv)?;
        }
    }
    Ok((s, y))
}

fn check_dressing(s0: &Symbol) -> Result<()> {
    let sp = s0.space();
    if let Some(n) = s0.order() {
        if n > 0 {
            return Err(Error::Order(format!("S0 has positive order {n}")));
        }
    }
    let lead = &s0.coeff_or_zero(0) - &crate::LoopFn::identity(sp.dim, sp.modes);
    if lead.norm() > LEADING_TOL {
        return Err(Error::Order(
            "S0 - 1 must have order <= -1 (order-0 coefficient is not Id)".into(),
        ));
    }
    Ok(())
}

/// Solves the hierarchy for the dressing datum `S₀`.
pub fn kp_solve(s0: &Symbol, params: &TruncParams) -> Result<KPJet> {
    params.validate()?;
    if s0.space() != SymbolSpace::from(params) {
        return Err(Error::ParamMismatch("S0 lives in another symbol space".into()));
    }
    check_dressing(s0)?;
    let l0 = s0.conj(&Symbol::xi_power(*params, 1))?;
    let u = build_u(&l0, params)?;
    finish(s0.clone(), l0, u)
}

/// Solves the h-scaled problem: `ξ ↦ hξ`, `t_n ↦ hⁿ t_n`.
///
/// The result lives in the parameters with `hbar / h`; by covariance it
/// should equal `scale_h` applied to every series of `kp_solve(S₀)`.
pub fn kp_solve_scaled(s0: &Symbol, params: &TruncParams, h: f64) -> Result<KPJet> {
    params.validate()?;
    check_dressing(s0)?;
    let s0_h = TSeries::constant(*params, s0.clone(), 0).scale_h(h)?.val0();
    let params_h = TruncParams {
        hbar: params.hbar / h,
        ..*params
    };
    let l0_h = s0_h.conj(&Symbol::xi_power(params_h, 1).scale_real(h))?;
    check_leading(&l0_h, h)?;
    let u = build_u_weighted(&l0_h, &params_h, h)?;
    finish(s0_h, l0_h, u)
}

fn finish(s0: Symbol, l0: Symbol, u: TSeries) -> Result<KPJet> {
    let p = *u.params();
    let (s, y) = mulase_factorize(&u)?;
    let l0_series = TSeries::constant(p, l0.clone(), 1);
    let l = l0_series.conj_by(&s)?;
    let l_from_y = l0_series.conj_by(&y)?;
    Ok(KPJet {
        s0,
        l0,
        u,
        s,
        y,
        l,
        l_from_y,
    })
}

/// Residual of `∂L/∂t_n = [π_D Lⁿ, L] = -[π_S Lⁿ, L]` over valuations
/// `≤ V - n`, orders `≥ F`, max over monomials.
pub fn kp_residual(jet: &KPJet, n: usize) -> Result<KpResidual> {
    let p = *jet.l.params();
    if n == 0 || n > p.times {
        return Err(Error::InvalidArgument(format!(
            "time index {n} outside [1, {}]",
            p.times
        )));
    }
    let cap = p.val_cap.saturating_sub(n as u32);
    let lhs = jet.l.ddt(n)?;
    let ln = jet.l.tpow(n as u32)?;
    let d_rhs = ln.d_part().commutator(&jet.l)?;
    let s_rhs = ln.s_part().commutator(&jet.l)?.scale_real(-1.0);
    Ok(KpResidual {
        d_form: lhs.checked_sub(&d_rhs)?.norm_upto(cap),
        s_form: lhs.checked_sub(&s_rhs)?.norm_upto(cap),
        forms_agree: d_rhs.checked_sub(&s_rhs)?.norm_upto(cap),
    })
}

/// `‖S L₀ S⁻¹ - Y L₀ Y⁻¹‖` over valuations `≤ V`, orders `≥ F`.
pub fn conj_consistency(jet: &KPJet) -> Result<f64> {
    Ok(jet.l.checked_sub(&jet.l_from_y)?.norm())
}

/// Measured Lipschitz constant of `S₀ ↦ (S, Y)` in the direction
/// `direction`: `max(‖ΔS‖, ‖ΔY‖) / ε`.
pub fn lipschitz_probe(
    s0: &Symbol,
    direction: &Symbol,
    params: &TruncParams,
    eps: f64,
) -> Result<f64> {
    let base = kp_solve(s0, params)?;
    let moved = kp_solve(&(s0 + &direction.scale_real(eps)), params)?;
    let ds = base.s.checked_sub(&moved.s)?.norm();
    let dy = base.y.checked_sub(&moved.y)?.norm();
    Ok(ds.max(dy) / eps)
}
