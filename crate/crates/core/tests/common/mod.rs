#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use nfkp::tseries::{monomials, TMono, TSeries};
use nfkp::{LoopFn, Symbol, TruncParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real trigonometric polynomial with modes `1..=budget` (and a mean when
/// `with_mean`), coefficients uniform in `[-amp, amp]`.
pub fn random_trig(rng: &mut ChaCha8Rng, modes: usize, budget: i32, amp: f64, with_mean: bool) -> LoopFn {
    let mut f = LoopFn::zero(1, modes);
    if with_mean {
        f.coeff_mut(0)[0] = Complex64::new(rng.random_range(-amp..amp), 0.0);
    }
    for k in 1..=budget {
        f += &LoopFn::cos(modes, k, rng.random_range(-amp..amp));
        f += &LoopFn::sin(modes, k, rng.random_range(-amp..amp));
    }
    f
}

pub fn cos_dressing(p: &TruncParams) -> Symbol {
    Symbol::from_terms(
        *p,
        &[(0, LoopFn::identity(1, p.modes)), (-1, LoopFn::cos(p.modes, 1, 1.0))],
    )
    .unwrap()
}

/// `1 + Σ_{k=1}^{depth} s_k ξ^{-k}` with random real trig polynomials of
/// mode budget `budget`.
pub fn random_dressing(rng: &mut ChaCha8Rng, p: &TruncParams, depth: i32, budget: i32, amp: f64) -> Symbol {
    let mut terms = vec![(0, LoopFn::identity(1, p.modes))];
    for k in 1..=depth {
        terms.push((-k, random_trig(rng, p.modes, budget, amp, true)));
    }
    Symbol::from_terms(*p, &terms).unwrap()
}

/// Random symbol with orders in `[lo, hi]`.
pub fn random_symbol(rng: &mut ChaCha8Rng, p: &TruncParams, lo: i32, hi: i32, budget: i32) -> Symbol {
    let terms: Vec<(i32, LoopFn)> = (lo..=hi)
        .map(|n| (n, random_trig(rng, p.modes, budget, 1.0, true)))
        .collect();
    Symbol::from_terms(*p, &terms).unwrap()
}

/// Where an unknown lives: S or Y, monomial index, order, mode.
#[derive(Clone, Copy)]
enum Slot {
    S(usize, i32, i32),
    Y(usize, i32, i32),
}

/// Solves `S∘U = Y` as one dense linear system over every monomial of
/// valuation `1..=V`: unknowns are the Fourier coefficients of `S_α` on
/// orders `lo..=-1` and of `Y_α` on orders `0..=val(α)`, equations are all
/// coefficients of `(S∘U - Y)_α`. Products use the slow reference
/// composition. Returns `(S, Y)` with the valuation-0 terms set to 1.
pub fn dense_factorize(u: &TSeries) -> (TSeries, TSeries) {
    let p = *u.params();
    let lo = p.working_floor();
    let mm = p.modes as i32;
    let monos: Vec<TMono> = monomials(p.times, p.val_cap)
        .into_iter()
        .filter(|m| m.val() > 0)
        .collect();
    let index_of = |m: &TMono| monos.iter().position(|x| x == m);

    let mut slots = Vec::new();
    for (a, m) in monos.iter().enumerate() {
        for o in lo..=-1 {
            for k in -mm..=mm {
                slots.push(Slot::S(a, o, k));
            }
        }
        for o in 0..=m.val() as i32 {
            for k in -mm..=mm {
                slots.push(Slot::Y(a, o, k));
            }
        }
    }
    let orders = (p.ceiling - lo + 1) as usize;
    let modes = 2 * p.modes + 1;
    let per_mono = orders * modes;
    let row = |a: usize, o: i32, k: i32| a * per_mono + (o - lo) as usize * modes + (k + mm) as usize;
    let nrows = monos.len() * per_mono;

    // constant part: U_α itself (S₀ = 1)
    let mut b = DVector::<Complex64>::zeros(nrows);
    for (a, m) in monos.iter().enumerate() {
        if let Some(ua) = u.coeff(m) {
            for (o, f) in ua.terms() {
                for k in -mm..=mm {
                    b[row(a, o, k)] += f.scalar_coeff(k);
                }
            }
        }
    }

    let mut mat = DMatrix::<Complex64>::zeros(nrows, slots.len());
    for (col, slot) in slots.iter().enumerate() {
        match *slot {
            Slot::Y(a, o, k) => mat[(row(a, o, k), col)] -= Complex64::new(1.0, 0.0),
            Slot::S(a, o, k) => {
                let e = Symbol::monomial(p, o, LoopFn::from_modes(p.modes, &[(k, Complex64::new(1.0, 0.0))]).unwrap())
                    .unwrap();
                // contributes e∘U_γ to the monomial α·γ
                for (g, ug) in u.terms() {
                    let target = monos[a].mul(g);
                    let Some(t) = index_of(&target) else { continue };
                    let prod = e.compose_reference(ug).unwrap();
                    for (oo, f) in prod.terms() {
                        for kk in -mm..=mm {
                            let c = f.scalar_coeff(kk);
                            if c != Complex64::new(0.0, 0.0) {
                                mat[(row(t, oo, kk), col)] += c;
                            }
                        }
                    }
                }
            }
        }
    }
    let rhs = -b;
    let x = mat.svd(true, true).solve(&rhs, 1e-13).expect("svd solve");

    let mut s = TSeries::one(p);
    let mut y = TSeries::one(p);
    let mut s_coef: Vec<Symbol> = monos.iter().map(|_| Symbol::zero(p)).collect();
    let mut y_coef: Vec<Symbol> = monos.iter().map(|_| Symbol::zero(p)).collect();
    for (col, slot) in slots.iter().enumerate() {
        let (target, a, o, k) = match *slot {
            Slot::S(a, o, k) => (&mut s_coef, a, o, k),
            Slot::Y(a, o, k) => (&mut y_coef, a, o, k),
        };
        let mut f = target[a].coeff_or_zero(o);
        f.coeff_mut(k)[0] += x[col];
        target[a].set_coeff(o, f).unwrap();
    }
    for (a, m) in monos.iter().enumerate() {
        s.set_coeff(m.clone(), s_coef[a].clone()).unwrap();
        y.set_coeff(m.clone(), y_coef[a].clone()).unwrap();
    }
    (s, y)
}
