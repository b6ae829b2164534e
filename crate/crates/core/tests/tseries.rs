mod common;

use common::*;
use nfkp::tseries::{monomials, Path, TSeries};
use nfkp::{Symbol, TruncParams};
use proptest::prelude::*;

fn small() -> TruncParams {
    TruncParams {
        modes: 8,
        floor: -4,
        guard: 4,
        ceiling: 6,
        val_cap: 4,
        ..TruncParams::default()
    }
}

/// Random series with terms of valuation `1..=V`, the coefficient of `α`
/// of order `≤ val(α)` and norm `amp`.
fn series(seed: u64, amp: f64) -> TSeries {
    let p = small();
    let mut rng = seeded(seed);
    let mut x = TSeries::zero(p, 0);
    for m in monomials(p.times, p.val_cap) {
        let v = m.val() as i32;
        if v == 0 {
            continue;
        }
        let a = random_symbol(&mut rng, &p, -3, v, 2);
        let a = a.scale_real(amp / a.norm());
        x.set_coeff(m, a).unwrap();
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mixed_partials_commute(seed in any::<u64>()) {
        let x = series(seed, 1.0);
        for n in 1..=3 {
            for m in 1..=3 {
                prop_assert_eq!(x.ddt(n).unwrap().ddt(m).unwrap(), x.ddt(m).unwrap().ddt(n).unwrap());
            }
        }
    }

    #[test]
    fn exp_of_negative_is_inverse(seed in any::<u64>()) {
        let x = series(seed, 0.5);
        let prod = x.texp().unwrap().tmul(&x.scale_real(-1.0).texp().unwrap()).unwrap();
        let one = TSeries::one(small());
        prop_assert!(prod.checked_sub(&one).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn growth_survives_operations(seed in any::<u64>()) {
        let x = series(seed, 1.0);
        let y = series(seed.wrapping_add(1), 1.0);
        prop_assert!(x.check_growth().is_ok());
        prop_assert!(x.tmul(&y).unwrap().check_growth().is_ok());
        prop_assert!(x.texp().unwrap().check_growth().is_ok());
        for n in 1..=3 {
            prop_assert!(x.ddt(n).unwrap().check_growth().is_ok());
        }
    }

    // t_n = c_n rⁿ with |c_n| ≤ 1: the dropped monomials (val > V) are
    // then O(r^{V+1}), and the gap is exactly their evaluated products
    #[test]
    fn evaluation_is_multiplicative_below_the_cap(seed in any::<u64>(), dir in proptest::array::uniform3(-1.0f64..1.0)) {
        let p = small();
        let x = series(seed, 1.0);
        let y = series(seed.wrapping_add(2), 1.0);
        let mut gaps = Vec::new();
        for r in [0.1f64, 0.05] {
            let t: Vec<f64> = dir.iter().zip(1..).map(|(d, n)| d * r.powi(n)).collect();
            let lhs = x.tmul(&y).unwrap().eval_t(&t);
            let rhs = x.eval_t(&t).compose(&y.eval_t(&t)).unwrap();
            let mut dropped = Symbol::zero(p);
            for (a, xa) in x.terms() {
                for (b, yb) in y.terms() {
                    if a.val() + b.val() > p.val_cap {
                        let w = a.eval(&t) * b.eval(&t);
                        dropped = &dropped + &xa.compose(yb).unwrap().scale_real(w);
                    }
                }
            }
            let gap = &rhs - &lhs;
            prop_assert!((&gap - &dropped).norm() <= 1e-13 * rhs.norm().max(1.0));
            gaps.push(gap.norm());
        }
        if gaps[1] > 1e-14 {
            prop_assert!(gaps[0] / gaps[1] >= 0.7 * 2f64.powi(p.val_cap as i32 + 1), "{gaps:?}");
        }
    }

    #[test]
    fn h_scaling_round_trip(seed in any::<u64>(), h in 0.25f64..4.0) {
        let x = series(seed, 1.0).checked_add(&TSeries::one(small())).unwrap();
        let back = x.scale_h(h).unwrap().scale_h(1.0 / h).unwrap();
        prop_assert!(back.checked_sub(&x).unwrap().norm() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn h_scaling_is_a_morphism(seed in any::<u64>()) {
        let x = series(seed, 0.5);
        let y = series(seed.wrapping_add(3), 0.5);
        let h = 2.0;
        let lhs = x.tmul(&y).unwrap().scale_h(h).unwrap();
        let rhs = x.scale_h(h).unwrap().tmul(&y.scale_h(h).unwrap()).unwrap();
        prop_assert!(lhs.checked_sub(&rhs).unwrap().norm() <= 1e-10 * lhs.norm().max(1.0));
    }
}

#[test]
fn product_integral_converges_at_first_order() {
    let x = series(11, 0.5);
    let target = x.texp().unwrap();
    let path = Path::constant(x);
    let err = |n| {
        TSeries::product_integral(&path, n)
            .unwrap()
            .checked_sub(&target)
            .unwrap()
            .norm()
    };
    let errs: Vec<f64> = [16, 32, 64].into_iter().map(err).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 1.8, "{errs:?}");
    }
}

#[test]
fn product_integral_of_zero_path_is_one() {
    let p = small();
    let path = Path::constant(TSeries::zero(p, 0));
    for n in [1, 3, 8] {
        assert_eq!(TSeries::product_integral(&path, n).unwrap(), TSeries::one(p));
    }
}

#[test]
fn valuation_zero_path_is_rejected() {
    let p = small();
    let path = Path::constant(TSeries::constant(p, Symbol::identity(p), 0));
    assert!(TSeries::product_integral(&path, 4).is_err());
    assert!(TSeries::constant(p, Symbol::identity(p), 0).texp().is_err());
}
