mod common;

use common::*;
use nfkp::{LoopFn, Symbol, TruncParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn small() -> TruncParams {
    TruncParams {
        modes: 16,
        floor: -8,
        guard: 8,
        ..TruncParams::default()
    }
}

fn sym(seed: u64, lo: i32, hi: i32, budget: i32) -> Symbol {
    let p = small();
    random_symbol(&mut seeded(seed), &p, lo, hi, budget)
}

#[test]
fn lax_cube_rows() {
    let p = TruncParams::default();
    let m = p.modes;
    let u1 = LoopFn::sin(m, 1, 1.0);
    let u2 = LoopFn::cos(m, 2, 1.0);
    let l = Symbol::from_terms(p, &[(1, LoopFn::identity(1, m)), (-1, u1), (-2, u2)]).unwrap();
    let l3 = l.power(3).unwrap();
    let s1 = LoopFn::sin(m, 1, 3.0);
    let s0 = &LoopFn::cos(m, 2, 3.0) + &LoopFn::cos(m, 1, 3.0);
    assert!((&l3.coeff_or_zero(1) - &s1).norm() < 1e-12);
    assert!((&l3.coeff_or_zero(0) - &s0).norm() < 1e-12);
    let l2 = l.power(2).unwrap();
    assert!((&l2.coeff_or_zero(0) - &LoopFn::sin(m, 1, 2.0)).norm() < 1e-12);
}

#[test]
fn hs_inner_of_inverse_derivative() {
    let p = small();
    let a = Symbol::xi_power(p, -1);
    for mr in [1, 5, 16] {
        let got = a.hs_inner(&a, mr).unwrap();
        let want: f64 = (1..=mr).map(|m| 2.0 / (m * m) as f64).sum();
        assert!((got - Complex64::new(want, 0.0)).norm() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projectors(seed in any::<u64>()) {
        let a = sym(seed, -5, 3, 3);
        let (d, s) = a.split_ds();
        prop_assert_eq!(&(&d + &s), &a);
        prop_assert_eq!(&d.d_part(), &d);
        prop_assert_eq!(&s.s_part(), &s);
        prop_assert!(d.s_part().is_zero());
        prop_assert!(s.d_part().is_zero());
        prop_assert!(d.lowest_order().is_none_or(|o| o >= 0));
        prop_assert!(s.order().is_none_or(|o| o <= -1));
    }

    #[test]
    fn compose_is_associative_on_reported_orders(seed in any::<u64>()) {
        let p = small();
        let n_max = 2;
        let a = sym(seed, -3, n_max, 2);
        let b = sym(seed.wrapping_add(1), -2, n_max, 2);
        let c = sym(seed.wrapping_add(2), -3, 1, 2);
        let lhs = a.compose(&b).unwrap().compose(&c).unwrap();
        let rhs = a.compose(&b.compose(&c).unwrap()).unwrap();
        prop_assert!((&lhs - &rhs).norm_from(p.floor + 2 * n_max) <= 1e-9);
    }

    #[test]
    fn commutator_drops_one_order(seed in any::<u64>(), na in -2i32..=3, nb in -2i32..=3) {
        let a = sym(seed, na - 3, na, 3);
        let b = sym(seed.wrapping_add(7), nb - 3, nb, 3);
        let c = a.commutator(&b).unwrap();
        prop_assert!(c.coeff_or_zero(na + nb).norm() <= 1e-10);
    }

    #[test]
    fn fast_product_matches_reference(seed in any::<u64>()) {
        let p = small();
        let a = sym(seed, -4, 2, 3);
        let b = sym(seed.wrapping_add(3), -4, 2, 3);
        let fast = a.compose(&b).unwrap();
        let slow = a.compose_reference(&b).unwrap();
        prop_assert!((&fast - &slow).norm_from(p.working_floor()) <= 1e-9 * slow.norm().max(1.0));
    }

    #[test]
    fn realization_is_a_morphism(seed in any::<u64>()) {
        // A differential, so the Leibniz sum terminates; columns avoid the
        // zero mode and the cutoff after B moves them by its mode budget
        let p = small();
        let budget = 2;
        let a = sym(seed, 0, 2, budget);
        let b = sym(seed.wrapping_add(5), -3, 1, budget);
        let mr = 12usize;
        let ra = a.realize_matrix(mr).unwrap();
        let rb = b.realize_matrix(mr).unwrap();
        let rab = a.compose(&b).unwrap().realize_matrix(mr).unwrap();
        let prod = &ra * &rb;
        let mr_i = mr as i32;
        let index = |m: i32| if m < 0 { (m + mr_i) as usize } else { (m + mr_i - 1) as usize };
        let mut worst: f64 = 0.0;
        for m in (-mr_i..=mr_i).filter(|m| m.abs() > budget && m.abs() <= mr_i - budget) {
            for r in (-mr_i..=mr_i).filter(|&r| r != 0) {
                let (i, j) = (index(r), index(m));
                worst = worst.max((rab[(i, j)] - prod[(i, j)]).norm());
            }
        }
        prop_assert!(worst <= 1e-8, "worst {worst:e} at floor {}", p.floor);
    }

    #[test]
    fn inverse_of_dressing(seed in any::<u64>()) {
        let p = small();
        let s0 = random_dressing(&mut seeded(seed), &p, 3, 2, 0.5);
        let inv = s0.invert().unwrap();
        let one = Symbol::identity(p);
        prop_assert!((&s0.compose(&inv).unwrap() - &one).norm() <= 1e-10);
        prop_assert!((&inv.compose(&s0).unwrap() - &one).norm() <= 1e-10);
        prop_assert!((&inv.invert().unwrap() - &s0).norm() <= 1e-10);
    }

    #[test]
    fn hs_inner_is_positive(seed in any::<u64>()) {
        let a = sym(seed, -4, -1, 3);
        let v = a.hs_inner(&a, 10).unwrap();
        prop_assert!(v.re >= 0.0);
        prop_assert!(v.im.abs() <= 1e-12 * v.re.max(1.0));
    }
}
