use std::fmt::Write as _;

use nfkp::factorization::{conj_consistency, kp_residual, kp_solve, lipschitz_probe, KPJet};
use nfkp::kp2::{
    check_t12, check_t13, check_t23, equiv_t23, extract_u_jet, flow_delinearized, flows_commute, jet_on_axis,
    u_distance, FlowOptions,
};
use nfkp::tseries::{TMono, TSeries};
use nfkp::zerocurv::{build_z, ym_value, zs_residual, ConnForm, YmSpec};
use nfkp::{LoopFn, Symbol, TruncParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::report::{Anchor, Bound, ReportBuilder};

pub const FACTOR_TOL: f64 = 1e-10;
pub const KP_TOL: f64 = 1e-9;
pub const ZS_TOL: f64 = 1e-9;
pub const SIGN_FLIP_MIN: f64 = 1e-2;
pub const YM_RATIO: f64 = 1e-4;
pub const YM_PERTURBATION: f64 = 1e-2;
pub const YM_SAMPLES: usize = 10;
pub const EQUIV_TOL: f64 = 1e-10;
pub const TABLE_TOL: f64 = 1e-10;
pub const COMMUTE_TOL: f64 = 1e-6;
pub const LIPSCHITZ_SPREAD: (f64, f64) = (0.5, 2.0);

/// A named plot-data file: whitespace-separated columns, `#` header.
pub struct PlotFile {
    pub name: String,
    pub body: String,
}

pub struct Outcome {
    pub report: ReportBuilder,
    pub files: Vec<PlotFile>,
}

fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", if x == 0.0 { 0.0 } else { x })
    } else {
        "nan".into()
    }
}

fn solve(cfg: &RunConfig) -> nfkp::Result<KPJet> {
    let p = cfg.params();
    kp_solve(&cfg.dressing()?, &p)
}

pub fn factorize(cfg: &RunConfig, mut rb: ReportBuilder) -> Outcome {
    let p = cfg.params();
    let mut files = Vec::new();
    let jet = match solve(cfg) {
        Ok(jet) => jet,
        Err(e) => {
            rb.push_error("factorization.residual", Anchor::Factorization, Bound::AtMost { tol: FACTOR_TOL }, &e);
            return Outcome { report: rb, files };
        }
    };
    if rb.runs("factorization") {
        let res = jet
            .s
            .tmul(&jet.u)
            .and_then(|su| su.checked_sub(&jet.y))
            .map(|d| d.norm());
        match res {
            Ok(v) => rb.push("factorization.residual", Anchor::Factorization, v, Bound::AtMost { tol: FACTOR_TOL }),
            Err(e) => rb.push_error("factorization.residual", Anchor::Factorization, Bound::AtMost { tol: FACTOR_TOL }, &e),
        }
        let y_diff = jet.y.terms().all(|(_, a)| a.lowest_order().is_none_or(|o| o >= 0));
        rb.push_holds("factorization.y_differential", Anchor::Factorization, y_diff);
        let s_neg = jet.s.terms().all(|(m, a)| {
            let a = if m.val() == 0 { a.checked_sub(&Symbol::identity(p)) } else { Ok(a.clone()) };
            a.is_ok_and(|a| a.order().is_none_or(|o| o <= -1))
        });
        rb.push_holds("factorization.s_negative", Anchor::Factorization, s_neg);
        let growth = [&jet.s, &jet.y, &jet.l].iter().all(|x| x.check_growth().is_ok());
        rb.push_holds("factorization.growth", Anchor::Factorization, growth);
    }
    if rb.runs("smoothness") {
        let dir = Symbol::monomial(p, -1, LoopFn::cos(p.modes, 1, 1.0));
        let bound = Bound::Within {
            lo: LIPSCHITZ_SPREAD.0,
            hi: LIPSCHITZ_SPREAD.1,
        };
        let probe = dir.and_then(|dir| {
            let c3 = lipschitz_probe(&jet.s0, &dir, &p, 1e-3)?;
            let c4 = lipschitz_probe(&jet.s0, &dir, &p, 1e-4)?;
            Ok((c3, c4))
        });
        match probe {
            Ok((c3, c4)) => rb.push_note(
                "smoothness.lipschitz_ratio",
                Anchor::Smoothness,
                c3 / c4,
                bound,
                Some(format!("C(1e-3) = {}, C(1e-4) = {}", fmt17(c3), fmt17(c4))),
            ),
            Err(e) => rb.push_error("smoothness.lipschitz_ratio", Anchor::Smoothness, bound, &e),
        }
    }
    if cfg.outputs.series {
        files.push(PlotFile {
            name: "S.json".into(),
            body: series_json(&jet.s),
        });
        files.push(PlotFile {
            name: "Y.json".into(),
            body: series_json(&jet.y),
        });
    }
    Outcome { report: rb, files }
}

#[derive(serde::Serialize)]
struct SeriesRow {
    exponents: Vec<u32>,
    order: i32,
    mode: i32,
    #[serde(serialize_with = "crate::report::num17_vec")]
    re: Vec<f64>,
    #[serde(serialize_with = "crate::report::num17_vec")]
    im: Vec<f64>,
}

/// Nonzero Fourier coefficients of every monomial and order, one row each.
fn series_json(x: &TSeries) -> String {
    let modes = x.params().modes as i32;
    let mut rows = Vec::new();
    for (m, a) in x.terms() {
        for (n, f) in a.terms() {
            for k in -modes..=modes {
                let c = f.coeff(k);
                if c.iter().all(|z| z.norm() == 0.0) {
                    continue;
                }
                rows.push(SeriesRow {
                    exponents: m.exponents().to_vec(),
                    order: n,
                    mode: k,
                    re: c.iter().map(|z| z.re).collect(),
                    im: c.iter().map(|z| z.im).collect(),
                });
            }
        }
    }
    let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
    s.push('\n');
    s
}

fn random_trig(rng: &mut ChaCha8Rng, d: usize, modes: usize, budget: i32) -> LoopFn {
    let mut f = LoopFn::zero(d, modes);
    for k in 0..=budget {
        for r in 0..d * d {
            let re = rng.random_range(-1.0..1.0);
            let z = Complex64::new(re, if k == 0 { 0.0 } else { rng.random_range(-1.0..1.0) });
            f.coeff_mut(k)[r] += z;
            if k > 0 {
                f.coeff_mut(-k)[r] += z.conj();
            }
        }
    }
    f
}

// unit-size connection with orders in [-3, -1]; component k depends on the
// other times so every curvature entry sees it
fn random_perturbation(rng: &mut ChaCha8Rng, p: &TruncParams) -> nfkp::Result<ConnForm> {
    let mut parts = Vec::new();
    for k in 1..=p.times {
        let mut x = TSeries::zero(*p, k as i32);
        let mut monos = vec![TMono::one(p.times)];
        monos.extend((1..=p.times).filter(|&o| o != k).map(|o| TMono::t(p.times, o)));
        for m in monos {
            let terms: Vec<(i32, LoopFn)> = (-3..=-1).map(|n| (n, random_trig(rng, p.dim, p.modes, 2))).collect();
            let a = Symbol::from_terms(*p, &terms)?;
            let norm = a.norm();
            x.set_coeff(m, a.scale_real(1.0 / norm))?;
        }
        parts.push(x);
    }
    ConnForm::new(parts)
}

pub fn check(cfg: &RunConfig, mut rb: ReportBuilder) -> Outcome {
    let p = cfg.params();
    let files = Vec::new();
    let jet = match solve(cfg) {
        Ok(jet) => jet,
        Err(e) => {
            rb.push_error("kp.solve", Anchor::KpHierarchy, Bound::AtMost { tol: KP_TOL }, &e);
            return Outcome { report: rb, files };
        }
    };
    let kp_bound = Bound::AtMost { tol: KP_TOL };
    if rb.runs("kp") {
        for n in 1..=p.times {
            match kp_residual(&jet, n) {
                Ok(r) => {
                    rb.push(format!("kp.n{n}.d_form"), Anchor::KpHierarchy, r.d_form, kp_bound);
                    rb.push(format!("kp.n{n}.s_form"), Anchor::KpHierarchy, r.s_form, kp_bound);
                    rb.push(format!("kp.n{n}.forms_agree"), Anchor::KpHierarchy, r.forms_agree, kp_bound);
                }
                Err(e) => rb.push_error(format!("kp.n{n}"), Anchor::KpHierarchy, kp_bound, &e),
            }
        }
        match conj_consistency(&jet) {
            Ok(v) => rb.push("kp.conj_consistency", Anchor::Conjugation, v, kp_bound),
            Err(e) => rb.push_error("kp.conj_consistency", Anchor::Conjugation, kp_bound, &e),
        }
    }
    let forms = build_z(&jet);
    if rb.runs("zs") {
        let zs_bound = Bound::AtMost { tol: ZS_TOL };
        match &forms {
            Ok((zd, zs)) => {
                let plain = zs.scale_real(-1.0);
                let mut flipped = f64::INFINITY;
                for n in 2..=p.times {
                    for m in 1..n {
                        let run = |w: &ConnForm, sign: f64| zs_residual(w, m, n, sign).unwrap_or(f64::NAN);
                        rb.push(format!("zs.d.{m}{n}"), Anchor::ZeroCurvature, run(zd, 1.0), zs_bound);
                        rb.push(format!("zs.s.{m}{n}"), Anchor::ZeroCurvature, run(&plain, -1.0), zs_bound);
                        flipped = flipped.min(run(zd, -1.0)).min(run(&plain, 1.0));
                    }
                }
                if cfg.trivial_dressing() {
                    // every sign satisfies the equations when Z_S = 0
                    rb.push_holds("zs.trivial_forms", Anchor::ZeroCurvature, zs.components().iter().all(|c| c.norm() == 0.0));
                } else {
                    rb.push("zs.sign_flip", Anchor::ZeroCurvature, flipped, Bound::AtLeast { min: SIGN_FLIP_MIN });
                }
            }
            Err(e) => rb.push_error("zs", Anchor::ZeroCurvature, zs_bound, e),
        }
    }
    if rb.runs("ym") && p.times >= 2 {
        let ym_bound = Bound::AtMost { tol: YM_RATIO };
        let spec = YmSpec {
            half_width: cfg.cube.k,
            dim: cfg.cube.n,
            i: p.times - 1,
            j: p.times,
            mr: cfg.mr,
            points: cfg.q,
        };
        let run = || -> nfkp::Result<(f64, f64, bool)> {
            let zs = match &forms {
                Ok((_, zs)) => zs,
                Err(e) => return Err(nfkp::Error::Order(format!("zero-curvature forms unavailable: {e}"))),
            };
            let base = ym_value(zs, &spec)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut smallest = f64::INFINITY;
            let mut nonneg = base >= 0.0;
            for _ in 0..YM_SAMPLES {
                let theta = zs.checked_add(&random_perturbation(&mut rng, &p)?.scale_real(YM_PERTURBATION))?;
                let v = ym_value(&theta, &spec)?;
                nonneg &= v >= 0.0;
                smallest = smallest.min(v);
            }
            Ok((base, smallest, nonneg))
        };
        match run() {
            Ok((base, smallest, nonneg)) => {
                rb.push_note(
                    "ym.ratio",
                    Anchor::YangMills,
                    base / smallest,
                    ym_bound,
                    Some(format!("YM(Z_S) = {}, smallest perturbed = {}", fmt17(base), fmt17(smallest))),
                );
                rb.push_holds("ym.nonnegative", Anchor::YangMills, nonneg);
            }
            Err(e) => rb.push_error("ym.ratio", Anchor::YangMills, ym_bound, &e),
        }
    }
    if rb.runs("kp2") && p.times >= 3 {
        let t13 = check_t13(&jet);
        let t23 = check_t23(&jet);
        let pick = |r: &nfkp::Result<[f64; 2]>, i: usize| match r {
            Ok(v) => Ok(v[i]),
            Err(e) => Err(nfkp::Error::Order(e.to_string())),
        };
        let results: [(&str, nfkp::Result<f64>); 5] = [
            ("kp2.t12", check_t12(&jet)),
            ("kp2.t13.u1", pick(&t13, 0)),
            ("kp2.t13.u2", pick(&t13, 1)),
            ("kp2.t23.first", pick(&t23, 0)),
            ("kp2.t23.second", pick(&t23, 1)),
        ];
        for (name, r) in results {
            match r {
                Ok(v) => rb.push(name, Anchor::Kp2Reduction, v, kp_bound),
                Err(e) => rb.push_error(name, Anchor::Kp2Reduction, kp_bound, &e),
            }
        }
        let eq = Bound::AtMost { tol: EQUIV_TOL };
        match extract_u_jet(&jet.l).and_then(|u| equiv_t23(&u)) {
            Ok(v) => rb.push("kp2.equiv_t23", Anchor::Kp2Reduction, v, eq),
            Err(e) => rb.push_error("kp2.equiv_t23", Anchor::Kp2Reduction, eq, &e),
        }
    }
    Outcome { report: rb, files }
}

pub fn flow(cfg: &RunConfig, mut rb: ReportBuilder) -> Outcome {
    let p = cfg.params();
    let mut files = Vec::new();
    let jet = match solve(cfg) {
        Ok(jet) => jet,
        Err(e) => {
            rb.push_error("flow.solve", Anchor::NonFormalFlow, Bound::Holds, &e);
            return Outcome { report: rb, files };
        }
    };
    let ratio_min = 0.7 * 2f64.powi(p.val_cap as i32 + 1);
    for &n in &cfg.flow.directions {
        let group = format!("flow.t{n}");
        if !rb.runs(&group) {
            continue;
        }
        let mut table = String::from("# s tau error\n");
        let mut errs = Vec::new();
        let mut last = None;
        for &s in &cfg.flow.scales {
            let tau = s.powi(n as i32);
            let opts = FlowOptions::with_dt(cfg.flow.dt.map_or(tau / 256.0, |dt| dt.min(tau)));
            let res = flow_delinearized(&jet.l0, n, tau, &opts).and_then(|f| {
                let exact = jet_on_axis(&jet.l, n, tau);
                Ok((u_distance(&f.l, &exact)?, f.l, exact))
            });
            match res {
                Ok((e, fl, ex)) => {
                    errs.push(e);
                    let _ = writeln!(table, "{} {} {}", fmt17(s), fmt17(tau), fmt17(e));
                    last = Some((fl, ex));
                }
                Err(err) => {
                    errs.push(f64::NAN);
                    let _ = writeln!(table, "{} {} nan", fmt17(s), fmt17(tau));
                    log::warn!("flow t{n} at s = {s}: {err}");
                }
            }
        }
        if cfg.trivial_dressing() {
            // L = ξ is a fixed point: no rate to measure, both sides exact
            rb.push_holds(format!("{group}.fixed_point"), Anchor::NonFormalFlow, errs.iter().all(|&e| e == 0.0));
            files.push(PlotFile {
                name: format!("flow_t{n}_convergence.dat"),
                body: table,
            });
            continue;
        }
        for (i, w) in errs.windows(2).enumerate() {
            rb.push(
                format!("{group}.ratio.{i}"),
                Anchor::NonFormalFlow,
                w[0] / w[1],
                Bound::AtLeast { min: ratio_min },
            );
        }
        files.push(PlotFile {
            name: format!("flow_t{n}_convergence.dat"),
            body: table,
        });
        if let Some((fl, ex)) = last {
            files.push(PlotFile {
                name: format!("flow_t{n}_profile.dat"),
                body: profile(&fl, &ex),
            });
        }
    }
    if rb.runs("flow.commute") {
        let t = cfg.flow.t_end.get();
        let opts = FlowOptions::with_dt(cfg.flow_dt(t));
        let bound = Bound::AtMost { tol: COMMUTE_TOL };
        for n in 2..=p.times {
            for m in 1..n {
                let name = format!("flow.commute.{m}{n}");
                match flows_commute(&jet.l0, m, n, t, &opts) {
                    Ok(v) => rb.push(name, Anchor::CommutingFlows, v, bound),
                    Err(e) => rb.push_error(name, Anchor::CommutingFlows, bound, &e),
                }
            }
        }
    }
    Outcome { report: rb, files }
}

/// `x`, `u₋₁` of the flow and of the jet on a 64-point grid.
fn profile(flowed: &Symbol, jet: &Symbol) -> String {
    let mut out = String::from("# x u1_flow u1_jet\n");
    let (a, b) = (flowed.coeff_or_zero(-1), jet.coeff_or_zero(-1));
    for i in 0..64 {
        let x = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
        let _ = writeln!(
            out,
            "{} {} {}",
            fmt17(x),
            fmt17(a.eval_at(x)[(0, 0)].re),
            fmt17(b.eval_at(x)[(0, 0)].re)
        );
    }
    out
}

pub fn paper_table(cfg: &RunConfig, mut rb: ReportBuilder) -> Outcome {
    let p = cfg.params();
    let m = p.modes;
    let (u1, u2) = match &cfg.table {
        Some(t) => (cfg.loopfn(&t.u1), cfg.loopfn(&t.u2)),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let budget = (m / 4).clamp(1, 8) as i32;
            (random_trig(&mut rng, 1, m, budget), random_trig(&mut rng, 1, m, budget))
        }
    };
    let one = LoopFn::identity(1, m);
    let zero = LoopFn::zero(1, m);
    let bound = Bound::AtMost { tol: TABLE_TOL };
    let built = Symbol::from_terms(p, &[(1, one.clone()), (-1, u1.clone()), (-2, u2.clone())]).and_then(|l| {
        let l2 = l.power(2)?;
        let l3 = l.power(3)?;
        let comm = l2.d_part().commutator(&l3.d_part())?;
        Ok((l2, l3, comm))
    });
    let (l2, l3, comm) = match built {
        Ok(x) => x,
        Err(e) => {
            rb.push_error("table", Anchor::SymbolTable, bound, &e);
            return Outcome { report: rb, files: Vec::new() };
        }
    };
    let rows2 = [zero.clone(), one.clone(), zero.clone(), u1.scale_real(2.0)];
    let rows3 = [
        one.clone(),
        zero.clone(),
        u1.scale_real(3.0),
        &u2.scale_real(3.0) + &u1.dx().scale_real(3.0),
    ];
    let c1 = &u1.dx_n(2).scale_real(3.0) + &u2.dx().scale_real(6.0);
    let c0 = &(&(&u1.dx() * &u1).scale_real(-6.0) + &u1.dx_n(3)) + &u2.dx_n(2).scale_real(3.0);

    let mut side = String::from("# row x engine closed_form\n");
    let mut row = |rb: &mut ReportBuilder, name: String, anchor: Anchor, engine: LoopFn, closed: &LoopFn| {
        let err = (&engine - closed).norm();
        rb.push_note(
            name.clone(),
            anchor,
            err,
            bound,
            Some(format!("engine norm {}, closed-form norm {}", fmt17(engine.norm()), fmt17(closed.norm()))),
        );
        for i in 0..16 {
            let x = 2.0 * std::f64::consts::PI * i as f64 / 16.0;
            let _ = writeln!(
                side,
                "{name} {} {} {}",
                fmt17(x),
                fmt17(engine.eval_at(x)[(0, 0)].re),
                fmt17(closed.eval_at(x)[(0, 0)].re)
            );
        }
    };
    for (i, order) in (0..=3).rev().enumerate() {
        row(&mut rb, format!("table.l2.sigma{order}"), Anchor::SymbolTable, l2.coeff_or_zero(order), &rows2[i]);
        row(&mut rb, format!("table.l3.sigma{order}"), Anchor::SymbolTable, l3.coeff_or_zero(order), &rows3[i]);
    }
    row(&mut rb, "table.commutator.xi1".into(), Anchor::Commutator, comm.coeff_or_zero(1), &c1);
    row(&mut rb, "table.commutator.xi0".into(), Anchor::Commutator, comm.coeff_or_zero(0), &c0);
    let rest = comm
        .terms()
        .filter(|&(n, _)| n != 0 && n != 1 && n >= p.working_floor())
        .map(|(_, f)| f.norm())
        .fold(0.0, f64::max);
    rb.push("table.commutator.rest", Anchor::Commutator, rest, bound);
    let files = vec![PlotFile {
        name: "paper_table.dat".into(),
        body: side,
    }];
    Outcome { report: rb, files }
}
