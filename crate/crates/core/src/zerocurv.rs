//! Zero-curvature (Zakharov–Shabat) residuals and the Yang–Mills functional
//! on connection one-forms `θ = Σ_k θ_k dt_k` with series coefficients.
//!
//! Curvature follows the convention `F(θ) = dθ - [θ, θ]` with the usual ½
//! absorbed, so `F_ij = ∂_i θ_j - ∂_j θ_i - [θ_i, θ_j]`.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorization::KPJet;
use crate::params::TruncParams;
use crate::tseries::TSeries;

/// `θ = Σ_{k=1}^{K} θ_k dt_k`.
#[derive(Debug, Clone)]
pub struct ConnForm {
    components: Vec<TSeries>,
}

impl ConnForm {
    pub fn new(components: Vec<TSeries>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("connection needs at least one component".into()))?;
        let p = *first.params();
        if components.iter().any(|c| *c.params() != p) {
            return Err(Error::ParamMismatch("components use different parameters".into()));
        }
        Ok(ConnForm { components })
    }

    pub fn zero(params: TruncParams) -> Self {
        ConnForm {
            components: (1..=params.times)
                .map(|k| TSeries::zero(params, k as i32))
                .collect(),
        }
    }

    /// Number of time directions.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn params(&self) -> &TruncParams {
        self.components[0].params()
    }

    /// Coefficient of `dt_k` (1-based).
    pub fn component(&self, k: usize) -> Result<&TSeries> {
        self.components
            .get(k.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidArgument(format!("no component {k}")))
    }

    pub fn component_mut(&mut self, k: usize) -> Result<&mut TSeries> {
        self.components
            .get_mut(k.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidArgument(format!("no component {k}")))
    }

    pub fn components(&self) -> &[TSeries] {
        &self.components
    }

    pub fn scale_real(&self, c: f64) -> ConnForm {
        ConnForm {
            components: self.components.iter().map(|x| x.scale_real(c)).collect(),
        }
    }

    pub fn checked_add(&self, other: &ConnForm) -> Result<ConnForm> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} vs {} components",
                self.len(),
                other.len()
            )));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.checked_add(b))
            .collect::<Result<_>>()?;
        Ok(ConnForm { components })
    }
}

/// `F = Σ_{i<j} F_ij dt_i ∧ dt_j`; only `i < j` is stored.
#[derive(Debug, Clone)]
pub struct Curvature2Form {
    entries: BTreeMap<(usize, usize), TSeries>,
}

impl Curvature2Form {
    pub fn entry(&self, i: usize, j: usize) -> Option<&TSeries> {
        self.entries.get(&(i, j))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &TSeries)> {
        self.entries.iter()
    }

    /// Max over entries of the series norm.
    pub fn norm(&self) -> f64 {
        self.entries.values().map(TSeries::norm).fold(0.0, f64::max)
    }
}

/// `(Z_D, Z_S)` with `Z_D,k = π_D(Lᵏ)` and `Z_S,k = -π_S(Lᵏ)`, so that
/// `Z_D,k - Z_S,k = Lᵏ`.
pub fn build_z(jet: &KPJet) -> Result<(ConnForm, ConnForm)> {
    let p = *jet.l.params();
    let mut zd = Vec::with_capacity(p.times);
    let mut zs = Vec::with_capacity(p.times);
    let mut pow = jet.l.clone();
    for k in 1..=p.times {
        if k > 1 {
            pow = pow.tmul(&jet.l)?;
        }
        zd.push(pow.d_part());
        zs.push(pow.s_part().scale_real(-1.0));
    }
    Ok((ConnForm::new(zd)?, ConnForm::new(zs)?))
}

fn check_pair(w: &ConnForm, m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 || m > w.len() || n > w.len() || m == n {
        return Err(Error::InvalidArgument(format!(
            "need distinct indices in [1, {}], got ({m}, {n})",
            w.len()
        )));
    }
    Ok(())
}

/// `‖∂_m W_n - ∂_n W_m - sign·[W_m, W_n]‖` over valuations
/// `≤ V - max(m, n)`.
///
/// `Z_D` satisfies this with sign `+1`; the plain S-projections `π_S(Lᵏ)`
/// (that is, `-Z_S`) satisfy it with sign `-1`.
pub fn zs_residual(w: &ConnForm, m: usize, n: usize, sign: f64) -> Result<f64> {
    check_pair(w, m, n)?;
    let cap = w.params().val_cap.saturating_sub(m.max(n) as u32);
    let wm = w.component(m)?;
    let wn = w.component(n)?;
    let lhs = wn.ddt(m)?.checked_sub(&wm.ddt(n)?)?;
    let rhs = wm.commutator(wn)?.scale_real(sign);
    Ok(lhs.checked_sub(&rhs)?.norm_upto(cap))
}

/// `F_ij = ∂_i θ_j - ∂_j θ_i - [θ_i, θ_j]` for every `i < j`, truncated to
/// valuations `≤ V - j`.
pub fn curvature(theta: &ConnForm) -> Result<Curvature2Form> {
    let mut entries = BTreeMap::new();
    for j in 1..=theta.len() {
        for i in 1..j {
            entries.insert((i, j), curvature_entry(theta, i, j)?);
        }
    }
    Ok(Curvature2Form { entries })
}

/// The single entry `F_ij`, `i < j`.
pub fn curvature_entry(theta: &ConnForm, i: usize, j: usize) -> Result<TSeries> {
    if !(1 <= i && i < j && j <= theta.len()) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= i < j <= {}, got ({i}, {j})",
            theta.len()
        )));
    }
    let cap = theta.params().val_cap;
    let ti = theta.component(i)?;
    let tj = theta.component(j)?;
    let f = tj
        .ddt(i)?
        .checked_sub(&ti.ddt(j)?)?
        .checked_sub(&ti.commutator(tj)?)?;
    Ok(f.truncate_val(cap.saturating_sub(j as u32)))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q {
        // Chebyshev guess, then Newton on P_q
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(q, x);
        if d.is_finite() {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

// (P_q(x), P_q'(x))
fn legendre(q: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Parameters of the Yang–Mills quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YmSpec {
    /// Half-width `k` of the cube `[-k, k]ⁿ`.
    pub half_width: f64,
    /// Cube dimension: `t₁, …, t_n` vary, later times are 0.
    pub dim: usize,
    pub i: usize,
    pub j: usize,
    /// Realization cutoff `Mr`.
    pub mr: usize,
    /// Gauss–Legendre points per axis.
    pub points: usize,
}

/// `YM_{k,n}(θ)_ij = ∫_{[-k,k]ⁿ} tr(F_ij F_ijᴴ)` with `F_ij(t)` realized on
/// the modes `0 < |m| ≤ Mr` after dropping orders below `F`.
pub fn ym_value(theta: &ConnForm, spec: &YmSpec) -> Result<f64> {
    let p = *theta.params();
    let YmSpec {
        half_width: k,
        dim: n,
        i,
        j,
        mr,
        points,
    } = *spec;
    if !(1 <= i && i < j && j <= p.times) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= i < j <= {}, got ({i}, {j})",
            p.times
        )));
    }
    if n == 0 || n > p.times {
        return Err(Error::InvalidArgument(format!(
            "cube dimension {n} outside [1, {}]",
            p.times
        )));
    }
    if mr > p.modes {
        return Err(Error::InvalidArgument(format!(
            "realization cutoff {mr} exceeds mode cutoff {}",
            p.modes
        )));
    }
    if points == 0 || !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidArgument("bad quadrature size or cube".into()));
    }
    let fij = curvature_entry(theta, i, j)?;
    let (x, w) = gauss_legendre(points);
    let total = points.pow(n as u32);
    let values: Vec<Result<f64>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut t = vec![0.0; p.times];
            let mut weight = k.powi(n as i32);
            let mut r = idx;
            for tn in t.iter_mut().take(n) {
                let a = r % points;
                r /= points;
                *tn = k * x[a];
                weight *= w[a];
            }
            let f = fij.eval_t(&t).truncated_below(p.floor);
            let m = f.realize_matrix(mr)?;
            Ok(weight * m.norm_squared())
        })
        .collect();
    let mut acc = 0.0;
    for v in values {
        acc += v?;
    }
    Ok(acc)
}
