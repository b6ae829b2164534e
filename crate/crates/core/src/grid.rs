//! Collocation grid used to accumulate many coefficient products at once.
//!
//! A product of two functions with modes in `[-M, M]` has modes in
//! `[-2M, 2M]`; sampled on `n ≥ 3M + 1` points, the aliased modes land
//! outside `[-M, M]`, so truncating the transform of a sum of such products
//! reproduces the truncated convolutions exactly (up to rounding).

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::loopfn::LoopFn;

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<Plans>>> = RefCell::new(HashMap::new());
}

fn plans(n: usize) -> Arc<Plans> {
    PLANS.with(|cell| {
        cell.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Plans {
                    fwd: planner.plan_fft_forward(n),
                    inv: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    })
}

/// Number of collocation points for mode cutoff `modes`.
pub(crate) fn grid_size(modes: usize) -> usize {
    (3 * modes + 1).next_power_of_two()
}

/// Samples of a `d×d` function, stored entry-major: `data[e * n + j]`.
#[derive(Clone)]
pub(crate) struct GridFn {
    pub n: usize,
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl GridFn {
    pub fn zeros(dim: usize, n: usize) -> Self {
        GridFn {
            n,
            dim,
            data: vec![Complex64::new(0.0, 0.0); n * dim * dim],
        }
    }

    /// Samples `f` after multiplying mode `m` by `weight(m)`.
    pub fn from_loopfn_weighted(f: &LoopFn, n: usize, weight: impl Fn(i32) -> Complex64) -> Self {
        let dim = f.dim();
        let mm = f.modes() as i32;
        let mut g = GridFn::zeros(dim, n);
        let inv = plans(n).inv.clone();
        for e in 0..dim * dim {
            let buf = &mut g.data[e * n..(e + 1) * n];
            for m in -mm..=mm {
                let c = f.coeff(m)[e];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                buf[m.rem_euclid(n as i32) as usize] = c * weight(m);
            }
            inv.process(buf);
        }
        g
    }

    pub fn from_loopfn(f: &LoopFn, n: usize) -> Self {
        Self::from_loopfn_weighted(f, n, |_| Complex64::new(1.0, 0.0))
    }

    /// Transforms back and keeps modes `|m| ≤ modes`.
    pub fn to_loopfn(&self, modes: usize) -> LoopFn {
        self.to_loopfn_support(modes, modes)
    }

    /// As [`GridFn::to_loopfn`], additionally zeroing modes `|m| > support`
    /// (where the exact result is known to vanish, so only round-off lives).
    pub fn to_loopfn_support(&self, modes: usize, support: usize) -> LoopFn {
        let n = self.n;
        let dim = self.dim;
        let mut out = LoopFn::zero(dim, modes);
        let fwd = plans(n).fwd.clone();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / n as f64;
        let mm = modes.min(support) as i32;
        for e in 0..dim * dim {
            buf.copy_from_slice(&self.data[e * n..(e + 1) * n]);
            fwd.process(&mut buf);
            for m in -mm..=mm {
                out.coeff_mut(m)[e] = buf[m.rem_euclid(n as i32) as usize] * scale;
            }
        }
        out
    }

    /// `self += c · a ⊙ b` with pointwise matrix products.
    pub fn add_product(&mut self, c: Complex64, a: &GridFn, b: &GridFn) {
        let n = self.n;
        let d = self.dim;
        if d == 1 {
            for ((acc, x), y) in self.data.iter_mut().zip(&a.data).zip(&b.data) {
                *acc += c * x * y;
            }
            return;
        }
        for r in 0..d {
            for s in 0..d {
                let out = (r * d + s) * n;
                for l in 0..d {
                    let ai = (r * d + l) * n;
                    let bi = (l * d + s) * n;
                    for j in 0..n {
                        self.data[out + j] += c * a.data[ai + j] * b.data[bi + j];
                    }
                }
            }
        }
    }

    /// Pointwise inverse of every node matrix; `None` if any node is
    /// numerically singular.
    pub fn pointwise_inverse(&self) -> Option<GridFn> {
        let n = self.n;
        let d = self.dim;
        let mut out = GridFn::zeros(d, n);
        for j in 0..n {
            let m = nalgebra::DMatrix::from_fn(d, d, |r, s| self.data[(r * d + s) * n + j]);
            let inv = m.clone().try_inverse()?;
            let scale = m.norm() * inv.norm();
            if !scale.is_finite() || scale > 1e12 {
                return None;
            }
            for r in 0..d {
                for s in 0..d {
                    out.data[(r * d + s) * n + j] = inv[(r, s)];
                }
            }
        }
        Some(out)
    }
}
