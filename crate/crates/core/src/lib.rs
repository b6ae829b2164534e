//! Symbol calculus and KP hierarchy jets on the circle, with every infinite
//! object truncated to something finite and checkable.
//!
//! The layers build on each other:
//!
//! - [`loopfn`]: matrix-valued trigonometric polynomials `LoopFn`.
//! - [`symbol`]: truncated pseudo-differential symbols `Σ aₙ(x) ξⁿ` with
//!   Leibniz composition.
//! - [`tseries`]: series in the times `t₁, …, t_K` graded by
//!   `val(tₙ) = n` and cut at `V`.
//! - [`factorization`]: `S∘U = Y` for `U = exp(Σ tₙ L₀ⁿ)`, which yields
//!   the KP jet `L = S L₀ S⁻¹`.
//! - [`zerocurv`]: zero-curvature forms and the Yang-Mills functional.
//! - [`kp2`]: the KP-II reduction and direct integration of the flows.
//!
//! ```
//! use nfkp::factorization::{kp_residual, kp_solve};
//! use nfkp::{LoopFn, Symbol, TruncParams};
//!
//! let p = TruncParams { floor: -4, ..TruncParams::default() };
//! let mut s0 = Symbol::identity(p);
//! s0.set_coeff(-1, LoopFn::cos(p.modes, 1, 1.0)).unwrap();
//! let jet = kp_solve(&s0, &p).unwrap();
//! assert!(kp_residual(&jet, 2).unwrap().max() < 1e-9);
//! ```

pub mod error;
pub mod factorization;
pub mod kp2;
mod grid;
pub mod loopfn;
pub mod params;
pub mod symbol;
pub mod tseries;
pub mod zerocurv;

pub use error::{Error, Result};
pub use loopfn::LoopFn;
pub use params::TruncParams;
pub use symbol::{Symbol, SymbolSpace};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/symbols.md")]
    mod symbols {}
    #[doc = include_str!("../../../book/src/tseries.md")]
    mod tseries {}
    #[doc = include_str!("../../../book/src/factorization.md")]
    mod factorization {}
    #[doc = include_str!("../../../book/src/zerocurv.md")]
    mod zerocurv {}
    #[doc = include_str!("../../../book/src/kp2.md")]
    mod kp2 {}
    #[doc = include_str!("../../../book/src/accuracy.md")]
    mod accuracy {}
}
