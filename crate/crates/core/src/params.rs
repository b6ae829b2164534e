//! Truncation parameters shared by every layer of the engine.

use crate::error::{Error, Result};

/// All the cutoffs that make the infinite objects finite.
///
/// `floor` is the lowest symbol order on which results are claimed exact;
/// computations run `guard` orders deeper (see [`TruncParams::working_floor`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncParams {
    /// Matrix dimension `d` of the coefficient functions.
    pub dim: usize,
    /// Fourier mode cutoff `M`.
    pub modes: usize,
    /// Lowest reported order `F`.
    pub floor: i32,
    /// Highest order ever retained; higher orders are clipped.
    pub ceiling: i32,
    /// T-valuation cap `V`.
    pub val_cap: u32,
    /// Number of active times `K`.
    pub times: usize,
    /// Extra low orders carried internally.
    pub guard: u32,
    /// Weight of the Leibniz expansion: `A∘B = Σ hbar^k/k! ∂ξ^k A ∂x^k B`.
    /// Always 1 except for h-scaled problems.
    pub hbar: f64,
}

impl Default for TruncParams {
    fn default() -> Self {
        TruncParams {
            dim: 1,
            modes: 32,
            floor: -10,
            ceiling: 14,
            val_cap: 6,
            times: 3,
            guard: 8,
            hbar: 1.0,
        }
    }
}

impl TruncParams {
    /// Lowest order carried by any symbol: `F - g`.
    pub fn working_floor(&self) -> i32 {
        self.floor - self.guard as i32
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be >= 1".into()));
        }
        if self.modes == 0 {
            return Err(Error::InvalidArgument("mode cutoff must be >= 1".into()));
        }
        if !(self.floor <= -1 && 1 <= self.ceiling) {
            return Err(Error::InvalidArgument(format!(
                "need floor <= -1 <= 1 <= ceiling, got floor {} ceiling {}",
                self.floor, self.ceiling
            )));
        }
        if self.val_cap == 0 {
            return Err(Error::InvalidArgument("valuation cap must be >= 1".into()));
        }
        if self.times == 0 {
            return Err(Error::InvalidArgument("need at least one time".into()));
        }
        if !(self.hbar.is_finite() && self.hbar != 0.0) {
            return Err(Error::InvalidArgument("hbar must be finite and nonzero".into()));
        }
        Ok(())
    }

    pub fn with_guard(self, guard: u32) -> Self {
        TruncParams { guard, ..self }
    }

    pub fn with_modes(self, modes: usize) -> Self {
        TruncParams { modes, ..self }
    }

    pub fn with_val_cap(self, val_cap: u32) -> Self {
        TruncParams { val_cap, ..self }
    }
}
