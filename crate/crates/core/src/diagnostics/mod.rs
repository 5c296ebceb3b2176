//! Checks of the hypotheses behind the limit laws: short returns (Assumption C),
//! the SP correlation bound, the Gal–Koksma residual, recurrence sets and the
//! quasi-Hölder norm of target indicators.

mod holder;
mod pieces;
mod recurrence;
mod returns;
mod sp;

pub use holder::{oscillation_integral, quasi_holder_seminorm, GridFunction, QuasiHolder};
pub use pieces::{for_each_piece, split_arc, Piece};
pub use recurrence::recurrence_set_measure;
pub use returns::{
    assumption_c_report, period_of, short_return_measure, AssumptionCParams, AssumptionCReport, EtaRegime, Estimate,
    IndexCheck, Method, Verdict, PERIOD_SEARCH,
};
pub use sp::{gal_koksma_from_sums, gal_koksma_residual, sp_constant, sp_dyadic_windows, GkPoint, SpWindow};

/// Shared settings for checkers that are exact where possible and sample otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Largest number of preimage intervals before giving up on the exact route.
    pub cap: u64,
    pub samples: usize,
    pub seed: u64,
    pub force_monte_carlo: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { cap: 10_000_000, samples: 100_000, seed: 0, force_monte_carlo: false }
    }
}
