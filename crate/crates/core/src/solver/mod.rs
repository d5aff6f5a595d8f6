//! Alternating discrete optimization of user codes, item codes, delegates and
//! the encoder.
//!
//! The pairwise term sums over every (user, positive, negative) triple, with
//! negatives being the full complement of a user's positives. Nothing here
//! enumerates triples: user updates expand the pair sums into per-user sums
//! over positives plus the global item sum `S = D 1` and Gram matrix
//! `G = D D^T`; item updates use per-user positive sums `P_u` and a handful
//! of `z_u`-weighted global user aggregates, refreshed incrementally on every
//! accepted bit flip.

mod fit;
mod item_phase;
mod projection;
mod state;
mod user_phase;

pub use fit::{fit, fit_excluding, FitOutput, PhaseTimes};
pub use projection::{project_delegate, RANK_TOLERANCE};
pub use state::SolverState;

/// Outer loop stops once the relative objective change stays below this...
pub const CONVERGENCE_TOL: f64 = 1e-5;
/// ...for this many consecutive iterations.
pub const CONVERGENCE_PATIENCE: usize = 3;

/// `-sgn(K(hat, current))`: move to the sign opposite `hat`, or stay put
/// when `hat` is exactly zero.
#[inline]
pub(crate) fn dcd_bit(hat: f64, current: f64) -> f64 {
    if hat > 0.0 {
        -1.0
    } else if hat < 0.0 {
        1.0
    } else {
        current
    }
}
