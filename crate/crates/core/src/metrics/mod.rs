//! Swap multicalibration, swap regret and swap omniprediction error functionals
//! of a transcript, with exact per-cell suprema where closed forms exist.
//!
//! Empty cells contribute zero everywhere. Suprema over the linear class use the
//! theta-ball itself as the evaluation set; every report says how its supremum
//! was taken.

mod calibration;
mod cells;
mod omni;
mod regret;
mod report;
mod witness;

pub use calibration::{cal, mcal, mcal_with, psmcal, smcal, swap_calibration};
pub use cells::{cell_statistics, CellMoments, CellStatistics, WeightedCells, Weighting};
pub use omni::{affine_subgradient_min, somni, somni_with, swap_omni};
pub use regret::{
    cell_affine_loss, cell_ball_loss, constrained_least_squares, psreg, quadratic_loss, sreg, swap_regret,
};
pub use report::MetricReport;
pub use witness::{witness_f_prime, Witness};

use crate::domain::DEFAULT_MEMBER_CAP;

/// Solver and enumeration settings shared by the metrics.
#[derive(Clone, Debug)]
pub struct MetricOptions {
    /// Cover radius for single-comparator suprema over the ball; `1/sqrt(T)` when unset.
    pub cover_eps: Option<f64>,
    pub member_cap: usize,
    /// Projected subgradient iterations per start.
    pub iterations: usize,
    /// Step constant `c` of the `c / sqrt(k)` schedule.
    pub step: f64,
    /// Extra random starts for convex losses.
    pub restarts: usize,
    /// Extra random starts for v-shaped losses.
    pub nonconvex_restarts: usize,
    pub seed: u64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            cover_eps: None,
            member_cap: DEFAULT_MEMBER_CAP,
            iterations: 500,
            step: 1.0,
            restarts: 0,
            nonconvex_restarts: 16,
            seed: 0,
        }
    }
}
