use crate::domain::{Hypothesis, Transcript};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

use super::cells::{WeightedCells, Weighting};

/// Improved comparator `f' = p + eta f` built from a correlated `f`.
#[derive(Clone, Debug)]
pub struct Witness<R: Real = f64> {
    pub f_prime: Hypothesis<R>,
    /// Mean correlation `rho_{p,f}` of `f` with the cell residuals.
    pub alpha: R,
    /// Mean of `f(x)^2` on the cell.
    pub mu: R,
    pub eta: R,
    /// Mean per-round squared-loss improvement of `f'` over predicting `p`.
    pub improvement: R,
}

/// Given `f` with values in `[-1, 1]` and positive correlation `alpha` on a
/// cell, returns `f'(x) = p + min(1, alpha / mu) f(x)` whose mean squared loss
/// on the cell beats the constant `p` by at least `alpha^2`.
pub fn witness_f_prime<R: Real>(
    tr: &Transcript<R>,
    cell: usize,
    f: &Hypothesis<R>,
    use_pseudo: bool,
) -> Result<Witness<R>> {
    if cell >= tr.grid().len() {
        return Err(invalid(format!("cell {cell} outside the grid")));
    }
    let weighting = if use_pseudo {
        Weighting::Pseudo
    } else {
        Weighting::Realized
    };
    let cells = WeightedCells::from_transcript(tr, weighting);
    let p = tr.grid().point(cell);
    let bound = R::one() + R::tol(1e-12);
    let mut mass = R::zero();
    let mut corr = R::zero();
    let mut sq = R::zero();
    for (w, x, y) in cells.entries(cell) {
        let v = f.eval(x);
        if !(v.abs() <= bound) {
            return Err(Error::PreconditionViolated(format!(
                "comparator value {v} outside [-1, 1]"
            )));
        }
        mass += w;
        corr += w * v * (y - p);
        sq += w * v * v;
    }
    if !(mass > R::zero()) {
        return Err(Error::PreconditionViolated(format!("cell {cell} carries no mass")));
    }
    let alpha = corr / mass;
    if !(alpha > R::zero()) {
        return Err(Error::PreconditionViolated(format!(
            "correlation {alpha} is not positive; negate the comparator"
        )));
    }
    let mu = sq / mass;
    let eta = (alpha / mu).min(R::one());
    let f_prime = Hypothesis::Shifted {
        offset: p,
        scale: eta,
        base: Box::new(f.clone()),
    };
    let mut gain = R::zero();
    for (w, x, y) in cells.entries(cell) {
        let before = p - y;
        let after = f_prime.eval(x) - y;
        gain += w * (before * before - after * after);
    }
    let improvement = gain / mass;
    if improvement < alpha * alpha - R::tol(1e-9) {
        return Err(Error::NumericFailure {
            what: "witness improvement below alpha^2",
            residual: (alpha * alpha - improvement).as_f64(),
        });
    }
    Ok(Witness {
        f_prime,
        alpha,
        mu,
        eta,
        improvement,
    })
}
