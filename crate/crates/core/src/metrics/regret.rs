use rayon::prelude::*;

use crate::domain::{cover_points, Hypothesis, HypothesisClass, Transcript};
use crate::error::{invalid, Result};
use crate::linalg::{combine, ridge_multiplier, Matrix, SymmetricEigen};
use crate::scalar::{dot, norm2, Real};

use super::cells::{CellMoments, WeightedCells, Weighting};
use super::{MetricOptions, MetricReport};

/// `argmin_{||theta|| <= radius} theta^T S theta - 2 b^T theta` for PSD `S`.
///
/// The unconstrained minimizer is the minimum-norm (pseudo-inverse) solution;
/// when it leaves the ball, the ridge multiplier is found by bisection so the
/// solution norm meets the radius within `1e-9`.
pub fn constrained_least_squares<R: Real>(gram: &Matrix<R>, cross: &[R], radius: R) -> Result<Vec<R>> {
    let eig = SymmetricEigen::new(gram)?;
    let top = eig.values.iter().fold(R::zero(), |a, &v| a.max(v.abs()));
    let cutoff = top * R::tol(1e-12);
    let lambdas: Vec<R> = eig.values.iter().map(|&l| l.max(R::zero())).collect();
    let nums: Vec<R> = eig
        .vectors
        .iter()
        .zip(&lambdas)
        .map(|(v, &l)| if l > cutoff { dot(v, cross) } else { R::zero() })
        .collect();
    let free = combine(&eig.vectors, &lambdas, &nums, R::zero());
    if norm2(&free) <= radius {
        return Ok(free);
    }
    let mu = ridge_multiplier(&lambdas, &nums, radius, R::tol(1e-9))?;
    Ok(combine(&eig.vectors, &lambdas, &nums, mu))
}

/// `theta^T S theta - 2 b^T theta + c`, floored at zero (it is a weighted sum
/// of squares).
pub fn quadratic_loss<R: Real>(gram: &Matrix<R>, cross: &[R], label_sq: R, theta: &[R]) -> R {
    let st = gram.mul_vec(theta);
    (dot(theta, &st) - R::lit(2.0) * dot(cross, theta) + label_sq).max(R::zero())
}

/// `min_{||theta|| <= radius} sum w (<theta, x> - y)^2` of a cell.
pub fn cell_ball_loss<R: Real>(m: &CellMoments<R>, radius: R) -> Result<R> {
    if m.is_empty() {
        return Ok(R::zero());
    }
    let theta = constrained_least_squares(&m.gram, &m.cross, radius)?;
    Ok(quadratic_loss(&m.gram, &m.cross, m.label_sq, &theta))
}

/// `min_{||theta|| <= 1} sum w ((1 + <theta, x>)/2 - y)^2`, which is a quarter of
/// the least-squares fit of the target `2y - 1` over the unit ball.
pub fn cell_affine_loss<R: Real>(m: &CellMoments<R>) -> Result<R> {
    if m.is_empty() {
        return Ok(R::zero());
    }
    let two = R::lit(2.0);
    let cross: Vec<R> = m.cross.iter().zip(&m.sum_x).map(|(&b, &s)| two * b - s).collect();
    // Binary labels: sum w (2y - 1)^2 = mass.
    let theta = constrained_least_squares(&m.gram, &cross, R::one())?;
    Ok(quadratic_loss(&m.gram, &cross, m.mass, &theta) * R::lit(0.25))
}

/// `sum w (f(x) - y)^2` over a cell.
pub(crate) fn cell_squared_loss_of<R: Real>(
    cells: &WeightedCells<R>,
    cell: usize,
    m: &CellMoments<R>,
    f: &Hypothesis<R>,
) -> R {
    match f.as_linear(cells.dim()) {
        Some(w) => quadratic_loss(&m.gram, &m.cross, m.label_sq, &w),
        None => cells
            .entries(cell)
            .map(|(w, x, y)| {
                let r = f.eval(x) - y;
                w * r * r
            })
            .sum(),
    }
}

/// Contextual swap regret of the sampled predictions against the class.
pub fn sreg<R: Real>(tr: &Transcript<R>, class: &HypothesisClass<R>) -> Result<MetricReport> {
    let cells = WeightedCells::from_transcript(tr, Weighting::Realized);
    swap_regret(&cells, class, &MetricOptions::default(), "sreg")
}

/// As [`sreg`] with the conditional distributions `P_t` as weights.
pub fn psreg<R: Real>(tr: &Transcript<R>, class: &HypothesisClass<R>) -> Result<MetricReport> {
    let cells = WeightedCells::from_transcript(tr, Weighting::Pseudo);
    swap_regret(&cells, class, &MetricOptions::default(), "psreg")
}

/// Per-cell best squared loss attainable by the class.
pub(crate) fn best_squared_losses<R: Real>(
    cells: &WeightedCells<R>,
    moments: &[CellMoments<R>],
    class: &HypothesisClass<R>,
    opts: &MetricOptions,
) -> Result<(Vec<R>, String)> {
    Ok(match class {
        HypothesisClass::LinearBall { radius } => (
            moments.par_iter().map(|m| cell_ball_loss(m, *radius)).collect::<Result<_>>()?,
            format!("exact constrained least squares over the theta-ball of radius {radius}"),
        ),
        HypothesisClass::AffineRestricted => (
            moments.par_iter().map(cell_affine_loss).collect::<Result<_>>()?,
            "exact constrained least squares over the unit theta-ball of (1 + <theta, x>) / 2".into(),
        ),
        HypothesisClass::Cover { eps, radius } => {
            let pts = cover_points(cells.dim(), *eps, *radius, opts.member_cap)?;
            let best = moments
                .par_iter()
                .map(|m| {
                    if m.is_empty() {
                        return R::zero();
                    }
                    pts.iter()
                        .map(|t| quadratic_loss(&m.gram, &m.cross, m.label_sq, t))
                        .fold(R::infinity(), R::min)
                })
                .collect();
            (best, format!("enumeration over {} cover points (eps {eps})", pts.len()))
        }
        HypothesisClass::Finite(fs) if fs.is_empty() => {
            return Err(invalid("finite comparator class is empty"));
        }
        HypothesisClass::Finite(fs) => {
            let best = (0..moments.len())
                .into_par_iter()
                .map(|i| {
                    let m = &moments[i];
                    if m.is_empty() {
                        return R::zero();
                    }
                    fs.iter()
                        .map(|f| cell_squared_loss_of(cells, i, m, f))
                        .fold(R::infinity(), R::min)
                })
                .collect();
            (best, format!("enumeration over {} functions", fs.len()))
        }
    })
}

pub fn swap_regret<R: Real>(
    cells: &WeightedCells<R>,
    class: &HypothesisClass<R>,
    opts: &MetricOptions,
    name: &str,
) -> Result<MetricReport> {
    let moments = cells.all_moments();
    let (best, notes) = best_squared_losses(cells, &moments, class, opts)?;
    let value: R = moments
        .iter()
        .zip(&best)
        .filter(|(m, _)| !m.is_empty())
        .map(|(m, &b)| m.pred_loss - b)
        .sum();
    Ok(MetricReport::new(name, value.as_f64(), class.descriptor(), notes))
}
