use rand::Rng;
use rayon::prelude::*;

use crate::domain::{post_process, HypothesisClass, LossKind, LossSpec, Transcript};
use crate::error::{invalid, Result};
use crate::rng::{mix_seed, stream, Stream};
use crate::scalar::{dot, norm2, Real};

use super::cells::{WeightedCells, Weighting};
use super::regret::cell_affine_loss;
use super::{MetricOptions, MetricReport};

/// Temperature of the `tanh` surrogate used for v-shaped losses.
const SURROGATE_TEMPERATURE: f64 = 0.05;

/// Swap omniprediction error of the sampled predictions against a loss menu.
pub fn somni<R: Real>(tr: &Transcript<R>, losses: &[LossSpec<R>], class: &HypothesisClass<R>) -> Result<MetricReport> {
    somni_with(tr, losses, class, &MetricOptions::default())
}

pub fn somni_with<R: Real>(
    tr: &Transcript<R>,
    losses: &[LossSpec<R>],
    class: &HypothesisClass<R>,
    opts: &MetricOptions,
) -> Result<MetricReport> {
    let cells = WeightedCells::from_transcript(tr, Weighting::Realized);
    swap_omni(&cells, losses, class, opts, "somni")
}

pub fn swap_omni<R: Real>(
    cells: &WeightedCells<R>,
    losses: &[LossSpec<R>],
    class: &HypothesisClass<R>,
    opts: &MetricOptions,
    name: &str,
) -> Result<MetricReport> {
    if losses.is_empty() {
        return Err(invalid("loss menu is empty"));
    }
    for l in losses {
        l.check_membership()?;
    }
    match class {
        HypothesisClass::AffineRestricted => {}
        HypothesisClass::Finite(fs) if !fs.is_empty() => {}
        other => {
            return Err(invalid(format!(
                "omniprediction needs an affine-restricted or non-empty finite class, got {}",
                other.descriptor()
            )))
        }
    }
    let responses: Vec<Vec<R>> = losses
        .iter()
        .map(|l| cells.grid().points().iter().map(|&p| post_process(l, p)).collect())
        .collect::<Result<_>>()?;
    let per_cell: Vec<R> = (0..cells.num_cells())
        .into_par_iter()
        .map(|i| -> Result<R> {
            let mass: R = cells.entries(i).map(|(w, _, _)| w).sum();
            if !(mass > R::zero()) {
                return Ok(R::zero());
            }
            let mut best = R::neg_infinity();
            for (li, loss) in losses.iter().enumerate() {
                let k = responses[li][i];
                let learner: R = cells.entries(i).map(|(w, _, y)| w * loss.eval_unchecked(k, y)).sum();
                let comparator = cell_best_loss(cells, i, loss, class, opts, li as u64)?;
                best = best.max(learner - comparator);
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let value: R = per_cell.into_iter().sum();
    let notes = match class {
        HypothesisClass::Finite(fs) => format!("enumeration over {} functions", fs.len()),
        _ => format!(
            "squared loss exact; other losses by projected subgradient ({} iterations, {} restarts; {} for v-shaped)",
            opts.iterations, opts.restarts, opts.nonconvex_restarts
        ),
    };
    let menu: Vec<String> = losses.iter().map(|l| l.name()).collect();
    Ok(MetricReport::new(
        name,
        value.as_f64(),
        class.descriptor(),
        format!("losses [{}]; {notes}", menu.join(", ")),
    ))
}

/// `min_f sum w l(f(x), y)` over one cell.
fn cell_best_loss<R: Real>(
    cells: &WeightedCells<R>,
    cell: usize,
    loss: &LossSpec<R>,
    class: &HypothesisClass<R>,
    opts: &MetricOptions,
    loss_index: u64,
) -> Result<R> {
    match class {
        HypothesisClass::Finite(fs) => Ok(fs
            .iter()
            .map(|f| {
                cells
                    .entries(cell)
                    .map(|(w, x, y)| w * loss.eval_unchecked(f.eval(x), y))
                    .sum::<R>()
            })
            .fold(R::infinity(), R::min)),
        HypothesisClass::AffineRestricted => {
            if matches!(loss.kind, LossKind::Squared) {
                return cell_affine_loss(&cells.moments(cell));
            }
            let seed = mix_seed(opts.seed ^ mix_seed(((cell as u64) << 16) ^ loss_index));
            Ok(affine_subgradient_min(cells, cell, loss, opts, seed))
        }
        _ => unreachable!("class validated by caller"),
    }
}

/// Objective of `theta` over a cell for `f = (1 + <theta, x>)/2`.
fn affine_objective<R: Real>(cells: &WeightedCells<R>, cell: usize, loss: &LossSpec<R>, theta: &[R]) -> R {
    let half = R::lit(0.5);
    cells
        .entries(cell)
        .map(|(w, x, y)| w * loss.eval_unchecked((R::one() + dot(theta, x)) * half, y))
        .sum()
}

fn project_unit<R: Real>(theta: &mut [R]) {
    let n = norm2(theta);
    if n > R::one() {
        theta.iter_mut().for_each(|v| *v /= n);
    }
}

/// Projected subgradient descent over the unit theta-ball with step `c / sqrt(k)`
/// on the mass-normalized objective, keeping the best iterate. V-shaped losses
/// are piecewise constant, so they descend on a `tanh` surrogate from several
/// random starts while still scoring iterates with the true loss.
pub fn affine_subgradient_min<R: Real>(
    cells: &WeightedCells<R>,
    cell: usize,
    loss: &LossSpec<R>,
    opts: &MetricOptions,
    seed: u64,
) -> R {
    let d = cells.dim();
    let mass: R = cells.entries(cell).map(|(w, _, _)| w).sum();
    if !(mass > R::zero()) {
        return R::zero();
    }
    let half = R::lit(0.5);
    let vshape = match loss.kind {
        LossKind::VShaped(v) => Some(v),
        _ => None,
    };
    let restarts = if vshape.is_some() {
        opts.nonconvex_restarts
    } else {
        opts.restarts
    };
    let mut rng = stream(seed, Stream::Search);
    let mut starts = vec![vec![R::zero(); d]];
    for _ in 0..restarts {
        let mut t: Vec<R> = (0..d).map(|_| R::lit(rng.gen_range(-1.0..1.0))).collect();
        project_unit(&mut t);
        starts.push(t);
    }
    let tau = R::lit(SURROGATE_TEMPERATURE);
    let step_c = R::lit(opts.step);
    let mut best = R::infinity();
    for start in starts {
        let mut theta = start;
        best = best.min(affine_objective(cells, cell, loss, &theta));
        for k in 1..=opts.iterations {
            let mut g = vec![R::zero(); d];
            for (w, x, y) in cells.entries(cell) {
                let f = (R::one() + dot(&theta, x)) * half;
                let slope = match vshape {
                    Some(v) => {
                        let t = ((f - v) / tau).tanh();
                        (v - y) * (R::one() - t * t) / tau
                    }
                    None => loss.subgradient(f, y),
                };
                let c = w * slope * half / mass;
                for (gi, &xi) in g.iter_mut().zip(x) {
                    *gi += c * xi;
                }
            }
            let gn = norm2(&g);
            if !(gn > R::zero()) {
                break;
            }
            let eta = step_c / R::from_usize_lossy(k).sqrt();
            for (ti, gi) in theta.iter_mut().zip(&g) {
                *ti -= eta * *gi;
            }
            project_unit(&mut theta);
            best = best.min(affine_objective(cells, cell, loss, &theta));
        }
    }
    best
}
