use rayon::prelude::*;

use crate::domain::{class_members_capped, cover_points, cover_size_estimate, Hypothesis, HypothesisClass, Members, Transcript};
use crate::error::{invalid, Result};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::scalar::{dot, norm2, Real};

use super::cells::{CellMoments, WeightedCells, Weighting};
use super::{MetricOptions, MetricReport};

/// Largest number of non-empty cells for which single-comparator suprema are
/// found by enumerating sign patterns.
const SIGN_ENUMERATION_CELLS: usize = 20;

fn check_q(q: u32) -> Result<()> {
    if q == 1 || q == 2 {
        Ok(())
    } else {
        Err(invalid(format!("calibration exponent must be 1 or 2, got {q}")))
    }
}

fn power<R: Real>(v: R, q: u32) -> R {
    if q == 1 {
        v
    } else {
        v * v
    }
}

/// `count * (sup |rho|)^q` for one cell, given the cell's supremum of
/// `|sum w f(x) (y - p)|`.
fn contribution<R: Real>(mass: R, sup_abs_sum: R, q: u32) -> R {
    if !(mass > R::zero()) {
        return R::zero();
    }
    mass * power(sup_abs_sum / mass, q)
}

/// `sum w f(x) (y - p)` over a cell, through the residual vector when `f` is linear.
fn residual_sum_of<R: Real>(cells: &WeightedCells<R>, cell: usize, m: &CellMoments<R>, f: &Hypothesis<R>) -> R {
    match f.as_linear(cells.dim()) {
        Some(w) => dot(&w, &m.residual),
        None => cells.entries(cell).map(|(w, x, y)| w * f.eval(x) * (y - m.p)).sum(),
    }
}

/// `sum_p count_p (sup_f |rho_{p,f}|)^q`, sampled predictions.
pub fn smcal<R: Real>(tr: &Transcript<R>, class: &HypothesisClass<R>, q: u32) -> Result<MetricReport> {
    let cells = WeightedCells::from_transcript(tr, Weighting::Realized);
    swap_calibration(&cells, class, q, &MetricOptions::default(), &format!("smcal{q}"))
}

/// As [`smcal`] with the conditional distributions `P_t` as weights.
pub fn psmcal<R: Real>(tr: &Transcript<R>, class: &HypothesisClass<R>, q: u32) -> Result<MetricReport> {
    let cells = WeightedCells::from_transcript(tr, Weighting::Pseudo);
    swap_calibration(&cells, class, q, &MetricOptions::default(), &format!("psmcal{q}"))
}

pub fn swap_calibration<R: Real>(
    cells: &WeightedCells<R>,
    class: &HypothesisClass<R>,
    q: u32,
    opts: &MetricOptions,
    name: &str,
) -> Result<MetricReport> {
    check_q(q)?;
    let moments = cells.all_moments();
    let (per_cell, notes): (Vec<R>, String) = match class {
        HypothesisClass::LinearBall { radius } => (
            moments.iter().map(|m| contribution(m.mass, *radius * norm2(&m.residual), q)).collect(),
            format!("exact support function over the theta-ball of radius {radius}"),
        ),
        HypothesisClass::AffineRestricted => (
            moments
                .iter()
                .map(|m| contribution(m.mass, (m.residual_sum.abs() + norm2(&m.residual)) * R::lit(0.5), q))
                .collect(),
            "exact over the unit theta-ball of (1 + <theta, x>) / 2".into(),
        ),
        HypothesisClass::Cover { eps, radius } => {
            let pts = cover_points(cells.dim(), *eps, *radius, opts.member_cap)?;
            let per_cell = moments
                .par_iter()
                .map(|m| {
                    let best = pts
                        .iter()
                        .map(|t| dot(t, &m.residual).abs())
                        .fold(R::zero(), R::max);
                    contribution(m.mass, best, q)
                })
                .collect();
            (per_cell, format!("enumeration over {} cover points (eps {eps})", pts.len()))
        }
        HypothesisClass::Finite(fs) => {
            let per_cell = (0..cells.num_cells())
                .into_par_iter()
                .map(|i| {
                    let m = &moments[i];
                    let best = fs
                        .iter()
                        .map(|f| residual_sum_of(cells, i, m, f).abs())
                        .fold(R::zero(), R::max);
                    contribution(m.mass, best, q)
                })
                .collect();
            (per_cell, format!("enumeration over {} functions", fs.len()))
        }
    };
    let value: R = per_cell.into_iter().sum();
    Ok(MetricReport::new(name, value.as_f64(), class.descriptor(), notes))
}

/// `sup_f sum_p count_p |rho_{p,f}|^q` with one comparator shared by all cells.
pub fn mcal<R: Real>(tr: &Transcript<R>, class: &HypothesisClass<R>, q: u32) -> Result<MetricReport> {
    mcal_with(tr, class, q, &MetricOptions::default())
}

pub fn mcal_with<R: Real>(
    tr: &Transcript<R>,
    class: &HypothesisClass<R>,
    q: u32,
    opts: &MetricOptions,
) -> Result<MetricReport> {
    check_q(q)?;
    let cells = WeightedCells::from_transcript(tr, Weighting::Realized);
    let indexed: Vec<(usize, CellMoments<R>)> = cells
        .all_moments()
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .collect();
    let moments: Vec<CellMoments<R>> = indexed.iter().map(|(_, m)| m.clone()).collect();
    let name = format!("mcal{q}");

    let (value, notes) = match class {
        HypothesisClass::Finite(_) | HypothesisClass::Cover { .. } => {
            let members = match class_members_capped(class, cells.dim(), opts.member_cap)? {
                Members::List(fs) => fs,
                Members::Symbolic(_) => unreachable!("finite classes enumerate"),
            };
            let best = members
                .par_iter()
                .map(|f| {
                    indexed
                        .iter()
                        .map(|(i, m)| contribution(m.mass, residual_sum_of(&cells, *i, m, f).abs(), q))
                        .sum::<R>()
                })
                .reduce(R::zero, R::max);
            (best, format!("enumeration over {} functions", members.len()))
        }
        HypothesisClass::LinearBall { radius } => {
            let r = *radius;
            if moments.is_empty() {
                (R::zero(), "empty transcript".into())
            } else if q == 2 {
                let d = cells.dim();
                let mut m = Matrix::zeros(d, d);
                for c in &moments {
                    m.add_outer(R::one() / c.mass, &c.residual, &c.residual);
                }
                let top = SymmetricEigen::new(&m)?.max_value().max(R::zero());
                (r * r * top, format!("exact top eigenvalue over the theta-ball of radius {r}"))
            } else if moments.len() <= SIGN_ENUMERATION_CELLS {
                let best = max_over_signs(&moments, |sum_v, _| r * norm2(sum_v));
                (best, format!("exact sign enumeration over the theta-ball of radius {r}"))
            } else {
                let (best, eps) = cover_search(&moments, cells.dim(), r, tr.horizon(), q, opts, |t, m| dot(t, &m.residual))?;
                (best, format!("theta-cover lower bound over the ball of radius {r}, eps {eps}"))
            }
        }
        HypothesisClass::AffineRestricted => {
            let half = R::lit(0.5);
            if moments.is_empty() {
                (R::zero(), "empty transcript".into())
            } else if q == 1 && moments.len() <= SIGN_ENUMERATION_CELLS {
                let best = max_over_signs(&moments, |sum_v, sum_s| (sum_s + norm2(sum_v)) * half);
                (best, "exact sign enumeration over the unit theta-ball".into())
            } else {
                let (best, eps) = cover_search(&moments, cells.dim(), R::one(), tr.horizon(), q, opts, |t, m| {
                    (m.residual_sum + dot(t, &m.residual)) * half
                })?;
                (best, format!("theta-cover lower bound over the unit ball, eps {eps}"))
            }
        }
    };
    Ok(MetricReport::new(name, value.as_f64(), class.descriptor(), notes))
}

/// `max_sigma g(sum_p sigma_p v_p, sum_p sigma_p s_p)` over sign patterns, for
/// `q = 1` where `sum_p |a_p + <theta, v_p>|` is a maximum of linear functions.
fn max_over_signs<R: Real, G>(moments: &[CellMoments<R>], g: G) -> R
where
    G: Fn(&[R], R) -> R + Sync,
{
    let k = moments.len();
    let d = moments[0].residual.len();
    (0u64..(1u64 << k))
        .into_par_iter()
        .map(|mask| {
            let mut v = vec![R::zero(); d];
            let mut s = R::zero();
            for (j, m) in moments.iter().enumerate() {
                let sign = if mask >> j & 1 == 1 { -R::one() } else { R::one() };
                s += sign * m.residual_sum;
                for (acc, &r) in v.iter_mut().zip(&m.residual) {
                    *acc += sign * r;
                }
            }
            g(&v, s)
        })
        .reduce(R::zero, R::max)
}

/// Lower bound by enumerating an eps-cover of the theta-ball; eps defaults to
/// `1/sqrt(T)` and is enlarged until the cover fits the member cap.
fn cover_search<R: Real, S>(
    moments: &[CellMoments<R>],
    d: usize,
    radius: R,
    horizon: usize,
    q: u32,
    opts: &MetricOptions,
    signed_sum: S,
) -> Result<(R, f64)>
where
    S: Fn(&[R], &CellMoments<R>) -> R + Sync,
{
    let mut eps = opts.cover_eps.unwrap_or(1.0 / (horizon.max(1) as f64).sqrt());
    while cover_size_estimate(d, eps, radius.as_f64()) > opts.member_cap as f64 {
        eps *= 1.25;
    }
    let pts = cover_points(d, R::lit(eps), radius, opts.member_cap)?;
    let total = |t: &Vec<R>| -> R {
        moments
            .iter()
            .map(|m| contribution(m.mass, signed_sum(t, m).abs(), q))
            .sum()
    };
    let best = pts.par_iter().map(total).reduce(R::zero, R::max);
    Ok((best, eps))
}

/// `sum_p count_p |sum_t 1[p_t = p] (y_t - p) / count_p|^q`.
pub fn cal<R: Real>(tr: &Transcript<R>, q: u32) -> Result<MetricReport> {
    check_q(q)?;
    let cells = WeightedCells::from_transcript(tr, Weighting::Realized);
    let value: R = cells
        .all_moments()
        .iter()
        .map(|m| contribution(m.mass, m.residual_sum.abs(), q))
        .sum();
    Ok(MetricReport::new(format!("cal{q}"), value.as_f64(), "constant:1", "exact"))
}
