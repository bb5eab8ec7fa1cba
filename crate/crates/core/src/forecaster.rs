//! Swap-regret forecaster: one ONS learner per grid cell, randomized rounding of
//! each learner's prediction onto the grid, and the stationary distribution of
//! the resulting column-stochastic matrix as the round's prediction.

use rand::Rng;
use rayon::prelude::*;

use crate::domain::{Context, Grid, Outcome, Transcript, TranscriptStep};
use crate::error::{domain, invalid, Result};
use crate::linalg::{stationary_distribution, ColumnStochasticMatrix};
use crate::ons::{alg_predict, ons_init_with, ons_update, OnsConfig, OnsState};
use crate::rng::{stream, RunRng, Stream};
use crate::scalar::Real;

const PARALLEL_CELLS: usize = 64;

/// `RRound(w)`: mean-preserving distribution on the two grid points around `w`.
pub fn rround<R: Real>(w: R, grid: &Grid<R>) -> Result<Vec<R>> {
    if !(w >= R::zero() && w <= R::one()) {
        return Err(domain(format!("rounding input {w} outside [0, 1]")));
    }
    let mut q = vec![R::zero(); grid.len()];
    let i = grid.lower_index(w)?;
    if i == grid.n() {
        q[i] = R::one();
        return Ok(q);
    }
    let n = R::from_usize_lossy(grid.n());
    let upper = ((w - grid.point(i)) * n).max(R::zero()).min(R::one());
    q[i] = R::one() - upper;
    q[i + 1] = upper;
    Ok(q)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutput<R: Real = f64> {
    pub cond_dist: Vec<R>,
    /// `None` when the forecaster runs slim.
    pub q_matrix: Option<ColumnStochasticMatrix<R>>,
    pub sampled_index: usize,
    pub per_cell_w: Vec<R>,
}

/// Prediction of a frozen set of learners at `x`: `(P, Q, w)`.
pub fn predict_distribution<R: Real>(
    learners: &[OnsState<R>],
    grid: &Grid<R>,
    x: &[R],
) -> Result<(Vec<R>, ColumnStochasticMatrix<R>, Vec<R>)> {
    if learners.len() != grid.len() {
        return Err(invalid("learner count must equal grid size"));
    }
    let w: Vec<R> = learners
        .iter()
        .map(|l| alg_predict(l, x))
        .collect::<Result<_>>()?;
    let columns = w.iter().map(|&wi| rround(wi, grid)).collect::<Result<Vec<_>>>()?;
    let q = ColumnStochasticMatrix::from_columns(columns)?;
    let p = stationary_distribution(&q)?;
    Ok((p, q, w))
}

/// Inverse-CDF draw of a grid index.
pub fn sample_index<R: Real, G: Rng + ?Sized>(p: &[R], rng: &mut G) -> usize {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &v) in p.iter().enumerate() {
        let v = v.as_f64();
        if v > 0.0 {
            last_positive = i;
        }
        cum += v;
        if u < cum {
            return i;
        }
    }
    last_positive
}

#[derive(Clone, Debug)]
pub struct BmForecaster<R: Real = f64> {
    grid: Grid<R>,
    learners: Vec<OnsState<R>>,
    d: usize,
    rng: RunRng,
    slim: bool,
}

impl<R: Real> BmForecaster<R> {
    pub fn new(n: usize, d: usize, seed: u64) -> Result<Self> {
        Self::with_config(n, d, seed, OnsConfig::default())
    }

    pub fn with_config(n: usize, d: usize, seed: u64, config: OnsConfig<R>) -> Result<Self> {
        let grid = Grid::new(n)?;
        let learner = ons_init_with(d, config)?;
        Ok(Self {
            learners: vec![learner; grid.len()],
            grid,
            d,
            rng: stream(seed, Stream::Prediction),
            slim: false,
        })
    }

    /// Drop `Q_t` from round outputs.
    pub fn slim(mut self, slim: bool) -> Self {
        self.slim = slim;
        self
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn learners(&self) -> &[OnsState<R>] {
        &self.learners
    }
}

pub fn bm_predict<R: Real>(f: &mut BmForecaster<R>, x: &Context<R>) -> Result<RoundOutput<R>> {
    if x.dim() != f.d {
        return Err(invalid(format!(
            "context dimension {} does not match forecaster dimension {}",
            x.dim(),
            f.d
        )));
    }
    let (p, q, w) = predict_distribution(&f.learners, &f.grid, x.coords())?;
    let sampled_index = sample_index(&p, &mut f.rng);
    Ok(RoundOutput {
        cond_dist: p,
        q_matrix: if f.slim { None } else { Some(q) },
        sampled_index,
        per_cell_w: w,
    })
}

/// Feeds learner `i` the loss scaled by `P_t(z_i)`, in ascending `i`.
pub fn bm_update<R: Real>(
    f: &mut BmForecaster<R>,
    out: &RoundOutput<R>,
    y: Outcome,
    x: &Context<R>,
) -> Result<()> {
    if out.cond_dist.len() != f.learners.len() {
        return Err(invalid("round output does not match forecaster grid"));
    }
    let xs = x.coords();
    let step = |(learner, &alpha): (&mut OnsState<R>, &R)| {
        ons_update(learner, xs, alpha.max(R::zero()).min(R::one()), y)
    };
    if f.learners.len() >= PARALLEL_CELLS {
        f.learners
            .par_iter_mut()
            .zip(out.cond_dist.par_iter())
            .map(step)
            .collect::<Result<Vec<()>>>()?;
    } else {
        f.learners
            .iter_mut()
            .zip(out.cond_dist.iter())
            .map(step)
            .collect::<Result<Vec<()>>>()?;
    }
    Ok(())
}

/// What an observer sees each round, before the learners are updated.
pub struct RoundEvent<'a, R: Real> {
    /// 1-based round index.
    pub t: usize,
    pub learners: &'a [OnsState<R>],
    pub context: &'a Context<R>,
    pub output: &'a RoundOutput<R>,
    pub outcome: Outcome,
}

pub fn run_online<R, I>(f: &mut BmForecaster<R>, stream: I) -> Result<Transcript<R>>
where
    R: Real,
    I: IntoIterator<Item = (Context<R>, Outcome)>,
{
    run_online_observed(f, stream, |_| {})
}

pub fn run_online_observed<R, I, O>(f: &mut BmForecaster<R>, stream: I, mut observer: O) -> Result<Transcript<R>>
where
    R: Real,
    I: IntoIterator<Item = (Context<R>, Outcome)>,
    O: FnMut(&RoundEvent<'_, R>),
{
    let mut tr = Transcript::new(f.grid.clone(), f.d);
    for (t, (x, y)) in stream.into_iter().enumerate() {
        let out = bm_predict(f, &x)?;
        observer(&RoundEvent {
            t: t + 1,
            learners: &f.learners,
            context: &x,
            output: &out,
            outcome: y,
        });
        bm_update(f, &out, y, &x)?;
        tr.push(TranscriptStep::new(x, out.cond_dist, out.sampled_index, y)?)?;
    }
    Ok(tr)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NObjective {
    Smcal,
    Sreg,
    Somni,
}

/// Grid size tuned to the horizon: `(T / (d ln T))^{1/3}` for swap
/// multicalibration and omniprediction, `(T / (d ln T))^{1/5}` for swap regret.
pub fn choose_n(t: usize, d: usize, objective: NObjective) -> Result<usize> {
    if t < 2 || d == 0 {
        return Err(invalid("choose_n needs T >= 2 and d >= 1"));
    }
    let base = t as f64 / (d as f64 * (t as f64).ln());
    let exponent = match objective {
        NObjective::Smcal | NObjective::Somni => 1.0 / 3.0,
        NObjective::Sreg => 1.0 / 5.0,
    };
    Ok((base.powf(exponent).round() as usize).max(1))
}
