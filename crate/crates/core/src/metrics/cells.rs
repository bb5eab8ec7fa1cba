use rayon::prelude::*;

use crate::domain::{Grid, Transcript};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Realized and pseudo residual sums of one grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellStatistics<R: Real = f64> {
    pub cell: usize,
    pub realized_count: usize,
    pub pseudo_mass: R,
    /// `sum_t 1[p_t = p] x_t (y_t - p)`
    pub residual_vector_realized: Vec<R>,
    /// `sum_t P_t(p) x_t (y_t - p)`
    pub residual_vector_pseudo: Vec<R>,
}

pub fn cell_statistics<R: Real>(tr: &Transcript<R>) -> Vec<CellStatistics<R>> {
    let grid = tr.grid();
    let d = tr.dim();
    let mut out: Vec<CellStatistics<R>> = (0..grid.len())
        .map(|cell| CellStatistics {
            cell,
            realized_count: 0,
            pseudo_mass: R::zero(),
            residual_vector_realized: vec![R::zero(); d],
            residual_vector_pseudo: vec![R::zero(); d],
        })
        .collect();
    for step in tr.steps() {
        let x = step.context.coords();
        let y: R = step.outcome.value();
        let s = &mut out[step.sampled_index];
        s.realized_count += 1;
        let r = y - grid.point(step.sampled_index);
        for (acc, &xi) in s.residual_vector_realized.iter_mut().zip(x) {
            *acc += xi * r;
        }
        for (i, &w) in step.cond_dist.iter().enumerate() {
            if w == R::zero() {
                continue;
            }
            let s = &mut out[i];
            s.pseudo_mass += w;
            let r = w * (y - grid.point(i));
            for (acc, &xi) in s.residual_vector_pseudo.iter_mut().zip(x) {
                *acc += xi * r;
            }
        }
    }
    out
}

/// Whether per-cell weights are the sampled indicators or the conditional
/// probabilities `P_t(p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    Realized,
    Pseudo,
}

/// Labelled contexts bucketed by grid cell with nonnegative weights. Transcripts
/// (realized or pseudo) and the batch estimators both reduce to this form.
#[derive(Clone, Debug)]
pub struct WeightedCells<R: Real = f64> {
    grid: Grid<R>,
    dim: usize,
    contexts: Vec<Vec<R>>,
    labels: Vec<R>,
    cells: Vec<Vec<(usize, R)>>,
}

impl<R: Real> WeightedCells<R> {
    /// `cells[i]` lists `(sample index, weight)` pairs for grid point `i`.
    pub fn new(
        grid: Grid<R>,
        dim: usize,
        contexts: Vec<Vec<R>>,
        labels: Vec<R>,
        cells: Vec<Vec<(usize, R)>>,
    ) -> Result<Self> {
        if cells.len() != grid.len() {
            return Err(invalid("one weight list per grid cell required"));
        }
        if contexts.len() != labels.len() {
            return Err(invalid("contexts and labels differ in length"));
        }
        if contexts.iter().any(|x| x.len() != dim) {
            return Err(invalid("context dimension mismatch"));
        }
        for list in &cells {
            for &(k, w) in list {
                if k >= contexts.len() || !(w >= R::zero()) || !w.is_finite() {
                    return Err(invalid("cell entry out of range or with invalid weight"));
                }
            }
        }
        Ok(Self {
            grid,
            dim,
            contexts,
            labels,
            cells,
        })
    }

    pub fn from_transcript(tr: &Transcript<R>, weighting: Weighting) -> Self {
        let contexts: Vec<Vec<R>> = tr.steps().iter().map(|s| s.context.coords().to_vec()).collect();
        let labels: Vec<R> = tr.steps().iter().map(|s| s.outcome.value()).collect();
        let mut cells = vec![Vec::new(); tr.grid().len()];
        for (t, step) in tr.steps().iter().enumerate() {
            match weighting {
                Weighting::Realized => cells[step.sampled_index].push((t, R::one())),
                Weighting::Pseudo => {
                    for (i, &w) in step.cond_dist.iter().enumerate() {
                        if w > R::zero() {
                            cells[i].push((t, w));
                        }
                    }
                }
            }
        }
        Self {
            grid: tr.grid().clone(),
            dim: tr.dim(),
            contexts,
            labels,
            cells,
        }
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn total_mass(&self) -> R {
        self.cells.iter().flatten().map(|&(_, w)| w).sum()
    }

    /// `(weight, x, y)` triples of a cell.
    pub fn entries(&self, cell: usize) -> impl Iterator<Item = (R, &[R], R)> + '_ {
        self.cells[cell]
            .iter()
            .map(move |&(k, w)| (w, self.contexts[k].as_slice(), self.labels[k]))
    }

    pub fn moments(&self, cell: usize) -> CellMoments<R> {
        let d = self.dim;
        let p = self.grid.point(cell);
        let mut m = CellMoments {
            p,
            mass: R::zero(),
            residual: vec![R::zero(); d],
            residual_sum: R::zero(),
            gram: Matrix::zeros(d, d),
            cross: vec![R::zero(); d],
            sum_x: vec![R::zero(); d],
            label_sq: R::zero(),
            pred_loss: R::zero(),
        };
        for (w, x, y) in self.entries(cell) {
            m.mass += w;
            let r = y - p;
            m.residual_sum += w * r;
            m.label_sq += w * y * y;
            m.pred_loss += w * r * r;
            for i in 0..d {
                let wx = w * x[i];
                m.residual[i] += wx * r;
                m.cross[i] += wx * y;
                m.sum_x[i] += wx;
                for j in 0..d {
                    m.gram[(i, j)] += wx * x[j];
                }
            }
        }
        m
    }

    pub fn all_moments(&self) -> Vec<CellMoments<R>> {
        (0..self.num_cells()).into_par_iter().map(|i| self.moments(i)).collect()
    }
}

/// Weighted sufficient statistics of one cell. Every metric against a linear
/// comparator is a function of these.
#[derive(Clone, Debug)]
pub struct CellMoments<R: Real = f64> {
    pub p: R,
    /// `sum w`
    pub mass: R,
    /// `sum w x (y - p)`
    pub residual: Vec<R>,
    /// `sum w (y - p)`
    pub residual_sum: R,
    /// `sum w x x^T`
    pub gram: Matrix<R>,
    /// `sum w x y`
    pub cross: Vec<R>,
    /// `sum w x`
    pub sum_x: Vec<R>,
    /// `sum w y^2`
    pub label_sq: R,
    /// `sum w (p - y)^2`
    pub pred_loss: R,
}

impl<R: Real> CellMoments<R> {
    pub fn is_empty(&self) -> bool {
        !(self.mass > R::zero())
    }
}
