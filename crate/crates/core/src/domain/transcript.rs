use crate::error::{invalid, Result};
use crate::scalar::Real;

use super::{Context, Grid, Outcome};

/// One round of the interaction: context, the forecaster's conditional
/// distribution over grid points, the realized grid index and the label.
#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptStep<R: Real = f64> {
    pub context: Context<R>,
    pub cond_dist: Vec<R>,
    pub sampled_index: usize,
    pub outcome: Outcome,
}

impl<R: Real> TranscriptStep<R> {
    pub fn new(
        context: Context<R>,
        cond_dist: Vec<R>,
        sampled_index: usize,
        outcome: Outcome,
    ) -> Result<Self> {
        check_distribution(&cond_dist)?;
        if sampled_index >= cond_dist.len() {
            return Err(invalid(format!(
                "sampled index {sampled_index} outside grid of {} points",
                cond_dist.len()
            )));
        }
        Ok(Self {
            context,
            cond_dist,
            sampled_index,
            outcome,
        })
    }
}

pub(crate) fn check_distribution<R: Real>(p: &[R]) -> Result<()> {
    if p.iter().any(|&v| !(v >= R::zero())) {
        return Err(invalid("distribution has negative or NaN entries"));
    }
    let total: R = p.iter().copied().sum();
    if (total - R::one()).abs() > R::tol(1e-9) {
        return Err(invalid(format!("distribution sums to {total}, not 1")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript<R: Real = f64> {
    grid: Grid<R>,
    dim: usize,
    steps: Vec<TranscriptStep<R>>,
}

impl<R: Real> Transcript<R> {
    pub fn new(grid: Grid<R>, dim: usize) -> Self {
        Self {
            grid,
            dim,
            steps: Vec::new(),
        }
    }

    pub fn from_steps(grid: Grid<R>, dim: usize, steps: Vec<TranscriptStep<R>>) -> Result<Self> {
        let mut tr = Self::new(grid, dim);
        for s in steps {
            tr.push(s)?;
        }
        Ok(tr)
    }

    pub fn push(&mut self, step: TranscriptStep<R>) -> Result<()> {
        if step.cond_dist.len() != self.grid.len() {
            return Err(invalid(format!(
                "step distribution has {} entries, grid has {}",
                step.cond_dist.len(),
                self.grid.len()
            )));
        }
        if step.context.dim() != self.dim {
            return Err(invalid(format!(
                "step context has dimension {}, transcript has {}",
                step.context.dim(),
                self.dim
            )));
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> &[TranscriptStep<R>] {
        &self.steps
    }

    /// Number of rounds `T`.
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The transcript obtained by replacing every conditional distribution with
    /// the point mass on its realized index.
    pub fn realized(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.steps {
            s.cond_dist.iter_mut().for_each(|v| *v = R::zero());
            s.cond_dist[s.sampled_index] = R::one();
        }
        out
    }
}
