//! Online-to-batch conversion: the uniform mixture of the forecaster's per-round
//! predictors, and plug-in estimators of its distributional errors on a held-out
//! sample.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Context, Grid, HypothesisClass, LossSpec, Outcome};
use crate::error::{invalid, Result};
use crate::forecaster::{predict_distribution, run_online_observed, sample_index, BmForecaster};
use crate::linalg::{CurvatureMatrix, Matrix};
use crate::metrics::{swap_calibration, swap_omni, swap_regret, MetricOptions, MetricReport, WeightedCells};
use crate::ons::{OnsConfig, OnsState};
use crate::rng::{mix_seed, stream, Stream};
use crate::scalar::Real;

const MIXTURE_FORMAT_VERSION: u32 = 1;
const DRAWS_PER_CHUNK: usize = 1024;

/// Learner states at the start of a round.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorSnapshot<R: Real = f64> {
    /// 1-based round whose prediction these states produce.
    pub round: usize,
    /// Number of rounds this snapshot stands for (the stride, except at the tail).
    pub weight: usize,
    pub learners: Vec<OnsState<R>>,
}

/// Mixture over snapshots with probabilities proportional to their weights;
/// uniform over all rounds when the stride is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePredictor<R: Real = f64> {
    grid: Grid<R>,
    dim: usize,
    stride: usize,
    snapshots: Vec<PredictorSnapshot<R>>,
}

impl<R: Real> MixturePredictor<R> {
    pub fn new(grid: Grid<R>, dim: usize, stride: usize, snapshots: Vec<PredictorSnapshot<R>>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(invalid("mixture needs at least one snapshot"));
        }
        if stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        for s in &snapshots {
            if s.learners.len() != grid.len() || s.learners.iter().any(|l| l.dim() != dim) || s.weight == 0 {
                return Err(invalid(format!("snapshot of round {} does not fit the mixture", s.round)));
            }
        }
        Ok(Self {
            grid,
            dim,
            stride,
            snapshots,
        })
    }

    pub fn grid(&self) -> &Grid<R> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn snapshots(&self) -> &[PredictorSnapshot<R>] {
        &self.snapshots
    }

    fn total_weight(&self) -> usize {
        self.snapshots.iter().map(|s| s.weight).sum()
    }

    /// Snapshot index drawn with probability proportional to its weight.
    pub fn pick_snapshot<G: Rng + ?Sized>(&self, rng: &mut G) -> usize {
        let mut u = rng.gen_range(0..self.total_weight());
        for (i, s) in self.snapshots.iter().enumerate() {
            if u < s.weight {
                return i;
            }
            u -= s.weight;
        }
        self.snapshots.len() - 1
    }

    /// Conditional distribution over grid cells of snapshot `i` at `x`.
    pub fn snapshot_distribution(&self, i: usize, x: &Context<R>) -> Result<Vec<R>> {
        if x.dim() != self.dim {
            return Err(invalid("context dimension does not match the mixture"));
        }
        Ok(predict_distribution(&self.snapshots[i].learners, &self.grid, x.coords())?.0)
    }
}

pub fn train_mixture<R: Real>(train: &[(Context<R>, Outcome)], n: usize, seed: u64) -> Result<MixturePredictor<R>> {
    train_mixture_with(train, n, seed, 1, OnsConfig::default())
}

/// Runs the forecaster over `train`, keeping the learner states at the start of
/// every `stride`-th round.
pub fn train_mixture_with<R: Real>(
    train: &[(Context<R>, Outcome)],
    n: usize,
    seed: u64,
    stride: usize,
    config: OnsConfig<R>,
) -> Result<MixturePredictor<R>> {
    if train.is_empty() {
        return Err(invalid("training sample is empty"));
    }
    if stride == 0 {
        return Err(invalid("stride must be positive"));
    }
    let d = train[0].0.dim();
    let mut f = BmForecaster::with_config(n, d, seed, config)?.slim(true);
    let horizon = train.len();
    let mut snapshots = Vec::with_capacity(horizon.div_ceil(stride));
    run_online_observed(&mut f, train.iter().cloned(), |ev| {
        if (ev.t - 1) % stride == 0 {
            snapshots.push(PredictorSnapshot {
                round: ev.t,
                weight: stride.min(horizon + 1 - ev.t),
                learners: ev.learners.to_vec(),
            });
        }
    })?;
    MixturePredictor::new(f.grid().clone(), d, stride, snapshots)
}

/// Draws a snapshot, then a grid index from its conditional distribution at `x`.
pub fn mixture_predict<R: Real, G: Rng + ?Sized>(m: &MixturePredictor<R>, x: &Context<R>, rng: &mut G) -> Result<usize> {
    let i = m.pick_snapshot(rng);
    let p = m.snapshot_distribution(i, x)?;
    Ok(sample_index(&p, rng))
}

/// Settings of the distributional estimators.
#[derive(Clone, Debug)]
pub struct EstimatorConfig {
    /// Monte-Carlo draws of (test point, snapshot, cell). When at least
    /// `|test| * |snapshots|`, the expectation is computed exactly instead.
    pub mc_draws: usize,
    pub seed: u64,
    pub metric: MetricOptions,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mc_draws: 20_000,
            seed: 0,
            metric: MetricOptions::default(),
        }
    }
}

/// A distributional error estimate with the empirical cell occupancy it rests on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchEstimate {
    pub report: MetricReport,
    /// Estimated probability of each grid cell under the mixture.
    pub cell_mass: Vec<f64>,
    pub exhaustive: bool,
    pub draws: usize,
}

/// Test points bucketed by the mixture's predicted cell, weights summing to one.
pub fn bucket_test_sample<R: Real>(
    m: &MixturePredictor<R>,
    test: &[(Context<R>, Outcome)],
    cfg: &EstimatorConfig,
) -> Result<(WeightedCells<R>, bool, usize)> {
    if test.is_empty() {
        return Err(invalid("test sample is empty"));
    }
    let contexts: Vec<Vec<R>> = test.iter().map(|(x, _)| x.coords().to_vec()).collect();
    let labels: Vec<R> = test.iter().map(|(_, y)| y.value()).collect();
    let k = m.grid().len();
    let pairs = test.len().saturating_mul(m.snapshots().len());
    let exhaustive = cfg.mc_draws >= pairs;
    let mut cells: Vec<Vec<(usize, R)>> = vec![Vec::new(); k];
    let draws;
    if exhaustive {
        let total = R::from_usize_lossy(m.total_weight()) * R::from_usize_lossy(test.len());
        let rows: Vec<Vec<(usize, usize, R)>> = (0..test.len())
            .into_par_iter()
            .map(|j| -> Result<Vec<(usize, usize, R)>> {
                let mut acc = vec![R::zero(); k];
                for (s, snap) in m.snapshots().iter().enumerate() {
                    let p = m.snapshot_distribution(s, &test[j].0)?;
                    let w = R::from_usize_lossy(snap.weight) / total;
                    for (a, &pi) in acc.iter_mut().zip(&p) {
                        *a += w * pi;
                    }
                }
                Ok(acc
                    .into_iter()
                    .enumerate()
                    .filter(|(_, w)| *w > R::zero())
                    .map(|(c, w)| (c, j, w))
                    .collect())
            })
            .collect::<Result<_>>()?;
        for (c, j, w) in rows.into_iter().flatten() {
            cells[c].push((j, w));
        }
        draws = pairs;
    } else {
        if cfg.mc_draws == 0 {
            return Err(invalid("Monte-Carlo estimation needs at least one draw"));
        }
        let chunks = cfg.mc_draws.div_ceil(DRAWS_PER_CHUNK);
        let w = R::one() / R::from_usize_lossy(cfg.mc_draws);
        let sampled: Vec<Vec<(usize, usize)>> = (0..chunks)
            .into_par_iter()
            .map(|c| -> Result<Vec<(usize, usize)>> {
                let mut rng = stream(mix_seed(cfg.seed ^ mix_seed(c as u64)), Stream::MonteCarlo);
                let len = DRAWS_PER_CHUNK.min(cfg.mc_draws - c * DRAWS_PER_CHUNK);
                (0..len)
                    .map(|_| {
                        let j = rng.gen_range(0..test.len());
                        let cell = mixture_predict(m, &test[j].0, &mut rng)?;
                        Ok((cell, j))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (cell, j) in sampled.into_iter().flatten() {
            cells[cell].push((j, w));
        }
        draws = cfg.mc_draws;
    }
    let wc = WeightedCells::new(m.grid().clone(), m.dim(), contexts, labels, cells)?;
    Ok((wc, exhaustive, draws))
}

fn finish<R: Real>(cells: &WeightedCells<R>, mut report: MetricReport, exhaustive: bool, draws: usize) -> BatchEstimate {
    let cell_mass: Vec<f64> = (0..cells.num_cells())
        .map(|i| cells.entries(i).map(|(w, _, _)| w.as_f64()).sum())
        .collect();
    let how = if exhaustive {
        "exact expectation over test points and snapshots".to_string()
    } else {
        format!("Monte-Carlo plug-in estimate from {draws} draws")
    };
    report.notes = format!("{how}; {}", report.notes);
    BatchEstimate {
        report,
        cell_mass,
        exhaustive,
        draws,
    }
}

/// Swap agnostic error: expected squared loss of the mixture minus that of the
/// best per-cell comparator.
pub fn estimate_saerr<R: Real>(
    m: &MixturePredictor<R>,
    test: &[(Context<R>, Outcome)],
    class: &HypothesisClass<R>,
    cfg: &EstimatorConfig,
) -> Result<BatchEstimate> {
    let (cells, exhaustive, draws) = bucket_test_sample(m, test, cfg)?;
    let report = swap_regret(&cells, class, &cfg.metric, "saerr")?;
    Ok(finish(&cells, report, exhaustive, draws))
}

pub fn estimate_dsmcal<R: Real>(
    m: &MixturePredictor<R>,
    test: &[(Context<R>, Outcome)],
    class: &HypothesisClass<R>,
    q: u32,
    cfg: &EstimatorConfig,
) -> Result<BatchEstimate> {
    let (cells, exhaustive, draws) = bucket_test_sample(m, test, cfg)?;
    let report = swap_calibration(&cells, class, q, &cfg.metric, &format!("dsmcal{q}"))?;
    Ok(finish(&cells, report, exhaustive, draws))
}

pub fn estimate_dsomni<R: Real>(
    m: &MixturePredictor<R>,
    test: &[(Context<R>, Outcome)],
    losses: &[LossSpec<R>],
    class: &HypothesisClass<R>,
    cfg: &EstimatorConfig,
) -> Result<BatchEstimate> {
    let (cells, exhaustive, draws) = bucket_test_sample(m, test, cfg)?;
    let report = swap_omni(&cells, losses, class, &cfg.metric, "dsomni")?;
    Ok(finish(&cells, report, exhaustive, draws))
}

#[derive(Serialize, Deserialize)]
struct LearnerJson {
    theta: Vec<f64>,
    inv_curvature: Vec<Vec<f64>>,
    rounds_seen: u64,
}

#[derive(Serialize, Deserialize)]
struct SnapshotJson {
    round: usize,
    weight: usize,
    learners: Vec<LearnerJson>,
}

#[derive(Serialize, Deserialize)]
struct MixtureJson {
    version: u32,
    #[serde(rename = "N")]
    n: usize,
    d: usize,
    stride: usize,
    beta: f64,
    omega: f64,
    radius: f64,
    snapshots: Vec<SnapshotJson>,
}

fn to_f64s<R: Real>(v: &[R]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64s<R: Real>(v: &[f64]) -> Vec<R> {
    v.iter().map(|&x| R::lit(x)).collect()
}

impl<R: Real> MixturePredictor<R> {
    pub fn to_json(&self) -> Result<String> {
        let config = self.snapshots[0].learners[0].config;
        let doc = MixtureJson {
            version: MIXTURE_FORMAT_VERSION,
            n: self.grid.n(),
            d: self.dim,
            stride: self.stride,
            beta: config.beta.as_f64(),
            omega: config.omega.as_f64(),
            radius: config.radius.as_f64(),
            snapshots: self
                .snapshots
                .iter()
                .map(|s| SnapshotJson {
                    round: s.round,
                    weight: s.weight,
                    learners: s
                        .learners
                        .iter()
                        .map(|l| LearnerJson {
                            theta: to_f64s(&l.theta),
                            inv_curvature: l.curvature.inverse().to_rows().iter().map(|r| to_f64s(r)).collect(),
                            rounds_seen: l.rounds_seen,
                        })
                        .collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MixtureJson = serde_json::from_str(s)?;
        if doc.version != MIXTURE_FORMAT_VERSION {
            return Err(invalid(format!("unsupported mixture format version {}", doc.version)));
        }
        let config = OnsConfig {
            beta: R::lit(doc.beta),
            omega: R::lit(doc.omega),
            radius: R::lit(doc.radius),
        };
        let snapshots = doc
            .snapshots
            .into_iter()
            .map(|s| -> Result<PredictorSnapshot<R>> {
                let learners = s
                    .learners
                    .into_iter()
                    .map(|l| -> Result<OnsState<R>> {
                        let rows: Vec<Vec<R>> = l.inv_curvature.iter().map(|r| from_f64s(r)).collect();
                        Ok(OnsState {
                            theta: from_f64s(&l.theta),
                            curvature: CurvatureMatrix::from_inverse(Matrix::from_rows(&rows)?)?,
                            config,
                            rounds_seen: l.rounds_seen,
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(PredictorSnapshot {
                    round: s.round,
                    weight: s.weight,
                    learners,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(Grid::new(doc.n)?, doc.d, doc.stride, snapshots)
    }
}
