//! Self-checks of the numerical kernels against independent computations, run
//! by `swapcal verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{Context, Grid, Hypothesis, HypothesisClass, Outcome};
use crate::forecaster::{rround, run_online_observed, BmForecaster};
use crate::harness::{generate_stream, AdversarySpec, TAIL_RADIUS};
use crate::linalg::{
    sherman_morrison_update, stationary_distribution, ColumnStochasticMatrix, CurvatureMatrix, Matrix, SymmetricEigen,
};
use crate::metrics::{psmcal, psreg, witness_f_prime};
use crate::ons::{scaled_loss_gradient, DEFAULT_BETA};
use crate::scalar::dot;

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest violation margin seen (positive means a violation).
    pub worst: f64,
    pub detail: String,
}

fn outcome(name: &'static str, worst: f64, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: worst <= 0.0,
        worst,
        detail,
    }
}

/// Expected squared loss of rounding is within `[0, 1/N^2]` of the unrounded
/// loss and equals `(p - z_i)/N - (p - z_i)^2`.
pub fn rounding_bound(max_n: usize, steps: usize) -> CheckOutcome {
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=max_n {
        let grid = Grid::<f64>::new(n).unwrap();
        let nf = n as f64;
        for k in 0..=steps {
            let p = k as f64 / steps as f64;
            let q = rround(p, &grid).unwrap();
            let mean: f64 = q.iter().zip(grid.points()).map(|(a, z)| a * z).sum();
            let i = grid.lower_index(p).unwrap();
            let zi = grid.point(i);
            let identity = (p - zi) / nf - (p - zi) * (p - zi);
            for y in [0.0, 1.0] {
                let expected: f64 = q.iter().zip(grid.points()).map(|(a, z)| a * (z - y) * (z - y)).sum();
                let gap = expected - (p - y) * (p - y);
                worst = worst
                    .max(-gap - 1e-15)
                    .max(gap - 1.0 / (nf * nf) - 1e-15)
                    .max((gap - identity).abs() - 1e-12);
            }
            worst = worst.max((mean - p).abs() - 1e-12);
        }
    }
    outcome("rounding bound", worst, format!("N = 1..={max_n}, {} values of p", steps + 1))
}

/// Stationary distributions of random sparse column-stochastic matrices.
pub fn stationary_residuals(count: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..count {
        let k = rng.gen_range(1..=12);
        let columns: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let mut c: Vec<f64> = (0..k).map(|_| if rng.gen_bool(0.3) { rng.gen() } else { 0.0 }).collect();
                let s: f64 = c.iter().sum();
                if s == 0.0 {
                    c[rng.gen_range(0..k)] = 1.0;
                } else {
                    c.iter_mut().for_each(|v| *v /= s);
                }
                c
            })
            .collect();
        let q = ColumnStochasticMatrix::from_columns(columns).unwrap();
        match stationary_distribution(&q) {
            Ok(p) => worst = worst.max(q.residual(&p) - 1e-8),
            Err(_) => worst = f64::INFINITY,
        }
    }
    outcome("stationary residuals", worst, format!("{count} random chains"))
}

fn random_context(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let tail: Vec<f64> = (1..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = tail.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = TAIL_RADIUS * rng.gen::<f64>();
    let mut x = vec![0.5];
    x.extend(tail.iter().map(|v| if norm > 0.0 { v / norm * r } else { 0.0 }));
    x
}

fn random_in_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let t: Vec<f64> = (0..d).map(|_| rng.gen_range(-radius..radius)).collect();
        if t.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            return t;
        }
    }
}

/// Numeric Hessian of `exp(-phi/50)` is negative semidefinite and `|grad phi| <= 10`
/// on the radius-4 ball, with `phi(theta) = alpha (<theta, x> - y)^2`.
pub fn exp_concavity(samples: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_eig = f64::NEG_INFINITY;
    let mut worst_grad: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for _ in 0..samples {
        let d = rng.gen_range(1..=4);
        let theta = random_in_ball(&mut rng, d, 4.0);
        let x = random_context(&mut rng, d);
        let y = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let alpha: f64 = rng.gen();
        let phi = |t: &[f64]| {
            let r = dot(t, &x) - y;
            alpha * r * r
        };
        let g = |t: &[f64]| (-phi(t) / 50.0).exp();
        let h = 1e-4;
        let mut hess = Matrix::<f64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let at = |si: f64, sj: f64| {
                    let mut t = theta.clone();
                    t[i] += si * h;
                    t[j] += sj * h;
                    g(&t)
                };
                hess[(i, j)] = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
            }
        }
        let top = SymmetricEigen::new(&hess).unwrap().max_value();
        let grad = scaled_loss_gradient(&theta, &x, alpha, y);
        let gnorm = dot(&grad, &grad).sqrt();
        let hd = 1e-6;
        let fd: Vec<f64> = (0..d)
            .map(|i| {
                let mut a = theta.clone();
                let mut b = theta.clone();
                a[i] += hd;
                b[i] -= hd;
                (phi(&a) - phi(&b)) / (2.0 * hd)
            })
            .collect();
        let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let rel = diff / gnorm.max(1.0);
        worst_eig = worst_eig.max(top);
        worst_grad = worst_grad.max(gnorm);
        worst_rel = worst_rel.max(rel);
        worst = worst.max(top - 1e-6).max(gnorm - 10.0 - 1e-6).max(rel - 1e-6);
    }
    outcome(
        "exp-concavity and Lipschitz",
        worst,
        format!("max Hessian eigenvalue {worst_eig:.3e}, max |grad| {worst_grad:.4}, max gradient error {worst_rel:.3e}"),
    )
}

/// Rank-one inverse updates agree with inverting `omega I + sum g g^T` directly.
pub fn sherman_morrison(sequences: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = 1.0 / (4.0 * DEFAULT_BETA * DEFAULT_BETA);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..sequences {
        let d = rng.gen_range(1..=5);
        let mut m = CurvatureMatrix::<f64>::scaled_identity(d, omega);
        let mut a = Matrix::scaled_identity(d, omega);
        for _ in 0..rng.gen_range(1..200) {
            let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect();
            m = sherman_morrison_update(&m, &g).unwrap();
            a.add_outer(1.0, &g, &g);
        }
        let direct = a.spd_inverse().unwrap();
        let err = m.inverse().sub(&direct).frobenius() / direct.frobenius();
        worst = worst.max(err - 1e-9);
    }
    outcome("sherman-morrison equivalence", worst, format!("{sequences} random update sequences"))
}

/// Pseudo swap regret against a finite class never exceeds the sum of the
/// learners' scaled external regrets, computed from the recorded `Q_t`.
pub fn bm_decomposition(runs: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for run in 0..runs {
        let n = rng.gen_range(1..=4);
        let t = rng.gen_range(1..=200);
        let d = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=20);
        let fs: Vec<Hypothesis<f64>> = (0..k).map(|_| Hypothesis::Linear(random_in_ball(&mut rng, d, 1.0))).collect();
        let stream = generate_stream::<f64>(&AdversarySpec::parse("iid-logistic", seed ^ run as u64).unwrap(), t, d).unwrap();
        let mut f = BmForecaster::new(n, d, rng.gen()).unwrap();
        let mut qs = Vec::with_capacity(t);
        let tr = run_online_observed(&mut f, stream, |ev| qs.push(ev.output.q_matrix.clone().expect("full outputs")))
            .unwrap();
        let grid = tr.grid().clone();
        let mut total_regret = 0.0;
        for i in 0..grid.len() {
            let mut learner = 0.0;
            let mut comparator = vec![0.0; fs.len()];
            for (s, q) in tr.steps().iter().zip(&qs) {
                let w = s.cond_dist[i];
                let y: f64 = s.outcome.value();
                learner += w * (0..grid.len())
                    .map(|j| q.entry(j, i) * (grid.point(j) - y).powi(2))
                    .sum::<f64>();
                for (c, h) in comparator.iter_mut().zip(&fs) {
                    *c += w * (h.eval(s.context.coords()) - y).powi(2);
                }
            }
            total_regret += learner - comparator.iter().cloned().fold(f64::INFINITY, f64::min);
        }
        let swap = psreg(&tr, &HypothesisClass::Finite(fs)).unwrap().value;
        worst = worst.max(swap - total_regret - 1e-8);
    }
    outcome("swap regret decomposition", worst, format!("{runs} random runs"))
}

fn random_transcript(rng: &mut ChaCha8Rng, n: usize, t: usize, d: usize) -> crate::domain::Transcript<f64> {
    let grid = Grid::new(n).unwrap();
    let mut tr = crate::domain::Transcript::new(grid, d);
    for _ in 0..t {
        let x = Context::new(random_context(rng, d)).unwrap();
        let mut p: Vec<f64> = (0..=n).map(|_| if rng.gen_bool(0.5) { rng.gen() } else { 0.0 }).collect();
        let s: f64 = p.iter().sum();
        if s == 0.0 {
            p[0] = 1.0;
        } else {
            p.iter_mut().for_each(|v| *v /= s);
        }
        let idx = crate::forecaster::sample_index(&p, rng);
        let step = crate::domain::TranscriptStep::new(x, p, idx, Outcome::new(rng.gen_bool(0.5))).unwrap();
        tr.push(step).unwrap();
    }
    tr
}

/// The witness `f' = p + eta f` stays in `[-2, 2]` and improves the mean
/// squared loss of a cell by at least `alpha^2`.
pub fn correlation_witness(instances: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut done = 0;
    while done < instances {
        let n = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=3);
        let t = rng.gen_range(1..=60);
        let tr = random_transcript(&mut rng, n, t, d);
        let cell = rng.gen_range(0..=n);
        let use_pseudo = rng.gen_bool(0.5);
        let theta = random_in_ball(&mut rng, d, 1.0);
        let f = Hypothesis::Linear(theta.clone());
        let neg = Hypothesis::Linear(theta.iter().map(|v| -v).collect());
        let w = match witness_f_prime(&tr, cell, &f, use_pseudo).or_else(|_| witness_f_prime(&tr, cell, &neg, use_pseudo)) {
            Ok(w) => w,
            Err(_) => continue,
        };
        for s in tr.steps() {
            worst = worst.max(w.f_prime.eval(s.context.coords()).abs() - 2.0);
        }
        worst = worst.max(w.alpha * w.alpha - w.improvement - 1e-9);
        done += 1;
    }
    outcome("correlation witness", worst, format!("{instances} random instances"))
}

/// `psmcal(ball 1, 2) <= psreg(ball 4)` on random transcripts.
pub fn calibration_regret_relation(transcripts: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..transcripts {
        let n = rng.gen_range(1..=4);
        let t = rng.gen_range(1..=200);
        let d = rng.gen_range(1..=3);
        let tr = random_transcript(&mut rng, n, t, d);
        let cal = psmcal(&tr, &HypothesisClass::ball(1.0), 2).unwrap().value;
        let reg = psreg(&tr, &HypothesisClass::ball(4.0)).unwrap().value;
        worst = worst.max(cal - reg - 1e-6);
    }
    outcome("calibration bounded by regret", worst, format!("{transcripts} random transcripts"))
}

pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        rounding_bound(64, 1000),
        stationary_residuals(1000, seed),
        exp_concavity(1000, seed),
        sherman_morrison(100, seed),
        bm_decomposition(100, seed),
        correlation_witness(100, seed),
        calibration_regret_relation(100, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_all(1) {
            assert!(c.passed, "{c:?}");
        }
    }
}
