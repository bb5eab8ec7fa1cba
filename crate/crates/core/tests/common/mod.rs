//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use swapcal::domain::{Context, Grid, Outcome, Transcript, TranscriptStep};

pub const TAIL: f64 = 0.866_025_403_784_438_6;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Context `(1/2, tail)` with the tail uniform in direction and radius up to `sqrt(3)/2`.
pub fn random_context(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut x = vec![0.5];
    loop {
        let tail: Vec<f64> = (1..d).map(|_| rng.gen_range(-TAIL..TAIL)).collect();
        if norm(&tail) <= TAIL {
            x.extend(tail);
            return x;
        }
    }
}

pub fn random_in_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    loop {
        let t: Vec<f64> = (0..d).map(|_| rng.gen_range(-radius..radius)).collect();
        if norm(&t) <= radius {
            return t;
        }
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..k).map(|_| if rng.gen_bool(0.6) { rng.gen() } else { 0.0 }).collect();
    let s: f64 = p.iter().sum();
    if s == 0.0 {
        p[rng.gen_range(0..k)] = 1.0;
    } else {
        p.iter_mut().for_each(|v| *v /= s);
    }
    p
}

/// Transcript with arbitrary conditional distributions and labels.
pub fn random_transcript(rng: &mut ChaCha8Rng, n: usize, t: usize, d: usize) -> Transcript<f64> {
    let mut tr = Transcript::new(Grid::new(n).unwrap(), d);
    for _ in 0..t {
        let x = Context::new(random_context(rng, d)).unwrap();
        let p = random_distribution(rng, n + 1);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut idx = n;
        for (i, v) in p.iter().enumerate() {
            acc += v;
            if u < acc {
                idx = i;
                break;
            }
        }
        while p[idx] == 0.0 {
            idx -= 1;
        }
        tr.push(TranscriptStep::new(x, p, idx, Outcome::new(rng.gen_bool(0.5))).unwrap()).unwrap();
    }
    tr
}

/// Per-cell weights of a step: realized index indicator or the full distribution.
pub fn step_weight(s: &TranscriptStep<f64>, cell: usize, pseudo: bool) -> f64 {
    if pseudo {
        s.cond_dist[cell]
    } else if s.sampled_index == cell {
        1.0
    } else {
        0.0
    }
}

/// Largest eigenvalue of a small symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_max_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
}

/// Maximum of `objective` over grid points of the given step in `[-r, r]^d` (`d <= 3`),
/// with points outside the ball pulled radially onto its surface. Three
/// dimensions search coarsely first and then refine around the best point.
pub fn theta_grid_max(d: usize, radius: f64, step: f64, objective: &dyn Fn(&[f64]) -> f64) -> f64 {
    let search = |center: &[f64], half: f64, h: f64| -> (f64, Vec<f64>) {
        let k = (half / h).round() as i64;
        let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
        let mut idx = vec![-k; d];
        let mut theta = [0.0f64; 3];
        let mut pulled = [0.0f64; 3];
        loop {
            for a in 0..d {
                theta[a] = center[a] + idx[a] as f64 * h;
            }
            let n = norm(&theta[..d]);
            let point: &[f64] = if n > radius {
                for a in 0..d {
                    pulled[a] = theta[a] * radius / n;
                }
                &pulled[..d]
            } else {
                &theta[..d]
            };
            let v = objective(point);
            if v > best.0 {
                best = (v, point.to_vec());
            }
            let mut a = 0;
            loop {
                if a == d {
                    return best;
                }
                idx[a] += 1;
                if idx[a] > k {
                    idx[a] = -k;
                    a += 1;
                } else {
                    break;
                }
            }
        }
    };
    let origin = vec![0.0; d];
    if d <= 2 {
        search(&origin, radius, step).0
    } else {
        let coarse = 50.0 * step;
        let (_, c) = search(&origin, radius, coarse);
        search(&c, 1.5 * coarse, step).0
    }
}

/// Per-cell sums `sum w (y - p) x`, masses and squared-loss sufficient statistics.
pub struct CellSums {
    pub mass: f64,
    pub residual: Vec<f64>,
    pub gram: Vec<Vec<f64>>,
    pub cross: Vec<f64>,
    pub label_sq: f64,
    pub pred_loss: f64,
}

pub fn cell_sums(tr: &Transcript<f64>, cell: usize, pseudo: bool) -> CellSums {
    let d = tr.dim();
    let p = tr.grid().point(cell);
    let mut c = CellSums {
        mass: 0.0,
        residual: vec![0.0; d],
        gram: vec![vec![0.0; d]; d],
        cross: vec![0.0; d],
        label_sq: 0.0,
        pred_loss: 0.0,
    };
    for s in tr.steps() {
        let w = step_weight(s, cell, pseudo);
        if w == 0.0 {
            continue;
        }
        let x = s.context.coords();
        let y: f64 = s.outcome.value();
        c.mass += w;
        for a in 0..d {
            c.residual[a] += w * (y - p) * x[a];
            c.cross[a] += w * y * x[a];
            for b in 0..d {
                c.gram[a][b] += w * x[a] * x[b];
            }
        }
        c.label_sq += w * y * y;
        c.pred_loss += w * (p - y) * (p - y);
    }
    c
}

pub fn quadratic(c: &CellSums, theta: &[f64]) -> f64 {
    let d = theta.len();
    let mut v = c.label_sq - 2.0 * dot(&c.cross, theta);
    for a in 0..d {
        for b in 0..d {
            v += theta[a] * c.gram[a][b] * theta[b];
        }
    }
    v
}
