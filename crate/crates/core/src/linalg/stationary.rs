use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

use super::Matrix;

/// Square matrix whose columns are probability vectors; column `j` is the
/// distribution over grid points proposed by learner `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnStochasticMatrix<R: Real = f64> {
    columns: Vec<Vec<R>>,
}

impl<R: Real> ColumnStochasticMatrix<R> {
    pub fn from_columns(columns: Vec<Vec<R>>) -> Result<Self> {
        let n = columns.len();
        if n == 0 {
            return Err(invalid("empty stochastic matrix"));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(invalid(format!("column {j} has length {}, expected {n}", col.len())));
            }
            crate::domain::check_distribution(col)
                .map_err(|e| invalid(format!("column {j}: {e}")))?;
        }
        Ok(Self { columns })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<R>] {
        &self.columns
    }

    pub fn entry(&self, i: usize, j: usize) -> R {
        self.columns[j][i]
    }

    /// `Q p`
    pub fn apply(&self, p: &[R]) -> Vec<R> {
        let n = self.dim();
        let mut out = vec![R::zero(); n];
        for (col, &pj) in self.columns.iter().zip(p) {
            if pj == R::zero() {
                continue;
            }
            for (o, &c) in out.iter_mut().zip(col) {
                *o += c * pj;
            }
        }
        out
    }

    /// `||Q p - p||_inf`
    pub fn residual(&self, p: &[R]) -> R {
        self.apply(p)
            .iter()
            .zip(p)
            .map(|(&a, &b)| (a - b).abs())
            .fold(R::zero(), R::max)
    }
}

const POWER_DAMPING: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 200_000;

/// Stationary distribution `p = Q p` on the simplex.
///
/// When the chain has several closed classes the stationary set is the convex
/// hull of their individual stationary distributions `pi_k`, which have disjoint
/// supports; the minimum-norm point of that set weights `pi_k` by
/// `1 / ||pi_k||^2`. Each class is solved directly; damped power iteration is
/// the fallback when the direct residual misses tolerance.
pub fn stationary_distribution<R: Real>(q: &ColumnStochasticMatrix<R>) -> Result<Vec<R>> {
    let n = q.dim();
    let tol = R::tol(1e-8);
    let mut p = direct_solve(q);
    if let Some(ref cand) = p {
        if q.residual(cand) <= tol {
            return Ok(p.take().unwrap());
        }
    }
    let direct_residual = p.as_ref().map(|c| q.residual(c));
    let start = p.unwrap_or_else(|| vec![R::one() / R::from_usize_lossy(n); n]);
    let (power, residual) = damped_power(q, start);
    if residual <= tol {
        return Ok(power);
    }
    let best = direct_residual.map_or(residual, |r| r.min(residual));
    Err(Error::NumericFailure {
        what: "stationary distribution",
        residual: best.as_f64(),
    })
}

fn direct_solve<R: Real>(q: &ColumnStochasticMatrix<R>) -> Option<Vec<R>> {
    let n = q.dim();
    let classes = closed_classes(q);
    let mut pieces: Vec<(Vec<usize>, Vec<R>)> = Vec::with_capacity(classes.len());
    for class in classes {
        let pi = solve_class(q, &class)?;
        pieces.push((class, pi));
    }
    let inv_norms: Vec<R> = pieces
        .iter()
        .map(|(_, pi)| R::one() / pi.iter().map(|&v| v * v).sum::<R>())
        .collect();
    let total: R = inv_norms.iter().copied().sum();
    let mut p = vec![R::zero(); n];
    for ((class, pi), w) in pieces.iter().zip(&inv_norms) {
        for (&state, &mass) in class.iter().zip(pi) {
            p[state] = mass * *w / total;
        }
    }
    Some(p)
}

fn solve_class<R: Real>(q: &ColumnStochasticMatrix<R>, class: &[usize]) -> Option<Vec<R>> {
    let m = class.len();
    if m == 1 {
        return Some(vec![R::one()]);
    }
    // (Q_CC - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = Matrix::zeros(m, m);
    for (r, &i) in class.iter().enumerate().take(m - 1) {
        for (c, &j) in class.iter().enumerate() {
            a[(r, c)] = q.entry(i, j) - if i == j { R::one() } else { R::zero() };
        }
    }
    for c in 0..m {
        a[(m - 1, c)] = R::one();
    }
    let mut rhs = vec![R::zero(); m];
    rhs[m - 1] = R::one();
    let mut pi = a.solve(&rhs)?;
    let clip = R::tol(1e-12);
    for v in pi.iter_mut() {
        if *v < R::zero() {
            if *v < -clip {
                return None;
            }
            *v = R::zero();
        }
    }
    let s: R = pi.iter().copied().sum();
    if !(s > R::zero()) {
        return None;
    }
    pi.iter_mut().for_each(|v| *v /= s);
    Some(pi)
}

fn damped_power<R: Real>(q: &ColumnStochasticMatrix<R>, start: Vec<R>) -> (Vec<R>, R) {
    let n = q.dim();
    let delta = R::lit(POWER_DAMPING);
    let uniform = delta / R::from_usize_lossy(n);
    let mut p = start;
    let mut best = p.clone();
    let mut best_res = q.residual(&p);
    for it in 0..POWER_MAX_ITERS {
        let next: Vec<R> = q
            .apply(&p)
            .into_iter()
            .map(|v| (R::one() - delta) * v + uniform)
            .collect();
        let s: R = next.iter().copied().sum();
        p = next.into_iter().map(|v| v / s).collect();
        if it % 64 == 0 {
            let res = q.residual(&p);
            if res < best_res {
                best_res = res;
                best = p.clone();
            }
            if res <= R::tol(1e-8) * R::lit(0.5) {
                break;
            }
        }
    }
    let res = q.residual(&p);
    if res < best_res {
        (p, res)
    } else {
        (best, best_res)
    }
}

/// Closed communicating classes of the chain `j -> i` whenever `Q[i][j] > 0`,
/// each sorted ascending, ordered by smallest member.
fn closed_classes<R: Real>(q: &ColumnStochasticMatrix<R>) -> Vec<Vec<usize>> {
    let n = q.dim();
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| q.entry(i, j) > R::zero()).collect())
        .collect();
    let comp = tarjan(&succ);
    let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut closed = vec![true; n_comp];
    for j in 0..n {
        for &i in &succ[j] {
            if comp[i] != comp[j] {
                closed[comp[j]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for s in 0..n {
        if closed[comp[s]] {
            classes[comp[s]].push(s);
        }
    }
    let mut classes: Vec<Vec<usize>> = classes.into_iter().filter(|c| !c.is_empty()).collect();
    classes.sort_by_key(|c| c[0]);
    classes
}

/// Iterative Tarjan; returns the component id of every node.
fn tarjan(succ: &[Vec<usize>]) -> Vec<usize> {
    let n = succ.len();
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp = vec![UNSET; n];
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge < succ[v].len() {
                let w = succ[v][*edge];
                *edge += 1;
                if index[w] == UNSET {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}
