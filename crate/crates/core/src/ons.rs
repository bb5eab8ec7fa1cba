//! Online Newton Step over the radius-4 ball with scaled squared losses
//! `phi(theta) = alpha (<theta, x> - y)^2`, and the clamped linear predictor
//! built on it.

use crate::domain::{Context, Outcome};
use crate::error::{invalid, Result};
use crate::linalg::{project_ball_a_norm, project_box, sherman_morrison_update, CurvatureMatrix};
use crate::scalar::{dot, Real};

pub const DEFAULT_BETA: f64 = 1.0 / 640.0;
pub const DEFAULT_RADIUS: f64 = 4.0;

/// Step-size constants. `omega` defaults to `1 / (4 beta^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnsConfig<R: Real = f64> {
    pub beta: R,
    pub omega: R,
    pub radius: R,
}

impl<R: Real> Default for OnsConfig<R> {
    fn default() -> Self {
        let beta = R::lit(DEFAULT_BETA);
        Self {
            beta,
            omega: R::one() / (R::lit(4.0) * beta * beta),
            radius: R::lit(DEFAULT_RADIUS),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnsState<R: Real = f64> {
    pub theta: Vec<R>,
    pub curvature: CurvatureMatrix<R>,
    pub config: OnsConfig<R>,
    pub rounds_seen: u64,
}

impl<R: Real> OnsState<R> {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// `theta = 0`, `A^{-1} = I / omega`. The seed is accepted for interface
/// symmetry; initialization is deterministic.
pub fn ons_init<R: Real>(d: usize, _seed: u64) -> Result<OnsState<R>> {
    ons_init_with(d, OnsConfig::default())
}

pub fn ons_init_with<R: Real>(d: usize, config: OnsConfig<R>) -> Result<OnsState<R>> {
    if d == 0 {
        return Err(invalid("ONS dimension must be at least 1"));
    }
    if !(config.beta > R::zero() && config.omega > R::zero() && config.radius > R::zero()) {
        return Err(invalid("ONS constants must be positive"));
    }
    Ok(OnsState {
        theta: vec![R::zero(); d],
        curvature: CurvatureMatrix::scaled_identity(d, config.omega),
        config,
        rounds_seen: 0,
    })
}

/// `grad phi(theta) = 2 alpha (<theta, x> - y) x`
pub fn scaled_loss_gradient<R: Real>(theta: &[R], x: &[R], alpha: R, y: R) -> Vec<R> {
    let c = R::lit(2.0) * alpha * (dot(theta, x) - y);
    x.iter().map(|&xi| c * xi).collect()
}

/// One ONS round in place: rank-one curvature update with the gradient at the
/// current iterate, Newton step, and projection in the curvature norm.
pub fn ons_update<R: Real>(state: &mut OnsState<R>, x: &[R], alpha: R, y: Outcome) -> Result<()> {
    if !(alpha >= R::zero() && alpha <= R::one()) {
        return Err(invalid(format!("loss scale {alpha} outside [0, 1]")));
    }
    if x.len() != state.dim() {
        return Err(invalid("ONS context dimension mismatch"));
    }
    state.rounds_seen += 1;
    if alpha == R::zero() {
        return Ok(());
    }
    let grad = scaled_loss_gradient(&state.theta, x, alpha, y.value());
    if grad.iter().all(|&g| g == R::zero()) {
        return Ok(());
    }
    state.curvature = sherman_morrison_update(&state.curvature, &grad)?;
    let step = state.curvature.apply_inverse(&grad);
    let inv_beta = R::one() / state.config.beta;
    let raw: Vec<R> = state
        .theta
        .iter()
        .zip(&step)
        .map(|(&t, &s)| t - inv_beta * s)
        .collect();
    state.theta = project_ball_a_norm(&raw, &state.curvature, state.config.radius)?;
    Ok(())
}

pub fn ons_step<R: Real>(mut state: OnsState<R>, x: &Context<R>, alpha: R, y: Outcome) -> Result<OnsState<R>> {
    ons_update(&mut state, x.coords(), alpha, y)?;
    Ok(state)
}

/// `Proj_[0,1](<theta, x>)`
pub fn alg_predict<R: Real>(state: &OnsState<R>, x: &[R]) -> Result<R> {
    if x.len() != state.dim() {
        return Err(invalid(format!(
            "context dimension {} does not match learner dimension {}",
            x.len(),
            state.dim()
        )));
    }
    project_box(dot(&state.theta, x))
}
