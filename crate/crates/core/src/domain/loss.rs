use std::fmt;
use std::sync::Arc;

use crate::error::{domain, invalid, Result};
use crate::scalar::Real;

use super::Outcome;

pub type LossFn<R> = Arc<dyn Fn(R, R) -> R + Send + Sync>;

#[derive(Clone)]
pub enum LossKind<R: Real = f64> {
    Squared,
    Absolute,
    /// `(v - y) * sign(p - v)` with `sign(0) = +1`.
    VShaped(R),
    /// Opaque loss `(p, y) -> value`, assumed convex in `p`.
    Custom { name: String, eval: LossFn<R> },
}

impl<R: Real> fmt::Debug for LossKind<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Squared => write!(f, "Squared"),
            LossKind::Absolute => write!(f, "Absolute"),
            LossKind::VShaped(v) => write!(f, "VShaped({v})"),
            LossKind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// A loss `l(p, y)` on `[0, 1] x {0, 1}` together with its Lipschitz constant in `p`.
#[derive(Clone, Debug)]
pub struct LossSpec<R: Real = f64> {
    pub kind: LossKind<R>,
    pub lipschitz_bound: R,
}

const BEST_RESPONSE_STEPS: usize = 10_000;
const CHECK_STEPS: usize = 1_000;

impl<R: Real> LossSpec<R> {
    pub fn squared() -> Self {
        Self {
            kind: LossKind::Squared,
            lipschitz_bound: R::lit(2.0),
        }
    }

    pub fn absolute() -> Self {
        Self {
            kind: LossKind::Absolute,
            lipschitz_bound: R::one(),
        }
    }

    pub fn vshaped(v: R) -> Result<Self> {
        if !(v >= R::zero() && v <= R::one()) {
            return Err(invalid(format!("v-shaped kink {v} outside [0, 1]")));
        }
        Ok(Self {
            kind: LossKind::VShaped(v),
            // Discontinuous at the kink; the bound applies away from it.
            lipschitz_bound: R::zero(),
        })
    }

    /// `(p - y)^2 / 2`: the squared loss rescaled to be 1-Lipschitz on `[0, 1]`.
    pub fn half_squared() -> Self {
        Self::custom("half-squared", R::one(), |p: R, y: R| {
            (p - y) * (p - y) * R::lit(0.5)
        })
    }

    pub fn custom<F>(name: impl Into<String>, lipschitz_bound: R, eval: F) -> Self
    where
        F: Fn(R, R) -> R + Send + Sync + 'static,
    {
        Self {
            kind: LossKind::Custom {
                name: name.into(),
                eval: Arc::new(eval),
            },
            lipschitz_bound,
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            LossKind::Squared => "squared".into(),
            LossKind::Absolute => "absolute".into(),
            LossKind::VShaped(v) => format!("vshaped:{v}"),
            LossKind::Custom { name, .. } => name.clone(),
        }
    }

    /// Parses `squared`, `absolute`, `half-squared` or `vshaped:V`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "squared" => Ok(Self::squared()),
            "absolute" => Ok(Self::absolute()),
            "half-squared" => Ok(Self::half_squared()),
            _ => match s.strip_prefix("vshaped:") {
                Some(v) => {
                    let v: f64 = v
                        .parse()
                        .map_err(|_| invalid(format!("bad v-shaped kink in {s:?}")))?;
                    Self::vshaped(R::lit(v))
                }
                None => Err(invalid(format!("unknown loss {s:?}"))),
            },
        }
    }

    pub fn is_convex_kind(&self) -> bool {
        !matches!(self.kind, LossKind::VShaped(_))
    }

    /// Evaluation without the domain check, for inner loops over validated inputs.
    #[inline]
    pub(crate) fn eval_unchecked(&self, p: R, y: R) -> R {
        match &self.kind {
            LossKind::Squared => (p - y) * (p - y),
            LossKind::Absolute => (p - y).abs(),
            LossKind::VShaped(v) => {
                let s = if p >= *v { R::one() } else { -R::one() };
                (*v - y) * s
            }
            LossKind::Custom { eval, .. } => eval(p, y),
        }
    }

    /// A subgradient of `p -> l(p, y)`. Central differences for custom losses;
    /// zero for v-shaped losses, which are piecewise constant.
    pub(crate) fn subgradient(&self, p: R, y: R) -> R {
        match &self.kind {
            LossKind::Squared => R::lit(2.0) * (p - y),
            LossKind::Absolute => {
                if p > y {
                    R::one()
                } else if p < y {
                    -R::one()
                } else {
                    R::zero()
                }
            }
            LossKind::VShaped(_) => R::zero(),
            LossKind::Custom { eval, .. } => {
                let h = R::tol(1e-6).sqrt().min(R::lit(1e-4));
                let lo = (p - h).max(R::zero());
                let hi = (p + h).min(R::one());
                (eval(hi, y) - eval(lo, y)) / (hi - lo)
            }
        }
    }

    fn expected(&self, p: R, q: R) -> R {
        q * self.eval_unchecked(p, R::one()) + (R::one() - q) * self.eval_unchecked(p, R::zero())
    }

    /// Bounded in `[-1, 1]`, convex in `p` for convex kinds, and Lipschitz within
    /// `lipschitz_bound`, all checked on a `1e-3` grid.
    pub fn check_membership(&self) -> Result<()> {
        let step = R::one() / R::from_usize_lossy(CHECK_STEPS);
        let pts: Vec<R> = (0..=CHECK_STEPS)
            .map(|i| R::from_usize_lossy(i) * step)
            .collect();
        let slack = R::tol(1e-9);
        for y in [R::zero(), R::one()] {
            let vals: Vec<R> = pts.iter().map(|&p| self.eval_unchecked(p, y)).collect();
            if let Some(v) = vals.iter().find(|v| !(v.abs() <= R::one() + slack)) {
                return Err(invalid(format!("loss {} takes value {v} outside [-1, 1]", self.name())));
            }
            if self.is_convex_kind() {
                for w in vals.windows(3) {
                    if w[1] > (w[0] + w[2]) * R::lit(0.5) + slack {
                        return Err(invalid(format!("loss {} fails the midpoint convexity check", self.name())));
                    }
                }
                let bound = self.lipschitz_bound * step + slack;
                if vals.windows(2).any(|w| (w[1] - w[0]).abs() > bound) {
                    return Err(invalid(format!(
                        "loss {} exceeds its Lipschitz bound {}",
                        self.name(),
                        self.lipschitz_bound
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn loss_eval<R: Real>(loss: &LossSpec<R>, p: R, y: Outcome) -> Result<R> {
    if !(p >= R::zero() && p <= R::one()) {
        return Err(domain(format!("prediction {p} outside [0, 1]")));
    }
    Ok(loss.eval_unchecked(p, y.value()))
}

/// Best response `k_l(q) = argmin_p q l(p, 1) + (1 - q) l(p, 0)`.
pub fn post_process<R: Real>(loss: &LossSpec<R>, q: R) -> Result<R> {
    if !(q >= R::zero() && q <= R::one()) {
        return Err(domain(format!("belief {q} outside [0, 1]")));
    }
    Ok(match loss.kind {
        LossKind::Squared => q,
        LossKind::Absolute => {
            if q >= R::lit(0.5) {
                R::one()
            } else {
                R::zero()
            }
        }
        _ => {
            let steps = R::from_usize_lossy(BEST_RESPONSE_STEPS);
            let mut best = R::zero();
            let mut best_val = loss.expected(R::zero(), q);
            for i in 1..=BEST_RESPONSE_STEPS {
                let p = R::from_usize_lossy(i) / steps;
                let val = loss.expected(p, q);
                if val < best_val {
                    best_val = val;
                    best = p;
                }
            }
            best
        }
    })
}

/// Squared, absolute and v-shaped losses with kinks at `1/4, 1/2, 3/4`.
pub fn default_menu<R: Real>() -> Vec<LossSpec<R>> {
    let mut menu = vec![LossSpec::squared(), LossSpec::absolute()];
    for v in [0.25, 0.5, 0.75] {
        menu.push(LossSpec::vshaped(R::lit(v)).expect("kink in range"));
    }
    menu
}

/// Members of the bounded convex 1-Lipschitz class shipped with the crate.
pub fn convex_menu<R: Real>() -> Vec<LossSpec<R>> {
    vec![LossSpec::absolute(), LossSpec::half_squared()]
}
