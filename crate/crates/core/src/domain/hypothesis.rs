use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::scalar::{dot, norm2, Real};

pub type HypothesisFn<R> = Arc<dyn Fn(&[R]) -> R + Send + Sync>;

/// An evaluable function on contexts.
#[derive(Clone)]
pub enum Hypothesis<R: Real = f64> {
    /// `<theta, x>`
    Linear(Vec<R>),
    /// `(1 + <theta, x>) / 2`
    Affine(Vec<R>),
    Constant(R),
    /// `offset + scale * base(x)`
    Shifted {
        offset: R,
        scale: R,
        base: Box<Hypothesis<R>>,
    },
    Custom { name: String, eval: HypothesisFn<R> },
}

impl<R: Real> fmt::Debug for Hypothesis<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hypothesis::Linear(t) => f.debug_tuple("Linear").field(t).finish(),
            Hypothesis::Affine(t) => f.debug_tuple("Affine").field(t).finish(),
            Hypothesis::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Hypothesis::Shifted {
                offset,
                scale,
                base,
            } => f
                .debug_struct("Shifted")
                .field("offset", offset)
                .field("scale", scale)
                .field("base", base)
                .finish(),
            Hypothesis::Custom { name, .. } => f.debug_tuple("Custom").field(name).finish(),
        }
    }
}

impl<R: Real> Hypothesis<R> {
    pub fn custom<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[R]) -> R + Send + Sync + 'static,
    {
        Hypothesis::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, x: &[R]) -> R {
        match self {
            Hypothesis::Linear(t) => dot(t, x),
            Hypothesis::Affine(t) => (R::one() + dot(t, x)) * R::lit(0.5),
            Hypothesis::Constant(c) => *c,
            Hypothesis::Shifted {
                offset,
                scale,
                base,
            } => *offset + *scale * base.eval(x),
            Hypothesis::Custom { eval, .. } => eval(x),
        }
    }

    /// Weights `w` with `f(x) = <w, x>` on every context of dimension `d`
    /// (first coordinate `1/2`), when such a representation exists.
    pub fn as_linear(&self, d: usize) -> Option<Vec<R>> {
        let e1 = |c: R| {
            let mut w = vec![R::zero(); d];
            w[0] = c * R::lit(2.0);
            w
        };
        match self {
            Hypothesis::Linear(t) if t.len() == d => Some(t.clone()),
            Hypothesis::Affine(t) if t.len() == d => {
                let mut w: Vec<R> = t.iter().map(|&v| v * R::lit(0.5)).collect();
                w[0] += R::one();
                Some(w)
            }
            Hypothesis::Constant(c) => Some(e1(*c)),
            Hypothesis::Shifted {
                offset,
                scale,
                base,
            } => {
                let mut w = base.as_linear(d)?;
                w.iter_mut().for_each(|v| *v *= *scale);
                w[0] += *offset * R::lit(2.0);
                Some(w)
            }
            _ => None,
        }
    }
}

/// Set of comparator functions over which metric suprema are taken.
#[derive(Clone, Debug)]
pub enum HypothesisClass<R: Real = f64> {
    /// `{x -> <theta, x> : ||theta|| <= radius}`
    LinearBall { radius: R },
    /// `{x -> (1 + <theta, x>) / 2 : ||theta|| <= 1}`
    AffineRestricted,
    Finite(Vec<Hypothesis<R>>),
    /// Finite `eps`-cover of the linear ball of the given radius.
    Cover { eps: R, radius: R },
}

impl<R: Real> HypothesisClass<R> {
    pub fn ball(radius: R) -> Self {
        HypothesisClass::LinearBall { radius }
    }

    pub fn descriptor(&self) -> String {
        match self {
            HypothesisClass::LinearBall { radius } => format!("ball:{radius}"),
            HypothesisClass::AffineRestricted => "affine-res".into(),
            HypothesisClass::Finite(fs) => format!("finite:{}", fs.len()),
            HypothesisClass::Cover { eps, radius } => format!("cover:{eps}:ball:{radius}"),
        }
    }
}

pub const DEFAULT_MEMBER_CAP: usize = 1_000_000;

/// Enumeration result of [`class_members`].
#[derive(Clone, Debug)]
pub enum Members<R: Real = f64> {
    /// Infinite class whose suprema are computed in closed form.
    Symbolic(String),
    List(Vec<Hypothesis<R>>),
}

pub fn class_members<R: Real>(class: &HypothesisClass<R>, d: usize) -> Result<Members<R>> {
    class_members_capped(class, d, DEFAULT_MEMBER_CAP)
}

pub fn class_members_capped<R: Real>(
    class: &HypothesisClass<R>,
    d: usize,
    cap: usize,
) -> Result<Members<R>> {
    match class {
        HypothesisClass::Finite(fs) => Ok(Members::List(fs.clone())),
        HypothesisClass::Cover { eps, radius } => Ok(Members::List(
            cover_points(d, *eps, *radius, cap)?
                .into_iter()
                .map(Hypothesis::Linear)
                .collect(),
        )),
        other => Ok(Members::Symbolic(other.descriptor())),
    }
}

fn cover_step<R: Real>(d: usize, eps: R) -> R {
    // Half the cell diagonal must not exceed eps.
    eps.min(R::lit(2.0) * eps / R::from_usize_lossy(d).sqrt())
}

/// Upper estimate of the number of points [`cover_points`] produces.
pub fn cover_size_estimate(d: usize, eps: f64, radius: f64) -> f64 {
    let step = eps.min(2.0 * eps / (d as f64).sqrt());
    let per_axis = (2.0 * (radius / step).ceil() + 1.0).max(1.0);
    per_axis.powi(d as i32)
}

/// Grid points of step `min(eps, 2 eps / sqrt(d))` near the ball of the given
/// radius, radially projected onto it. Every point of the ball lies within `eps`
/// of some returned point.
pub fn cover_points<R: Real>(d: usize, eps: R, radius: R, cap: usize) -> Result<Vec<Vec<R>>> {
    if d == 0 {
        return Err(invalid("cover needs dimension at least 1"));
    }
    if !(eps > R::zero()) || !(radius > R::zero()) {
        return Err(invalid("cover needs eps > 0 and radius > 0"));
    }
    let estimate = cover_size_estimate(d, eps.as_f64(), radius.as_f64());
    let step = cover_step(d, eps);
    let k_max = (radius / step).ceil().to_i64().unwrap_or(i64::MAX);
    // Ball volume fraction keeps the estimate honest in higher dimensions.
    let ball_fraction = unit_ball_volume(d) / 2f64.powi(d as i32);
    if estimate * ball_fraction > cap as f64 * 1.5 {
        return Err(Error::ResourceLimit {
            what: "cover enumeration",
            requested: estimate * ball_fraction,
            cap,
        });
    }
    let reach = radius + step * R::from_usize_lossy(d).sqrt() * R::lit(0.5);
    let mut out: Vec<Vec<R>> = Vec::new();
    let mut idx = vec![-k_max; d];
    loop {
        let theta: Vec<R> = idx
            .iter()
            .map(|&k| R::from_i64(k).unwrap() * step)
            .collect();
        let n = norm2(&theta);
        if n <= reach + R::tol(1e-12) {
            let point = if n > radius {
                theta.iter().map(|&v| v * radius / n).collect()
            } else {
                theta
            };
            out.push(point);
            if out.len() > cap {
                return Err(Error::ResourceLimit {
                    what: "cover enumeration",
                    requested: estimate * ball_fraction,
                    cap,
                });
            }
        }
        // odometer increment
        let mut axis = 0;
        loop {
            if axis == d {
                return Ok(dedup(out));
            }
            idx[axis] += 1;
            if idx[axis] > k_max {
                idx[axis] = -k_max;
                axis += 1;
            } else {
                break;
            }
        }
    }
}

fn dedup<R: Real>(mut pts: Vec<Vec<R>>) -> Vec<Vec<R>> {
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .find_map(|(x, y)| x.partial_cmp(y).filter(|o| o.is_ne()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pts.dedup();
    pts
}

fn unit_ball_volume(d: usize) -> f64 {
    // V_d = pi^{d/2} / Gamma(d/2 + 1), via the two-step recurrence.
    let mut v = [1.0, 2.0];
    for k in 2..=d {
        let next = 2.0 * std::f64::consts::PI / k as f64 * v[0];
        v = [v[1], next];
    }
    if d == 0 {
        1.0
    } else {
        v[1]
    }
}
