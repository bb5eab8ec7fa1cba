use crate::error::{invalid, Result};
use crate::scalar::{norm2, Real};

/// A feature vector `x` whose first coordinate is pinned to `1/2` and whose
/// Euclidean norm is at most one.
#[derive(Clone, Debug, PartialEq)]
pub struct Context<R: Real = f64> {
    coords: Vec<R>,
}

impl<R: Real> Context<R> {
    pub fn new(coords: Vec<R>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("context must have dimension at least 1"));
        }
        if coords[0] != R::lit(0.5) {
            return Err(invalid(format!(
                "context first coordinate must be 1/2, got {}",
                coords[0]
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("context has non-finite coordinates"));
        }
        let norm = norm2(&coords);
        if norm > R::one() + R::tol(1e-9) {
            return Err(invalid(format!("context norm {norm} exceeds 1")));
        }
        Ok(Self { coords })
    }

    /// Builds a context from the tail coordinates, prepending the constant `1/2`.
    pub fn from_tail(tail: &[R]) -> Result<Self> {
        let mut coords = Vec::with_capacity(tail.len() + 1);
        coords.push(R::lit(0.5));
        coords.extend_from_slice(tail);
        Self::new(coords)
    }

    pub fn coords(&self) -> &[R] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl<R: Real> AsRef<[R]> for Context<R> {
    fn as_ref(&self) -> &[R] {
        &self.coords
    }
}

/// Binary label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Outcome(bool);

impl Outcome {
    pub const ZERO: Outcome = Outcome(false);
    pub const ONE: Outcome = Outcome(true);

    pub fn new(bit: bool) -> Self {
        Outcome(bit)
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Outcome(false)),
            1 => Ok(Outcome(true)),
            _ => Err(invalid(format!("label must be 0 or 1, got {v}"))),
        }
    }

    pub fn bit(self) -> u8 {
        self.0 as u8
    }

    pub fn value<R: Real>(self) -> R {
        if self.0 {
            R::one()
        } else {
            R::zero()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_first_coordinate() {
        assert!(Context::new(vec![0.5, 0.5]).is_ok());
        assert!(Context::new(vec![0.4, 0.5]).is_err());
        assert!(Context::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn norm_bound() {
        assert!(Context::new(vec![0.5, 0.9]).is_err());
        let tail = (0.75f64).sqrt();
        assert!(Context::new(vec![0.5, tail]).is_ok());
    }

    #[test]
    fn outcome_values() {
        assert_eq!(Outcome::from_u8(1).unwrap().value::<f64>(), 1.0);
        assert_eq!(Outcome::from_u8(0).unwrap().bit(), 0);
        assert!(Outcome::from_u8(2).is_err());
    }
}
