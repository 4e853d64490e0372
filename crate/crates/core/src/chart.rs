use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FinslerError, Result};
use crate::scalar::Real;

/// Axis-aligned coordinate box. Points outside it are off-chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Chart {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(FinslerError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(FinslerError::InvalidArgument(format!(
                "empty chart box {lower:?} .. {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo; n],
            upper: vec![hi; n],
        }
    }

    pub fn unbounded(n: usize) -> Self {
        Self::cube(n, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains<T: Real>(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| {
                let v = v.to_f64_lossy();
                v >= *l && v <= *u
            })
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| {
                let (l, u) = (l.max(-1e6), u.min(1e6));
                l + (u - l) * rng.gen::<f64>()
            })
            .collect()
    }

    /// Shrinks the box by `margin` on every side.
    pub fn inset(&self, margin: f64) -> Result<Self> {
        Self::new(
            self.lower.iter().map(|l| l + margin).collect(),
            self.upper.iter().map(|u| u - margin).collect(),
        )
    }
}
