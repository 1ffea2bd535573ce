//! Bounded open domains with exact signed distance.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Shape {
    Interval { lo: f64, hi: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// Bounded open set `D` in `R^d`. All built-in shapes satisfy an exterior
/// cone condition at every boundary point, so `regularity_declared` defaults
/// to true; callers constructing problems around less regular sets can clear
/// the flag to downgrade related validation to a warning.
#[derive(Clone, Debug)]
pub struct Domain {
    dim: usize,
    shape: Shape,
    pub regularity_declared: bool,
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "interval needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Domain {
            dim: 1,
            shape: Shape::Interval { lo, hi },
            regularity_declared: true,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidProblem(format!(
                "ball needs nonempty center and radius > 0, got radius {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProblem("ball center must be finite".into()));
        }
        Ok(Domain {
            dim: center.len(),
            shape: Shape::Ball { center, radius },
            regularity_declared: true,
        })
    }

    pub fn hyper_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidProblem(
                "box needs matching nonempty lo/hi".into(),
            ));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "box needs finite lo < hi per axis, got [{l}, {h}]"
                )));
            }
        }
        Ok(Domain {
            dim: lo.len(),
            shape: Shape::Box { lo, hi },
            regularity_declared: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Open-set membership; boundary points are outside.
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        match &self.shape {
            Shape::Interval { lo, hi } => *lo < x[0] && x[0] < *hi,
            Shape::Ball { center, radius } => {
                let mut d2 = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    let t = xi - ci;
                    d2 += t * t;
                }
                d2 < radius * radius
            }
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo)
                .zip(hi)
                .all(|((xi, l), h)| *l < *xi && *xi < *h),
        }
    }

    /// Exact signed distance to the boundary: negative inside, positive
    /// outside, zero on the boundary.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.shape {
            Shape::Interval { lo, hi } => (lo - x[0]).max(x[0] - hi),
            Shape::Ball { center, radius } => {
                let mut d2 = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    let t = xi - ci;
                    d2 += t * t;
                }
                d2.sqrt() - radius
            }
            Shape::Box { lo, hi } => {
                // q_j = distance past the slab along axis j
                let mut outside2 = 0.0;
                let mut inside_max = f64::NEG_INFINITY;
                for ((xi, l), h) in x.iter().zip(lo).zip(hi) {
                    let c = 0.5 * (l + h);
                    let half = 0.5 * (h - l);
                    let q = (xi - c).abs() - half;
                    if q > 0.0 {
                        outside2 += q * q;
                    }
                    inside_max = inside_max.max(q.min(0.0));
                }
                if outside2 > 0.0 {
                    outside2.sqrt()
                } else {
                    inside_max
                }
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Interval { lo, hi } => (vec![*lo], vec![*hi]),
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    /// Largest distance between two points of the domain.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }
}
