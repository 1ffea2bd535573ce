//! Deterministic sample statistics.
//!
//! All reductions are fixed-order pairwise trees over the path-index order,
//! so a run's numbers are bit-identical no matter how paths were scheduled
//! across threads.

use std::collections::BTreeMap;

/// Fixed-order pairwise summation. Depends only on the slice contents and
/// order, never on chunking or thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        let mut acc = 0.0;
        for x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean, standard error and a 95% normal interval, plus free-form
/// auxiliary scalars (ordered map so downstream output is stable).
#[derive(Clone, Debug)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub ci95: (f64, f64),
    pub aux: BTreeMap<String, f64>,
}

impl Estimate {
    /// Two-pass mean and variance with the n-1 denominator. A single sample
    /// yields an infinite standard error: nothing can be certified from it.
    pub fn from_samples(samples: &[f64]) -> Estimate {
        let n = samples.len();
        assert!(n > 0, "estimate needs at least one sample");
        let mean = pairwise_sum(samples) / n as f64;
        let stderr = if n < 2 {
            f64::INFINITY
        } else {
            let mut sq = vec![0.0; n];
            for (s, x) in sq.iter_mut().zip(samples) {
                let d = x - mean;
                *s = d * d;
            }
            (pairwise_sum(&sq) / ((n - 1) as f64 * n as f64)).sqrt()
        };
        Estimate::from_moments(mean, stderr, n as u64)
    }

    pub fn from_moments(mean: f64, stderr: f64, n: u64) -> Estimate {
        Estimate {
            mean,
            stderr,
            n,
            ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr),
            aux: BTreeMap::new(),
        }
    }

    pub fn with_aux(mut self, key: &str, value: f64) -> Estimate {
        self.aux.insert(key.to_string(), value);
        self
    }

    /// Linear map `a * X + c` of the estimated quantity.
    pub fn scale_shift(&self, a: f64, c: f64) -> Estimate {
        let mut out = Estimate::from_moments(a * self.mean + c, a.abs() * self.stderr, self.n);
        out.aux = self.aux.clone();
        out
    }
}

/// Sum of two estimates of independent quantities.
pub fn sum_independent(a: &Estimate, b: &Estimate) -> Estimate {
    Estimate::from_moments(
        a.mean + b.mean,
        (a.stderr * a.stderr + b.stderr * b.stderr).sqrt(),
        a.n.min(b.n),
    )
}

/// Product of two estimates of independent quantities; the variance is exact
/// for independent factors (cross term included).
pub fn product_independent(a: &Estimate, b: &Estimate) -> Estimate {
    let var = a.mean * a.mean * b.stderr * b.stderr
        + b.mean * b.mean * a.stderr * a.stderr
        + a.stderr * a.stderr * b.stderr * b.stderr;
    Estimate::from_moments(a.mean * b.mean, var.sqrt(), a.n.min(b.n))
}

/// Outcome of comparing two independent estimates of the same quantity.
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub label: String,
    pub point: Vec<f64>,
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub z_score: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Default acceptance threshold for identity checks.
pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

/// Two-sample z comparison. The estimates must come from independent path
/// blocks for the combined standard error to be valid.
pub fn compare_estimates(
    label: &str,
    point: &[f64],
    lhs: Estimate,
    rhs: Estimate,
    threshold: f64,
) -> IdentityReport {
    let denom = (lhs.stderr * lhs.stderr + rhs.stderr * rhs.stderr).sqrt();
    let diff = (lhs.mean - rhs.mean).abs();
    let z_score = if denom > 0.0 {
        diff / denom
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    IdentityReport {
        label: label.to_string(),
        point: point.to_vec(),
        lhs,
        rhs,
        z_score,
        threshold,
        pass: z_score <= threshold,
    }
}

/// Least squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}
