//! Small fixed quadrature rules used by the Kato profile integrals.

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Accurate to machine precision for the small orders
/// used here.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss-Legendre nodes on [0, r] with dyadic grading toward 0, so
/// integrands with endpoint singularities (logarithms, negative powers that
/// the radial Jacobian cancels) still integrate to near machine precision.
pub fn graded_radial(r: f64, pieces: usize, order: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(order);
    let mut out = Vec::with_capacity((pieces + 1) * order);
    let mut hi = r;
    for k in 0..=pieces {
        let lo = if k == pieces { 0.0 } else { hi * 0.5 };
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for &(t, w) in &base {
            out.push((mid + half * t, half * w));
        }
        hi = lo;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // GL-n is exact through degree 2n-1
        let rule = gauss_legendre(8);
        let integral: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
        let weight_sum: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((weight_sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_rule_handles_log_endpoint() {
        // int_0^1 ln(1/s) ds = 1
        let rule = graded_radial(1.0, 40, 16);
        let integral: f64 = rule.iter().map(|(s, w)| w * (1.0 / s).ln()).sum();
        assert!((integral - 1.0).abs() < 1e-12, "got {integral}");
        // int_0^r s ln(1/s) ds = r^2/4 + (r^2/2) ln(1/r), r = 1/2
        let r: f64 = 0.5;
        let rule = graded_radial(r, 40, 16);
        let integral: f64 = rule.iter().map(|(s, w)| w * s * (1.0 / s).ln()).sum();
        let expect = r * r / 4.0 + 0.5 * r * r * (1.0 / r).ln();
        assert!((integral - expect).abs() < 1e-14, "got {integral}");
    }
}
