//! Least-squares lines and the two falsification protocols: holdout-fitted constants and
//! refinement stability.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares.
    pub rss: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("line fit needs at least two paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("line fit needs distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Ok(LineFit { slope, intercept, rss })
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(linear_fit(&lx, &ly)?.slope)
}

/// Convergence order from errors at steps `d, d/2, d/4`: `log2(e1/e2)` and `log2(e2/e3)`,
/// reported as the smaller of the two.
pub fn observed_order(errors: [f64; 3]) -> f64 {
    let a = (errors[0] / errors[1]).log2();
    let b = (errors[1] / errors[2]).log2();
    a.min(b)
}

/// Slack on the fitted constant when asserting on the held-out half.
pub const HOLDOUT_SLACK: f64 = 1.25;

/// Outcome of the holdout protocol for an inequality `lhs ≤ C · rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Holdout {
    /// Largest `lhs/rhs` on the fitting half.
    pub fitted: f64,
    /// Largest `lhs/rhs` on the assertion half.
    pub worst_holdout: f64,
    pub slack: f64,
    pub ratios: Vec<f64>,
}

impl Holdout {
    pub fn passed(&self) -> bool {
        self.fitted.is_finite() && self.worst_holdout <= self.slack * self.fitted
    }
}

/// Fits `C` as the max ratio over the first half of the samples and asserts the second half
/// stays below `slack · C`.
pub fn holdout(ratios: Vec<f64>, slack: f64) -> Result<Holdout> {
    if ratios.len() < 2 {
        return Err(Error::InvalidArgument("holdout needs at least two samples".into()));
    }
    if ratios.iter().any(|r| r.is_nan()) {
        return Err(Error::InvalidArgument("holdout ratio is NaN".into()));
    }
    let half = ratios.len() / 2;
    let fitted = ratios[..half].iter().copied().fold(0.0, f64::max);
    let worst_holdout = ratios[half..].iter().copied().fold(0.0, f64::max);
    Ok(Holdout { fitted, worst_holdout, slack, ratios })
}

/// Default bound on the N-vs-N/2 ratio for a quantity to count as bounded.
pub const REFINEMENT_RATIO: f64 = 1.25;

/// `fine / coarse` and whether it stays below `bound`.
pub fn refinement_stable(fine: f64, coarse: f64, bound: f64) -> (f64, bool) {
    let r = fine / coarse;
    (r, r.is_finite() && r < bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14 && f.rss < 1e-24);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn holdout_halves() {
        let h = holdout(vec![1.0, 2.0, 2.4, 0.5], HOLDOUT_SLACK).unwrap();
        assert_eq!(h.fitted, 2.0);
        assert!(h.passed());
        assert!(!holdout(vec![1.0, 3.0], HOLDOUT_SLACK).unwrap().passed());
    }

    #[test]
    fn second_order_errors() {
        assert!((observed_order([1.0, 0.25, 0.0625]) - 2.0).abs() < 1e-12);
    }
}
