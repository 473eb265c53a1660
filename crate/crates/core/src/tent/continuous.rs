//! Mesh-free cone functional of the fixture `a(y,t) = χ_{B(0,1/4)}(y) χ_{[1/2,1]}(t)` on ℝⁿ.

use std::f64::consts::PI;

use quadrature::double_exponential::integrate;

use crate::error::{Error, Result};

const R0: f64 = 0.25;
const TOL: f64 = 1e-12;

/// `|B(x, r) ∩ B(0, 1/4)|` for `|x| = d`, in dimension 1 or 2.
fn overlap(n: usize, d: f64, r: f64) -> f64 {
    if n == 1 {
        return ((d + r).min(R0) - (d - r).max(-R0)).max(0.0);
    }
    if d >= r + R0 {
        return 0.0;
    }
    if d <= (r - R0).abs() {
        let m = r.min(R0);
        return PI * m * m;
    }
    let a = ((d * d + r * r - R0 * R0) / (2.0 * d * r)).clamp(-1.0, 1.0).acos();
    let b = ((d * d + R0 * R0 - r * r) / (2.0 * d * R0)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r + R0) * (d + r - R0) * (d - r + R0) * (d + r + R0)).max(0.0).sqrt();
    r * r * a + R0 * R0 * b - 0.5 * k
}

/// Integrates over `[a, b]` split at the interior breakpoints.
fn piecewise(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).filter(|w| w[1] > w[0]).map(|w| integrate(&f, w[0], w[1], TOL).integral).sum()
}

/// `A^α a(x)` at `|x| = d`: `(∫_{1/2}^1 |B(x, αt) ∩ B(0,1/4)| t^{-n-1} dt)^{1/2}`.
pub fn continuous_cone_at(d: f64, alpha: f64, n: usize) -> Result<f64> {
    check(alpha, n)?;
    let breaks = [(d - R0).abs() / alpha, (d + R0) / alpha];
    let v = piecewise(|t| overlap(n, d, alpha * t) * t.powi(-(n as i32) - 1), 0.5, 1.0, &breaks);
    Ok(v.max(0.0).sqrt())
}

/// `‖A^α a‖_{L^p(w_θ)}` with `w_θ(x) = |x|^{-θ}` by radial quadrature over the support
/// `|x| < α + 1/4`.
pub fn continuous_cone_on_indicator(alpha: f64, p: f64, theta: f64, n: usize) -> Result<f64> {
    check(alpha, n)?;
    if !(p > 0.0) || !(theta < n as f64) {
        return Err(Error::InvalidArgument(format!("need p > 0 and θ < n, got p={p}, θ={theta}")));
    }
    let support = alpha + R0;
    // where the t-breakpoints cross the ends of [1/2, 1]
    let breaks: Vec<f64> = [R0 - alpha / 2.0, R0 + alpha / 2.0, R0 - alpha, R0 + alpha, alpha / 2.0 - R0, alpha - R0]
        .into_iter()
        .filter(|&x| x > 0.0)
        .collect();
    let sphere = if n == 1 { 2.0 } else { 2.0 * PI };
    let radial = |d: f64| {
        let a = continuous_cone_at(d, alpha, n).expect("checked parameters");
        a.powf(p) * d.powf(n as f64 - 1.0 - theta)
    };
    Ok((sphere * piecewise(radial, 0.0, support, &breaks)).powf(1.0 / p))
}

fn check(alpha: f64, n: usize) -> Result<()> {
    if !(n == 1 || n == 2) {
        return Err(Error::InvalidArgument(format!("mesh-free evaluator supports n = 1, 2; got {n}")));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("aperture {alpha} must be positive")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_value_in_the_plane() {
        let v = continuous_cone_at(0.0, 1.0, 2).unwrap();
        assert!((v - (3.0 * PI / 32.0).sqrt()).abs() < 1e-10, "{v}");
    }

    #[test]
    fn support_and_lower_bound() {
        for alpha in [1.0, 2.0, 4.0] {
            for n in [1, 2] {
                assert_eq!(continuous_cone_at((4.0 * alpha + 1.0) / 4.0 + 1e-9, alpha, n).unwrap(), 0.0);
                let inner = (2.0 * alpha - 1.0) / 4.0;
                assert!(continuous_cone_at(0.99 * inner, alpha, n).unwrap() > 0.1);
            }
        }
    }

    #[test]
    fn lens_area_limits() {
        assert!((overlap(2, 0.0, 0.1) - PI * 0.01).abs() < 1e-15);
        assert_eq!(overlap(2, 0.6, 0.3), 0.0);
        // continuity across the internal tangency
        let r = 0.4;
        assert!((overlap(2, r - R0 - 1e-9, r) - overlap(2, r - R0 + 1e-9, r)).abs() < 1e-6);
    }
}
