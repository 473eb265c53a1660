//! Quadrature for the subordination identity
//! `e^{-t√λ} = π^{-1/2} ∫_0^∞ u^{-1/2} e^{-u} e^{-t²λ/(4u)} du`.

use faer::Mat;

use crate::error::{Error, Result};

/// How the `u`-integral is discretised.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubordinationRule {
    /// Trapezoid rule in `s = ln u` on `[s_min, s_max]`. The integrand is smooth and
    /// doubly-exponentially decaying in `s`, so the rule converges geometrically for every
    /// `t²λ`, including the small values where Gauss–Laguerre struggles.
    LogTrapezoid { step: f64, s_min: f64, s_max: f64 },
    /// Generalised Gauss–Laguerre rule for the weight `u^{-1/2} e^{-u}`.
    GaussLaguerre { nodes: usize },
}

impl Default for SubordinationRule {
    fn default() -> Self {
        SubordinationRule::LogTrapezoid { step: 0.2, s_min: -60.0, s_max: 4.0 }
    }
}

/// Nodes `u_i` and weights `w_i` with `Σ w_i g(u_i) ≈ π^{-1/2} ∫ u^{-1/2} e^{-u} g(u) du`.
#[derive(Clone, Debug)]
pub struct SubordinationNodes {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
}

/// Weights below this are dropped.
const NEGLIGIBLE: f64 = 1e-20;

impl SubordinationNodes {
    pub fn new(rule: SubordinationRule) -> Result<Self> {
        let (u, mut w) = match rule {
            SubordinationRule::LogTrapezoid { step, s_min, s_max } => {
                if !(step > 0.0) || !(s_min < s_max) {
                    return Err(Error::InvalidArgument("bad log-trapezoid parameters".into()));
                }
                let count = ((s_max - s_min) / step).round() as usize + 1;
                let mut u = Vec::with_capacity(count);
                let mut w = Vec::with_capacity(count);
                for k in 0..count {
                    let s = s_min + k as f64 * step;
                    let x = s.exp();
                    let weight = step * (0.5 * s).exp() * (-x).exp() / std::f64::consts::PI.sqrt();
                    if weight > NEGLIGIBLE {
                        u.push(x);
                        w.push(weight);
                    }
                }
                (u, w)
            }
            SubordinationRule::GaussLaguerre { nodes } => gauss_laguerre_half(nodes)?,
        };
        // fix the constant by exactness on the scalar case t²λ/4 = 1, where the integral is e^{-2}
        let q: f64 = u.iter().zip(&w).map(|(&x, &wi)| wi * (-1.0 / x).exp()).sum();
        let c = (-2.0f64).exp() / q;
        w.iter_mut().for_each(|x| *x *= c);
        Ok(Self { u, w })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Quadrature value of `e^{-2√c}` where `c = t²λ/4`.
    pub fn scalar(&self, c: f64) -> f64 {
        self.u.iter().zip(&self.w).map(|(&x, &wi)| wi * (-c / x).exp()).sum()
    }

    /// Worst absolute error against `e^{-2√c}` over a logarithmic sweep of `[c_lo, c_hi]`.
    pub fn worst_error(&self, c_lo: f64, c_hi: f64) -> f64 {
        let steps = 48;
        (0..=steps)
            .map(|k| {
                let c = c_lo * (c_hi / c_lo).powf(k as f64 / steps as f64);
                (self.scalar(c) - (-2.0 * c.sqrt()).exp()).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Errors out, suggesting a node count, when the sweep error exceeds `tol`.
    pub fn check(&self, rule: SubordinationRule, c_lo: f64, c_hi: f64, tol: f64) -> Result<()> {
        let estimate = self.worst_error(c_lo, c_hi);
        if estimate > tol {
            let suggested_nodes = match rule {
                SubordinationRule::GaussLaguerre { nodes } => 2 * nodes,
                SubordinationRule::LogTrapezoid { .. } => 2 * self.len(),
            };
            return Err(Error::Quadrature { estimate, suggested_nodes });
        }
        Ok(())
    }
}

/// Golub–Welsch for the generalised Laguerre weight with `α = -1/2`, normalised so the
/// weights sum to one.
fn gauss_laguerre_half(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("Gauss–Laguerre needs at least one node".into()));
    }
    let alpha = -0.5;
    let jacobi = Mat::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * i as f64 + alpha + 1.0
        } else if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            (k * (k + alpha)).sqrt()
        } else {
            0.0
        }
    });
    let evd = jacobi
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Calculus(format!("Golub–Welsch eigensolver failed: {e:?}")))?;
    let u = (0..n).map(|k| evd.S()[k]).collect();
    let w = (0..n).map(|k| evd.U()[(0, k)].powi(2)).collect();
    Ok((u, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_trapezoid_is_accurate_everywhere() {
        let q = SubordinationNodes::new(SubordinationRule::default()).unwrap();
        assert!(q.worst_error(1e-8, 1e4) < 1e-12, "{}", q.worst_error(1e-8, 1e4));
        assert!((q.scalar(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_laguerre_struggles_at_small_arguments() {
        let rule = SubordinationRule::GaussLaguerre { nodes: 48 };
        let q = SubordinationNodes::new(rule).unwrap();
        assert!(q.worst_error(1.0, 10.0) < 1e-3);
        assert!(matches!(q.check(rule, 1e-6, 1e3, 1e-8), Err(Error::Quadrature { suggested_nodes: 96, .. })));
    }
}
