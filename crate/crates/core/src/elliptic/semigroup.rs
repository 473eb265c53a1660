//! Heat and Poisson families, their spatial gradients and time derivatives.

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::c64;

use super::quadrature::{SubordinationNodes, SubordinationRule};
use super::{EllipticOperator, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Heat,
    Poisson,
}

/// Which derivatives of the family to produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Derivative {
    /// The scalar family itself.
    None,
    /// `t ∇_y`: `n` components.
    Spatial,
    /// `t ∇_{y,t}`: `n` spatial components followed by the time component.
    Full,
}

/// One member of a semigroup family at time `t`.
///
/// `order` is `m` in `(t²L)^m e^{-t²L}` or `K` in `(t√L)^{2K} e^{-t√L}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemigroupRequest {
    pub family: Family,
    pub derivative: Derivative,
    pub order: u32,
    pub t: f64,
}

impl SemigroupRequest {
    pub fn new(family: Family, derivative: Derivative, order: u32, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time t = {t} must be positive")));
        }
        Ok(Self { family, derivative, order, t })
    }

    /// The scalar symbol of the family at this time.
    fn base(&self) -> Symbol {
        match self.family {
            Family::Heat => Symbol::Heat { tau: self.t * self.t, power: self.order },
            Family::Poisson => Symbol::Poisson { t: self.t, power: 2 * self.order },
        }
    }

    /// The symbol one step up, used by the time derivative.
    fn raised(&self) -> Symbol {
        match self.family {
            Family::Heat => Symbol::Heat { tau: self.t * self.t, power: self.order + 1 },
            Family::Poisson => Symbol::Poisson { t: self.t, power: 2 * self.order + 1 },
        }
    }

    /// Time component `t ∂_t` as `a · base - b · raised`.
    fn time_coefficients(&self) -> (f64, f64) {
        match self.family {
            Family::Heat => (2.0 * self.order as f64, 2.0),
            Family::Poisson => (2.0 * self.order as f64, 1.0),
        }
    }
}

/// A list of scalar fields on one grid, read as a vector at every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub components: Vec<GridFunction>,
}

impl VectorField {
    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Euclidean length of the vector at every cell.
    pub fn magnitude(&self) -> Vec<f64> {
        let m = self.grid().len();
        (0..m)
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c.values()[i].norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Squared Euclidean length of the first `count` components at every cell.
    pub fn partial_norm_sqr(&self, count: usize) -> Vec<f64> {
        let m = self.grid().len();
        (0..m)
            .map(|i| self.components[..count].iter().map(|c| c.values()[i].norm_sqr()).sum())
            .collect()
    }
}

/// `t D⁺_j u` for every axis `j`, with forward differences.
pub fn scaled_forward_gradient(u: &GridFunction, t: f64) -> Vec<GridFunction> {
    let grid = *u.grid();
    let s = t / grid.h();
    (0..grid.dim())
        .map(|j| {
            let vals = (0..grid.len())
                .map(|i| (u.values()[grid.shift(i, j, 1)] - u.values()[i]) * s)
                .collect();
            GridFunction::from_vec_unchecked(grid, vals)
        })
        .collect()
}

/// Evaluates several requests on one field with a single pass of the functional calculus.
pub fn evaluate_requests(
    op: &EllipticOperator,
    requests: &[SemigroupRequest],
    f: &GridFunction,
) -> Result<Vec<VectorField>> {
    let mut symbols = Vec::new();
    let mut slots = Vec::with_capacity(requests.len());
    for r in requests {
        if !(r.t > 0.0) {
            return Err(Error::InvalidArgument(format!("time t = {} must be positive", r.t)));
        }
        let b = symbols.len();
        symbols.push(r.base());
        if r.derivative == Derivative::Full {
            symbols.push(r.raised());
        }
        slots.push(b);
    }
    let values = op.apply_symbols(&symbols, f)?;
    Ok(requests
        .iter()
        .zip(slots)
        .map(|(r, b)| {
            let base = &values[b];
            match r.derivative {
                Derivative::None => VectorField { components: vec![base.clone()] },
                Derivative::Spatial => VectorField { components: scaled_forward_gradient(base, r.t) },
                Derivative::Full => {
                    let mut components = scaled_forward_gradient(base, r.t);
                    let (a, c) = r.time_coefficients();
                    let raised = &values[b + 1];
                    let vals = base
                        .values()
                        .iter()
                        .zip(raised.values())
                        .map(|(x, y)| x * a - y * c)
                        .collect();
                    components.push(GridFunction::from_vec_unchecked(*f.grid(), vals));
                    VectorField { components }
                }
            }
        })
        .collect())
}

fn single(op: &EllipticOperator, r: SemigroupRequest, f: &GridFunction) -> Result<VectorField> {
    Ok(evaluate_requests(op, &[r], f)?.pop().expect("one request"))
}

/// `(t²L)^m e^{-t²L} f`.
pub fn heat_family(op: &EllipticOperator, t: f64, m: u32, f: &GridFunction) -> Result<GridFunction> {
    let r = SemigroupRequest::new(Family::Heat, Derivative::None, m, t)?;
    Ok(single(op, r, f)?.components.remove(0))
}

/// `t∇_y` (`Spatial`) or `t∇_{y,t}` (`Full`) of `(t²L)^m e^{-t²L} f`. The time component is
/// `2m Q_m f - 2 Q_{m+1} f` with `Q_j = (t²L)^j e^{-t²L}`.
pub fn heat_gradient(
    op: &EllipticOperator,
    t: f64,
    m: u32,
    f: &GridFunction,
    mode: Derivative,
) -> Result<VectorField> {
    if mode == Derivative::None {
        return Err(Error::InvalidArgument("gradient mode must be spatial or full".into()));
    }
    single(op, SemigroupRequest::new(Family::Heat, mode, m, t)?, f)
}

/// How the Poisson family is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PoissonMethod {
    /// Symbol `(t²z)^K e^{-t√z}` through the functional calculus.
    Direct,
    /// Quadrature of the subordination identity over heat evaluations.
    Subordination(SubordinationRule),
}

/// Accuracy demanded of a subordination rule on the operator's spectral range.
pub const SUBORDINATION_TOL: f64 = 1e-8;

/// `(t√L)^{2K} e^{-t√L} f`.
pub fn poisson_family(
    op: &EllipticOperator,
    t: f64,
    k: u32,
    f: &GridFunction,
    method: PoissonMethod,
) -> Result<GridFunction> {
    let r = SemigroupRequest::new(Family::Poisson, Derivative::None, k, t)?;
    match method {
        PoissonMethod::Direct => Ok(single(op, r, f)?.components.remove(0)),
        PoissonMethod::Subordination(rule) => {
            let nodes = SubordinationNodes::new(rule)?;
            let grid = op.grid();
            let h = grid.h();
            // c = t²λ/4 over the spectral range of L on mean-zero fields
            let mu1 = 4.0 * (std::f64::consts::PI * h).sin().powi(2) / (h * h);
            let c_lo = 0.25 * t * t * op.lambda() * mu1;
            let c_hi = 0.25 * t * t * 4.0 * grid.dim() as f64 * op.big_lambda() / (h * h);
            nodes.check(rule, c_lo, c_hi, SUBORDINATION_TOL)?;
            // (t²z)^K e^{-τ z} = (4u)^K (τz)^K e^{-τz} with τ = t²/(4u)
            let symbols: Vec<Symbol> = nodes
                .u
                .iter()
                .map(|&u| Symbol::Heat { tau: t * t / (4.0 * u), power: k })
                .collect();
            let parts = op.apply_symbols(&symbols, f)?;
            let mut acc = vec![c64::new(0.0, 0.0); grid.len()];
            for ((part, &u), &w) in parts.iter().zip(&nodes.u).zip(&nodes.w) {
                let c = w * (4.0 * u).powi(k as i32);
                for (a, v) in acc.iter_mut().zip(part.values()) {
                    *a += v * c;
                }
            }
            Ok(GridFunction::from_vec_unchecked(*grid, acc))
        }
    }
}

/// `t∇_y` or `t∇_{y,t}` of `(t√L)^{2K} e^{-t√L} f`; the time component is
/// `2K P_K f - (t√L)^{2K+1} e^{-t√L} f`.
pub fn poisson_gradient(
    op: &EllipticOperator,
    t: f64,
    k: u32,
    f: &GridFunction,
    mode: Derivative,
) -> Result<VectorField> {
    if mode == Derivative::None {
        return Err(Error::InvalidArgument("gradient mode must be spatial or full".into()));
    }
    single(op, SemigroupRequest::new(Family::Poisson, mode, k, t)?, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn mode(grid: Grid, k: usize) -> GridFunction {
        GridFunction::from_fn(grid, |x| c64::from_polar(1.0, 2.0 * PI * k as f64 * x[0])).unwrap()
    }

    #[test]
    fn heat_on_a_fourier_mode() {
        let g = Grid::new(1, 32).unwrap();
        let op = EllipticOperator::preset(g, "laplace").unwrap();
        let h = g.h();
        let f = mode(g, 3);
        let mu = 4.0 * (PI * 3.0 * h).sin().powi(2) / (h * h);
        for m in 0..3 {
            let t = 0.07;
            let got = heat_family(&op, t, m, &f).unwrap();
            let s = (t * t * mu).powi(m as i32) * (-t * t * mu).exp();
            let want = f.scale(c64::new(s, 0.0));
            assert!(got.relative_l2_error(&want) < 1e-12);
        }
    }

    #[test]
    fn constants_pass_or_vanish() {
        let g = Grid::new(1, 16).unwrap();
        let op = EllipticOperator::preset(g, "perturbed").unwrap();
        let one = GridFunction::constant(g, c64::new(2.0, -1.0));
        let p0 = poisson_family(&op, 0.1, 0, &one, PoissonMethod::Direct).unwrap();
        assert!(p0.max_abs_diff(&one) < 1e-10);
        let p1 = poisson_family(&op, 0.1, 1, &one, PoissonMethod::Direct).unwrap();
        assert!(p1.values().iter().all(|v| v.norm() < 1e-10));
        let grad = heat_gradient(&op, 0.1, 0, &one, Derivative::Full).unwrap();
        assert!(grad.magnitude().iter().all(|&v| v < 1e-10));
    }

    #[test]
    fn time_component_with_zero_order() {
        let g = Grid::new(1, 16).unwrap();
        let op = EllipticOperator::preset(g, "laplace").unwrap();
        let f = mode(g, 2);
        let t = 0.05;
        let full = heat_gradient(&op, t, 0, &f, Derivative::Full).unwrap();
        let q1 = heat_family(&op, t, 1, &f).unwrap();
        assert!(full.components[1].relative_l2_error(&q1.scale(c64::new(-2.0, 0.0))) < 1e-13);
    }
}
