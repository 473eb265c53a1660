//! Functional calculus `φ(L)` for the assembled operator.
//!
//! Three engines share one interface:
//! - constant coefficients: `L` is a convolution, diagonalised by the FFT;
//! - self-adjoint `L`: dense Hermitian eigendecomposition;
//! - everything else: Hessenberg reduction `L = Q H Q*` and a trapezoid rule on a
//!   hyperbolic contour around the sector holding the spectrum, with one shifted
//!   Hessenberg solve per node. Eigenvector bases of the complex presets are far too
//!   ill-conditioned (condition numbers near 1e9 and beyond) to diagonalise.
//!
//! Polynomial symbols bypass all three and are applied with sparse products, so they are
//! exact up to rounding.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::hessenberg;
use faer::linalg::householder;
use faer::{Conj, Mat, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::EllipticOperator;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::c64;

/// Scalar function applied to `L`.
#[derive(Clone)]
pub enum Symbol {
    /// `Σ c_k z^k`.
    Polynomial(Vec<c64>),
    /// `(τ z)^m e^{-τ z}`.
    Heat { tau: f64, power: u32 },
    /// `(t √z)^p e^{-t √z}` with the principal square root.
    Poisson { t: f64, power: u32 },
    /// Any function holomorphic on a sector around the spectrum and decaying at least like
    /// the heat symbol at the smallest supported time.
    Custom(Arc<dyn Fn(c64) -> c64 + Send + Sync>),
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Symbol::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            Symbol::Heat { tau, power } => write!(f, "Heat {{ tau: {tau}, power: {power} }}"),
            Symbol::Poisson { t, power } => write!(f, "Poisson {{ t: {t}, power: {power} }}"),
            Symbol::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Symbol {
    pub fn eval(&self, z: c64) -> c64 {
        match self {
            Symbol::Polynomial(c) => c.iter().rev().fold(c64::new(0.0, 0.0), |acc, &ck| acc * z + ck),
            Symbol::Heat { tau, power } => {
                let w = z * *tau;
                w.powu(*power) * (-w).exp()
            }
            Symbol::Poisson { t, power } => {
                let w = z.sqrt() * *t;
                w.powu(*power) * (-w).exp()
            }
            Symbol::Custom(f) => f(z),
        }
    }

    fn check_scale(&self, t_min: f64) -> Result<()> {
        let ok = match self {
            Symbol::Heat { tau, .. } => *tau >= t_min * t_min * (1.0 - 1e-9),
            Symbol::Poisson { t, .. } => *t >= t_min * (1.0 - 1e-9),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Calculus(format!(
                "{self:?} is below the smallest time scale {t_min:.3e} the contour supports"
            )))
        }
    }
}

/// Which engine evaluates non-polynomial symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Fourier,
    Hermitian,
    Contour,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Fourier => "fourier",
            Backend::Hermitian => "hermitian",
            Backend::Contour => "contour",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CalculusOptions {
    /// Force an engine; `None` picks the cheapest valid one.
    pub backend: Option<Backend>,
    /// Smallest time `t` for which the contour must resolve heat (`τ = t²`) and Poisson
    /// symbols; defaults to `h/32`.
    pub t_min: Option<f64>,
    /// Largest dense size accepted by the contour engine.
    pub max_contour_size: usize,
    /// Largest dense size accepted by the Hermitian engine.
    pub max_hermitian_size: usize,
    /// Relative discrepancy allowed in the construction-time self-check.
    pub self_check_tol: f64,
}

impl Default for CalculusOptions {
    fn default() -> Self {
        Self {
            backend: None,
            t_min: None,
            max_contour_size: 2048,
            max_hermitian_size: 4096,
            self_check_tol: 1e-8,
        }
    }
}

pub(crate) enum Calculus {
    Pending,
    Fourier(FourierCalc),
    Hermitian(HermitianCalc),
    Contour(ContourCalc),
}

impl Calculus {
    pub(crate) fn backend(&self) -> Backend {
        match self {
            Calculus::Fourier(_) => Backend::Fourier,
            Calculus::Hermitian(_) => Backend::Hermitian,
            Calculus::Contour(_) | Calculus::Pending => Backend::Contour,
        }
    }

    pub(crate) fn build(op: &EllipticOperator, opts: &CalculusOptions) -> Result<Self> {
        let grid = *op.grid();
        let backend = match opts.backend {
            Some(b) => b,
            None if op.coefficients().is_constant() => Backend::Fourier,
            None if op.is_hermitian() => Backend::Hermitian,
            None => Backend::Contour,
        };
        match backend {
            Backend::Fourier => {
                if !op.coefficients().is_constant() {
                    return Err(Error::Calculus("Fourier engine needs constant coefficients".into()));
                }
                Ok(Calculus::Fourier(FourierCalc::new(op)))
            }
            Backend::Hermitian => {
                if !op.is_hermitian() {
                    return Err(Error::Calculus("operator is not self-adjoint".into()));
                }
                if grid.len() > opts.max_hermitian_size {
                    return Err(Error::TooLarge { size: grid.len(), limit: opts.max_hermitian_size });
                }
                Ok(Calculus::Hermitian(HermitianCalc::new(op)?))
            }
            Backend::Contour => {
                if grid.len() > opts.max_contour_size {
                    return Err(Error::TooLarge { size: grid.len(), limit: opts.max_contour_size });
                }
                let t_min = opts.t_min.unwrap_or(grid.h() / 32.0);
                let calc = ContourCalc::new(op, t_min)?;
                calc.self_check(op, opts.self_check_tol)?;
                Ok(Calculus::Contour(calc))
            }
        }
    }

    /// `out[k][i] = (φ_k(L) g)_i`.
    pub(crate) fn apply(&self, op: &EllipticOperator, phis: &[Symbol], g: &[c64]) -> Result<Vec<Vec<c64>>> {
        let mut out: Vec<Option<Vec<c64>>> = vec![None; phis.len()];
        let mut rest = Vec::new();
        for (k, phi) in phis.iter().enumerate() {
            match phi {
                Symbol::Polynomial(c) => out[k] = Some(horner(op, c, g)),
                other => rest.push((k, other.clone())),
            }
        }
        if !rest.is_empty() {
            let syms: Vec<Symbol> = rest.iter().map(|(_, s)| s.clone()).collect();
            let vals = match self {
                Calculus::Pending => unreachable!("calculus is built during assembly"),
                Calculus::Fourier(c) => c.apply(&syms, g),
                Calculus::Hermitian(c) => c.apply(&syms, g),
                Calculus::Contour(c) => {
                    for s in &syms {
                        s.check_scale(c.t_min)?;
                    }
                    c.apply(&syms, g)
                }
            };
            for ((k, _), v) in rest.into_iter().zip(vals) {
                out[k] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
    }
}

fn horner(op: &EllipticOperator, c: &[c64], g: &[c64]) -> Vec<c64> {
    let mut acc = vec![c64::new(0.0, 0.0); g.len()];
    for &ck in c.iter().rev() {
        acc = op.apply_raw(&acc);
        for (a, &x) in acc.iter_mut().zip(g) {
            *a += ck * x;
        }
    }
    acc
}

// ---------------------------------------------------------------------------------------
// Fourier engine

pub(crate) struct FourierCalc {
    grid: Grid,
    symbol: Vec<c64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FourierCalc {
    fn new(op: &EllipticOperator) -> Self {
        let grid = *op.grid();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.cells_per_axis());
        let inverse = planner.plan_fft_inverse(grid.cells_per_axis());
        let mut delta = vec![c64::new(0.0, 0.0); grid.len()];
        delta[0] = c64::new(1.0, 0.0);
        // L is a convolution with its first column, so its eigenvalues are that column's DFT
        let mut symbol = op.apply_raw(&delta);
        let mut calc = Self { grid, symbol: Vec::new(), forward, inverse };
        calc.transform(&mut symbol, false);
        symbol[0] = c64::new(0.0, 0.0);
        calc.symbol = symbol;
        calc
    }

    fn transform(&self, data: &mut [c64], inverse: bool) {
        let n = self.grid.cells_per_axis();
        let dim = self.grid.dim();
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut line = vec![c64::new(0.0, 0.0); n];
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for k in 0..n {
                        line[k] = data[base + k * stride];
                    }
                    plan.process(&mut line);
                    for k in 0..n {
                        data[base + k * stride] = line[k];
                    }
                }
            }
        }
    }

    fn apply(&self, phis: &[Symbol], g: &[c64]) -> Vec<Vec<c64>> {
        let mut hat = g.to_vec();
        self.transform(&mut hat, false);
        let scale = 1.0 / g.len() as f64;
        phis.iter()
            .map(|phi| {
                let mut v: Vec<c64> = hat
                    .iter()
                    .zip(&self.symbol)
                    .map(|(x, &s)| x * phi.eval(s) * scale)
                    .collect();
                self.transform(&mut v, true);
                v
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------------------
// Hermitian engine

pub(crate) struct HermitianCalc {
    vectors: Mat<c64>,
    values: Vec<f64>,
}

impl HermitianCalc {
    fn new(op: &EllipticOperator) -> Result<Self> {
        let a = op.dense_matrix();
        let evd = a
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Calculus(format!("Hermitian eigensolver failed: {e:?}")))?;
        // L kills constants, so the smallest eigenvalue is exactly zero; snapping it keeps
        // roundoff out of symbols like √z that are steep at the origin
        let mut values: Vec<f64> = (0..a.nrows()).map(|k| evd.S()[k].re.max(0.0)).collect();
        let lowest = (0..values.len()).min_by(|&i, &j| values[i].total_cmp(&values[j]));
        if let Some(k) = lowest {
            values[k] = 0.0;
        }
        Ok(Self { vectors: evd.U().to_owned(), values })
    }

    fn apply(&self, phis: &[Symbol], g: &[c64]) -> Vec<Vec<c64>> {
        let n = g.len();
        let gm = Mat::<c64>::from_fn(n, 1, |i, _| g[i]);
        let coef = self.vectors.adjoint() * &gm;
        let w = Mat::<c64>::from_fn(n, phis.len(), |i, k| {
            phis[k].eval(c64::new(self.values[i], 0.0)) * coef[(i, 0)]
        });
        let y = &self.vectors * &w;
        (0..phis.len()).map(|k| (0..n).map(|i| y[(i, k)]).collect()).collect()
    }
}

// ---------------------------------------------------------------------------------------
// Contour engine

/// Exponent reached by `τ z` (heat) or `t √z` (Poisson) at the ends of the contour.
const DECAY_TARGET: f64 = 70.0;

pub(crate) struct ContourCalc {
    q: Mat<c64>,
    h_rows: Vec<c64>,
    nodes: Vec<c64>,
    weights: Vec<c64>,
    t_min: f64,
}

impl ContourCalc {
    fn new(op: &EllipticOperator, t_min: f64) -> Result<Self> {
        let grid = *op.grid();
        let n = grid.len();
        let a = op.dense_matrix();
        let (q, hmat) = hessenberg_decompose(a);
        let h_rows: Vec<c64> = (0..n * n).map(|k| hmat[(k / n, k % n)]).collect();

        let omega = op.sector_angle();
        if omega > 0.5 * PI - 0.05 {
            return Err(Error::Calculus(format!("sector angle {omega:.3} too close to π/2")));
        }
        // Poincaré: on mean-zero fields Re<Lf,f> ≥ λ μ_1 |f|²
        let h = grid.h();
        let mu1 = 4.0 * (PI * h).sin().powi(2) / (h * h);
        let a0 = 0.5 * op.lambda() * mu1;
        let beta = 0.5 * (omega + 0.5 * PI);
        let b0 = a0 * beta.tan();
        let strip = 0.5 * (0.5 * PI - omega);
        let step = 2.0 * PI * 0.8 * strip / 40.0;
        let heat_reach = DECAY_TARGET / (t_min * t_min * a0);
        let poisson_reach = (DECAY_TARGET / (t_min * (0.5 * beta).cos())).powi(2) * beta.cos() / a0;
        let u_max = heat_reach.max(poisson_reach).max(1.0).acosh();
        let count = (2.0 * u_max / step).ceil() as usize + 1;
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let two_pi_i = c64::new(0.0, 2.0 * PI);
        for j in 0..count {
            let u = -u_max + j as f64 * step;
            let z = c64::new(a0 * u.cosh(), -b0 * u.sinh());
            let dz = c64::new(a0 * u.sinh(), -b0 * u.cosh());
            nodes.push(z);
            weights.push(dz * step / two_pi_i);
        }
        Ok(Self { q, h_rows, nodes, weights, t_min })
    }

    fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// Resolvent solves `(z_j - H)^{-1} Q* (g - mean g)` at every node.
    fn resolvents(&self, g: &[c64]) -> (c64, Mat<c64>) {
        let n = self.dim();
        let mean = g.iter().sum::<c64>() / n as f64;
        let centered = Mat::<c64>::from_fn(n, 1, |i, _| g[i] - mean);
        let b = self.q.adjoint() * &centered;
        let b: Vec<c64> = (0..n).map(|i| b[(i, 0)]).collect();
        let cols: Vec<Vec<c64>> = self
            .nodes
            .par_iter()
            .map(|&z| {
                let mut x = b.clone();
                hessenberg_shifted_solve(&self.h_rows, n, z, &mut x);
                x
            })
            .collect();
        let r = Mat::<c64>::from_fn(n, cols.len(), |i, j| cols[j][i]);
        (mean, r)
    }

    fn apply(&self, phis: &[Symbol], g: &[c64]) -> Vec<Vec<c64>> {
        let n = self.dim();
        let (mean, r) = self.resolvents(g);
        let c = Mat::<c64>::from_fn(self.nodes.len(), phis.len(), |j, k| {
            self.weights[j] * phis[k].eval(self.nodes[j])
        });
        let y = &self.q * (&r * &c);
        phis.iter()
            .enumerate()
            .map(|(k, phi)| {
                let zero = phi.eval(c64::new(0.0, 0.0)) * mean;
                (0..n).map(|i| y[(i, k)] + zero).collect()
            })
            .collect()
    }

    /// Two identities that only hold if the contour resolves the spectrum:
    /// `z e^{-τz}` against `L e^{-τL}`, and the Poisson semigroup law.
    fn self_check(&self, op: &EllipticOperator, tol: f64) -> Result<()> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c0de);
        let g: Vec<c64> = (0..n)
            .map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let rel = |a: &[c64], b: &[c64]| {
            let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
            let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
            (num / den.max(f64::MIN_POSITIVE)).sqrt()
        };
        for tau in [self.t_min * self.t_min, 1e-3] {
            let out = self.apply(
                &[Symbol::Heat { tau, power: 0 }, Symbol::Heat { tau, power: 1 }],
                &g,
            );
            let lhs: Vec<c64> = op.apply_raw(&out[0]).into_iter().map(|v| v * tau).collect();
            let err = rel(&lhs, &out[1]);
            if !(err < tol) {
                return Err(Error::Calculus(format!(
                    "contour self-check failed at tau = {tau:.3e}: relative discrepancy {err:.3e}"
                )));
            }
        }
        let t = 4.0 * self.t_min;
        let once = self.apply(&[Symbol::Poisson { t, power: 0 }, Symbol::Poisson { t: 2.0 * t, power: 0 }], &g);
        let twice = self.apply(&[Symbol::Poisson { t, power: 0 }], &once[0]);
        let err = rel(&twice[0], &once[1]);
        if !(err < tol) {
            return Err(Error::Calculus(format!(
                "contour self-check failed on the Poisson semigroup law: relative discrepancy {err:.3e}"
            )));
        }
        Ok(())
    }
}

/// `A = Q H Q*` with `H` upper Hessenberg.
fn hessenberg_decompose(a: Mat<c64>) -> (Mat<c64>, Mat<c64>) {
    let n = a.nrows();
    if n < 3 {
        return (Mat::identity(n, n), a);
    }
    let bs = faer::linalg::qr::no_pivoting::factor::recommended_block_size::<c64>(n - 1, n - 1);
    let par = Par::Seq;
    let mut hm = a;
    let mut hh = Mat::<c64>::zeros(bs, n - 1);
    let req = hessenberg::hessenberg_in_place_scratch::<c64>(n, bs, par, Default::default()).or(
        householder::apply_block_householder_sequence_on_the_right_in_place_scratch::<c64>(n - 1, bs, n - 1),
    );
    let mut buf = MemBuffer::new(req);
    let stack = MemStack::new(&mut buf);
    hessenberg::hessenberg_in_place(hm.as_mut(), hh.as_mut(), par, stack, Default::default());
    let mut q = Mat::<c64>::identity(n, n);
    householder::apply_block_householder_sequence_on_the_right_in_place_with_conj(
        hm.as_ref().submatrix(1, 0, n - 1, n - 1),
        hh.as_ref(),
        Conj::No,
        q.as_mut().submatrix_mut(1, 1, n - 1, n - 1),
        par,
        stack,
    );
    for j in 0..n {
        for i in j + 2..n {
            hm[(i, j)] = c64::new(0.0, 0.0);
        }
    }
    (q, hm)
}

/// Solves `(z I - H) x = b` in place for upper Hessenberg `H` (row-major), by Gaussian
/// elimination with partial pivoting between adjacent rows.
fn hessenberg_shifted_solve(h: &[c64], n: usize, z: c64, x: &mut [c64]) {
    let mut a: Vec<c64> = h.iter().map(|v| -v).collect();
    for i in 0..n {
        a[i * n + i] += z;
    }
    for k in 0..n.saturating_sub(1) {
        let (top, bottom) = a.split_at_mut((k + 1) * n);
        let row_k = &mut top[k * n..];
        let row_k1 = &mut bottom[..n];
        if row_k1[k].norm_sqr() > row_k[k].norm_sqr() {
            row_k[k..].swap_with_slice(&mut row_k1[k..]);
            x.swap(k, k + 1);
        }
        let l = row_k1[k] / row_k[k];
        if l != c64::new(0.0, 0.0) {
            for c in k + 1..n {
                row_k1[c] -= l * row_k[c];
            }
            let xk = x[k];
            x[k + 1] -= l * xk;
        }
    }
    for k in (0..n).rev() {
        let row = &a[k * n..(k + 1) * n];
        let mut s = x[k];
        for c in k + 1..n {
            s -= row[c] * x[c];
        }
        x[k] = s / row[k];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::CoefficientField;
    use crate::grid::GridFunction;

    fn random_field(grid: Grid, seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GridFunction::new(
            grid,
            (0..grid.len())
                .map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hessenberg_reconstructs() {
        let g = Grid::new(1, 16).unwrap();
        let op = EllipticOperator::preset(g, "perturbed").unwrap();
        let a = op.dense_matrix();
        let (q, h) = hessenberg_decompose(a.clone());
        let back = &q * &h * q.adjoint();
        let err = (&back - &a).norm_l2() / a.norm_l2();
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn shifted_solve_inverts() {
        let g = Grid::new(1, 16).unwrap();
        let op = EllipticOperator::preset(g, "perturbed").unwrap();
        let (_, h) = hessenberg_decompose(op.dense_matrix());
        let n = h.nrows();
        let rows: Vec<c64> = (0..n * n).map(|k| h[(k / n, k % n)]).collect();
        let z = c64::new(3.0, -40.0);
        let b: Vec<c64> = (0..n).map(|i| c64::new(i as f64, 1.0)).collect();
        let mut x = b.clone();
        hessenberg_shifted_solve(&rows, n, z, &mut x);
        for i in 0..n {
            let mut s = z * x[i];
            for j in 0..n {
                s -= h[(i, j)] * x[j];
            }
            assert!((s - b[i]).norm() < 1e-9 * (1.0 + b[i].norm()));
        }
    }

    #[test]
    fn engines_agree_on_the_laplacian() {
        let g = Grid::new(2, 8).unwrap();
        let coeff = CoefficientField::identity(g);
        let f = random_field(g, 3);
        let phis = [
            Symbol::Heat { tau: 1e-3, power: 0 },
            Symbol::Heat { tau: 4e-3, power: 2 },
            Symbol::Poisson { t: 0.05, power: 1 },
        ];
        let mut results = Vec::new();
        for backend in [Backend::Fourier, Backend::Hermitian, Backend::Contour] {
            let opts = CalculusOptions { backend: Some(backend), ..Default::default() };
            let op = EllipticOperator::assemble_with(g, coeff.clone(), opts).unwrap();
            assert_eq!(op.backend(), backend);
            results.push(op.apply_symbols(&phis, &f).unwrap());
        }
        for k in 0..phis.len() {
            for other in &results[1..] {
                let e = other[k].relative_l2_error(&results[0][k]);
                assert!(e < 1e-10, "symbol {k}: {e}");
            }
        }
    }

    #[test]
    fn polynomial_symbols_are_exact() {
        let g = Grid::new(1, 32).unwrap();
        let op = EllipticOperator::preset(g, "perturbed").unwrap();
        let f = random_field(g, 9);
        let id = op.apply_matrix_function(&Symbol::Polynomial(vec![c64::new(1.0, 0.0)]), &f).unwrap();
        assert_eq!(id, f);
        let lin = op
            .apply_matrix_function(&Symbol::Polynomial(vec![c64::new(0.0, 0.0), c64::new(1.0, 0.0)]), &f)
            .unwrap();
        assert!(lin.relative_l2_error(&op.apply(&f)) < 1e-14);
    }

    #[test]
    fn contour_rejects_too_small_times() {
        let g = Grid::new(1, 16).unwrap();
        let op = EllipticOperator::preset(g, "perturbed").unwrap();
        let f = random_field(g, 1);
        let r = op.apply_matrix_function(&Symbol::Heat { tau: 1e-12, power: 0 }, &f);
        assert!(matches!(r, Err(Error::Calculus(_))));
    }
}
