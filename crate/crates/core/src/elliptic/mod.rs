//! The discrete operator `L = -div(A∇)` on the torus, its functional calculus, the heat
//! and Poisson families built on it, and off-diagonal norm measurements.

mod calculus;
pub mod offdiag;
pub mod quadrature;
pub mod semigroup;

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{read_field, Grid, GridFunction};
use crate::c64;

pub use calculus::{Backend, CalculusOptions, Symbol};
use calculus::Calculus;

/// Complex `n×n` coefficient matrices sampled at face midpoints.
///
/// For axis `j`, entry `faces[j][i]` is `A` at `x_i + (h/2) e_j`, stored row-major. The
/// flux across that face only uses row `j`, but the whole matrix is kept for the
/// ellipticity bounds.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    grid: Grid,
    faces: Vec<Vec<c64>>,
}

impl CoefficientField {
    /// Samples `a(x)` (row-major `n×n`) at every face midpoint.
    pub fn from_fn(grid: Grid, a: impl Fn(&[f64]) -> Vec<c64>) -> Result<Self> {
        let n = grid.dim();
        let h = grid.h();
        let mut faces = Vec::with_capacity(n);
        for j in 0..n {
            let mut vals = Vec::with_capacity(grid.len() * n * n);
            for i in 0..grid.len() {
                let mut x = grid.center(i);
                x[j] += 0.5 * h;
                let m = a(&x[..n]);
                if m.len() != n * n {
                    return Err(Error::DimensionMismatch(format!(
                        "coefficient function returned {} entries, expected {}",
                        m.len(),
                        n * n
                    )));
                }
                vals.extend(m);
            }
            faces.push(vals);
        }
        Self::from_faces(grid, faces)
    }

    fn from_faces(grid: Grid, faces: Vec<Vec<c64>>) -> Result<Self> {
        if faces.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        Ok(Self { grid, faces })
    }

    /// `A ≡ c I`.
    pub fn scalar(grid: Grid, c: c64) -> Self {
        let n = grid.dim();
        let mut m = vec![c64::new(0.0, 0.0); n * n];
        for d in 0..n {
            m[d * (n + 1)] = c;
        }
        Self::from_fn(grid, |_| m.clone()).expect("constant coefficients are finite")
    }

    pub fn identity(grid: Grid) -> Self {
        Self::scalar(grid, c64::new(1.0, 0.0))
    }

    /// The named presets: `laplace` (`A ≡ I`) and `perturbed`
    /// (`a(x) = 1 + 0.4 cos 2πx + 0.4 i sin 2πx`, and `diag(a(x_1), …, a(x_n))` for `n > 1`).
    pub fn preset(grid: Grid, name: &str) -> Result<Self> {
        match name {
            "laplace" => Ok(Self::identity(grid)),
            "perturbed" => {
                let n = grid.dim();
                Self::from_fn(grid, |x| {
                    let mut m = vec![c64::new(0.0, 0.0); n * n];
                    for d in 0..n {
                        m[d * (n + 1)] = perturbed_scalar(x[d]);
                    }
                    m
                })
            }
            other => Err(Error::InvalidArgument(format!("unknown operator preset '{other}'"))),
        }
    }

    /// Cell-centred values with `n²` channels per cell; faces take the mean of the two
    /// adjacent cells.
    pub fn from_cell_values(grid: Grid, values: &[c64]) -> Result<Self> {
        let n = grid.dim();
        let nn = n * n;
        if values.len() != grid.len() * nn {
            return Err(Error::DimensionMismatch(format!(
                "coefficient field needs {} values, got {}",
                grid.len() * nn,
                values.len()
            )));
        }
        let faces = (0..n)
            .map(|j| {
                (0..grid.len())
                    .flat_map(|i| {
                        let k = grid.shift(i, j, 1);
                        (0..nn).map(move |e| 0.5 * (values[i * nn + e] + values[k * nn + e]))
                    })
                    .collect()
            })
            .collect();
        Self::from_faces(grid, faces)
    }

    /// Reads a coefficient file in the field format with `n²` channels.
    pub fn read_from(r: impl std::io::Read) -> Result<Self> {
        let (grid, channels, values) = read_field(r)?;
        if channels != grid.dim() * grid.dim() {
            return Err(Error::Format(format!(
                "coefficient file has {channels} channels, expected {}",
                grid.dim() * grid.dim()
            )));
        }
        Self::from_cell_values(grid, &values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Entry `(r, c)` of `A` on the face `i + ½ e_axis`.
    pub fn face_entry(&self, axis: usize, cell: usize, r: usize, c: usize) -> c64 {
        let n = self.grid.dim();
        self.faces[axis][cell * n * n + r * n + c]
    }

    fn sample(&self, axis: usize, cell: usize) -> &[c64] {
        let nn = self.grid.dim() * self.grid.dim();
        &self.faces[axis][cell * nn..(cell + 1) * nn]
    }

    /// True when every sample is the same matrix.
    pub fn is_constant(&self) -> bool {
        let first = self.sample(0, 0);
        self.faces.iter().all(|f| f.chunks(first.len()).all(|m| m == first))
    }

    /// True when every sample is real and symmetric, hence the operator self-adjoint.
    pub fn is_real_symmetric(&self) -> bool {
        let n = self.grid.dim();
        self.faces.iter().all(|f| {
            f.chunks(n * n).all(|m| {
                (0..n).all(|r| {
                    (0..n).all(|c| m[r * n + c].im == 0.0 && m[r * n + c] == m[c * n + r])
                })
            })
        })
    }

    /// Ellipticity bounds `(λ, Λ, ω)` and the first offending face cell, if any.
    ///
    /// `λ` is the smallest eigenvalue of the Hermitian part `(A + A*)/2`, `Λ` the largest
    /// operator norm, and `ω` the largest angle `atan(|skew part| / Hermitian floor)`
    /// bounding the numerical range of `A`.
    pub fn ellipticity(&self) -> (f64, f64, f64, Option<usize>) {
        let n = self.grid.dim();
        let mut lambda = f64::INFINITY;
        let mut big = 0.0f64;
        let mut omega = 0.0f64;
        let mut bad = None;
        let mut cache: Vec<(Vec<c64>, (f64, f64, f64))> = Vec::new();
        for axis in 0..n {
            for cell in 0..self.grid.len() {
                let m = self.sample(axis, cell);
                let stats = match cache.iter().find(|(k, _)| k.as_slice() == m) {
                    Some((_, s)) => *s,
                    None => {
                        let s = matrix_stats(m, n);
                        if cache.len() < 64 {
                            cache.push((m.to_vec(), s));
                        }
                        s
                    }
                };
                let (lo, norm, skew) = stats;
                if lo <= 0.0 && bad.is_none() {
                    bad = Some(cell);
                }
                lambda = lambda.min(lo);
                big = big.max(norm);
                if lo > 0.0 {
                    omega = omega.max((skew / lo).atan());
                }
            }
        }
        (lambda, big, omega, bad)
    }
}

/// `1 + 0.4 cos 2πx + 0.4 i sin 2πx`.
pub fn perturbed_scalar(x: f64) -> c64 {
    let a = 2.0 * PI * x;
    c64::new(1.0 + 0.4 * a.cos(), 0.4 * a.sin())
}

/// Hermitian floor, operator norm and skew-Hermitian norm of one small matrix.
fn matrix_stats(m: &[c64], n: usize) -> (f64, f64, f64) {
    let a = Mat::<c64>::from_fn(n, n, |r, c| m[r * n + c]);
    let herm = Mat::<c64>::from_fn(n, n, |r, c| 0.5 * (a[(r, c)] + a[(c, r)].conj()));
    // i·(skew part) is Hermitian with the same spectral norm
    let skew = Mat::<c64>::from_fn(n, n, |r, c| {
        c64::new(0.0, 0.5) * (a[(r, c)] - a[(c, r)].conj())
    });
    let lo = herm
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);
    let sk = skew
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map(|v| v.into_iter().fold(0.0, |acc: f64, x| acc.max(x.abs())))
        .unwrap_or(f64::NAN);
    let norm = a
        .singular_values()
        .map(|v| v.first().copied().unwrap_or(0.0))
        .unwrap_or(f64::NAN);
    (lo, norm, sk)
}

/// Sparse rows of the assembled operator.
#[derive(Clone, Debug)]
struct Stencil {
    rows: Vec<Vec<(usize, c64)>>,
}

impl Stencil {
    fn assemble(coeff: &CoefficientField) -> Self {
        let grid = coeff.grid;
        let n = grid.dim();
        let h = grid.h();
        // flux across face i + ½ e_j as a combination of cell values
        let flux = |i: usize, j: usize| -> Vec<(usize, c64)> {
            let mut out = Vec::with_capacity(2 + 4 * (n - 1));
            let ip = grid.shift(i, j, 1);
            for k in 0..n {
                let a = coeff.face_entry(j, i, j, k);
                if a == c64::new(0.0, 0.0) {
                    continue;
                }
                if k == j {
                    out.push((ip, a / h));
                    out.push((i, -a / h));
                } else {
                    let w = a / (4.0 * h);
                    out.push((grid.shift(i, k, 1), w));
                    out.push((grid.shift(i, k, -1), -w));
                    out.push((grid.shift(ip, k, 1), w));
                    out.push((grid.shift(ip, k, -1), -w));
                }
            }
            out
        };
        let rows = (0..grid.len())
            .map(|i| {
                let mut row: Vec<(usize, c64)> = Vec::new();
                for j in 0..n {
                    for (c, v) in flux(i, j) {
                        row.push((c, -v / h));
                    }
                    for (c, v) in flux(grid.shift(i, j, -1), j) {
                        row.push((c, v / h));
                    }
                }
                row.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, c64)> = Vec::with_capacity(row.len());
                for (c, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                merged
            })
            .collect();
        Self { rows }
    }

    fn apply(&self, x: &[c64]) -> Vec<c64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    fn is_hermitian(&self, tol: f64) -> bool {
        self.rows.iter().enumerate().all(|(r, row)| {
            row.iter().all(|&(c, v)| {
                let t = self.rows[c]
                    .binary_search_by_key(&r, |e| e.0)
                    .map(|k| self.rows[c][k].1)
                    .unwrap_or_default();
                (v - t.conj()).norm() <= tol * v.norm().max(1.0)
            })
        })
    }

    fn dense(&self) -> Mat<c64> {
        let m = self.rows.len();
        let mut a = Mat::<c64>::zeros(m, m);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                a[(r, c)] = v;
            }
        }
        a
    }
}

/// The assembled operator with its cached functional calculus.
#[derive(Clone)]
pub struct EllipticOperator {
    grid: Grid,
    coeff: CoefficientField,
    stencil: Arc<Stencil>,
    lambda: f64,
    big_lambda: f64,
    omega: f64,
    calculus: Arc<Calculus>,
}

impl std::fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticOperator")
            .field("grid", &self.grid)
            .field("lambda", &self.lambda)
            .field("big_lambda", &self.big_lambda)
            .field("backend", &self.calculus.backend())
            .finish()
    }
}

impl EllipticOperator {
    /// Assembles `L` and builds the functional calculus with default options.
    pub fn assemble(grid: Grid, coeff: CoefficientField) -> Result<Self> {
        Self::assemble_with(grid, coeff, CalculusOptions::default())
    }

    pub fn assemble_with(grid: Grid, coeff: CoefficientField, opts: CalculusOptions) -> Result<Self> {
        if *coeff.grid() != grid {
            return Err(Error::DimensionMismatch("coefficients live on another grid".into()));
        }
        let (lambda, big_lambda, omega, bad) = coeff.ellipticity();
        if let Some(cell) = bad {
            return Err(Error::Ellipticity {
                cell,
                reason: format!("Hermitian part has eigenvalue {lambda:.3e} ≤ 0"),
            });
        }
        let stencil = Arc::new(Stencil::assemble(&coeff));
        let mut op = Self {
            grid,
            coeff,
            stencil,
            lambda,
            big_lambda,
            omega,
            calculus: Arc::new(Calculus::Pending),
        };
        op.calculus = Arc::new(Calculus::build(&op, &opts)?);
        Ok(op)
    }

    /// Shorthand for a named preset.
    pub fn preset(grid: Grid, name: &str) -> Result<Self> {
        Self::assemble(grid, CoefficientField::preset(grid, name)?)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &CoefficientField {
        &self.coeff
    }

    /// Ellipticity constant `λ`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Bound `Λ`.
    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    /// Sector half-angle containing the numerical range of the coefficients.
    pub fn sector_angle(&self) -> f64 {
        self.omega
    }

    pub fn backend(&self) -> Backend {
        self.calculus.backend()
    }

    /// `L f` by sparse multiplication.
    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        GridFunction::from_vec_unchecked(self.grid, self.stencil.apply(f.values()))
    }

    pub(crate) fn apply_raw(&self, x: &[c64]) -> Vec<c64> {
        self.stencil.apply(x)
    }

    /// Nonzero entries of row `i` of `L`.
    pub fn row(&self, i: usize) -> &[(usize, c64)] {
        &self.stencil.rows[i]
    }

    pub fn is_hermitian(&self) -> bool {
        self.stencil.is_hermitian(1e-13)
    }

    /// The assembled matrix as a dense array.
    pub fn dense_matrix(&self) -> Mat<c64> {
        self.stencil.dense()
    }

    /// `φ(L) f`.
    pub fn apply_matrix_function(&self, phi: &Symbol, f: &GridFunction) -> Result<GridFunction> {
        let mut out = self.apply_symbols(std::slice::from_ref(phi), f)?;
        Ok(out.pop().expect("one symbol in, one field out"))
    }

    /// `φ_k(L) f` for a batch of symbols sharing one factorisation pass over `f`.
    pub fn apply_symbols(&self, phis: &[Symbol], f: &GridFunction) -> Result<Vec<GridFunction>> {
        if *f.grid() != self.grid {
            return Err(Error::DimensionMismatch("field lives on another grid".into()));
        }
        let outs = self.calculus.apply(self, phis, f.values())?;
        Ok(outs
            .into_iter()
            .map(|v| GridFunction::from_vec_unchecked(self.grid, v))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_laplacian_stencil() {
        let g = Grid::new(1, 8).unwrap();
        let op = EllipticOperator::preset(g, "laplace").unwrap();
        let h2 = 64.0;
        let row = op.row(0);
        assert_eq!(row.len(), 3);
        for &(c, v) in row {
            let want = if c == 0 { 2.0 * h2 } else { -h2 };
            assert!((v.re - want).abs() < 1e-9 && v.im == 0.0, "{c} {v}");
            assert!(c == 0 || c == 1 || c == 7);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        for (dim, n) in [(1, 16), (2, 8)] {
            let g = Grid::new(dim, n).unwrap();
            let op = EllipticOperator::preset(g, "perturbed").unwrap();
            let one = GridFunction::constant(g, c64::new(1.0, 0.0));
            assert!(op.apply(&one).values().iter().all(|v| v.norm() < 1e-12 * 4.0 * (n * n) as f64));
        }
    }

    #[test]
    fn perturbed_ellipticity() {
        let g = Grid::new(1, 32).unwrap();
        let op = EllipticOperator::preset(g, "perturbed").unwrap();
        assert!(op.lambda() >= 0.6 - 1e-12);
        assert!(op.big_lambda() <= 1.4 + 1e-12);
        assert!(!op.is_hermitian());
    }

    #[test]
    fn rejects_non_elliptic_field() {
        let g = Grid::new(1, 8).unwrap();
        let c = CoefficientField::from_fn(g, |x| vec![c64::new(x[0] - 0.5, 0.0)]).unwrap();
        assert!(matches!(EllipticOperator::assemble(g, c), Err(Error::Ellipticity { .. })));
    }
}
