//! Restricted operator norms `‖χ_F T (χ_E ·)‖_{p→q}`, decay-model fits and uniform
//! boundedness scans.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::grid::{pow_abs, Grid, GridFunction};
use crate::c64;

use super::semigroup::{evaluate_requests, Derivative, Family, SemigroupRequest, VectorField};
use super::EllipticOperator;

/// Number of random probes used for general `(p, q)`.
pub const RANDOM_PROBES: usize = 64;

/// Columns of `χ_F T χ_E`: for each `j ∈ E`, the components of `T e_j` on `F`, stacked.
/// The sets may overlap here; only the off-diagonal entry point insists on disjointness.
pub fn restricted_block(
    apply: &dyn Fn(&GridFunction) -> Result<VectorField>,
    grid: &Grid,
    e: &[usize],
    f: &[usize],
) -> Result<Mat<c64>> {
    check_sets(grid, e, f, false)?;
    let mut cols: Vec<Vec<c64>> = Vec::with_capacity(e.len());
    for &j in e {
        let out = apply(&GridFunction::indicator(*grid, &[j]))?;
        cols.push(
            out.components
                .iter()
                .flat_map(|c| f.iter().map(move |&i| c.values()[i]))
                .collect(),
        );
    }
    let rows = cols[0].len();
    Ok(Mat::from_fn(rows, e.len(), |r, c| cols[c][r]))
}

fn check_sets(grid: &Grid, e: &[usize], f: &[usize], disjoint: bool) -> Result<()> {
    if e.is_empty() || f.is_empty() {
        return Err(Error::InvalidArgument("E and F must be nonempty".into()));
    }
    if e.iter().chain(f).any(|&i| i >= grid.len()) {
        return Err(Error::InvalidArgument("cell index out of range".into()));
    }
    if disjoint && e.iter().any(|i| f.contains(i)) {
        return Err(Error::InvalidArgument("E and F must be disjoint".into()));
    }
    Ok(())
}

/// `‖χ_F T χ_E‖_{p→q}` for a linear map given by its action.
///
/// For `p = q = 2` this is the largest singular value of the explicit block, which is the
/// exact restricted norm. Otherwise it is the best ratio over unit vectors, indicator of
/// `E`, and `RANDOM_PROBES` seeded random fields supported in `E`, a lower estimate.
pub fn restricted_norm(
    apply: &dyn Fn(&GridFunction) -> Result<VectorField>,
    grid: &Grid,
    e: &[usize],
    f: &[usize],
    p: f64,
    q: f64,
    seed: u64,
) -> Result<f64> {
    if !(p >= 1.0) || !(q >= p) {
        return Err(Error::InvalidArgument(format!("need 1 ≤ p ≤ q, got p={p}, q={q}")));
    }
    let block = restricted_block(apply, grid, e, f)?;
    let comps = block.nrows() / f.len();
    if p == 2.0 && q == 2.0 {
        let s = block
            .singular_values()
            .map_err(|e| Error::Calculus(format!("SVD failed: {e:?}")))?;
        return Ok(s.first().copied().unwrap_or(0.0));
    }
    let vol = grid.cell_volume();
    let ratio = |g: &[c64]| -> f64 {
        let gp: f64 = g.iter().map(|v| pow_abs(v.norm(), p)).sum::<f64>() * vol;
        let mut out = 0.0;
        for (i, _) in f.iter().enumerate() {
            let mut sq = 0.0;
            for c in 0..comps {
                let r = c * f.len() + i;
                let v: c64 = (0..e.len()).map(|j| block[(r, j)] * g[j]).sum();
                sq += v.norm_sqr();
            }
            out += pow_abs(sq.sqrt(), q);
        }
        (out * vol).powf(1.0 / q) / gp.powf(1.0 / p)
    };
    let mut best: f64 = 0.0;
    let mut probe = vec![c64::new(0.0, 0.0); e.len()];
    for j in 0..e.len() {
        probe.iter_mut().for_each(|v| *v = c64::new(0.0, 0.0));
        probe[j] = c64::new(1.0, 0.0);
        best = best.max(ratio(&probe));
    }
    best = best.max(ratio(&vec![c64::new(1.0, 0.0); e.len()]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_PROBES {
        for v in probe.iter_mut() {
            *v = c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        best = best.max(ratio(&probe));
    }
    Ok(best)
}

/// `‖χ_F T_t χ_E‖_{p→q}` for one member of a semigroup family.
pub fn offdiagonal_opnorm(
    op: &EllipticOperator,
    request: &SemigroupRequest,
    e: &[usize],
    f: &[usize],
    p: f64,
    q: f64,
) -> Result<f64> {
    check_sets(op.grid(), e, f, true)?;
    let apply = |g: &GridFunction| -> Result<VectorField> {
        Ok(evaluate_requests(op, std::slice::from_ref(request), g)?.remove(0))
    };
    restricted_norm(&apply, op.grid(), e, f, p, q, 0x0ff_d1a6)
}

/// Gap between two cells in the torus sup-norm sense along the lattice, `(k-1) h` for
/// centers `k` cells apart along one axis; generalised as center distance minus `h`.
pub fn cell_gap(grid: &Grid, a: usize, b: usize) -> f64 {
    (grid.cell_distance(a, b) - grid.h()).max(0.0)
}

/// Which decay model fits `log ‖·‖` better.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayModel {
    Exponential,
    Polynomial,
}

/// Least-squares fits of `log N` against `x = d²/t²` (exponential model) and against
/// `log(1 + x)` (polynomial model).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// Slope of `log N` in `x`.
    pub exp_slope: f64,
    pub exp_rss: f64,
    /// `β` in `N ≈ C (1 + x)^{-β}`.
    pub poly_order: f64,
    pub poly_rss: f64,
}

impl DecayFit {
    /// Both models have two parameters, so the AIC comparison reduces to the residuals.
    pub fn preferred(&self) -> DecayModel {
        if self.exp_rss <= self.poly_rss {
            DecayModel::Exponential
        } else {
            DecayModel::Polynomial
        }
    }
}

pub fn fit_decay(x: &[f64], norms: &[f64]) -> Result<DecayFit> {
    if x.len() != norms.len() || x.len() < 3 {
        return Err(Error::InvalidArgument("decay fit needs at least three points".into()));
    }
    if norms.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("norms must be positive to fit logs".into()));
    }
    let y: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let e = linear_fit(x, &y)?;
    let lx: Vec<f64> = x.iter().map(|v| (1.0 + v).ln()).collect();
    let p = linear_fit(&lx, &y)?;
    Ok(DecayFit { exp_slope: e.slope, exp_rss: e.rss, poly_order: -p.slope, poly_rss: p.rss })
}

/// Operator whose `p → p` norm is scanned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanFamily {
    /// `e^{-t²L}`.
    Heat,
    /// `t ∇_y e^{-t²L}`.
    HeatGradient,
}

/// Dense matrix of a (possibly vector-valued) map: rows are component-major.
fn dense_map(op: &EllipticOperator, family: ScanFamily, t: f64) -> Result<Mat<c64>> {
    let grid = op.grid();
    let derivative = match family {
        ScanFamily::Heat => Derivative::None,
        ScanFamily::HeatGradient => Derivative::Spatial,
    };
    let req = SemigroupRequest::new(Family::Heat, derivative, 0, t)?;
    let all: Vec<usize> = (0..grid.len()).collect();
    let mut cols = Vec::with_capacity(grid.len());
    for &j in &all {
        let v = evaluate_requests(op, &[req], &GridFunction::indicator(*grid, &[j]))?.remove(0);
        cols.push(v.components.into_iter().flat_map(|c| c.into_values()).collect::<Vec<_>>());
    }
    let rows = cols[0].len();
    Ok(Mat::from_fn(rows, grid.len(), |r, c| cols[c][r]))
}

/// Estimate of `‖T‖_{L^p → L^p}` for a dense map with `comps` stacked output components
/// (output norm is the `L^p` norm of the Euclidean length).
///
/// Exact for `p = 1` (scalar), `p = 2` and `p = ∞` (scalar); otherwise the best of Boyd's
/// nonlinear power iteration started from every unit vector's image direction, a flat
/// field, and seeded random fields.
pub fn matrix_p_norm(t: &Mat<c64>, comps: usize, p: f64, seed: u64) -> f64 {
    let m = t.ncols();
    if p == 2.0 {
        return t.singular_values().ok().and_then(|s| s.first().copied()).unwrap_or(0.0);
    }
    let out_norm = |y: &[c64]| -> f64 {
        (0..m)
            .map(|i| {
                let sq: f64 = (0..comps).map(|c| y[c * m + i].norm_sqr()).sum();
                pow_abs(sq.sqrt(), p)
            })
            .sum::<f64>()
            .powf(1.0 / p)
    };
    let in_norm = |x: &[c64]| x.iter().map(|v| pow_abs(v.norm(), p)).sum::<f64>().powf(1.0 / p);
    let apply = |x: &[c64]| -> Vec<c64> {
        (0..t.nrows()).map(|r| (0..m).map(|c| t[(r, c)] * x[c]).sum()).collect()
    };
    if comps == 1 && p == 1.0 {
        return (0..m).map(|c| (0..m).map(|r| t[(r, c)].norm()).sum::<f64>()).fold(0.0, f64::max);
    }
    if comps == 1 && p.is_infinite() {
        return (0..m).map(|r| (0..m).map(|c| t[(r, c)].norm()).sum::<f64>()).fold(0.0, f64::max);
    }
    let pc = p / (p - 1.0);
    // dual direction of y in L^p: |y|^{p-1} sign(y), componentwise for vectors
    let dual = |y: &[c64], exponent: f64, comps: usize| -> Vec<c64> {
        let len = y.len() / comps;
        let mut out = vec![c64::new(0.0, 0.0); y.len()];
        for i in 0..len {
            let mag: f64 = (0..comps).map(|c| y[c * len + i].norm_sqr()).sum::<f64>().sqrt();
            if mag > 0.0 {
                let s = mag.powf(exponent - 2.0);
                for c in 0..comps {
                    out[c * len + i] = y[c * len + i] * s;
                }
            }
        }
        out
    };
    let adjoint = |y: &[c64]| -> Vec<c64> {
        (0..m)
            .map(|c| (0..t.nrows()).map(|r| t[(r, c)].conj() * y[r]).sum())
            .collect()
    };
    let mut starts: Vec<Vec<c64>> = vec![vec![c64::new(1.0, 0.0); m]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        starts.push((0..m).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect());
    }
    for j in (0..m).step_by((m / 8).max(1)) {
        let mut e = vec![c64::new(0.0, 0.0); m];
        e[j] = c64::new(1.0, 0.0);
        starts.push(e);
    }
    let mut best: f64 = 0.0;
    for mut x in starts {
        for _ in 0..30 {
            let nx = in_norm(&x);
            if nx == 0.0 {
                break;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let y = apply(&x);
            let ratio = out_norm(&y);
            best = best.max(ratio);
            let z = adjoint(&dual(&y, p, comps));
            let next = dual(&z, pc, 1);
            if next.iter().all(|v| *v == c64::new(0.0, 0.0)) {
                break;
            }
            x = next;
        }
    }
    best
}

/// One row of a boundedness scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub p: f64,
    /// `sup_t` of the estimated norm.
    pub sup_norm: f64,
    /// Estimated norm at each scanned time.
    pub per_time: Vec<f64>,
}

/// For each `p`, `sup_t ‖T_t‖_{p→p}` over the given times.
pub fn uniform_boundedness_scan(
    op: &EllipticOperator,
    family: ScanFamily,
    ps: &[f64],
    ts: &[f64],
) -> Result<Vec<ScanRow>> {
    if ps.is_empty() || ts.is_empty() {
        return Err(Error::InvalidArgument("scan needs at least one p and one t".into()));
    }
    let comps = match family {
        ScanFamily::Heat => 1,
        ScanFamily::HeatGradient => op.grid().dim(),
    };
    let mats: Vec<Mat<c64>> = ts.iter().map(|&t| dense_map(op, family, t)).collect::<Result<_>>()?;
    Ok(ps
        .iter()
        .map(|&p| {
            let per_time: Vec<f64> = mats.iter().map(|m| matrix_p_norm(m, comps, p, 0x5ca4)).collect();
            let sup_norm = per_time.iter().copied().fold(0.0, f64::max);
            ScanRow { p, sup_norm, per_time }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_overlapping_sets() {
        let g = Grid::new(1, 16).unwrap();
        let op = EllipticOperator::preset(g, "laplace").unwrap();
        let r = SemigroupRequest::new(Family::Heat, Derivative::None, 0, 0.1).unwrap();
        assert!(offdiagonal_opnorm(&op, &r, &[1, 2], &[2, 3], 2.0, 2.0).is_err());
        assert!(offdiagonal_opnorm(&op, &r, &[], &[2, 3], 2.0, 2.0).is_err());
    }

    #[test]
    fn p_norms_of_a_small_matrix() {
        let t = Mat::<c64>::from_fn(3, 3, |r, c| c64::new(if r == c { 2.0 } else { 0.5 }, 0.0));
        assert!((matrix_p_norm(&t, 1, 1.0, 1) - 3.0).abs() < 1e-12);
        assert!((matrix_p_norm(&t, 1, f64::INFINITY, 1) - 3.0).abs() < 1e-12);
        assert!((matrix_p_norm(&t, 1, 2.0, 1) - 3.0).abs() < 1e-12);
        // the flat vector is the maximiser for every p
        assert!((matrix_p_norm(&t, 1, 3.0, 1) - 3.0).abs() < 1e-9);
    }
}
