//! Tent-space functionals over cones and Carleson boxes, and the covering geometry
//! (Whitney cubes, γ-density sets) built alongside them.

mod continuous;
mod ensemble;
mod geometry;

pub use continuous::{continuous_cone_at, continuous_cone_on_indicator};
pub use ensemble::{random_upper_half_field, structured_fixtures, FieldEnsemble};
pub use geometry::{gamma_density_complement, whitney, whitney_csv, DyadicCube, GammaDensity, WhitneyCheck};

use rayon::prelude::*;

use crate::balls::{ball_sums, BallFamily, BallStencil};
use crate::error::{Error, Result};
use crate::grid::{pow_abs, Grid, GridFunction, TimeGrid, UpperHalfField};
use crate::weights::Weight;
use crate::c64;

/// Slack for comparing time levels against radii.
const LEVEL_SLACK: f64 = 1e-12;

/// Aperture, integrability exponent and time window of a cone functional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeParams {
    pub aperture: f64,
    pub q: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl ConeParams {
    /// `q = 2` over every level of `time`.
    pub fn new(aperture: f64, time: &TimeGrid) -> Self {
        let l = time.levels();
        Self { aperture, q: 2.0, t_lo: l[0], t_hi: l[l.len() - 1] }
    }

    pub fn with_q(self, q: f64) -> Self {
        Self { q, ..self }
    }

    pub fn with_range(self, t_lo: f64, t_hi: f64) -> Self {
        Self { t_lo, t_hi, ..self }
    }

    /// Levels of `time` inside the window, after checking the parameters.
    fn levels(&self, time: &TimeGrid) -> Result<Vec<usize>> {
        if !(self.aperture > 0.0) || !(self.q > 0.0) || !(self.t_lo <= self.t_hi) {
            return Err(Error::InvalidArgument(format!("bad cone parameters {self:?}")));
        }
        let ks: Vec<usize> = (0..time.len())
            .filter(|&k| {
                let t = time.levels()[k];
                t >= self.t_lo * (1.0 - LEVEL_SLACK) && t <= self.t_hi * (1.0 + LEVEL_SLACK)
            })
            .collect();
        let top = ks.last().map(|&k| time.levels()[k]).ok_or_else(|| {
            Error::InvalidArgument(format!("no time level in [{}, {}]", self.t_lo, self.t_hi))
        })?;
        if self.aperture * top > 0.5 * (1.0 + LEVEL_SLACK) {
            return Err(Error::RadiusTooLarge { radius: self.aperture * top });
        }
        Ok(ks)
    }
}

/// Per-level cone contributions `h^n Δ_k / t_k^{n+1} · Σ_{|x-y| < α t_k} m_k(y)` for the
/// listed levels, where `m` is level-major.
fn cone_terms(grid: &Grid, time: &TimeGrid, m: &[f64], aperture: f64, ks: &[usize]) -> Vec<Vec<f64>> {
    let cells = grid.len();
    let n = grid.dim() as i32;
    ks.par_iter()
        .map(|&k| {
            let t = time.levels()[k];
            let st = BallStencil::new(grid, (aperture * t).min(0.5)).expect("checked radius");
            let c = grid.cell_volume() * time.dt(k) / t.powi(n + 1);
            let mut s = ball_sums(grid, &m[k * cells..(k + 1) * cells], &st);
            s.iter_mut().for_each(|v| *v *= c);
            s
        })
        .collect()
}

/// `A^α_q` on level-major magnitudes.
pub fn cone_functional_abs(grid: &Grid, time: &TimeGrid, mags: &[f64], params: &ConeParams) -> Result<Vec<f64>> {
    if mags.len() != grid.len() * time.len() {
        return Err(Error::DimensionMismatch("magnitudes do not match grid x time".into()));
    }
    let ks = params.levels(time)?;
    let powered: Vec<f64> = mags.iter().map(|&v| pow_abs(v, params.q)).collect();
    let terms = cone_terms(grid, time, &powered, params.aperture, &ks);
    let mut acc = vec![0.0; grid.len()];
    // fixed summation order keeps the result exactly monotone in the aperture
    for t in &terms {
        for (a, v) in acc.iter_mut().zip(t) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|v| pow_abs(v, 1.0 / params.q)).collect())
}

/// `A^α_q F(x) = (Σ_k Σ_{|x-y| < α t_k} |F(y,t_k)|^q h^n Δ_k / t_k^{n+1})^{1/q}`.
pub fn cone_functional(f: &UpperHalfField, params: &ConeParams) -> Result<GridFunction> {
    let mags: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    let out = cone_functional_abs(f.grid(), f.time(), &mags, params)?;
    Ok(real_field(*f.grid(), out))
}

fn real_field(grid: Grid, v: Vec<f64>) -> GridFunction {
    GridFunction::from_vec_unchecked(grid, v.into_iter().map(|x| c64::new(x, 0.0)).collect())
}

fn levels_up_to(time: &TimeGrid, r: f64) -> usize {
    time.levels().iter().take_while(|&&t| t <= r * (1.0 + LEVEL_SLACK)).count()
}

/// `C_q F(x) = sup_{B ∋ x} ((1/|B|) Σ_{t_k ≤ r_B} Σ_{y ∈ B} |F(y,t_k)|^q h^n Δ_k / t_k)^{1/q}`.
pub fn carleson_functional(f: &UpperHalfField, q: f64, family: &BallFamily) -> Result<GridFunction> {
    check_family(f, family)?;
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(format!("exponent q = {q} must be positive")));
    }
    let grid = *f.grid();
    let time = f.time();
    let cells = grid.len();
    let powered = f.abs_pow(q);
    // running sums over levels, so the truncation at r_B is one lookup
    let mut cumulative = vec![vec![0.0; cells]];
    for k in 0..time.len() {
        let mut next = cumulative[k].clone();
        for (a, v) in next.iter_mut().zip(&powered[k * cells..(k + 1) * cells]) {
            *a += v;
        }
        cumulative.push(next);
    }
    let log_ratio = time.ratio().ln();
    let sup = family.sup_over_containing_with(
        |r| cumulative[levels_up_to(time, r)].as_slice(),
        |_, count, sum| log_ratio * sum / count as f64,
    );
    Ok(real_field(grid, sup.into_iter().map(|v| pow_abs(v.max(0.0), 1.0 / q)).collect()))
}

/// `C_{q,p0} F(x_0) = sup_{B ∋ x_0} ((1/|B|) Σ_{x ∈ B} (A_{q,r_B} F(x))^{p0/q} h^n)^{1/p0}`
/// where `A_{q,r}` is the aperture-one cone sum truncated at `t_k ≤ r`.
pub fn carleson_p0(f: &UpperHalfField, q: f64, p0: f64, family: &BallFamily) -> Result<GridFunction> {
    check_family(f, family)?;
    if !(q > 0.0) || !(p0 > 0.0) {
        return Err(Error::InvalidArgument(format!("exponents q = {q}, p0 = {p0} must be positive")));
    }
    let grid = *f.grid();
    let time = f.time();
    let ks: Vec<usize> = (0..time.len()).collect();
    let terms = cone_terms(&grid, time, &f.abs_pow(q), 1.0, &ks);
    let mut cumulative = vec![vec![0.0; grid.len()]];
    for t in &terms {
        let mut next = cumulative.last().expect("nonempty").clone();
        for (a, v) in next.iter_mut().zip(t) {
            *a += v;
        }
        cumulative.push(next);
    }
    let sup = family.sup_over_containing_with(
        |r| {
            cumulative[levels_up_to(time, r)]
                .iter()
                .map(|&v| pow_abs(v, p0 / q))
                .collect::<Vec<f64>>()
        },
        |_, count, sum| sum / count as f64,
    );
    Ok(real_field(grid, sup.into_iter().map(|v| pow_abs(v.max(0.0), 1.0 / p0)).collect()))
}

fn check_family(f: &UpperHalfField, family: &BallFamily) -> Result<()> {
    if family.grid() != f.grid() {
        return Err(Error::DimensionMismatch("ball family and field live on different grids".into()));
    }
    Ok(())
}

/// `Σ_x (Σ_{|x-y| < α t} g(y) h^n)^{1/q} w(x) h^n` for a nonnegative `g` at one time `t`.
pub fn shrunk_ball_integral(g: &[f64], grid: &Grid, t: f64, alpha: f64, q: f64, w: &Weight) -> Result<f64> {
    if g.len() != grid.len() || w.grid() != grid {
        return Err(Error::DimensionMismatch("shrunk-ball integrand or weight".into()));
    }
    if !(q >= 1.0) || !(alpha > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidArgument("need q ≥ 1, α > 0, t > 0".into()));
    }
    let st = BallStencil::new(grid, alpha * t)?;
    let vol = grid.cell_volume();
    let s = ball_sums(grid, g, &st);
    Ok(s.iter().zip(w.values()).map(|(&v, &wi)| pow_abs(v * vol, 1.0 / q) * wi).sum::<f64>() * vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn setup(dim: usize, n: usize) -> (Grid, Arc<TimeGrid>) {
        let g = Grid::new(dim, n).unwrap();
        let t = Arc::new(TimeGrid::standard(&g));
        (g, t)
    }

    #[test]
    fn zero_field_gives_zero() {
        let (g, t) = setup(2, 16);
        let f = UpperHalfField::zeros(g, t.clone());
        let fam = BallFamily::dyadic(&g);
        assert!(cone_functional(&f, &ConeParams::new(1.0, &t)).unwrap().values().iter().all(|v| *v == c64::new(0.0, 0.0)));
        assert!(carleson_functional(&f, 2.0, &fam).unwrap().abs().iter().all(|&v| v == 0.0));
        assert!(carleson_p0(&f, 2.0, 1.5, &fam).unwrap().abs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn space_independent_field_matches_ball_volumes() {
        let (g, t) = setup(2, 32);
        let f = UpperHalfField::from_fn(g, t.clone(), |_, s| c64::new(1.0 + s, 0.0)).unwrap();
        let a = cone_functional(&f, &ConeParams::new(1.0, &t)).unwrap().abs();
        let mut want = 0.0;
        for (k, &s) in t.levels().iter().enumerate() {
            let count = BallStencil::new(&g, s).unwrap().count() as f64;
            want += (1.0 + s).powi(2) * count * g.cell_volume() * t.dt(k) / s.powi(3);
        }
        for v in a {
            assert!((v - want.sqrt()).abs() < 1e-12 * want.sqrt());
        }
        // the lattice count tracks π r² within 5% once the ball spans a few cells
        let s = t.levels()[t.len() - 2];
        let count = BallStencil::new(&g, s).unwrap().count() as f64 * g.cell_volume();
        assert!((count / (std::f64::consts::PI * s * s) - 1.0).abs() < 0.05);
    }

    #[test]
    fn aperture_beyond_the_torus_is_rejected() {
        let (g, t) = setup(1, 16);
        let f = UpperHalfField::zeros(g, t.clone());
        assert!(cone_functional(&f, &ConeParams::new(2.0, &t)).is_err());
        let p = ConeParams::new(2.0, &t).with_range(0.0, 0.25);
        assert!(cone_functional(&f, &p).is_ok());
    }

    #[test]
    fn carleson_of_one_matches_brute_force() {
        let (g, t) = setup(1, 16);
        let f = UpperHalfField::from_fn(g, t.clone(), |_, _| c64::new(1.0, 0.0)).unwrap();
        let fam = BallFamily::dyadic(&g);
        let fast = carleson_functional(&f, 2.0, &fam).unwrap();
        let slow = carleson_functional(&f, 2.0, &fam.to_explicit()).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-13);
        // sup over balls of (ln ρ · #{t_k ≤ r})^{1/2}, attained by the largest radius
        let want = (t.ratio().ln() * t.len() as f64).sqrt();
        assert!(fast.abs().iter().all(|&v| (v - want).abs() < 1e-12));
    }
}
