//! Muckenhoupt `A_p` and reverse Hölder machinery on the discrete torus.

use std::fmt::Write as _;

use crate::balls::BallFamily;
use crate::error::{Error, Result};
use crate::grid::{pow_abs, torus_distance, Grid, GridFunction};
use crate::c64;

/// Analytic descriptor of `w_θ(x) = |x - c|^{-θ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerWeight {
    pub theta: f64,
    pub center: Vec<f64>,
}

/// A strictly positive weight sampled at cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    grid: Grid,
    values: Vec<f64>,
    power: Option<PowerWeight>,
}

impl Weight {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weight values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight must be positive and finite (cell {i} has {})",
                values[i]
            )));
        }
        Ok(Self { grid, values, power: None })
    }

    /// `w ≡ 1`.
    pub fn uniform(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![1.0; grid.len()],
            power: Some(PowerWeight { theta: 0.0, center: vec![0.0; grid.dim()] }),
        }
    }

    /// `max(d(x, c), h/2)^{-θ}` at every cell center.
    pub fn power(grid: Grid, theta: f64, center: &[f64]) -> Result<Self> {
        if center.len() != grid.dim() || !theta.is_finite() {
            return Err(Error::InvalidArgument("power weight center/exponent".into()));
        }
        let floor = 0.5 * grid.h();
        let values = (0..grid.len())
            .map(|i| {
                let d = torus_distance(&grid.center(i), center, &grid).max(floor);
                d.powf(-theta)
            })
            .collect();
        Ok(Self {
            grid,
            values,
            power: Some(PowerWeight { theta, center: center.to_vec() }),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn descriptor(&self) -> Option<&PowerWeight> {
        self.power.as_ref()
    }

    /// The same weight on the mesh with half as many cells per axis: resampled when the
    /// analytic form is known, cell-averaged otherwise.
    pub fn coarsen(&self) -> Result<Self> {
        let coarse = Grid::new(self.grid.dim(), self.grid.cells_per_axis() / 2)?;
        if let Some(p) = &self.power {
            return Self::power(coarse, p.theta, &p.center);
        }
        let mut values = vec![0.0; coarse.len()];
        for i in 0..self.grid.len() {
            let m = self.grid.multi_index(i);
            let cm = [m[0] / 2, m[1] / 2, m[2] / 2];
            values[coarse.flat_index(&cm)] += self.values[i];
        }
        let k = (1usize << self.grid.dim()) as f64;
        values.iter_mut().for_each(|v| *v /= k);
        Self::new(coarse, values)
    }
}

/// `w_θ ∈ A_r` iff `-n(r-1) < θ < n`, with `θ = 0` admitted at `r = 1`.
pub fn power_weight_in_ar(theta: f64, n: usize, r: f64) -> bool {
    let n = n as f64;
    if r == 1.0 {
        return (0.0..n).contains(&theta);
    }
    -n * (r - 1.0) < theta && theta < n
}

/// `w_θ ∈ RH_{s'}` iff `θ < n/s'`, where `1/s + 1/s' = 1`. For `s = 1` the class is
/// `RH_∞`, which for power weights means `θ ≤ 0`.
pub fn power_weight_in_rhs(theta: f64, n: usize, s: f64) -> bool {
    if s == 1.0 {
        return theta <= 0.0;
    }
    if s.is_infinite() {
        return theta < n as f64;
    }
    let s_conj = s / (s - 1.0);
    theta < n as f64 / s_conj
}

/// `w_θ ∈ RH_q` in the direct index: `θ q < n`; `RH_1` is every weight and `RH_∞` means `θ ≤ 0`.
pub fn power_weight_in_rh(theta: f64, n: usize, q: f64) -> bool {
    if q == 1.0 {
        return true;
    }
    if q.is_infinite() {
        return theta <= 0.0;
    }
    theta * q < n as f64
}

/// Analytic `r_w` of a power weight: `1` for `0 ≤ θ < n`, `1 + |θ|/n` for `θ < 0`.
pub fn power_weight_rw(theta: f64, n: usize) -> f64 {
    if theta < 0.0 {
        1.0 - theta / n as f64
    } else {
        1.0
    }
}

/// Analytic `s_w` of a power weight: `n/(n-θ)` for `0 < θ < n`, `1` for `θ ≤ 0`.
pub fn power_weight_sw(theta: f64, n: usize) -> f64 {
    if theta > 0.0 {
        n as f64 / (n as f64 - theta)
    } else {
        1.0
    }
}

fn check_same_grid(w: &Weight, family: &BallFamily) -> Result<()> {
    if w.grid() != family.grid() {
        return Err(Error::DimensionMismatch("weight and ball family grids differ".into()));
    }
    Ok(())
}

/// Largest value of `(avg_B w)(avg_B w^{1-p'})^{p-1}` over the family; for `p = 1`,
/// `avg_B w / min_B w`.
pub fn estimate_ap_constant(w: &Weight, p: f64, family: &BallFamily) -> Result<f64> {
    check_same_grid(w, family)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("A_p exponent {p} must be in [1, ∞)")));
    }
    let vals = w.values();
    if p == 1.0 {
        let mut best: f64 = 1.0;
        family.for_each_ball(|_, cells| {
            let (s, mn) = cells
                .iter()
                .fold((0.0, f64::INFINITY), |(s, m), &i| (s + vals[i], m.min(vals[i])));
            best = best.max(s / cells.len() as f64 / mn);
        });
        return Ok(best);
    }
    let e = 1.0 - p / (p - 1.0);
    // scale w^{1-p'} by its global maximum so extreme exponents stay representable
    let logs: Vec<f64> = vals.iter().map(|v| e * v.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sigma: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let mut best: f64 = 1.0;
    two_averages(family, vals, &sigma, |aw, asig| {
        if asig > 0.0 {
            let v = aw * ((p - 1.0) * (asig.ln() + top)).exp();
            best = best.max(v);
        }
    });
    Ok(best)
}

/// Largest value of `(avg_B w^q)^{1/q} / avg_B w` over the family; `q = ∞` uses `max_B w`.
pub fn estimate_rh_constant(w: &Weight, q: f64, family: &BallFamily) -> Result<f64> {
    check_same_grid(w, family)?;
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("reverse Hölder index {q} must be ≥ 1")));
    }
    let top = w.values().iter().copied().fold(0.0, f64::max);
    let scaled: Vec<f64> = w.values().iter().map(|v| v / top).collect();
    let mut best: f64 = 1.0;
    if q.is_infinite() {
        family.for_each_ball(|_, cells| {
            let (s, mx) = cells
                .iter()
                .fold((0.0, 0.0f64), |(s, m), &i| (s + scaled[i], m.max(scaled[i])));
            best = best.max(mx / (s / cells.len() as f64));
        });
        return Ok(best);
    }
    let powered: Vec<f64> = scaled.iter().map(|&v| pow_abs(v, q)).collect();
    two_averages(family, &scaled, &powered, |aw, awq| {
        best = best.max(awq.powf(1.0 / q) / aw);
    });
    Ok(best)
}

/// Name kept close to the usual notation: the reverse Hölder constant of index `s`.
pub fn estimate_rhs_constant(w: &Weight, s: f64, family: &BallFamily) -> Result<f64> {
    estimate_rh_constant(w, s, family)
}

/// Visits `(avg_B a, avg_B b)` for every ball of the family.
fn two_averages(family: &BallFamily, a: &[f64], b: &[f64], mut visit: impl FnMut(f64, f64)) {
    let grid = family.grid();
    match family.lattice_radii() {
        Some(radii) => {
            for &r in radii {
                let st = crate::balls::BallStencil::new(grid, r).expect("validated radius");
                let sa = crate::balls::ball_sums(grid, a, &st);
                let sb = crate::balls::ball_sums(grid, b, &st);
                let c = st.count() as f64;
                for (x, y) in sa.iter().zip(&sb) {
                    visit(x / c, y / c);
                }
            }
        }
        None => family.for_each_ball(|_, cells| {
            let c = cells.len() as f64;
            let x: f64 = cells.iter().map(|&i| a[i]).sum();
            let y: f64 = cells.iter().map(|&i| b[i]).sum();
            visit(x / c, y / c);
        }),
    }
}

/// Uncentered maximal function `sup_{B ∋ x} (avg_B |f|^{p0})^{1/p0}` over the family.
pub fn hl_maximal(f: &GridFunction, p0: f64, family: &BallFamily) -> Result<GridFunction> {
    if f.grid() != family.grid() {
        return Err(Error::DimensionMismatch("field and ball family grids differ".into()));
    }
    let m = hl_maximal_abs(&f.abs(), p0, family)?;
    Ok(GridFunction::from_vec_unchecked(
        *f.grid(),
        m.into_iter().map(|v| c64::new(v, 0.0)).collect(),
    ))
}

/// [`hl_maximal`] on precomputed magnitudes.
pub fn hl_maximal_abs(mags: &[f64], p0: f64, family: &BallFamily) -> Result<Vec<f64>> {
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent p0 = {p0} must be positive")));
    }
    let powered: Vec<f64> = mags.iter().map(|&v| pow_abs(v, p0)).collect();
    let sup = family.sup_over_containing(&powered, |_, count, sum| sum / count as f64);
    Ok(sup.into_iter().map(|v| pow_abs(v.max(0.0), 1.0 / p0)).collect())
}

/// Open interval `(lo, hi)`, `hi` possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, p: f64) -> bool {
        self.lo < p && p < self.hi
    }
}

/// `W_w(p0, q0) = (p0 r_w, q0 / s_w)`, with `0·r_w = 0` and `∞ / s_w = ∞`.
pub fn admissible_interval(p0: f64, q0: f64, r_w: f64, s_w: f64) -> Result<Interval> {
    if !(p0 >= 0.0) || p0.is_infinite() {
        return Err(Error::InvalidArgument(format!("p0 = {p0} must be finite and ≥ 0")));
    }
    if !(p0 < q0) {
        return Err(Error::InvalidArgument(format!("need p0 < q0, got {p0} ≥ {q0}")));
    }
    if !(r_w >= 1.0) || !(s_w >= 1.0) {
        return Err(Error::InvalidArgument("critical exponents must be ≥ 1".into()));
    }
    let lo = if p0 == 0.0 { 0.0 } else { p0 * r_w };
    let hi = if q0.is_infinite() { f64::INFINITY } else { q0 / s_w };
    Ok(Interval { lo, hi })
}

/// `p_+^{K,*} = p_+ n / (n - (2K+1) p_+)` when `(2K+1) p_+ < n`, otherwise `∞`.
pub fn p_plus_kstar(p_plus: f64, k: u32, n: usize) -> Result<f64> {
    if !(p_plus > 1.0) {
        return Err(Error::InvalidArgument(format!("p_+ = {p_plus} must exceed 1")));
    }
    if p_plus.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let n = n as f64;
    let m = (2 * k + 1) as f64 * p_plus;
    Ok(if m < n { p_plus * n / (n - m) } else { f64::INFINITY })
}

/// Bounded/unbounded verdict from two resolutions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlowUp {
    pub fine: f64,
    pub coarse: f64,
    pub threshold: f64,
}

impl BlowUp {
    pub fn ratio(&self) -> f64 {
        self.fine / self.coarse
    }

    /// `log2(fine / coarse)`: the observed power of `N` in the constant.
    pub fn growth(&self) -> f64 {
        self.ratio().log2()
    }

    pub fn unbounded(&self) -> bool {
        self.ratio() > self.threshold
    }
}

/// Default blow-up threshold on `C_N / C_{N/2}`.
pub const BLOWUP_RATIO: f64 = 1.5;

/// The family used at half resolution: dyadic stays dyadic, otherwise the same physical
/// radii that the coarse mesh can still resolve.
fn coarse_family(family: &BallFamily, coarse: &Grid) -> Result<BallFamily> {
    let fine = family.grid();
    if *family == BallFamily::dyadic(fine) {
        return Ok(BallFamily::dyadic(coarse));
    }
    let radii = family
        .lattice_radii()
        .ok_or_else(|| Error::InvalidArgument("critical exponents need a lattice family".into()))?;
    let kept: Vec<f64> = radii.iter().copied().filter(|&r| r >= 2.0 * coarse.h()).collect();
    BallFamily::lattice(coarse, kept)
}

pub fn ap_blowup(w: &Weight, p: f64, family: &BallFamily, threshold: f64) -> Result<BlowUp> {
    let wc = w.coarsen()?;
    let fc = coarse_family(family, wc.grid())?;
    Ok(BlowUp {
        fine: estimate_ap_constant(w, p, family)?,
        coarse: estimate_ap_constant(&wc, p, &fc)?,
        threshold,
    })
}

pub fn rh_blowup(w: &Weight, q: f64, family: &BallFamily, threshold: f64) -> Result<BlowUp> {
    let wc = w.coarsen()?;
    let fc = coarse_family(family, wc.grid())?;
    Ok(BlowUp {
        fine: estimate_rh_constant(w, q, family)?,
        coarse: estimate_rh_constant(&wc, q, &fc)?,
        threshold,
    })
}

/// A critical exponent estimate with the classifier bracket it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalEstimate {
    /// Extrapolated point where the growth exponent reaches zero.
    pub value: f64,
    /// Every exponent below `lower` is classified unbounded.
    pub lower: f64,
    /// Every exponent above `upper` is classified bounded.
    pub upper: f64,
}

impl CriticalEstimate {
    fn exact(v: f64) -> Self {
        Self { value: v, lower: v, upper: v }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Largest exponent searched for `r_w`.
const R_SEARCH_MAX: f64 = 8.0;

/// Estimates `(r_w, s_w)` by bisecting the blow-up classifier and extrapolating the growth
/// exponent `log2(C_N / C_{N/2})` linearly to zero. The growth exponent of a power weight
/// is affine in `p` for `A_p` and in `1/q` for `RH_q`, and the threshold crossing sits
/// strictly inside the unbounded side, so the raw bisection point is biased.
pub fn estimate_critical_exponents(
    w: &Weight,
    family: &BallFamily,
    tol: f64,
) -> Result<(CriticalEstimate, CriticalEstimate)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let thr = BLOWUP_RATIO;
    let growth_ap = |p: f64| ap_blowup(w, p, family, thr).map(|b| b.growth());
    let unbounded_ap = |p: f64| ap_blowup(w, p, family, thr).map(|b| b.unbounded());

    let r_w = if !unbounded_ap(1.0)? {
        CriticalEstimate::exact(1.0)
    } else if unbounded_ap(R_SEARCH_MAX)? {
        CriticalEstimate { value: f64::INFINITY, lower: R_SEARCH_MAX, upper: f64::INFINITY }
    } else {
        let (lo, hi) = bisect(1.0, R_SEARCH_MAX, tol, |p| unbounded_ap(p).map(|u| !u))?;
        let step = (0.25f64).max(4.0 * tol).min(lo - 1.0);
        let value = if step > 0.0 {
            extrapolate_root(lo - step, growth_ap(lo - step)?, lo, growth_ap(lo)?)
        } else {
            lo
        };
        CriticalEstimate { value: value.max(lo), lower: lo, upper: hi.max(value) }
    };

    // RH side: bisect in u = 1/q in [0, 1]; u = 1 is RH_1, always bounded.
    let growth_rh = |u: f64| rh_blowup(w, inv(u), family, thr).map(|b| b.growth());
    let unbounded_rh = |u: f64| rh_blowup(w, inv(u), family, thr).map(|b| b.unbounded());
    let s_w = if !unbounded_rh(0.0)? {
        CriticalEstimate::exact(1.0)
    } else {
        // bounded for u > u*, unbounded for u < u*
        let (ulo, uhi) = bisect(0.0, 1.0, tol / 4.0, |u| unbounded_rh(u).map(|x| !x))?;
        let step = (0.1f64).max(tol).min(ulo);
        let ustar = if step > 0.0 {
            extrapolate_root(ulo - step, growth_rh(ulo - step)?, ulo, growth_rh(ulo)?)
        } else {
            ulo
        }
        .max(ulo)
        .min(1.0 - 1e-12);
        let conj = |u: f64| 1.0 / (1.0 - u);
        CriticalEstimate { value: conj(ustar), lower: conj(ulo), upper: conj(uhi).max(conj(ustar)) }
    };
    Ok((r_w, s_w))
}

fn inv(u: f64) -> f64 {
    if u == 0.0 {
        f64::INFINITY
    } else {
        1.0 / u
    }
}

/// Shrinks `[lo, hi]` around the switch of a predicate that is false at `lo` and true at `hi`.
fn bisect(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut pred: impl FnMut(f64) -> Result<bool>,
) -> Result<(f64, f64)> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

fn extrapolate_root(x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    if (y1 - y0).abs() < 1e-12 || y1 <= 0.0 {
        return x1;
    }
    x1 - y1 * (x1 - x0) / (y1 - y0)
}

/// Table of estimated constants plus critical exponents for one weight.
#[derive(Clone, Debug)]
pub struct MuckenhouptReport {
    pub ap: Vec<(f64, f64)>,
    pub rh: Vec<(f64, f64)>,
    pub r_w: CriticalEstimate,
    pub s_w: CriticalEstimate,
    pub cells_per_axis: usize,
}

impl MuckenhouptReport {
    pub fn compute(
        w: &Weight,
        family: &BallFamily,
        ps: &[f64],
        qs: &[f64],
        tol: f64,
    ) -> Result<Self> {
        let ap = ps
            .iter()
            .map(|&p| estimate_ap_constant(w, p, family).map(|c| (p, c)))
            .collect::<Result<_>>()?;
        let rh = qs
            .iter()
            .map(|&q| estimate_rh_constant(w, q, family).map(|c| (q, c)))
            .collect::<Result<_>>()?;
        let (r_w, s_w) = estimate_critical_exponents(w, family, tol)?;
        Ok(Self { ap, rh, r_w, s_w, cells_per_axis: w.grid().cells_per_axis() })
    }

    /// CSV with columns `kind,exponent,constant,N`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,exponent,constant,N\n");
        for (p, c) in &self.ap {
            let _ = writeln!(s, "Ap,{p},{c},{}", self.cells_per_axis);
        }
        for (q, c) in &self.rh {
            let _ = writeln!(s, "RH,{q},{c},{}", self.cells_per_axis);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_examples() {
        assert!(power_weight_in_ar(0.0, 2, 1.0));
        assert!(power_weight_in_ar(1.0, 2, 1.4));
        assert!(!power_weight_in_ar(2.0, 2, 3.0));
        assert!(!power_weight_in_ar(-1.0, 2, 1.0));
        assert!(power_weight_in_rhs(-3.0, 2, 7.0));
        assert!(!power_weight_in_rhs(1.0, 2, 2.0));
        assert!(power_weight_in_rhs(1.0, 2, 3.0));
        assert!(power_weight_in_rhs(0.0, 2, 1.0));
        assert!(!power_weight_in_rhs(0.5, 2, 1.0));
        assert!(power_weight_in_rh(1.9, 2, 1.0));
        assert!(!power_weight_in_rh(1.5, 2, 4.0));
    }

    #[test]
    fn interval_conventions() {
        let i = admissible_interval(0.0, f64::INFINITY, 3.0, 2.0).unwrap();
        assert_eq!((i.lo, i.hi), (0.0, f64::INFINITY));
        let i = admissible_interval(1.0, 12.0, 1.0, 2.0).unwrap();
        assert_eq!((i.lo, i.hi), (1.0, 6.0));
        assert!(admissible_interval(2.0, 2.0, 1.0, 1.0).is_err());
        assert_eq!(p_plus_kstar(f64::INFINITY, 2, 3).unwrap(), f64::INFINITY);
        assert!((p_plus_kstar(3.0, 1, 10).unwrap() - 30.0).abs() < 1e-12);
        assert_eq!(p_plus_kstar(3.0, 0, 2).unwrap(), f64::INFINITY);
        assert!((p_plus_kstar(1.5, 0, 3).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_weights_have_unit_constants() {
        let g = Grid::new(2, 16).unwrap();
        let fam = BallFamily::dyadic(&g);
        for w in [Weight::uniform(g), Weight::new(g, vec![3.5; g.len()]).unwrap()] {
            for p in [1.0, 1.5, 2.0, 4.0] {
                assert!((estimate_ap_constant(&w, p, &fam).unwrap() - 1.0).abs() < 1e-12);
            }
            for q in [1.5, 2.0, f64::INFINITY] {
                assert!((estimate_rh_constant(&w, q, &fam).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lattice_and_explicit_paths_agree() {
        let g = Grid::new(2, 8).unwrap();
        let w = Weight::power(g, 1.0, &[0.0, 0.0]).unwrap();
        let fam = BallFamily::dyadic(&g);
        let ex = fam.to_explicit();
        for p in [1.0, 1.7, 3.0] {
            let a = estimate_ap_constant(&w, p, &fam).unwrap();
            let b = estimate_ap_constant(&w, p, &ex).unwrap();
            assert!((a - b).abs() < 1e-10 * a, "p {p}: {a} vs {b}");
        }
        let a = estimate_rh_constant(&w, 1.5, &fam).unwrap();
        let b = estimate_rh_constant(&w, 1.5, &ex).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn maximal_of_constant_and_single_cell() {
        let g = Grid::new(1, 16).unwrap();
        let fam = BallFamily::dyadic_with_cells(&g);
        let f = GridFunction::constant(g, c64::new(0.0, -2.0));
        let m = hl_maximal(&f, 1.5, &fam).unwrap();
        assert!(m.values().iter().all(|v| (v.re - 2.0).abs() < 1e-12));
        let e = GridFunction::indicator(g, &[3]);
        let m = hl_maximal(&e, 1.0, &fam).unwrap();
        assert_eq!(m.values()[3].re, 1.0);
    }
}
