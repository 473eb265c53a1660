//! Periodic spatial mesh on the torus `[0,1)^n`, complex fields, geometric time levels
//! and the upper-half-space fields that tent functionals consume.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::c64;

/// Uniform periodic mesh with `N` cells per axis in dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    cells: usize,
}

impl Grid {
    pub fn new(dim: usize, cells: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if cells < 8 || !cells.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "{cells} cells per axis; need a power of two >= 8"
            )));
        }
        Ok(Self { dim, cells })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis, `N`.
    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Total number of cells, `N^n`.
    pub fn len(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Row-major multi-index of a flat cell index; unused trailing axes are zero.
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for d in (0..self.dim).rev() {
            out[d] = idx % self.cells;
            idx /= self.cells;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.cells + (i % self.cells))
    }

    /// Index of the cell displaced by `delta` cells along `axis`, with wraparound.
    pub fn shift(&self, idx: usize, axis: usize, delta: isize) -> usize {
        let mut m = self.multi_index(idx);
        let n = self.cells as isize;
        m[axis] = (m[axis] as isize + delta).rem_euclid(n) as usize;
        self.flat_index(&m)
    }

    /// Center of a cell; unused trailing coordinates are zero.
    pub fn center(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let h = self.h();
        let mut c = [0.0; 3];
        for d in 0..self.dim {
            c[d] = (m[d] as f64 + 0.5) * h;
        }
        c
    }

    /// Cell containing a point of the torus.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let mut m = [0usize; 3];
        for d in 0..self.dim {
            let u = x[d].rem_euclid(1.0);
            m[d] = ((u * self.cells as f64).floor() as usize).min(self.cells - 1);
        }
        self.flat_index(&m)
    }

    /// Torus distance between the centers of two cells.
    pub fn cell_distance(&self, a: usize, b: usize) -> f64 {
        torus_distance(&self.center(a), &self.center(b), self)
    }
}

/// Minimum over integer shifts of the Euclidean distance between two points of the torus.
pub fn torus_distance(x: &[f64], y: &[f64], grid: &Grid) -> f64 {
    let mut s = 0.0;
    for d in 0..grid.dim() {
        let mut dx = (x[d] - y[d]).abs().rem_euclid(1.0);
        if dx > 0.5 {
            dx = 1.0 - dx;
        }
        s += dx * dx;
    }
    s.sqrt()
}

/// Cells whose centers lie at torus distance strictly less than `radius` from `center`,
/// in increasing index order.
pub fn ball_cells(grid: &Grid, center: &[f64], radius: f64) -> Result<Vec<usize>> {
    check_radius(radius)?;
    Ok((0..grid.len())
        .filter(|&i| torus_distance(&grid.center(i), center, grid) < radius)
        .collect())
}

pub(crate) fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("ball radius {radius} must be positive")));
    }
    if radius > 0.5 {
        return Err(Error::RadiusTooLarge { radius });
    }
    Ok(())
}

/// Complex field sampled at cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<c64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<c64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at cell {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Wraps values already known to be finite and of the right length.
    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<c64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, c64::new(0.0, 0.0))
    }

    pub fn constant(grid: Grid, c: c64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> c64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.center(i)[..grid.dim()])).collect();
        Self::new(grid, values)
    }

    /// Indicator of a set of cells.
    pub fn indicator(grid: Grid, cells: &[usize]) -> Self {
        let mut g = Self::zeros(grid);
        for &i in cells {
            g.values[i] = c64::new(1.0, 0.0);
        }
        g
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [c64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<c64> {
        self.values
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn mean(&self) -> c64 {
        self.values.iter().sum::<c64>() / self.values.len() as f64
    }

    pub fn scale(&self, a: c64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }

    /// Unweighted `L^2` norm with midpoint quadrature.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `||self - other||_2 / ||other||_2`, with the absolute error when `other` vanishes.
    pub fn relative_l2_error(&self, reference: &Self) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = reference.values.iter().map(|v| v.norm_sqr()).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    pub fn write_to(&self, w: impl Write) -> Result<()> {
        write_field(w, &self.grid, 1, &self.values)
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let (grid, channels, values) = read_field(r)?;
        if channels != 1 {
            return Err(Error::Format(format!("expected 1 channel, found {channels}")));
        }
        Self::new(grid, values)
    }
}

const MAGIC: &[u8; 4] = b"CLGF";

/// Writes a multi-channel field: 16-byte header (magic, n, N, channels as little-endian u32)
/// followed by `(re, im)` f64 pairs, row-major over cells with channels innermost.
pub fn write_field(mut w: impl Write, grid: &Grid, channels: usize, values: &[c64]) -> Result<()> {
    if values.len() != grid.len() * channels {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} cells x {channels} channels",
            values.len(),
            grid.len()
        )));
    }
    let mut buf = Vec::with_capacity(16 + 16 * values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.cells_per_axis() as u32).to_le_bytes());
    buf.extend_from_slice(&(channels as u32).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a field written by [`write_field`], returning the grid, channel count and values.
pub fn read_field(mut r: impl Read) -> Result<(Grid, usize, Vec<c64>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|e| Error::Format(format!("short header: {e}")))?;
    if &header[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(header[4 * k..4 * k + 4].try_into().unwrap()) as usize;
    let grid = Grid::new(word(1), word(2))?;
    let channels = word(3);
    if channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    let count = grid.len() * channels;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 16 * count {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            body.len(),
            16 * count
        )));
    }
    let values = body
        .chunks_exact(16)
        .map(|c| {
            c64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((grid, channels, values))
}

/// Geometric time levels `t_k = t_0 ρ^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    levels: Vec<f64>,
    ratio: f64,
}

impl TimeGrid {
    pub fn new(grid: &Grid, t0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidTimeGrid(format!("ratio {ratio} must exceed 1")));
        }
        if count == 0 {
            return Err(Error::InvalidTimeGrid("no levels".into()));
        }
        if t0 < 0.5 * grid.h() * (1.0 - 1e-12) {
            return Err(Error::InvalidTimeGrid(format!("t_0 = {t0} below h/2")));
        }
        let mut levels: Vec<f64> = (0..count).map(|k| t0 * ratio.powi(k as i32)).collect();
        let last = levels[count - 1];
        if last > 0.5 * (1.0 + 1e-12) {
            return Err(Error::InvalidTimeGrid(format!("t_max = {last} exceeds 1/2")));
        }
        levels[count - 1] = last.min(0.5);
        Ok(Self { levels, ratio })
    }

    /// Levels from `h/2` with ratio `ρ` up to the largest one not exceeding `t_max`.
    pub fn up_to(grid: &Grid, ratio: f64, t_max: f64) -> Result<Self> {
        let t0 = 0.5 * grid.h();
        if t_max < t0 {
            return Err(Error::InvalidTimeGrid(format!("t_max = {t_max} below h/2")));
        }
        let count = ((t_max / t0).ln() / ratio.ln() + 1e-9).floor() as usize + 1;
        Self::new(grid, t0, ratio, count)
    }

    /// The default ladder: `t_0 = h/2`, `ρ = √2`, `t_max ≤ 1/2`.
    pub fn standard(grid: &Grid) -> Self {
        Self::up_to(grid, std::f64::consts::SQRT_2, 0.5).expect("standard ladder is valid")
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Measure attached to level `k` for `dt`: `t_k ln ρ`.
    pub fn dt(&self, k: usize) -> f64 {
        self.levels[k] * self.ratio.ln()
    }

    /// Keeps the levels inside `[t_lo, t_hi]` (with a relative slack of 1e-12).
    pub fn restrict(&self, t_lo: f64, t_hi: f64) -> Result<Self> {
        let levels: Vec<f64> = self
            .levels
            .iter()
            .copied()
            .filter(|&t| t >= t_lo * (1.0 - 1e-12) && t <= t_hi * (1.0 + 1e-12))
            .collect();
        if levels.is_empty() {
            return Err(Error::InvalidTimeGrid(format!("no levels in [{t_lo}, {t_hi}]")));
        }
        Ok(Self { levels, ratio: self.ratio })
    }
}

/// A field `F(y, t_k)` on grid cells times time levels, stored level-major.
#[derive(Clone, Debug)]
pub struct UpperHalfField {
    grid: Grid,
    time: Arc<TimeGrid>,
    values: Vec<c64>,
}

impl UpperHalfField {
    pub fn new(grid: Grid, time: Arc<TimeGrid>, values: Vec<c64>) -> Result<Self> {
        if values.len() != grid.len() * time.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} cells x {} levels",
                values.len(),
                grid.len(),
                time.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite upper-half field".into()));
        }
        Ok(Self { grid, time, values })
    }

    pub fn zeros(grid: Grid, time: Arc<TimeGrid>) -> Self {
        let values = vec![c64::new(0.0, 0.0); grid.len() * time.len()];
        Self { grid, time, values }
    }

    pub fn from_fn(grid: Grid, time: Arc<TimeGrid>, f: impl Fn(&[f64], f64) -> c64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * time.len());
        for &t in time.levels() {
            for i in 0..grid.len() {
                values.push(f(&grid.center(i)[..grid.dim()], t));
            }
        }
        Self::new(grid, time, values)
    }

    /// Stacks one grid function per time level.
    pub fn from_levels(time: Arc<TimeGrid>, levels: Vec<GridFunction>) -> Result<Self> {
        let grid = *levels
            .first()
            .ok_or_else(|| Error::InvalidArgument("no levels".into()))?
            .grid();
        if levels.len() != time.len() || levels.iter().any(|g| *g.grid() != grid) {
            return Err(Error::DimensionMismatch("levels do not match time grid".into()));
        }
        let values = levels.into_iter().flat_map(|g| g.into_values()).collect();
        Ok(Self { grid, time, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> &Arc<TimeGrid> {
        &self.time
    }

    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn level(&self, k: usize) -> &[c64] {
        let m = self.grid.len();
        &self.values[k * m..(k + 1) * m]
    }

    /// `|F|^power`, level by level.
    pub fn abs_pow(&self, power: f64) -> Vec<f64> {
        self.values.iter().map(|v| pow_abs(v.norm(), power)).collect()
    }

    /// Pointwise map of the magnitudes, keeping the layout.
    pub fn map_abs(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            time: self.time.clone(),
            values: self.values.iter().map(|v| c64::new(f(v.norm()), 0.0)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            time: self.time.clone(),
            values: self.values.iter().map(|v| v * a).collect(),
        }
    }
}

/// `x^p` for `x ≥ 0` with `0^p = 0` for every `p > 0`.
pub(crate) fn pow_abs(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

/// `(Σ |f|^p w h^n)^{1/p}`; a quasinorm when `p < 1`.
pub fn lp_norm_weighted(f: &GridFunction, w: &crate::weights::Weight, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must be positive")));
    }
    if f.grid() != w.grid() {
        return Err(Error::DimensionMismatch("field and weight live on different grids".into()));
    }
    Ok(lp_norm_weighted_abs(&f.abs(), w.values(), p, f.grid().cell_volume()))
}

/// Same as [`lp_norm_weighted`] on precomputed magnitudes.
pub fn lp_norm_weighted_abs(mags: &[f64], w: &[f64], p: f64, cell_volume: f64) -> f64 {
    let s: f64 = mags.iter().zip(w).map(|(&a, &wi)| pow_abs(a, p) * wi).sum();
    (s * cell_volume).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(4, 8).is_err());
        assert!(Grid::new(1, 12).is_err());
        assert!(Grid::new(2, 4).is_err());
        assert!(Grid::new(3, 8).is_ok());
    }

    #[test]
    fn index_roundtrip_and_shift() {
        let g = Grid::new(3, 8).unwrap();
        for i in [0, 7, 8, 63, 64, 511] {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
        }
        let i = g.flat_index(&[7, 0, 3]);
        assert_eq!(g.multi_index(g.shift(i, 0, 1)), [0, 0, 3]);
        assert_eq!(g.multi_index(g.shift(i, 1, -1)), [7, 7, 3]);
    }

    #[test]
    fn distance_examples() {
        let g1 = Grid::new(1, 8).unwrap();
        assert_eq!(torus_distance(&[0.3], &[0.3], &g1), 0.0);
        assert!((torus_distance(&[0.1], &[0.9], &g1) - 0.2).abs() < 1e-15);
        let g2 = Grid::new(2, 8).unwrap();
        let d = torus_distance(&[0.0, 0.0], &[0.5, 0.5], &g2);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_ball_is_one_cell() {
        let g = Grid::new(2, 16).unwrap();
        let c = g.center(37);
        assert_eq!(ball_cells(&g, &c, 0.4 * g.h()).unwrap(), vec![37]);
    }

    #[test]
    fn ball_around_origin_in_one_dimension() {
        let g = Grid::new(1, 8).unwrap();
        // centers 0.0625, 0.1875, 0.8125, 0.9375 lie within 0.3 of the origin
        assert_eq!(ball_cells(&g, &[0.0], 0.3).unwrap(), vec![0, 1, 6, 7]);
        assert!(matches!(ball_cells(&g, &[0.0], 0.6), Err(Error::RadiusTooLarge { .. })));
    }

    #[test]
    fn half_radius_ball_excludes_antipodes() {
        let g = Grid::new(1, 8).unwrap();
        let cells = ball_cells(&g, &g.center(0), 0.5).unwrap();
        assert_eq!(cells.len(), 7);
        assert!(!cells.contains(&4));
    }

    #[test]
    fn time_grid_standard_ladder() {
        let g = Grid::new(1, 32).unwrap();
        let tg = TimeGrid::standard(&g);
        assert_eq!(tg.levels()[0], 1.0 / 64.0);
        assert_eq!(tg.len(), 11);
        assert!((tg.levels()[10] - 0.5).abs() < 1e-15);
        for w in tg.levels().windows(2) {
            assert!((w[1] / w[0] / tg.ratio() - 1.0).abs() < 1e-12);
        }
        assert!(TimeGrid::new(&g, 0.001, 2.0, 3).is_err());
        assert!(TimeGrid::new(&g, 0.1, 2.0, 4).is_err());
    }

    #[test]
    fn binary_roundtrip() {
        let g = Grid::new(2, 8).unwrap();
        let f = GridFunction::from_fn(g, |x| c64::new(x[0], -x[1])).unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CLGF");
        assert_eq!(buf.len(), 16 + 16 * 64);
        let back = GridFunction::read_from(&buf[..]).unwrap();
        assert_eq!(back, f);
        assert!(GridFunction::read_from(&buf[..40]).is_err());
    }
}
