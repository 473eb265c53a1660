//! Lattice balls and the fast sliding sums and maxima built on them.
//!
//! A ball of radius `r` centred at a cell center is the set of cells whose centers
//! satisfy `|δ| h < r` for the integer offset `δ`. It is stored as row spans along the
//! last axis, so a sum over every ball of the mesh costs one prefix sum per row plus
//! one subtraction per span.

use crate::error::{Error, Result};
use crate::grid::{check_radius, torus_distance, Grid};

#[derive(Clone, Debug)]
struct Span {
    lead: [isize; 2],
    lo: isize,
    hi: isize,
}

/// Offsets of a lattice ball of fixed radius, as sorted row spans.
#[derive(Clone, Debug)]
pub struct BallStencil {
    spans: Vec<Span>,
    count: usize,
    radius: f64,
}

impl BallStencil {
    pub fn new(grid: &Grid, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        let big_r = radius * grid.cells_per_axis() as f64;
        let r2 = big_r * big_r;
        let reach = big_r.ceil() as isize;
        let lead_axes = grid.dim() - 1;
        let mut spans = Vec::new();
        let mut leads: Vec<[isize; 2]> = vec![[0, 0]];
        for axis in 0..lead_axes {
            leads = leads
                .into_iter()
                .flat_map(|l| {
                    (-reach..=reach).map(move |d| {
                        let mut l = l;
                        l[axis] = d;
                        l
                    })
                })
                .collect();
        }
        for lead in leads {
            let s = (lead[0] * lead[0] + lead[1] * lead[1]) as f64;
            if s >= r2 {
                continue;
            }
            let mut m = (r2 - s).sqrt().ceil() as isize;
            while m >= 0 && (s + (m * m) as f64) >= r2 {
                m -= 1;
            }
            if m >= 0 {
                spans.push(Span { lead, lo: -m, hi: m });
            }
        }
        let count = spans.iter().map(|s| (s.hi - s.lo + 1) as usize).sum();
        Ok(Self { spans, count, radius })
    }

    /// Number of cells in the ball.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Cells of the ball centred at cell `center`, sorted by index.
    pub fn cells_around(&self, grid: &Grid, center: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.count);
        let m = grid.multi_index(center);
        let n = grid.cells_per_axis() as isize;
        let last = grid.dim() - 1;
        for s in &self.spans {
            let mut mm = m;
            for a in 0..last {
                mm[a] = (m[a] as isize + s.lead[a]).rem_euclid(n) as usize;
            }
            for d in s.lo..=s.hi {
                mm[last] = (m[last] as isize + d).rem_euclid(n) as usize;
                out.push(grid.flat_index(&mm));
            }
        }
        out.sort_unstable();
        out
    }
}

fn lead_row(grid: &Grid, row: usize, lead: &[isize; 2]) -> usize {
    let n = grid.cells_per_axis();
    let lead_axes = grid.dim() - 1;
    let mut coords = [0usize; 2];
    let mut r = row;
    for a in (0..lead_axes).rev() {
        coords[a] = r % n;
        r /= n;
    }
    let mut out = 0;
    for a in 0..lead_axes {
        let c = (coords[a] as isize + lead[a]).rem_euclid(n as isize) as usize;
        out = out * n + c;
    }
    out
}

/// For every cell `x`, the sum of `values` over the ball of the stencil centred at `x`.
///
/// Values must be nonnegative for the result to be monotone under ball inclusion, which
/// holds exactly in floating point because row prefix sums of nonnegative values are
/// monotone and spans are visited in a fixed order.
pub fn ball_sums(grid: &Grid, values: &[f64], stencil: &BallStencil) -> Vec<f64> {
    let n = grid.cells_per_axis();
    let rows = grid.len() / n;
    // prefix over three periods so wrapped spans are plain differences
    let mut prefix = vec![0.0; rows * (3 * n + 1)];
    for r in 0..rows {
        let p = &mut prefix[r * (3 * n + 1)..(r + 1) * (3 * n + 1)];
        let row = &values[r * n..(r + 1) * n];
        let mut acc = 0.0;
        for j in 0..3 * n {
            p[j] = acc;
            acc += row[j % n];
        }
        p[3 * n] = acc;
    }
    let mut out = vec![0.0; grid.len()];
    let mut neighbour_rows = vec![0usize; stencil.spans.len()];
    for r in 0..rows {
        for (k, s) in stencil.spans.iter().enumerate() {
            neighbour_rows[k] = lead_row(grid, r, &s.lead);
        }
        for x in 0..n {
            let mut acc = 0.0;
            for (k, s) in stencil.spans.iter().enumerate() {
                let p = &prefix[neighbour_rows[k] * (3 * n + 1)..];
                let a = (x as isize + s.lo + n as isize) as usize;
                let b = (x as isize + s.hi + n as isize) as usize + 1;
                acc += p[b] - p[a];
            }
            out[r * n + x] = acc.max(0.0);
        }
    }
    out
}

/// For every cell `x`, the maximum of `values` over the ball of the stencil centred at `x`.
pub fn ball_maxes(grid: &Grid, values: &[f64], stencil: &BallStencil) -> Vec<f64> {
    let n = grid.cells_per_axis();
    let rows = grid.len() / n;
    let width = 3 * n;
    let levels = usize::BITS as usize - width.leading_zeros() as usize;
    // sparse table per row over three periods
    let mut table = vec![f64::NEG_INFINITY; rows * levels * width];
    for r in 0..rows {
        let base = r * levels * width;
        for j in 0..width {
            table[base + j] = values[r * n + j % n];
        }
        for l in 1..levels {
            let half = 1 << (l - 1);
            for j in 0..width {
                let a = table[base + (l - 1) * width + j];
                let b = if j + half < width {
                    table[base + (l - 1) * width + j + half]
                } else {
                    f64::NEG_INFINITY
                };
                table[base + l * width + j] = a.max(b);
            }
        }
    }
    let mut out = vec![f64::NEG_INFINITY; grid.len()];
    for r in 0..rows {
        for x in 0..n {
            let mut best = f64::NEG_INFINITY;
            for s in &stencil.spans {
                let row = lead_row(grid, r, &s.lead);
                let a = (x as isize + s.lo + n as isize) as usize;
                let b = (x as isize + s.hi + n as isize) as usize;
                let len = b - a + 1;
                let l = usize::BITS as usize - 1 - len.leading_zeros() as usize;
                let base = row * levels * width + l * width;
                best = best.max(table[base + a]).max(table[base + b + 1 - (1 << l)]);
            }
            out[r * n + x] = best;
        }
    }
    out
}

/// A ball `B(center, radius)` on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
enum FamilyKind {
    /// Every cell center paired with every listed radius.
    Lattice(Vec<f64>),
    Explicit(Vec<Ball>),
}

/// The finite stand-in for "every ball" used by maximal functions and weight constants.
#[derive(Clone, Debug, PartialEq)]
pub struct BallFamily {
    grid: Grid,
    kind: FamilyKind,
}

impl BallFamily {
    /// All cell centers times the dyadic radii `2h, 4h, …, 1/2`.
    pub fn dyadic(grid: &Grid) -> Self {
        let mut radii = Vec::new();
        let mut r = 2.0 * grid.h();
        while r <= 0.5 {
            radii.push(r);
            r *= 2.0;
        }
        Self { grid: *grid, kind: FamilyKind::Lattice(radii) }
    }

    /// All cell centers times the given radii.
    pub fn lattice(grid: &Grid, radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::DegenerateFamily("no radii".into()));
        }
        for &r in &radii {
            check_radius(r)?;
        }
        Ok(Self { grid: *grid, kind: FamilyKind::Lattice(radii) })
    }

    /// The dyadic family plus the single-cell radius `h/2`, so every cell is itself a ball.
    pub fn dyadic_with_cells(grid: &Grid) -> Self {
        let mut radii = vec![0.5 * grid.h()];
        if let FamilyKind::Lattice(r) = Self::dyadic(grid).kind {
            radii.extend(r);
        }
        Self { grid: *grid, kind: FamilyKind::Lattice(radii) }
    }

    pub fn explicit(grid: &Grid, balls: Vec<Ball>) -> Result<Self> {
        if balls.is_empty() {
            return Err(Error::DegenerateFamily("no balls".into()));
        }
        for b in &balls {
            check_radius(b.radius)?;
            if b.center.len() != grid.dim() {
                return Err(Error::DimensionMismatch("ball center dimension".into()));
            }
            if ball_cell_list(grid, b).is_empty() {
                return Err(Error::DegenerateFamily(format!(
                    "ball at {:?} of radius {} contains no cell center",
                    b.center, b.radius
                )));
            }
        }
        Ok(Self { grid: *grid, kind: FamilyKind::Explicit(balls) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Radii of a lattice family, or `None` for an explicit list.
    pub fn lattice_radii(&self) -> Option<&[f64]> {
        match &self.kind {
            FamilyKind::Lattice(r) => Some(r),
            FamilyKind::Explicit(_) => None,
        }
    }

    /// The same balls as an explicit list (for brute-force oracles).
    pub fn to_explicit(&self) -> Self {
        Self { grid: self.grid, kind: FamilyKind::Explicit(self.balls()) }
    }

    pub fn balls(&self) -> Vec<Ball> {
        match &self.kind {
            FamilyKind::Explicit(b) => b.clone(),
            FamilyKind::Lattice(radii) => {
                let d = self.grid.dim();
                radii
                    .iter()
                    .flat_map(|&r| {
                        (0..self.grid.len()).map(move |i| Ball {
                            center: self.grid.center(i)[..d].to_vec(),
                            radius: r,
                        })
                    })
                    .collect()
            }
        }
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            FamilyKind::Explicit(b) => b.len(),
            FamilyKind::Lattice(r) => r.len() * self.grid.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_radius(&self) -> f64 {
        match &self.kind {
            FamilyKind::Explicit(b) => b.iter().map(|b| b.radius).fold(0.0, f64::max),
            FamilyKind::Lattice(r) => r.iter().copied().fold(0.0, f64::max),
        }
    }

    /// For every ball, `ball_value(radius, count, sum)` with `sum` the ball sum of
    /// `values`; then for each cell the maximum over balls containing it. The lattice path
    /// uses sliding sums; the explicit path enumerates cells.
    pub(crate) fn sup_over_containing(
        &self,
        values: &[f64],
        ball_value: impl Fn(f64, usize, f64) -> f64,
    ) -> Vec<f64> {
        self.sup_over_containing_with(|_| values, ball_value)
    }

    /// As [`Self::sup_over_containing`], with the summed values depending on the radius.
    pub(crate) fn sup_over_containing_with<V: AsRef<[f64]>>(
        &self,
        values_for: impl Fn(f64) -> V,
        ball_value: impl Fn(f64, usize, f64) -> f64,
    ) -> Vec<f64> {
        let grid = &self.grid;
        let mut out = vec![f64::NEG_INFINITY; grid.len()];
        match &self.kind {
            FamilyKind::Lattice(radii) => {
                for &r in radii {
                    let st = BallStencil::new(grid, r).expect("validated radius");
                    let values = values_for(r);
                    let sums = ball_sums(grid, values.as_ref(), &st);
                    let per_ball: Vec<f64> =
                        sums.iter().map(|&s| ball_value(r, st.count(), s)).collect();
                    let m = ball_maxes(grid, &per_ball, &st);
                    for (o, v) in out.iter_mut().zip(m) {
                        *o = o.max(v);
                    }
                }
            }
            FamilyKind::Explicit(balls) => {
                let mut cache: Vec<(f64, V)> = Vec::new();
                for b in balls {
                    let slot = match cache.iter().position(|(r, _)| *r == b.radius) {
                        Some(k) => k,
                        None => {
                            cache.push((b.radius, values_for(b.radius)));
                            cache.len() - 1
                        }
                    };
                    let values = cache[slot].1.as_ref();
                    let cells = ball_cell_list(grid, b);
                    let s: f64 = cells.iter().map(|&i| values[i]).sum();
                    let v = ball_value(b.radius, cells.len(), s);
                    for &i in &cells {
                        out[i] = out[i].max(v);
                    }
                }
            }
        }
        out
    }

    /// For every cell, the maximum of `ball_value(radius, count, sum)` over family balls
    /// centred there (explicit balls count for the cell containing their center).
    pub(crate) fn centered_sup(&self, values: &[f64], ball_value: impl Fn(f64, usize, f64) -> f64) -> Vec<f64> {
        let grid = &self.grid;
        let mut out = vec![f64::NEG_INFINITY; grid.len()];
        match &self.kind {
            FamilyKind::Lattice(radii) => {
                for &r in radii {
                    let st = BallStencil::new(grid, r).expect("validated radius");
                    for (o, s) in out.iter_mut().zip(ball_sums(grid, values, &st)) {
                        *o = o.max(ball_value(r, st.count(), s));
                    }
                }
            }
            FamilyKind::Explicit(balls) => {
                for b in balls {
                    let cells = ball_cell_list(grid, b);
                    let s: f64 = cells.iter().map(|&i| values[i]).sum();
                    let c = grid.cell_of(&b.center);
                    out[c] = out[c].max(ball_value(b.radius, cells.len(), s));
                }
            }
        }
        out
    }

    /// Calls `visit(radius, cells)` for every ball (brute force; used by estimators that
    /// need more than one statistic per ball).
    pub(crate) fn for_each_ball(&self, mut visit: impl FnMut(f64, &[usize])) {
        let grid = &self.grid;
        match &self.kind {
            FamilyKind::Lattice(radii) => {
                for &r in radii {
                    let st = BallStencil::new(grid, r).expect("validated radius");
                    for c in 0..grid.len() {
                        visit(r, &st.cells_around(grid, c));
                    }
                }
            }
            FamilyKind::Explicit(balls) => {
                for b in balls {
                    visit(b.radius, &ball_cell_list(grid, b));
                }
            }
        }
    }
}

fn ball_cell_list(grid: &Grid, b: &Ball) -> Vec<usize> {
    (0..grid.len())
        .filter(|&i| torus_distance(&grid.center(i), &b.center, grid) < b.radius)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ball_cells;

    #[test]
    fn stencil_matches_enumeration() {
        for (dim, n) in [(1, 16), (2, 16), (3, 8)] {
            let g = Grid::new(dim, n).unwrap();
            for r in [0.3 / n as f64, 2.0 / n as f64, 0.21, 0.37, 0.5] {
                let st = BallStencil::new(&g, r).unwrap();
                for c in [0, 5, g.len() - 1] {
                    let direct = ball_cells(&g, &g.center(c)[..dim], r).unwrap();
                    assert_eq!(st.cells_around(&g, c), direct, "dim {dim} r {r} c {c}");
                }
            }
        }
    }

    #[test]
    fn sums_and_maxes_match_brute_force() {
        let g = Grid::new(2, 16).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 37 % 101) as f64).sqrt()).collect();
        for r in [0.1, 0.26, 0.5] {
            let st = BallStencil::new(&g, r).unwrap();
            let s = ball_sums(&g, &vals, &st);
            let m = ball_maxes(&g, &vals, &st);
            for c in 0..g.len() {
                let cells = st.cells_around(&g, c);
                let bs: f64 = cells.iter().map(|&i| vals[i]).sum();
                let bm = cells.iter().map(|&i| vals[i]).fold(f64::NEG_INFINITY, f64::max);
                assert!((s[c] - bs).abs() < 1e-10 * bs.max(1.0));
                assert_eq!(m[c], bm);
            }
        }
    }

    #[test]
    fn dyadic_family_radii() {
        let g = Grid::new(1, 32).unwrap();
        let f = BallFamily::dyadic(&g);
        assert_eq!(f.lattice_radii().unwrap(), &[1.0 / 16.0, 0.125, 0.25, 0.5]);
        assert_eq!(f.len(), 4 * 32);
    }
}
