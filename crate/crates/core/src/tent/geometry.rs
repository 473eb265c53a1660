//! Whitney decompositions of cell sets and global γ-density sets.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::balls::BallFamily;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// A grid-aligned dyadic cube of side `2^{-level}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicCube {
    pub level: u32,
    /// Multi-index of the lowest cell, in cells.
    pub corner: Vec<usize>,
    pub side: f64,
    /// Torus sup-norm distance from the cube's cell centers to the complement.
    pub dist_to_complement: f64,
}

impl DyadicCube {
    fn side_cells(&self, grid: &Grid) -> usize {
        (self.side / grid.h()).round() as usize
    }

    /// Flat indices of the cells of the cube.
    pub fn cells(&self, grid: &Grid) -> Vec<usize> {
        cube_cells(grid, &self.corner, self.side_cells(grid))
    }

    pub fn diameter(&self) -> f64 {
        self.side
    }
}

fn cube_cells(grid: &Grid, corner: &[usize], side: usize) -> Vec<usize> {
    let d = grid.dim();
    let total = side.pow(d as u32);
    (0..total)
        .map(|mut k| {
            let mut m = [0usize; 3];
            for a in (0..d).rev() {
                m[a] = corner[a] + k % side;
                k /= side;
            }
            grid.flat_index(&m[..d])
        })
        .collect()
}

/// Chessboard distance (in cells) from every cell to the nearest cell outside the mask.
fn distance_to_complement(grid: &Grid, inside: &[bool]) -> Vec<usize> {
    let d = grid.dim();
    let mut dist = vec![usize::MAX; grid.len()];
    let mut queue = VecDeque::new();
    for i in 0..grid.len() {
        if !inside[i] {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    let moves = 3usize.pow(d as u32);
    while let Some(i) = queue.pop_front() {
        for mv in 0..moves {
            let mut j = i;
            let mut code = mv;
            for a in 0..d {
                let delta = (code % 3) as isize - 1;
                code /= 3;
                j = grid.shift(j, a, delta);
            }
            if dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    dist
}

/// Whitney cubes of `mask`: top-down dyadic recursion that accepts a cube lying in the
/// mask once `diam ≤ dist(cube, complement)`, and accepts single cells unconditionally.
///
/// Output is sorted by level, then by corner.
pub fn whitney(mask: &[usize], grid: &Grid) -> Result<Vec<DyadicCube>> {
    let mut inside = vec![false; grid.len()];
    for &i in mask {
        if i >= grid.len() {
            return Err(Error::InvalidArgument(format!("cell {i} out of range")));
        }
        inside[i] = true;
    }
    let count = inside.iter().filter(|&&b| b).count();
    if count == 0 {
        return Err(Error::InvalidArgument("empty mask".into()));
    }
    if count == grid.len() {
        return Err(Error::InvalidArgument("mask covers the torus; complement is empty".into()));
    }
    let dist = distance_to_complement(grid, &inside);
    let n = grid.cells_per_axis();
    let d = grid.dim();
    let mut out = Vec::new();
    let mut stack: Vec<(u32, Vec<usize>)> = Vec::new();
    let half = n / 2;
    for k in 0..2usize.pow(d as u32) {
        stack.push((1, (0..d).map(|a| ((k >> a) & 1) * half).collect()));
    }
    while let Some((level, corner)) = stack.pop() {
        let side = n >> level;
        let cells = cube_cells(grid, &corner, side);
        if cells.iter().all(|&c| inside[c]) {
            let gap = cells.iter().map(|&c| dist[c]).min().expect("nonempty cube") as f64 * grid.h();
            let side_len = side as f64 * grid.h();
            if side == 1 || side_len <= gap {
                out.push(DyadicCube { level, corner, side: side_len, dist_to_complement: gap });
                continue;
            }
        } else if side == 1 || cells.iter().all(|&c| !inside[c]) {
            continue;
        }
        let s = side / 2;
        for k in 0..2usize.pow(d as u32) {
            stack.push((level + 1, (0..d).map(|a| corner[a] + ((k >> a) & 1) * s).collect()));
        }
    }
    out.sort_by(|a, b| a.level.cmp(&b.level).then_with(|| a.corner.cmp(&b.corner)));
    Ok(out)
}

/// Outcome of checking the three Whitney properties.
#[derive(Clone, Debug, PartialEq)]
pub struct WhitneyCheck {
    /// Cubes are pairwise disjoint and cover exactly the mask.
    pub partition: bool,
    /// `diam(Q) ≤ dist(Q, complement) ≤ 4 diam(Q)` for every cube.
    pub sandwich: bool,
    /// Largest number of 9/8-dilated cubes containing one cell center.
    pub max_overlap: usize,
    pub overlap_bound: usize,
}

impl WhitneyCheck {
    pub fn passed(&self) -> bool {
        self.partition && self.sandwich && self.max_overlap <= self.overlap_bound
    }

    pub fn run(grid: &Grid, mask: &[usize], cubes: &[DyadicCube]) -> Self {
        let mut hits = vec![0usize; grid.len()];
        for q in cubes {
            for c in q.cells(grid) {
                hits[c] += 1;
            }
        }
        let partition = (0..grid.len()).all(|i| hits[i] == usize::from(mask.contains(&i)));
        let h = grid.h();
        let sandwich = cubes
            .iter()
            .all(|q| q.side <= q.dist_to_complement + 1e-12 * h && q.dist_to_complement <= 4.0 * q.side + 1e-12 * h);
        let d = grid.dim();
        let mut overlap = vec![0usize; grid.len()];
        for q in cubes {
            let mid: Vec<f64> = q.corner.iter().map(|&c| c as f64 * h + 0.5 * q.side).collect();
            let reach = 9.0 / 16.0 * q.side;
            for (i, o) in overlap.iter_mut().enumerate() {
                let x = grid.center(i);
                let inside = (0..d).all(|a| {
                    let mut t = (x[a] - mid[a]).abs();
                    t = t.min(1.0 - t);
                    t < reach
                });
                if inside {
                    *o += 1;
                }
            }
        }
        Self {
            partition,
            sandwich,
            max_overlap: overlap.into_iter().max().unwrap_or(0),
            overlap_bound: 12usize.pow(d as u32),
        }
    }
}

/// `level,corner_0,…,side,dist_to_complement` rows with a header.
pub fn whitney_csv(cubes: &[DyadicCube], dim: usize) -> String {
    let mut s = String::from("level");
    for a in 0..dim {
        let _ = write!(s, ",corner_{a}");
    }
    s.push_str(",side,dist_to_complement\n");
    for q in cubes {
        let _ = write!(s, "{}", q.level);
        for c in &q.corner {
            let _ = write!(s, ",{c}");
        }
        let _ = writeln!(s, ",{},{}", q.side, q.dist_to_complement);
    }
    s
}

/// `O*` and its complement `E*`.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaDensity {
    /// `O* = {x : M(χ_O)(x) > 1 - γ}`, centred maximal function over the family.
    pub expanded: Vec<usize>,
    /// `E* = (O*)^c`: every family ball centred in `E*` meets `O^c` in proportion `≥ γ`.
    pub density_set: Vec<usize>,
}

/// The γ-density construction. `O ⊆ O*` whenever the family contains the single-cell
/// radius, as [`BallFamily::dyadic_with_cells`] does.
pub fn gamma_density_complement(mask: &[usize], gamma: f64, family: &BallFamily) -> Result<GammaDensity> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("γ = {gamma} must lie in (0, 1)")));
    }
    let grid = family.grid();
    let mut chi = vec![0.0; grid.len()];
    for &i in mask {
        *chi.get_mut(i).ok_or_else(|| Error::InvalidArgument(format!("cell {i} out of range")))? = 1.0;
    }
    let m = family.centered_sup(&chi, |_, count, sum| sum / count as f64);
    let (expanded, density_set) = (0..grid.len()).partition(|&i| m[i] > 1.0 - gamma);
    Ok(GammaDensity { expanded, density_set })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_is_one_cube() {
        let g = Grid::new(2, 16).unwrap();
        let cubes = whitney(&[37], &g).unwrap();
        assert_eq!(cubes.len(), 1);
        assert_eq!(cubes[0].side, g.h());
        assert!(WhitneyCheck::run(&g, &[37], &cubes).passed());
    }

    #[test]
    fn full_and_empty_masks_are_rejected() {
        let g = Grid::new(1, 8).unwrap();
        assert!(whitney(&[], &g).is_err());
        assert!(whitney(&(0..8).collect::<Vec<_>>(), &g).is_err());
    }

    #[test]
    fn slab_cubes_shrink_toward_the_edges() {
        let g = Grid::new(1, 16).unwrap();
        let mask: Vec<usize> = (0..8).collect();
        let cubes = whitney(&mask, &g).unwrap();
        assert!(WhitneyCheck::run(&g, &mask, &cubes).passed());
        let edge = cubes.iter().find(|q| q.corner[0] == 0).unwrap();
        let mid = cubes.iter().find(|q| q.cells(&g).contains(&4)).unwrap();
        assert_eq!(edge.side, g.h());
        assert!(mid.side > edge.side);
    }

    #[test]
    fn gamma_density_brute_force() {
        let g = Grid::new(1, 32).unwrap();
        let fam = BallFamily::dyadic_with_cells(&g);
        assert!(gamma_density_complement(&[], 0.5, &fam).unwrap().expanded.is_empty());
        let mask: Vec<usize> = (0..16).collect();
        let gd = gamma_density_complement(&mask, 0.5, &fam).unwrap();
        assert!(mask.iter().all(|i| gd.expanded.contains(i)));
        for &x in &gd.density_set {
            for b in fam.balls().iter().filter(|b| g.cell_of(&b.center) == x) {
                let cells = crate::grid::ball_cells(&g, &b.center, b.radius).unwrap();
                let outside = cells.iter().filter(|c| !mask.contains(c)).count();
                assert!(outside as f64 >= 0.5 * cells.len() as f64);
            }
        }
        let reach = fam.max_radius();
        for &x in &gd.expanded {
            let d = (0..16).map(|m| g.cell_distance(x, m)).fold(f64::INFINITY, f64::min);
            assert!(d <= reach);
        }
    }
}
