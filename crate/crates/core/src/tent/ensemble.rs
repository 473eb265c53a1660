//! Seeded test fields on the upper half-space.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{torus_distance, Grid, TimeGrid, UpperHalfField};
use crate::c64;

/// Independent complex Gaussian at every (cell, level).
pub fn random_upper_half_field(grid: Grid, time: Arc<TimeGrid>, seed: u64) -> UpperHalfField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = grid.len() * time.len();
    let values = (0..count)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            c64::new(re, im)
        })
        .collect();
    UpperHalfField::new(grid, time, values).expect("finite samples")
}

/// Five deterministic fields: a tensor product, a box indicator, an oscillation, a bump
/// concentrated at small times and one at large times.
pub fn structured_fixtures(grid: Grid, time: Arc<TimeGrid>) -> Vec<UpperHalfField> {
    let d = grid.dim();
    let origin = vec![0.5; d];
    let t_mid = time.levels()[time.len() / 2];
    let make = |f: &dyn Fn(&[f64], f64) -> c64| UpperHalfField::from_fn(grid, time.clone(), f).expect("finite");
    vec![
        make(&|x, t| c64::new((2.0 * PI * x[0]).cos() + 1.5, 0.0) * (t / (1.0 + t))),
        make(&|x, t| {
            let inside = torus_distance(x, &origin, &grid) < 0.25 && t >= t_mid;
            c64::new(if inside { 1.0 } else { 0.0 }, 0.0)
        }),
        make(&|x, t| c64::from_polar(1.0, 2.0 * PI * 3.0 * x.iter().sum::<f64>()) * t.sqrt()),
        make(&|x, t| {
            let r = torus_distance(x, &origin, &grid);
            c64::new((-(r * r) / (4.0 * t * t)).exp(), 0.0)
        }),
        make(&|x, t| c64::new(0.0, x[d - 1] * t * t)),
    ]
}

/// Samples `0..` of a property test: the structured fixtures first, then seeded Gaussian
/// fields whose seeds are split from one master seed before any work is dispatched.
#[derive(Clone, Debug)]
pub struct FieldEnsemble {
    grid: Grid,
    time: Arc<TimeGrid>,
    seeds: Vec<u64>,
    with_fixtures: bool,
}

impl FieldEnsemble {
    pub fn new(grid: Grid, time: Arc<TimeGrid>, seed: u64, size: usize, with_fixtures: bool) -> Self {
        use rand::RngCore;
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let seeds = (0..size).map(|_| master.next_u64()).collect();
        Self { grid, time, seeds, with_fixtures }
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn sample(&self, i: usize) -> UpperHalfField {
        if self.with_fixtures && i < 5 {
            return structured_fixtures(self.grid, self.time.clone()).swap_remove(i);
        }
        random_upper_half_field(self.grid, self.time.clone(), self.seeds[i])
    }
}
