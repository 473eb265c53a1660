//! The experiments behind each CLI subcommand.

mod angles;
mod bounds;
mod carleson;
mod cp_maximal;
mod offdiag;
mod sharpness;

use std::f64::consts::PI;

use conical_core::fit::holdout;
use conical_core::grid::lp_norm_weighted_abs;
use conical_core::{c64, Grid, GridFunction, Weight};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde_json::Value;

pub use angles::run_change_of_angle;
pub use bounds::{run_boundedness, run_comparisons};
pub use carleson::run_carleson_suite;
pub use cp_maximal::run_cp_vs_maximal;
pub use offdiag::run_offdiagonal;
pub use sharpness::run_sharpness;

use crate::config::Config;
use crate::error::{config_err, Result};
use crate::table::{Provenance, ResultTable, Row};

/// Subcommands in the order `all` runs them.
pub const EXPERIMENTS: [&str; 7] =
    ["sharpness", "angles", "carleson", "cp-maximal", "offdiag", "boundedness", "comparisons"];

/// Runs one named experiment.
pub fn run(name: &str, cfg: &Config) -> Result<ResultTable> {
    cfg.validate()?;
    match name {
        "sharpness" => run_sharpness(cfg),
        "angles" => run_change_of_angle(cfg),
        "carleson" => run_carleson_suite(cfg),
        "cp-maximal" => run_cp_vs_maximal(cfg),
        "offdiag" => run_offdiagonal(cfg),
        "boundedness" => run_boundedness(cfg),
        "comparisons" => run_comparisons(cfg),
        _ => config_err(format!("unknown experiment `{name}`")),
    }
}

/// Per-sample seeds drawn from the master seed before any work is dispatched, so results
/// do not depend on scheduling.
pub fn split_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Highest frequency per axis of [`continuum_field`].
const MODES: i32 = 3;

/// A fixed function on the torus sampled at cell centers, so that one seed gives the same
/// function at every resolution: a random trigonometric polynomial with decaying
/// coefficients plus the indicator of a random ball.
pub fn continuum_field(grid: Grid, seed: u64) -> GridFunction {
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let side = (2 * MODES + 1) as usize;
    let mut modes = Vec::new();
    for code in 0..side.pow(d as u32) {
        let mut k = [0i32; 3];
        let mut c = code;
        for a in k.iter_mut().take(d) {
            *a = (c % side) as i32 - MODES;
            c /= side;
        }
        let norm2: i32 = k.iter().map(|x| x * x).sum();
        let amp = 1.0 / (1.0 + norm2 as f64);
        modes.push((k, c64::new(gauss(), gauss()) * amp));
    }
    let height = c64::new(gauss(), gauss());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let center: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let radius = rng.random_range(0.1..0.25);
    GridFunction::from_fn(grid, |x| {
        let mut v = c64::new(0.0, 0.0);
        for (k, c) in &modes {
            let phase: f64 = (0..d).map(|a| k[a] as f64 * x[a]).sum();
            v += c * c64::from_polar(1.0, 2.0 * PI * phase);
        }
        if conical_core::torus_distance(&x[..d], &center, &grid) < radius {
            v += height;
        }
        v
    })
    .expect("finite samples")
}

/// `‖·‖_{L^p(w)}` of nonnegative cell values.
pub fn weighted_norm(values: &[f64], w: &Weight, p: f64) -> f64 {
    lp_norm_weighted_abs(values, w.values(), p, w.grid().cell_volume())
}

/// Maps seeds in parallel, keeping their order.
pub fn par_map<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// Fitted-constant protocol: the constant is fitted on the first half of `ratios` and
/// checked on the second. Emits the verdict row and an info row carrying the fit.
pub fn holdout_rows(experiment: &str, params: Value, ratios: Vec<f64>, slack: f64) -> Result<Vec<Row>> {
    let h = holdout(ratios, slack)?;
    let bound = h.fitted * h.slack;
    let mut fit_params = params.clone();
    fit_params["stage"] = "fit".into();
    Ok(vec![
        Row::new(experiment, fit_params).info(h.fitted, h.fitted, Provenance::Fitted, slack),
        Row::new(experiment, params).check(h.worst_holdout, bound, Provenance::Fitted, slack, h.passed()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuum_field_depends_only_on_the_seed() {
        let g = Grid::new(2, 16).unwrap();
        assert_eq!(continuum_field(g, 3), continuum_field(g, 3));
        assert_ne!(continuum_field(g, 3), continuum_field(g, 4));
    }

    #[test]
    fn seeds_are_split_up_front() {
        assert_eq!(split_seeds(5, 4), split_seeds(5, 10)[..4].to_vec());
    }
}
