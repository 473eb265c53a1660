//! Carleson functionals: `C ≈ C_2` under refinement, and `A` against `C_{p0}` in `L^p(w)`.

use std::sync::Arc;

use conical_core::fit::refinement_stable;
use conical_core::tent::{carleson_functional, carleson_p0, cone_functional, FieldEnsemble};
use conical_core::weights::power_weight_in_ar;
use conical_core::{BallFamily, ConeParams, Grid, TimeGrid, UpperHalfField};
use rayon::prelude::*;
use serde_json::json;

use super::{holdout_rows, weighted_norm};
use crate::config::Config;
use crate::error::{config_err, Result};
use crate::table::{Provenance, ResultTable, Row};

/// `(p0, p, θ)` of the default comparability runs.
const DEFAULT_CASES: [(f64, f64, f64); 2] = [(1.2, 2.0, 0.0), (1.2, 3.0, -1.0)];

pub fn run_carleson_suite(cfg: &Config) -> Result<ResultTable> {
    let grid = cfg.grid(1, 64)?;
    let seed = cfg.seed()?;
    let mut table = ResultTable::default();
    table.extend(bracket_drift(cfg, grid, seed)?);

    let cases: Vec<(f64, f64, f64)> = if ["p0", "p", "weight.theta"].iter().any(|k| cfg.contains(k)) {
        vec![(cfg.f64_or("p0", 1.2)?, cfg.f64_or("p", 2.0)?, cfg.f64_or("weight.theta", 0.0)?)]
    } else {
        DEFAULT_CASES.to_vec()
    };
    let time = cfg.time(&grid)?;
    let samples = cfg.samples(30)?;
    let slack = cfg.slack()?;
    let family = BallFamily::dyadic(&grid);
    let ens = FieldEnsemble::new(grid, time.clone(), seed, samples, true);
    for (p0, p, theta) in cases {
        if !(p0 > 0.0 && p > 0.0) {
            return config_err(format!("need p0, p > 0, got p0={p0}, p={p}"));
        }
        let w = cfg.weight(grid, theta)?;
        let pairs: Vec<(f64, f64)> = (0..ens.len())
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let f = ens.sample(i);
                let a = cone_functional(&f, &ConeParams::new(1.0, &time))?.abs();
                let c = carleson_p0(&f, 2.0, p0, &family)?.abs();
                Ok((weighted_norm(&a, &w, p), weighted_norm(&c, &w, p)))
            })
            .collect::<Result<_>>()?;
        let params = json!({ "n": grid.dim(), "N": grid.cells_per_axis(), "p0": p0, "p": p, "theta": theta });
        let mut pa = params.clone();
        pa["direction"] = "A <= C C_p0".into();
        table.rows.extend(holdout_rows("carleson", pa, pairs.iter().map(|(a, c)| a / c).collect(), slack)?);
        // the reverse direction needs p0 < p and w ∈ A_{p/p0}
        let mut pb = params;
        pb["direction"] = "C_p0 <= C A".into();
        let mut rows = holdout_rows("carleson", pb, pairs.iter().map(|(a, c)| c / a).collect(), slack)?;
        if !(p0 < p && power_weight_in_ar(theta, grid.dim(), p / p0)) {
            let r = rows.pop().expect("verdict row");
            rows.push(Row::new("carleson", r.params).info(r.measured, r.reference, r.provenance, r.tolerance));
        }
        table.rows.extend(rows);
    }

    let zero = UpperHalfField::zeros(grid, time.clone());
    let zc = carleson_p0(&zero, 2.0, 1.2, &family)?.abs();
    let za = cone_functional(&zero, &ConeParams::new(1.0, &time))?.abs();
    let largest = zc.iter().chain(&za).copied().fold(0.0, f64::max);
    table.push(Row::new("carleson", json!({ "field": "zero" })).info(largest, 0.0, Provenance::Derived, 0.0));
    Ok(table)
}

/// Largest `C_2 F / C F` and `C F / C_2 F` over the ensemble.
fn bracket(grid: Grid, seed: u64, samples: usize) -> Result<(f64, f64)> {
    let time = Arc::new(TimeGrid::standard(&grid));
    let family = BallFamily::dyadic(&grid);
    let ens = FieldEnsemble::new(grid, time, seed, samples, true);
    let per: Vec<(f64, f64)> = (0..ens.len())
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let f = ens.sample(i);
            let c = carleson_functional(&f, 2.0, &family)?.abs();
            let c2 = carleson_p0(&f, 2.0, 2.0, &family)?.abs();
            let (mut up, mut down) = (0.0f64, 0.0f64);
            for (x, y) in c.iter().zip(&c2) {
                up = up.max(y / x);
                down = down.max(x / y);
            }
            Ok((up, down))
        })
        .collect::<Result<_>>()?;
    Ok(per.iter().fold((0.0, 0.0), |(u, d), (a, b)| (f64::max(u, *a), f64::max(d, *b))))
}

fn bracket_drift(cfg: &Config, grid: Grid, seed: u64) -> Result<ResultTable> {
    let samples = cfg.samples(50)?;
    let bound = cfg.refinement()?;
    let coarse = Grid::new(grid.dim(), grid.cells_per_axis() / 2)?;
    let (uf, df) = bracket(grid, seed, samples)?;
    let (uc, dc) = bracket(coarse, seed, samples)?;
    let mut table = ResultTable::default();
    for (name, fine, crs) in [("C_2/C", uf, uc), ("C/C_2", df, dc)] {
        let base = json!({ "n": grid.dim(), "ratio": name, "samples": samples });
        for (cells, v) in [(grid.cells_per_axis(), fine), (coarse.cells_per_axis(), crs)] {
            let mut p = base.clone();
            p["N"] = cells.into();
            table.push(Row::new("carleson", p).info(v, f64::NAN, Provenance::Derived, 0.0));
        }
        let (drift, ok) = refinement_stable(fine, crs, bound);
        let mut p = base;
        p["N"] = json!([coarse.cells_per_axis(), grid.cells_per_axis()]);
        table.push(Row::new("carleson", p).check(drift, bound, Provenance::Derived, bound, ok));
    }
    Ok(table)
}
