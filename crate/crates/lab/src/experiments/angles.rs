//! Change of angles in both directions, under the fitted-constant protocol.

use std::sync::Arc;

use conical_core::tent::{cone_functional, FieldEnsemble};
use conical_core::weights::{power_weight_in_ar, power_weight_in_rhs};
use conical_core::{ConeParams, Grid, TimeGrid, Weight};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{holdout_rows, weighted_norm};
use crate::config::Config;
use crate::error::{config_err, Result};
use crate::table::{Provenance, ResultTable, Row};

const DEFAULT_RATIOS: [f64; 3] = [2.0, 4.0, 8.0];

#[derive(Clone, Copy, Debug, PartialEq)]
enum Branch {
    /// `w ∈ A_r`: `‖A^β F‖ ≤ C (β/α)^{nr/p} ‖A^α F‖`.
    Ar { r: f64 },
    /// `w ∈ RH_{s'}`: `‖A^α F‖ ≤ C (α/β)^{n/(sp)} ‖A^β F‖`.
    Rh { s: f64 },
}

impl Branch {
    fn label(self) -> &'static str {
        match self {
            Self::Ar { .. } => "i",
            Self::Rh { .. } => "ii",
        }
    }

    fn admits(self, theta: f64, n: usize) -> bool {
        match self {
            Self::Ar { r } => power_weight_in_ar(theta, n, r),
            Self::Rh { s } => power_weight_in_rhs(theta, n, s),
        }
    }

    /// The ratio whose supremum the inequality bounds, for `β/α = k`.
    fn ratio(self, narrow: f64, wide: f64, k: f64, n: usize, p: f64) -> f64 {
        let n = n as f64;
        match self {
            Self::Ar { r } => wide / (k.powf(n * r / p) * narrow),
            Self::Rh { s } => narrow / (k.recip().powf(n / (s * p)) * wide),
        }
    }

    fn params(self, n: usize, cells: usize, p: f64, theta: f64, ratios: &[f64]) -> Value {
        let mut v = json!({ "branch": self.label(), "n": n, "N": cells, "p": p, "theta": theta, "apertures": ratios });
        match self {
            Self::Ar { r } => v["r"] = r.into(),
            Self::Rh { s } => v["s"] = s.into(),
        }
        v
    }
}

struct Setup {
    grid: Grid,
    time: Arc<TimeGrid>,
    ratios: Vec<f64>,
    samples: usize,
    seed: u64,
    slack: f64,
    q: f64,
}

pub fn run_change_of_angle(cfg: &Config) -> Result<ResultTable> {
    let grid = cfg.grid(2, 32)?;
    let ratios = cfg.list("apertures")?.unwrap_or_else(|| DEFAULT_RATIOS.to_vec());
    if ratios.is_empty() || ratios.iter().any(|&k| !(k > 1.0)) {
        return config_err("angle ratios β/α must exceed 1");
    }
    let widest = ratios.iter().copied().fold(1.0, f64::max);
    // the widest cone must still embed in the torus
    let time = cfg.time(&grid)?;
    let t_hi = time.levels().last().copied().unwrap_or(0.0).min(0.5 / widest);
    let time = Arc::new(time.restrict(0.0, t_hi)?);
    let setup = Setup {
        grid,
        time,
        ratios,
        samples: cfg.samples(50)?,
        seed: cfg.seed()?,
        slack: cfg.slack()?,
        q: cfg.f64_or("q", 2.0)?,
    };
    let p = cfg.f64_or("p", 2.0)?;
    let n = grid.dim();
    let mut table = ResultTable::default();
    let branches = match cfg.str("branch") {
        Some("i") => vec![Branch::Ar { r: cfg.f64_or("r", 2.0)? }],
        Some("ii") => vec![Branch::Rh { s: cfg.f64_or("s", 3.0)? }],
        None => vec![Branch::Ar { r: cfg.f64_or("r", 2.0)? }, Branch::Rh { s: cfg.f64_or("s", 3.0)? }],
        Some(b) => return config_err(format!("branch must be i or ii, got {b}")),
    };
    for branch in &branches {
        let theta = cfg.f64_or("weight.theta", if matches!(branch, Branch::Ar { .. }) { -1.0 } else { 1.0 })?;
        if !branch.admits(theta, n) {
            return config_err(format!("branch {} does not admit θ = {theta} in dimension {n}", branch.label()));
        }
        let w = cfg.weight(grid, theta)?;
        table.extend(one_branch(&setup, *branch, &w, p, theta, true)?);
    }
    // the s = 2 companion of the default run lies outside the class, so it is reported only
    if !cfg.contains("branch") && !cfg.contains("s") && !cfg.contains("weight.theta") {
        let w = cfg.weight(grid, 1.0)?;
        table.extend(one_branch(&setup, Branch::Rh { s: 2.0 }, &w, p, 1.0, false)?);
    }
    Ok(table)
}

fn one_branch(setup: &Setup, branch: Branch, w: &Weight, p: f64, theta: f64, assert: bool) -> Result<ResultTable> {
    let n = setup.grid.dim();
    let ens = FieldEnsemble::new(setup.grid, setup.time.clone(), setup.seed, setup.samples, true);
    let cone_norm = |f: &conical_core::UpperHalfField, a: f64| -> Result<f64> {
        let v = cone_functional(f, &ConeParams::new(a, &setup.time).with_q(setup.q))?.abs();
        Ok(weighted_norm(&v, w, p))
    };
    let per_sample: Vec<f64> = (0..ens.len())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let f = ens.sample(i);
            let narrow = cone_norm(&f, 1.0)?;
            let mut worst: f64 = 0.0;
            for &k in &setup.ratios {
                worst = worst.max(branch.ratio(narrow, cone_norm(&f, k)?, k, n, p));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let mut params = branch.params(n, setup.grid.cells_per_axis(), p, theta, &setup.ratios);
    params["q"] = setup.q.into();
    let mut rows = holdout_rows("angles", params.clone(), per_sample.clone(), setup.slack)?;
    let bound = rows.last().expect("verdict row").reference;
    let mut table = ResultTable::default();
    for (i, r) in per_sample.iter().enumerate() {
        let mut sp = params.clone();
        sp["sample"] = i.into();
        table.push(Row::new("angles", sp).info(*r, bound, Provenance::Fitted, setup.slack));
    }
    if !assert {
        let last = rows.pop().expect("verdict row");
        rows.push(Row::new("angles", last.params).info(last.measured, last.reference, last.provenance, last.tolerance));
    }
    table.rows.extend(rows);
    Ok(table)
}
