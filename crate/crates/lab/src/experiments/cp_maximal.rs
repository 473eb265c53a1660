//! `C̃_{p0} f ≲ M_{p0} f` for the three heat integrands.

use std::sync::Arc;

use conical_core::fit::refinement_stable;
use conical_core::squarefn::integrands;
use conical_core::tent::carleson_p0;
use conical_core::weights::hl_maximal;
use conical_core::{c64, BallFamily, EllipticOperator, Grid, SquareFamily, SquareFunctionSpec, TimeGrid};
use conical_core::{GridFunction, UpperHalfField};
use serde_json::json;

use super::{continuum_field, holdout_rows, par_map, split_seeds};
use crate::config::Config;
use crate::error::{config_err, Result};
use crate::table::{Provenance, ResultTable, Row};

/// `t²Le^{-t²L}`, `t∇_y e^{-t²L}` and `t∇_{y,t} e^{-t²L}`.
const INTEGRANDS: [(SquareFamily, u32); 3] = [(SquareFamily::SH, 1), (SquareFamily::GH, 0), (SquareFamily::GcalH, 0)];

/// Lower end of the range of `p0`: `p_-(L) = 1` is known for every elliptic operator when
/// `n ≤ 2` and for the Laplacian in every dimension.
fn p_minus(preset: &str, n: usize) -> Option<f64> {
    (preset == "laplace" || n <= 2).then_some(1.0)
}

struct Level {
    op: EllipticOperator,
    time: Arc<TimeGrid>,
    family: BallFamily,
}

impl Level {
    fn new(cfg: &Config, grid: Grid) -> Result<Self> {
        Ok(Self {
            op: cfg.operator(grid, "laplace")?,
            time: Arc::new(TimeGrid::standard(&grid)),
            family: BallFamily::dyadic(&grid),
        })
    }

    /// `max_x C̃_{p0} f(x) / M_{p0} f(x)` for every integrand.
    fn ratios(&self, f: &GridFunction, p0: f64) -> Result<Vec<f64>> {
        let grid = *self.op.grid();
        let specs = INTEGRANDS
            .iter()
            .map(|&(fam, m)| SquareFunctionSpec::new(fam, m, 1.0, self.time.clone()))
            .collect::<conical_core::Result<Vec<_>>>()?;
        let m = hl_maximal(f, p0, &self.family)?.abs();
        integrands(&self.op, &specs, f)?
            .into_iter()
            .map(|mags| {
                let field = UpperHalfField::new(grid, self.time.clone(), mags.into_iter().map(|v| c64::new(v, 0.0)).collect())?;
                let c = carleson_p0(&field, 2.0, p0, &self.family)?.abs();
                Ok(c.iter().zip(&m).filter(|(_, &b)| b > 0.0).map(|(a, b)| a / b).fold(0.0, f64::max))
            })
            .collect()
    }
}

pub fn run_cp_vs_maximal(cfg: &Config) -> Result<ResultTable> {
    cfg.require_preset()?;
    let grid = cfg.grid(1, 64)?;
    let coarse = Grid::new(grid.dim(), grid.cells_per_axis() / 2)?;
    let p0 = cfg.f64_or("p0", 1.5)?;
    if !(p0 > 0.0) {
        return config_err(format!("p0 = {p0} must be positive"));
    }
    let preset = cfg.preset("laplace").to_string();
    let in_range = p_minus(&preset, grid.dim()).is_some_and(|pm| pm < p0 && p0 <= 2.0);
    let seeds = split_seeds(cfg.seed()?, cfg.samples(20)?);
    let (slack, bound) = (cfg.slack()?, cfg.refinement()?);
    let fine = Level::new(cfg, grid)?;
    let crs = Level::new(cfg, coarse)?;
    let per: Vec<(Vec<f64>, Vec<f64>)> = par_map(&seeds, |s| {
        Ok((fine.ratios(&continuum_field(grid, s), p0)?, crs.ratios(&continuum_field(coarse, s), p0)?))
    })?;

    let mut table = ResultTable::default();
    for (k, (fam, m)) in INTEGRANDS.iter().enumerate() {
        let params = json!({ "n": grid.dim(), "N": grid.cells_per_axis(), "preset": preset, "p0": p0,
                             "integrand": fam.name(), "order": m });
        let f_ratios: Vec<f64> = per.iter().map(|(a, _)| a[k]).collect();
        let c_ratios: Vec<f64> = per.iter().map(|(_, b)| b[k]).collect();
        let mut rows = holdout_rows("cp-maximal", params.clone(), f_ratios.clone(), slack)?;
        let sup_f = f_ratios.iter().copied().fold(0.0, f64::max);
        let sup_c = c_ratios.iter().copied().fold(0.0, f64::max);
        let (drift, ok) = refinement_stable(sup_f, sup_c, bound);
        let mut pr = params;
        pr["N"] = json!([coarse.cells_per_axis(), grid.cells_per_axis()]);
        rows.push(Row::new("cp-maximal", pr).check(drift, bound, Provenance::Derived, bound, ok));
        if !in_range {
            rows = rows
                .into_iter()
                .map(|r| Row::new("cp-maximal", r.params).info(r.measured, r.reference, r.provenance, r.tolerance))
                .collect();
        }
        table.rows.extend(rows);
    }

    let constant = GridFunction::constant(grid, c64::new(1.5, -0.5));
    let worst = fine.ratios(&constant, p0)?.into_iter().fold(0.0, f64::max);
    let params = json!({ "n": grid.dim(), "N": grid.cells_per_axis(), "preset": preset, "p0": p0, "field": "constant" });
    table.push(Row::new("cp-maximal", params).check(worst, 0.0, Provenance::Derived, 1e-8, worst <= 1e-8));
    Ok(table)
}
