//! Weighted boundedness of the six square functions and the comparisons between them.

use std::sync::Arc;

use conical_core::fit::refinement_stable;
use conical_core::squarefn::evaluate_many;
use conical_core::weights::{admissible_interval, power_weight_rw, power_weight_sw};
use conical_core::{EllipticOperator, Grid, SquareFamily, SquareFunctionSpec, TimeGrid, Weight};
use serde_json::json;

use super::{continuum_field, holdout_rows, par_map, split_seeds, weighted_norm};
use crate::config::Config;
use crate::error::{config_err, Result};
use crate::table::{Provenance, ResultTable, Row, Verdict};

/// `(p, θ)` pairs of the Laplacian table; each `w_θ` lies in `A_p` for `n = 2`.
const LAPLACE_EXPONENTS: [(f64, f64); 3] = [(1.5, -0.5), (2.0, -1.0), (4.0, 1.0)];

/// `(p_-(L), p_+(L))` where they are known exactly: every elliptic operator has `(1, ∞)`
/// when `n ≤ 2`, and so does the Laplacian in every dimension.
fn exponent_range(preset: &str, n: usize) -> Option<(f64, f64)> {
    (preset == "laplace" || n <= 2).then_some((1.0, f64::INFINITY))
}

/// Whether `p ∈ W_w(p_-, p_+)` for the power weight `w_θ`, where the square-function bounds are known to hold.
fn inside_range(preset: &str, n: usize, p: f64, theta: f64) -> Result<bool> {
    let Some((lo, hi)) = exponent_range(preset, n) else {
        return Ok(false);
    };
    if !(theta < n as f64) {
        return Ok(false);
    }
    let w = admissible_interval(lo, hi, power_weight_rw(theta, n), power_weight_sw(theta, n))?;
    Ok(w.contains(p))
}

fn demote(rows: Vec<Row>, keep: bool) -> Vec<Row> {
    if keep {
        return rows;
    }
    rows.into_iter()
        .map(|r| Row { verdict: Verdict::Info, ..r })
        .collect()
}

struct Case {
    preset: String,
    grid: Grid,
    exponents: Vec<(f64, f64)>,
}

fn boundedness_cases(cfg: &Config) -> Result<Vec<Case>> {
    let configured = ["operator.preset", "p", "weight.theta", "grid.n", "grid.N"].iter().any(|k| cfg.contains(k));
    if !configured {
        return Ok(vec![
            Case { preset: "laplace".into(), grid: Grid::new(2, 64)?, exponents: LAPLACE_EXPONENTS.to_vec() },
            Case { preset: "perturbed".into(), grid: Grid::new(1, 64)?, exponents: vec![(2.0, 0.0)] },
        ]);
    }
    let preset = cfg.preset("laplace").to_string();
    let laplace = preset == "laplace";
    let grid = cfg.grid(if laplace { 2 } else { 1 }, 64)?;
    let theta = cfg.f64("weight.theta")?;
    let exponents = match cfg.f64("p")? {
        Some(p) => vec![(p, theta.unwrap_or(0.0))],
        None if laplace && grid.dim() == 2 => {
            LAPLACE_EXPONENTS.iter().map(|&(p, t)| (p, theta.unwrap_or(t))).collect()
        }
        None => vec![(2.0, theta.unwrap_or(0.0))],
    };
    Ok(vec![Case { preset, grid, exponents }])
}

fn all_specs(time: &Arc<TimeGrid>) -> Vec<SquareFunctionSpec> {
    SquareFamily::ALL.iter().map(|&f| SquareFunctionSpec::default_order(f, time.clone())).collect()
}

/// Per family and exponent pair, `‖S f‖_{L^p(w)} / ‖f‖_{L^p(w)}` for one sample.
fn sample_ratios(op: &EllipticOperator, weights: &[(f64, Weight)], seed: u64) -> Result<Vec<Vec<f64>>> {
    let grid = *op.grid();
    let time = Arc::new(TimeGrid::standard(&grid));
    let f = continuum_field(grid, seed);
    let values = evaluate_many(op, &all_specs(&time), &f)?;
    let fa = f.abs();
    Ok(values
        .iter()
        .map(|v| weights.iter().map(|(p, w)| weighted_norm(v, w, *p) / weighted_norm(&fa, w, *p)).collect())
        .collect())
}

/// Suprema over the samples, indexed `[family][exponent]`.
fn suprema(per: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let mut out = per[0].clone();
    for s in &per[1..] {
        for (a, b) in out.iter_mut().zip(s) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = x.max(*y);
            }
        }
    }
    out
}

pub fn run_boundedness(cfg: &Config) -> Result<ResultTable> {
    cfg.require_preset()?;
    let seeds = split_seeds(cfg.seed()?, cfg.samples(100)?);
    let bound = cfg.refinement()?;
    let mut table = ResultTable::default();
    for case in boundedness_cases(cfg)? {
        let fine = case.grid;
        let coarse = Grid::new(fine.dim(), fine.cells_per_axis() / 2)?;
        let weights_on = |g: Grid| -> Result<Vec<(f64, Weight)>> {
            case.exponents.iter().map(|&(p, t)| Ok((p, cfg.weight(g, t)?))).collect()
        };
        let (wf, wc) = (weights_on(fine)?, weights_on(coarse)?);
        let name = case.preset.as_str();
        let (of, oc) = (EllipticOperator::preset(fine, name)?, EllipticOperator::preset(coarse, name)?);
        let per: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> =
            par_map(&seeds, |s| Ok((sample_ratios(&of, &wf, s)?, sample_ratios(&oc, &wc, s)?)))?;
        let (sf, sc): (Vec<_>, Vec<_>) = per.into_iter().unzip();
        let (sup_f, sup_c) = (suprema(&sf), suprema(&sc));
        for (k, &(p, theta)) in case.exponents.iter().enumerate() {
            if !(p > 0.0) {
                return config_err(format!("p = {p} must be positive"));
            }
            let inside = inside_range(name, fine.dim(), p, theta)?;
            for (fi, fam) in SquareFamily::ALL.iter().enumerate() {
                let params = json!({ "preset": name, "n": fine.dim(), "p": p, "theta": theta,
                                     "family": fam.name(), "samples": seeds.len() });
                let mut rows = Vec::new();
                for (cells, v) in [(fine.cells_per_axis(), sup_f[fi][k]), (coarse.cells_per_axis(), sup_c[fi][k])] {
                    let mut pr = params.clone();
                    pr["N"] = cells.into();
                    rows.push(Row::new("boundedness", pr).info(v, f64::NAN, Provenance::Derived, 0.0));
                }
                let (drift, ok) = refinement_stable(sup_f[fi][k], sup_c[fi][k], bound);
                let mut pr = params;
                pr["N"] = json!([coarse.cells_per_axis(), fine.cells_per_axis()]);
                rows.push(Row::new("boundedness", pr).check(drift, bound, Provenance::Derived, bound, ok));
                table.rows.extend(demote(rows, inside));
            }
        }
    }
    Ok(table)
}

/// `(label, lhs, rhs)` of each comparison `‖lhs f‖ ≲ ‖rhs f‖`.
const COMPARISONS: [(&str, (SquareFamily, u32), (SquareFamily, u32)); 4] = [
    ("S_{2,H} vs S_{1,H}", (SquareFamily::SH, 2), (SquareFamily::SH, 1)),
    ("Gcal_{2,H} vs S_{1,H}", (SquareFamily::GcalH, 2), (SquareFamily::SH, 1)),
    ("S_{1,P} vs S_{1,H}", (SquareFamily::SP, 1), (SquareFamily::SH, 1)),
    ("Gcal_P vs Gcal_H", (SquareFamily::GcalP, 0), (SquareFamily::GcalH, 0)),
];

pub fn run_comparisons(cfg: &Config) -> Result<ResultTable> {
    let grid = cfg.grid(2, 32)?;
    let op = cfg.operator(grid, "laplace")?;
    let preset = if cfg.contains("operator.coeff_file") { "file" } else { cfg.preset("laplace") };
    let time = cfg.time(&grid)?;
    let p = cfg.f64_or("p", 2.0)?;
    if !(p > 0.0) {
        return config_err(format!("p = {p} must be positive"));
    }
    let thetas = match cfg.f64("weight.theta")? {
        Some(t) => vec![t],
        None => vec![0.0, -1.0],
    };
    let weights = thetas.iter().map(|&t| Ok((t, cfg.weight(grid, t)?))).collect::<Result<Vec<_>>>()?;
    let slack = cfg.slack()?;
    let seeds = split_seeds(cfg.seed()?, cfg.samples(20)?);

    let mut specs: Vec<(SquareFamily, u32)> = Vec::new();
    for (_, l, r) in COMPARISONS {
        for s in [l, r] {
            if !specs.contains(&s) {
                specs.push(s);
            }
        }
    }
    let spec_list = specs
        .iter()
        .map(|&(f, m)| SquareFunctionSpec::new(f, m, 1.0, time.clone()))
        .collect::<conical_core::Result<Vec<_>>>()?;
    let index = |s: (SquareFamily, u32)| specs.iter().position(|&x| x == s).expect("listed");
    // per sample, per weight: L^p(w) norm of every listed square function
    let norms: Vec<Vec<Vec<f64>>> = par_map(&seeds, |s| {
        let values = evaluate_many(&op, &spec_list, &continuum_field(grid, s))?;
        Ok(weights.iter().map(|(_, w)| values.iter().map(|v| weighted_norm(v, w, p)).collect()).collect())
    })?;

    let mut table = ResultTable::default();
    for (wi, (theta, _)) in weights.iter().enumerate() {
        let inside = inside_range(preset, grid.dim(), p, *theta)?;
        for (label, l, r) in COMPARISONS {
            let ratios: Vec<f64> = norms.iter().map(|n| n[wi][index(l)] / n[wi][index(r)]).collect();
            let params = json!({ "preset": preset, "n": grid.dim(), "N": grid.cells_per_axis(), "p": p,
                                 "theta": theta, "comparison": label, "samples": seeds.len() });
            table.rows.extend(demote(holdout_rows("comparisons", params, ratios, slack)?, inside));
        }
    }
    Ok(table)
}
