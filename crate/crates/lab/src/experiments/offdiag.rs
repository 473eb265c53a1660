//! Off-diagonal decay of the heat and Poisson families between single cells.

use conical_core::elliptic::offdiag::{cell_gap, fit_decay, offdiagonal_opnorm, DecayModel};
use conical_core::{Derivative, EllipticOperator, Family, SemigroupRequest};
use serde_json::json;

use crate::config::Config;
use crate::error::{config_err, Result};
use crate::table::{Provenance, ResultTable, Row};

/// Separations in cells along the first axis.
const SEPARATIONS: [usize; 6] = [2, 4, 6, 8, 10, 12];
/// Time scale in cells.
const T_CELLS: f64 = 4.0;
/// Largest slope of `log‖·‖` in `d²/t²` accepted as Gaussian decay.
const HEAT_SLOPE: f64 = -0.125;

/// `(family, derivative, polynomial order claimed for the Poisson scale)`.
const CASES: [(Family, Derivative, f64); 4] = [
    (Family::Heat, Derivative::None, f64::INFINITY),
    (Family::Heat, Derivative::Spatial, f64::INFINITY),
    (Family::Poisson, Derivative::None, 0.5),
    (Family::Poisson, Derivative::Spatial, 1.0),
];

fn label(family: Family, d: Derivative) -> &'static str {
    match (family, d) {
        (Family::Heat, Derivative::None) => "heat",
        (Family::Heat, _) => "heat_gradient",
        (Family::Poisson, Derivative::None) => "poisson",
        (Family::Poisson, _) => "poisson_gradient",
    }
}

pub fn run_offdiagonal(cfg: &Config) -> Result<ResultTable> {
    let grid = cfg.grid(1, 64)?;
    let op = cfg.operator(grid, "laplace")?;
    let t = T_CELLS * grid.h();
    let far = *SEPARATIONS.last().expect("nonempty");
    if 2 * far >= grid.cells_per_axis() {
        return config_err(format!("grid.N = {} is too small for separations up to {far} cells", grid.cells_per_axis()));
    }
    let mut table = ResultTable::default();
    for (family, derivative, order) in CASES {
        let (x, norms) = series(&op, family, derivative, t)?;
        let fit = fit_decay(&x, &norms)?;
        let params = json!({ "n": grid.dim(), "N": grid.cells_per_axis(), "preset": cfg.preset("laplace"),
                             "family": label(family, derivative), "t": t, "separations": SEPARATIONS });
        let with = |key: &str| {
            let mut p = params.clone();
            p["check"] = key.into();
            p
        };
        let exp_pref = fit.preferred() == DecayModel::Exponential;
        match family {
            Family::Heat => {
                table.push(Row::new("offdiag", with("exponential preferred")).check(
                    fit.exp_rss,
                    fit.poly_rss,
                    Provenance::Derived,
                    0.0,
                    exp_pref,
                ));
                let ok = fit.exp_slope <= HEAT_SLOPE;
                let row = Row::new("offdiag", with("slope in d^2/t^2"));
                table.push(if derivative == Derivative::None {
                    row.check(fit.exp_slope, HEAT_SLOPE, Provenance::Derived, 0.0, ok)
                } else {
                    row.info(fit.exp_slope, HEAT_SLOPE, Provenance::Derived, 0.0)
                });
            }
            Family::Poisson => {
                table.push(Row::new("offdiag", with("polynomial preferred")).check(
                    fit.poly_rss,
                    fit.exp_rss,
                    Provenance::Derived,
                    0.0,
                    !exp_pref,
                ));
                let floor = order - 0.5;
                table.push(Row::new("offdiag", with("polynomial order")).check(
                    fit.poly_order,
                    order,
                    Provenance::Paper,
                    0.5,
                    fit.poly_order >= floor,
                ));
            }
        }
    }
    Ok(table)
}

/// `(d²/t², ‖χ_F T_t χ_E‖_{2→2})` for `E` the first cell and `F` a cell `k` steps away.
fn series(op: &EllipticOperator, family: Family, derivative: Derivative, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = op.grid();
    let req = SemigroupRequest::new(family, derivative, 0, t)?;
    let (mut xs, mut ns) = (Vec::new(), Vec::new());
    for k in SEPARATIONS {
        let d = cell_gap(g, 0, k);
        xs.push(d * d / (t * t));
        ns.push(offdiagonal_opnorm(op, &req, &[0], &[k], 2.0, 2.0)?);
    }
    Ok((xs, ns))
}
