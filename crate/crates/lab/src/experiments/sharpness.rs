//! Growth exponent of the change-of-angle inequality on the indicator fixture.

use conical_core::fit::loglog_slope;
use conical_core::tent::continuous_cone_on_indicator;
use serde_json::json;

use crate::config::Config;
use crate::error::{config_err, Result};
use crate::table::{Provenance, ResultTable, Row};

const DEFAULT_CASES: [(usize, f64, f64); 3] = [(2, 2.0, 0.0), (2, 2.0, 1.0), (1, 1.0, 0.0)];
const DEFAULT_APERTURES: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];

/// Fits the log-log slope of `‖A^α a‖_{L^p(w_θ)}` in `α` and compares it with `(n-θ)/p`.
pub fn run_sharpness(cfg: &Config) -> Result<ResultTable> {
    let cases: Vec<(usize, f64, f64)> = if ["grid.n", "p", "weight.theta"].iter().any(|k| cfg.contains(k)) {
        vec![(cfg.usize_or("grid.n", 2)?, cfg.f64_or("p", 2.0)?, cfg.f64_or("weight.theta", 0.0)?)]
    } else {
        DEFAULT_CASES.to_vec()
    };
    let apertures = cfg.list("apertures")?.unwrap_or_else(|| DEFAULT_APERTURES.to_vec());
    if apertures.len() < 2 || apertures.iter().any(|&a| !(a > 0.0)) {
        return config_err("sharpness needs at least two positive apertures");
    }
    let tol = cfg.tol(0.1)?;
    let mut table = ResultTable::default();
    for (n, p, theta) in cases {
        if !(n == 1 || n == 2) {
            return config_err(format!("sharpness runs in dimension 1 or 2, got {n}"));
        }
        if !(theta < n as f64) || !(p > 0.0) {
            return config_err(format!("need θ < n and p > 0, got θ={theta}, p={p}"));
        }
        let norms = apertures
            .iter()
            .map(|&a| continuous_cone_on_indicator(a, p, theta, n))
            .collect::<conical_core::Result<Vec<f64>>>()?;
        let slope = loglog_slope(&apertures, &norms)?;
        let want = (n as f64 - theta) / p;
        let params = json!({ "n": n, "p": p, "theta": theta, "apertures": apertures });
        table.push(Row::new("sharpness", params).check(
            slope,
            want,
            Provenance::Paper,
            tol * want,
            (slope - want).abs() <= tol * want,
        ));
    }
    Ok(table)
}
