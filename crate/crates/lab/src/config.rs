//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use conical_core::{EllipticOperator, Grid, TimeGrid, Weight};

use crate::error::{config_err, LabError, Result};

/// Every key the harness understands, with a one-line meaning.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "master seed for all sampled fields (required)"),
    ("grid.n", "spatial dimension"),
    ("grid.N", "cells per axis (fine resolution in refinement runs)"),
    ("operator.preset", "laplace or perturbed"),
    ("operator.coeff_file", "binary coefficient field, overrides the preset"),
    ("time.t0", "smallest time level"),
    ("time.ratio", "geometric ratio between levels"),
    ("time.levels", "number of time levels"),
    ("weight.theta", "power-weight exponent θ in w(x) = |x - c|^{-θ}"),
    ("weight.center", "power-weight center, comma-separated"),
    ("p", "integrability exponent"),
    ("p0", "inner exponent of C_{p0} and M_{p0}"),
    ("q", "inner exponent of the cone and Carleson functionals"),
    ("r", "A_r class index"),
    ("s", "RH_{s'} class index"),
    ("branch", "change-of-angle branch: i or ii"),
    ("apertures", "comma-separated apertures"),
    ("samples", "number of sampled fields"),
    ("tol", "relative tolerance of exponent checks"),
    ("holdout.slack", "allowed growth of the fitted constant on held-out samples"),
    ("refinement.ratio", "largest N vs N/2 ratio still called bounded"),
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return config_err(format!("line {}: expected `key = value`, got {raw:?}", no + 1));
            };
            let (k, v) = (k.trim(), v.trim());
            if cfg.values.contains_key(k) {
                return config_err(format!("line {}: duplicate key `{k}`", no + 1));
            }
            cfg.set(k, v).map_err(|e| LabError::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets or overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return config_err(format!("unknown key `{key}`"));
        }
        if value.is_empty() {
            return config_err(format!("key `{key}` has an empty value"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let Some((k, v)) = pair.split_once('=') else {
            return config_err(format!("override {pair:?} is not `key=value`"));
        };
        self.set(k.trim(), v.trim())
    }

    pub fn with(mut self, key: &str, value: &str) -> Result<Self> {
        self.set(key, value)?;
        Ok(self)
    }

    /// Checks what every experiment needs before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        for key in self.values.keys() {
            match key.as_str() {
                "operator.preset" | "operator.coeff_file" | "branch" => {}
                "weight.center" | "apertures" => {
                    self.list(key)?;
                }
                _ => {
                    self.f64(key)?;
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn seed(&self) -> Result<u64> {
        let Some(v) = self.values.get("seed") else {
            return config_err("`seed` is required");
        };
        v.parse().map_err(|_| LabError::Config(format!("seed {v:?} is not a nonnegative integer")))
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.values
            .get(key)
            .map(|v| {
                let x: f64 = v.parse().map_err(|_| LabError::Config(format!("`{key}` = {v:?} is not a number")))?;
                if x.is_nan() {
                    return config_err(format!("`{key}` is NaN"));
                }
                Ok(x)
            })
            .transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.values
            .get(key)
            .map(|v| v.parse().map_err(|_| LabError::Config(format!("`{key}` = {v:?} is not a count"))))
            .transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.values
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim().parse().map_err(|_| LabError::Config(format!("`{key}` entry {x:?} is not a number")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn slack(&self) -> Result<f64> {
        positive(self, "holdout.slack", conical_core::fit::HOLDOUT_SLACK)
    }

    pub fn refinement(&self) -> Result<f64> {
        positive(self, "refinement.ratio", conical_core::fit::REFINEMENT_RATIO)
    }

    pub fn tol(&self, default: f64) -> Result<f64> {
        positive(self, "tol", default)
    }

    pub fn samples(&self, default: usize) -> Result<usize> {
        let s = self.usize_or("samples", default)?;
        if s < 4 {
            return config_err(format!("need at least 4 samples, got {s}"));
        }
        Ok(s)
    }

    pub fn grid(&self, dim: usize, cells: usize) -> Result<Grid> {
        Ok(Grid::new(self.usize_or("grid.n", dim)?, self.usize_or("grid.N", cells)?)?)
    }

    /// The configured time grid, or the standard one of `grid`.
    pub fn time(&self, grid: &Grid) -> Result<Arc<TimeGrid>> {
        let keys = ["time.t0", "time.ratio", "time.levels"];
        let given = keys.iter().filter(|k| self.contains(k)).count();
        if given == 0 {
            return Ok(Arc::new(TimeGrid::standard(grid)));
        }
        if given != 3 {
            return config_err("time.t0, time.ratio and time.levels must be given together");
        }
        let t0 = self.f64("time.t0")?.unwrap_or_default();
        let ratio = self.f64("time.ratio")?.unwrap_or_default();
        let levels = self.usize("time.levels")?.unwrap_or_default();
        Ok(Arc::new(TimeGrid::new(grid, t0, ratio, levels)?))
    }

    pub fn preset<'a>(&'a self, default: &'a str) -> &'a str {
        self.str("operator.preset").unwrap_or(default)
    }

    pub fn operator(&self, grid: Grid, default: &str) -> Result<EllipticOperator> {
        if let Some(path) = self.str("operator.coeff_file") {
            let file = std::fs::File::open(path)
                .map_err(|e| LabError::Config(format!("cannot open coefficient file {path}: {e}")))?;
            let coeff = conical_core::CoefficientField::read_from(std::io::BufReader::new(file))?;
            if *coeff.grid() != grid {
                return config_err("coefficient file grid differs from grid.n / grid.N");
            }
            return Ok(EllipticOperator::assemble(grid, coeff)?);
        }
        let name = self.preset(default);
        if !matches!(name, "laplace" | "perturbed") {
            return config_err(format!("unknown operator preset `{name}`"));
        }
        Ok(EllipticOperator::preset(grid, name)?)
    }

    /// Refinement studies rebuild the operator at two resolutions.
    pub fn require_preset(&self) -> Result<()> {
        if self.contains("operator.coeff_file") {
            return config_err("refinement experiments need a preset; a coefficient file fixes one resolution");
        }
        Ok(())
    }

    pub fn center(&self, dim: usize) -> Result<Vec<f64>> {
        let c = self.list("weight.center")?.unwrap_or_else(|| vec![0.5; dim]);
        if c.len() != dim || c.iter().any(|x| !(0.0..1.0).contains(x)) {
            return config_err(format!("weight.center needs {dim} coordinates in [0, 1)"));
        }
        Ok(c)
    }

    pub fn weight(&self, grid: Grid, theta: f64) -> Result<Weight> {
        if theta == 0.0 {
            return Ok(Weight::uniform(grid));
        }
        Ok(Weight::power(grid, theta, &self.center(grid.dim())?)?)
    }
}

fn positive(cfg: &Config, key: &str, default: f64) -> Result<f64> {
    let v = cfg.f64_or(key, default)?;
    if !(v > 0.0) || v.is_infinite() {
        return config_err(format!("`{key}` must be positive and finite, got {v}"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = Config::parse("# header\nseed = 7\np = 2.5 # inline\n\n").unwrap();
        assert_eq!(c.seed().unwrap(), 7);
        assert_eq!(c.f64("p").unwrap(), Some(2.5));
        c.set_pair("p=3").unwrap();
        assert_eq!(c.f64("p").unwrap(), Some(3.0));
    }

    #[test]
    fn rejects_unknown_duplicate_and_missing_seed() {
        assert!(Config::parse("seed = 1\nfoo = 2").is_err());
        assert!(Config::parse("seed = 1\nseed = 2").is_err());
        assert!(Config::parse("p 2").is_err());
        assert!(Config::parse("p = 2").unwrap().validate().is_err());
        assert!(Config::parse("seed = 1\np = two").unwrap().validate().is_err());
    }

    #[test]
    fn time_keys_come_together() {
        let g = Grid::new(1, 32).unwrap();
        let c = Config::parse("seed = 1\ntime.t0 = 0.02").unwrap();
        assert!(c.time(&g).is_err());
        let c = c.with("time.ratio", "2").unwrap().with("time.levels", "4").unwrap();
        assert_eq!(c.time(&g).unwrap().len(), 4);
    }
}
