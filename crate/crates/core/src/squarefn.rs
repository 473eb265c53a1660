//! The six conical square functions: heat and Poisson integrands fed through the cone
//! functional, and the exact pointwise dominations between them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::elliptic::semigroup::{evaluate_requests, Derivative, Family, SemigroupRequest, VectorField};
use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::tent::{cone_functional_abs, ConeParams};
use crate::c64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SquareFamily {
    /// `S_{m,H}`: `(t²L)^m e^{-t²L}`, `m ≥ 1`.
    SH,
    /// `G_{m,H}`: `t∇_y (t²L)^m e^{-t²L}`.
    GH,
    /// `𝒢_{m,H}`: `t∇_{y,t} (t²L)^m e^{-t²L}`.
    GcalH,
    /// `S_{K,P}`: `(t√L)^{2K} e^{-t√L}`, `K ≥ 1`.
    SP,
    /// `G_{K,P}`: `t∇_y (t√L)^{2K} e^{-t√L}`.
    GP,
    /// `𝒢_{K,P}`: `t∇_{y,t} (t√L)^{2K} e^{-t√L}`.
    GcalP,
}

impl SquareFamily {
    pub const ALL: [SquareFamily; 6] = [Self::SH, Self::GH, Self::GcalH, Self::SP, Self::GP, Self::GcalP];

    pub fn name(self) -> &'static str {
        match self {
            Self::SH => "s_h",
            Self::GH => "g_h",
            Self::GcalH => "gcal_h",
            Self::SP => "s_p",
            Self::GP => "g_p",
            Self::GcalP => "gcal_p",
        }
    }

    fn semigroup(self) -> Family {
        match self {
            Self::SH | Self::GH | Self::GcalH => Family::Heat,
            Self::SP | Self::GP | Self::GcalP => Family::Poisson,
        }
    }

    fn derivative(self) -> Derivative {
        match self {
            Self::SH | Self::SP => Derivative::None,
            Self::GH | Self::GP => Derivative::Spatial,
            Self::GcalH | Self::GcalP => Derivative::Full,
        }
    }

    /// Smallest admissible order: S-types start at one, gradient types at zero.
    pub fn min_order(self) -> u32 {
        match self {
            Self::SH | Self::SP => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for SquareFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SquareFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown square function '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SquareFunctionSpec {
    pub family: SquareFamily,
    pub order: u32,
    pub aperture: f64,
    pub time: Arc<TimeGrid>,
}

impl SquareFunctionSpec {
    pub fn new(family: SquareFamily, order: u32, aperture: f64, time: Arc<TimeGrid>) -> Result<Self> {
        if order < family.min_order() {
            return Err(Error::InvalidArgument(format!("{family} needs order ≥ {}", family.min_order())));
        }
        if !(aperture > 0.0) {
            return Err(Error::InvalidArgument(format!("aperture {aperture} must be positive")));
        }
        Ok(Self { family, order, aperture, time })
    }

    /// Shorthand: `S_H = S_{1,H}`, `G_H = G_{0,H}`, and so on.
    pub fn default_order(family: SquareFamily, time: Arc<TimeGrid>) -> Self {
        Self { family, order: family.min_order(), aperture: 1.0, time }
    }

    fn requests(&self) -> Result<Vec<SemigroupRequest>> {
        self.time
            .levels()
            .iter()
            .map(|&t| SemigroupRequest::new(self.family.semigroup(), self.family.derivative(), self.order, t))
            .collect()
    }
}

/// Level-major integrand magnitudes of several square functions, from one pass of the
/// functional calculus.
pub fn integrands(op: &EllipticOperator, specs: &[SquareFunctionSpec], f: &GridFunction) -> Result<Vec<Vec<f64>>> {
    if f.grid() != op.grid() {
        return Err(Error::DimensionMismatch("field and operator live on different grids".into()));
    }
    let mut requests = Vec::new();
    for s in specs {
        requests.extend(s.requests()?);
    }
    let fields = evaluate_requests(op, &requests, f)?;
    let mut out = Vec::with_capacity(specs.len());
    let mut it = fields.into_iter();
    for s in specs {
        let mut m = Vec::with_capacity(op.grid().len() * s.time.len());
        for _ in 0..s.time.len() {
            m.extend(it.next().expect("one field per request").magnitude());
        }
        out.push(m);
    }
    Ok(out)
}

fn cone_of(op: &EllipticOperator, spec: &SquareFunctionSpec, mags: &[f64]) -> Result<Vec<f64>> {
    let params = ConeParams::new(spec.aperture, &spec.time);
    cone_functional_abs(op.grid(), &spec.time, mags, &params)
}

/// Values of several square functions of `f`, sharing one calculus pass.
pub fn evaluate_many(op: &EllipticOperator, specs: &[SquareFunctionSpec], f: &GridFunction) -> Result<Vec<Vec<f64>>> {
    integrands(op, specs, f)?
        .iter()
        .zip(specs)
        .map(|(m, s)| cone_of(op, s, m))
        .collect()
}

/// The square function `spec` of `f`, as a real grid function.
pub fn evaluate(op: &EllipticOperator, spec: &SquareFunctionSpec, f: &GridFunction) -> Result<GridFunction> {
    let v = evaluate_many(op, std::slice::from_ref(spec), f)?.remove(0);
    GridFunction::new(*op.grid(), v.into_iter().map(|x| c64::new(x, 0.0)).collect())
}

/// One pointwise inequality `lhs ≤ factor · rhs` checked at every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DominationRow {
    pub name: String,
    pub factor: f64,
    /// `max_x (lhs(x) - factor · rhs(x))`, clipped at zero.
    pub max_violation: f64,
    /// `max_x lhs(x) / rhs(x)` over cells with `rhs > 0`.
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationReport {
    pub rows: Vec<DominationRow>,
}

impl DominationReport {
    pub fn max_violation(&self) -> f64 {
        self.rows.iter().map(|r| r.max_violation).fold(0.0, f64::max)
    }
}

fn compare(name: String, lhs: &[f64], rhs: &[f64], factor: f64) -> DominationRow {
    let mut max_violation: f64 = 0.0;
    let mut max_ratio: f64 = 0.0;
    for (&a, &b) in lhs.iter().zip(rhs) {
        max_violation = max_violation.max(a - factor * b);
        if b > 0.0 {
            max_ratio = max_ratio.max(a / b);
        }
    }
    DominationRow { name, factor, max_violation, max_ratio }
}

/// Checks `G_{m,H} ≤ 𝒢_{m,H}` and `G_{K,P} ≤ 𝒢_{K,P}` for every listed order, and
/// `S_H ≤ 2 𝒢_H`, at every cell.
///
/// `G` and `𝒢` are taken from the same `t∇_{y,t}` field (the first `n` components versus
/// all of them), so the first two inequalities hold exactly in floating point.
pub fn pointwise_domination_report(
    op: &EllipticOperator,
    f: &GridFunction,
    time: Arc<TimeGrid>,
    orders: &[u32],
) -> Result<DominationReport> {
    let grid = *op.grid();
    let n = grid.dim();
    let mut requests = Vec::new();
    for family in [Family::Heat, Family::Poisson] {
        for &m in orders {
            for &t in time.levels() {
                requests.push(SemigroupRequest::new(family, Derivative::Full, m, t)?);
            }
        }
    }
    for &t in time.levels() {
        requests.push(SemigroupRequest::new(Family::Heat, Derivative::None, 1, t)?);
    }
    let fields = evaluate_requests(op, &requests, f)?;
    let levels = time.len();
    let params = ConeParams::new(1.0, &time);
    let cone = |chunk: &[VectorField], count: usize| -> Result<Vec<f64>> {
        let mags: Vec<f64> =
            chunk.iter().flat_map(|v| v.partial_norm_sqr(count).into_iter().map(f64::sqrt)).collect();
        cone_functional_abs(&grid, &time, &mags, &params)
    };
    let mut rows = Vec::new();
    let mut gcal_h0 = None;
    for (fi, label) in ["H", "P"].iter().enumerate() {
        for (oi, &m) in orders.iter().enumerate() {
            let start = (fi * orders.len() + oi) * levels;
            let chunk = &fields[start..start + levels];
            let g = cone(chunk, n)?;
            let gcal = cone(chunk, n + 1)?;
            if fi == 0 && m == 0 {
                gcal_h0 = Some(gcal.clone());
            }
            rows.push(compare(format!("G_{{{m},{label}}} <= Gcal_{{{m},{label}}}"), &g, &gcal, 1.0));
        }
    }
    let gcal_h = match gcal_h0 {
        Some(v) => v,
        None => cone(&evaluate_requests(
            op,
            &time
                .levels()
                .iter()
                .map(|&t| SemigroupRequest::new(Family::Heat, Derivative::Full, 0, t))
                .collect::<Result<Vec<_>>>()?,
            f,
        )?, n + 1)?,
    };
    let s_h = cone(&fields[fields.len() - levels..], 1)?;
    rows.push(compare("S_H <= 2 Gcal_H".into(), &s_h, &gcal_h, 2.0));
    Ok(DominationReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::balls::BallStencil;
    use std::f64::consts::PI;

    #[test]
    fn names_round_trip() {
        for f in SquareFamily::ALL {
            assert_eq!(f.name().parse::<SquareFamily>().unwrap(), f);
        }
        assert!("s_x".parse::<SquareFamily>().is_err());
    }

    #[test]
    fn s_types_need_positive_order() {
        let g = Grid::new(1, 16).unwrap();
        let t = Arc::new(TimeGrid::standard(&g));
        assert!(SquareFunctionSpec::new(SquareFamily::SH, 0, 1.0, t.clone()).is_err());
        assert!(SquareFunctionSpec::new(SquareFamily::GH, 0, 1.0, t).is_ok());
    }

    #[test]
    fn constants_have_no_s_function() {
        let g = Grid::new(1, 16).unwrap();
        let op = EllipticOperator::preset(g, "perturbed").unwrap();
        let t = Arc::new(TimeGrid::standard(&g));
        let spec = SquareFunctionSpec::default_order(SquareFamily::SH, t);
        let v = evaluate(&op, &spec, &GridFunction::constant(g, c64::new(1.0, 1.0))).unwrap();
        assert!(v.abs().iter().all(|&x| x < 1e-8));
    }

    #[test]
    fn fourier_mode_matches_scalar_oracle() {
        let g = Grid::new(1, 32).unwrap();
        let op = EllipticOperator::preset(g, "laplace").unwrap();
        let t = Arc::new(TimeGrid::standard(&g));
        let k = 2.0;
        let f = GridFunction::from_fn(g, |x| c64::from_polar(1.0, 2.0 * PI * k * x[0])).unwrap();
        let mu = 4.0 * (PI * k * g.h()).sin().powi(2) / (g.h() * g.h());
        let spec = SquareFunctionSpec::default_order(SquareFamily::SH, t.clone());
        let got = evaluate(&op, &spec, &f).unwrap().abs();
        let mut want = 0.0;
        for (i, &s) in t.levels().iter().enumerate() {
            let phi = s * s * mu * (-s * s * mu).exp();
            let count = BallStencil::new(&g, s).unwrap().count() as f64;
            want += phi * phi * count * g.h() * t.dt(i) / (s * s);
        }
        for v in got {
            assert!((v - want.sqrt()).abs() < 1e-6 * want.sqrt());
        }
    }
}
