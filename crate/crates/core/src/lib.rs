//! Numerical core for conical square functions of divergence-form elliptic operators on
//! the periodic torus: meshes and fields, Muckenhoupt weights, the discrete operator with
//! its functional calculus, tent-space functionals and the six square functions.

pub mod balls;
pub mod elliptic;
pub mod error;
pub mod fit;
pub mod grid;
pub mod squarefn;
pub mod tent;
pub mod weights;

pub use num_complex::Complex64 as c64;

pub use balls::{Ball, BallFamily};
pub use elliptic::semigroup::{
    heat_family, heat_gradient, poisson_family, poisson_gradient, Derivative, Family, PoissonMethod,
    SemigroupRequest, VectorField,
};
pub use elliptic::{Backend, CalculusOptions, CoefficientField, EllipticOperator, Symbol};
pub use error::{Error, Result};
pub use grid::{ball_cells, lp_norm_weighted, torus_distance, Grid, GridFunction, TimeGrid, UpperHalfField};
pub use squarefn::{SquareFamily, SquareFunctionSpec};
pub use tent::ConeParams;
pub use weights::{PowerWeight, Weight};
