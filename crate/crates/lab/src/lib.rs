//! Seeded experiments over `conical-core`, emitted as CSV result tables.

pub mod config;
pub mod error;
pub mod experiments;
pub mod table;

pub use config::Config;
pub use error::{LabError, Result};
pub use experiments::{run, EXPERIMENTS};
pub use table::{Provenance, ResultTable, Row, Verdict};
