//! Open-pit production scheduling over a geological ensemble.
//!
//! A genetic algorithm searches cutoff grades and a stage-bench mining order.
//! Its fitness is either the NPV at ensemble-mean grades or that NPV with
//! each period's milled profit reduced by a multiple of the period's
//! Standard Variance, a measure of profit spread across the ensemble.

pub mod config;
pub mod econ;
pub mod error;
pub mod ga;
pub mod model;
pub mod report;
pub mod reserve;
pub mod risk;

pub use config::RunConfig;
pub use error::{Error, Result};
