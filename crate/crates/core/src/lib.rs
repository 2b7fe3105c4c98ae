pub mod chain_dump;
pub mod config;
pub mod copula;
pub mod counterfactual;
pub mod dataset;
pub mod design;
pub mod diagnostics;
pub mod error;
pub mod likelihood;
mod linalg;
pub mod logistic;
pub mod mala;
pub mod model;
pub mod pipeline;
pub mod posterior;
pub mod prior;
pub mod propensity;
pub mod report;
pub mod scenario;
pub mod simulate;
pub mod summary;

pub use error::{Error, Result};
