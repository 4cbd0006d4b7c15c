//! Variational coherent error mitigation (VCEM) for stabilizer-state
//! preparation circuits.

pub mod analytic;
pub mod circuit;
pub mod clifford;
pub mod cost;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod graph;
pub mod noise;
pub mod optimizer;
pub mod pauli;
pub mod sim;
pub mod twirl;

pub use error::{Result, VcemError};
