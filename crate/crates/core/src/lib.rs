//! Simulation lab for detection-event driven steering of quantum error
//! correction control parameters.

pub mod agent;
pub mod circuit;
pub mod decoder;
pub mod detgraph;
pub mod error;
pub mod harness;
pub mod noise;
pub mod simulator;

pub use error::{Error, Result};
