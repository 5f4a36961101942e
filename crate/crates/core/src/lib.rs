pub mod autodiff;
pub mod error;
pub mod harness;
pub mod neuron;
pub mod reparam;
pub mod sparse;

pub use error::{Error, Result};
