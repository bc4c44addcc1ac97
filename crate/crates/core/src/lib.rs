pub mod audio;
pub mod augment;
pub mod checkpoint;
pub mod cli;
pub mod container;
pub mod dataset;
mod error;
pub mod features;
pub mod hpo;
pub mod models;
pub mod train;

pub use error::{LidError, Result};
