//! Dataset and checkpoint files, the synthetic generator, cross-validated
//! training runs and the `resrank` command line, on top of `resrank-core`.

pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod pipeline;
pub mod synthetic;
pub mod trainlog;

mod error;
pub use error::{Error, Result};
