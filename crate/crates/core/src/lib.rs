pub mod analysis;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
