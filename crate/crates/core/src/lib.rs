pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod normal;
pub mod priors;
pub mod sampler;
pub mod simgen;
pub mod transforms;

pub use error::{Error, Result};
