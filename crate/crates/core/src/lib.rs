pub mod datakit;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod rtharness;
pub mod tensor;

pub use error::{Error, Result};
