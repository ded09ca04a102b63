//! Model-based hybrid clustering: fit a Gaussian mixture, then merge its
//! components hierarchically under a density-based dissimilarity.

pub mod dataset;
pub mod dissim;
pub mod error;
pub mod functional;
pub mod io;
pub mod merge;
pub mod mixture;
pub mod properties;
pub mod simlab;

pub use dataset::Dataset;
pub use error::{Error, Result};

