//! Bodies of the fuzz targets, shared with the seed replay test.

mod bodies;
pub use bodies::*;
