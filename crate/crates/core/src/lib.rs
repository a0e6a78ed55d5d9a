//! Styled documents, design jitters, a toy rasterizer and dataset forging.

pub mod dataset;
pub mod doc;
pub mod fixtures;
pub mod jitter;
pub mod raster;
pub mod seed;
