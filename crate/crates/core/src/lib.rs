pub mod cli;
pub mod dataset;
pub mod ingest;
pub mod meta;
pub mod render;
pub mod service;
pub mod store;
pub mod synth;
pub mod tile;
pub mod transform;

pub use dataset::Dataset;
