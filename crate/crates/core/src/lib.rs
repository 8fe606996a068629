//! Botnet traffic detection from network flows.

pub mod classifiers;
pub mod dataset;
pub mod detector;
pub mod featsel;
pub mod flow;
pub mod ingest;
pub mod metrics;
pub mod optimize;
pub mod rng;
pub mod workers;
