//! Subgraph-aware contrastive training for knowledge graph completion.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod kg;
pub mod loss;
pub mod mcmc;
pub mod paths;
pub mod rng;
pub mod sampler;
pub mod scheduler;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
