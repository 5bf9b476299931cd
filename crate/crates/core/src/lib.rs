//! Spectral graph anomaly detection with precomputed Chebyshev bases,
//! Rayleigh-quotient context sampling and adaptive dual-pass fusion.

pub mod cheb;
pub mod cli;
pub mod config;
pub mod csbm;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod homophily;
pub mod model;
pub mod rng;
pub mod rq;
pub mod train;

mod binio;

pub use error::{Error, Result};
