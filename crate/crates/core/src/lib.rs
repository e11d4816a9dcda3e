//! takt-core: a meter-tracking toolkit built to adapt beat/downbeat trackers
//! to homogeneous music traditions with minutes of annotated data.
//!
//! The crate provides a bar-pointer Bayesian tracker, a small temporal
//! convolutional network with full CPU training, DBN-style activation
//! decoders, beat evaluation metrics, a subset/seed experiment harness with
//! training-cost instrumentation, tatum-profile analysis, and a synthetic
//! percussion corpus generator for end-to-end testing.
//!
//! Training strategies (`bayes`, `fs`, `ft`, `fsa`, `fta`) live behind the
//! [`strategy::Strategy`] trait and are selected by name from
//! [`strategy::StrategyRegistry`].

pub mod audio;
pub mod bayes;
pub mod beats;
pub mod config;
pub mod decode;
pub mod error;
pub mod harness;
pub mod hmm;
pub mod metrics;
pub mod profile;
pub mod strategy;
pub mod synth;
pub mod tcn;

pub use error::{Error, Result};
