//! Limited-data voice conversion with deep bidirectional LSTMs.
//!
//! Spectral features are produced by a multi-speaker average model adapted
//! to the target speaker, then refined by an error reduction network; log-F0
//! is converted by matching voiced-frame statistics and aperiodicity is
//! copied from the source.

pub mod alignment;
pub mod blstm;
pub mod cli;
pub mod config;
mod error;
pub mod features;
pub mod pipeline;
pub mod prosody;
pub mod training;

pub use error::{Error, Result};
