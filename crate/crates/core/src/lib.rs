//! Duration and interval hidden Markov models.
//!
//! A model scores tick sequences made of event runs separated by gap ticks.
//! Each hidden state emits a run of explicit duration (the semi-Markov part);
//! the DI-HMM variant additionally weighs the gap between two consecutive
//! states with a truncated Gaussian learned per state pair. Training is plain
//! counting over fully labeled segmentations, and scoring is a log-domain
//! extended Viterbi search over states, durations and intervals.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod decode;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
