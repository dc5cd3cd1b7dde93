//! Gramian Angular Field imaging of ECG heartbeats and a small convolutional
//! classifier trained from scratch.
//!
//! The crate is organised as a pipeline:
//!
//! * [`signal_io`] loads fixed-length heartbeat segments from CSV and draws
//!   stratified subsets.
//! * [`gaf`] turns a 1-D series into a 2-D summation/difference field image.
//! * [`nn`] is a minimal channels-last tensor engine with hand-written
//!   backward passes and SGD/Adam.
//! * [`model`] assembles the 8-layer CNN on top of [`nn`].
//! * [`evalx`] trains models and computes accuracy, F1, confusion matrices
//!   and one-vs-rest ROC curves.

pub mod error;
pub mod evalx;
pub mod gaf;
pub mod model;
pub mod nn;
pub mod signal_io;

pub use error::{Error, Result};
