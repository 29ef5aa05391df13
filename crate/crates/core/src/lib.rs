//! Simulation, training and evaluation of a convolutional jammer suppressor
//! for a synchronous spreading-code uplink with sparse user activity.
//!
//! The pipeline is: [`sigmodel`] synthesizes jammed received signals,
//! [`denoiser`] learns to map them back to the clean user mixture,
//! [`detector`] recovers active users and their QPSK symbols with a
//! matched-filter bank, and [`harness`] runs the Monte-Carlo experiments.

pub mod denoiser;
pub mod detector;
pub mod error;
pub mod harness;
pub mod rng;
pub mod sigmodel;

pub use error::{Error, Result};
pub use num_complex::Complex64;
