//! Hybrid quantum-classical calibration of low-cost PM2.5 sensors.
//!
//! Statevector simulation and variational circuits live in [`sim`] and
//! [`vqc`], classical layers in [`neural`], the four calibrators in
//! [`models`], ingestion and windowing in [`data`], and evaluation
//! protocols in [`experiments`].

pub mod data;
pub mod error;
pub mod experiments;
pub mod models;
pub mod neural;
pub mod par;
pub mod sim;
pub mod vqc;

pub use error::{Category, Error, Result};
