//! Simulation and analysis toolkit for a transmon coupled to a multimode
//! phonon resonator.

pub mod analysis;
pub mod benchmarking;
pub mod compiler;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod executor;
pub mod experiments;
pub mod gates;
pub mod linalg;
pub mod tomography;

pub use error::{Error, Result};
