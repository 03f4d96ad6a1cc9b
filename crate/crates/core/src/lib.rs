//! Quantum convolutional neural networks for input sizes that are not powers
//! of two.
//!
//! The crate covers the whole pipeline: circuit templates ([`ansatz`]),
//! architecture planning and closed-form resource counts for the five padding
//! strategies ([`architect`]), dense noiseless and noisy simulation
//! ([`simcore`], [`noise`]), dataset preparation ([`datapipe`]) and
//! gradient-based training ([`trainer`]).

pub mod ansatz;
pub mod architect;
pub mod datapipe;
pub mod error;
pub mod noise;
pub mod simcore;
pub mod trainer;

pub use error::{QcnnError, Result};
