//! Sampling from a distribution known only through its characteristic
//! function.
//!
//! A feedforward ReLU generator is trained so that the empirical
//! characteristic function of its outputs matches a target characteristic
//! function in a random-feature MMD. The crate also contains the reference
//! samplers and diagnostics used to check trained generators.

pub mod baselines;
pub mod charfn;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod loss;
pub mod net;
pub mod numkit;
pub mod trainer;

pub use error::{Error, Result};
pub use numkit::{ComplexValue, Matrix, RngStream};
