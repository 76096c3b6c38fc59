//! Mixed finite element solver for the stochastic Boussinesq system with
//! multiplicative noise on the unit square.
//!
//! Time stepping is semi-implicit Euler-Maruyama; velocity and pressure use
//! the MINI pair (P1 + cubic bubble / P1), temperature uses P1. The
//! [`experiments`] module contains the Monte Carlo harness for strong
//! temporal and spatial error rates.

pub mod assembly;
pub mod config;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mesh;
pub mod spaces;
pub mod stepper;
pub mod stochastic;
pub mod verify;

pub use error::{Error, Result};
