//! Travelling-wave profiles for the delayed nonlocal monostable equation
//! `u_t = u_xx + u G(K * u)`.
//!
//! The crate covers the spectral analysis of the characteristic equations,
//! the planar limit system of the weak generic delay kernel, the discrete-delay
//! food-limited model and the construction of semi-wavefronts by iterating the
//! integral operator between an upper and a lower solution.

pub mod discretedelay;
pub mod error;
pub mod models;
pub mod numerics;
pub mod planarflow;
pub mod profile;
pub mod semiwavefront;
pub mod spectral;

pub use error::{Error, Result};
