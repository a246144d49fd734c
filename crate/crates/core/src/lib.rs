//! Simulation library for channel training and estimation in systems aided by
//! a reconfigurable intelligent surface (RIS).
//!
//! The crate is organised around one narrowband model ([`model`]) and the
//! random channel generators in [`channels`]. On top of these sit the
//! estimation schemes:
//!
//! * [`training`] and [`linear`]: designed training states with LS / LMMSE,
//! * [`spectral`]: training-overhead-aware achievable rates and power splits,
//! * [`sparse`]: compressive recovery of few-path channels (OMP, subspace pursuit),
//! * [`ofdm`]: wideband estimation with full or interpolated pilots,
//! * [`multiuser`]: overhead-reduction protocols for many users.
//!
//! [`harness`] turns all of the above into reproducible Monte Carlo sweeps
//! written as CSV.

pub mod channels;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod linear;
pub mod model;
pub mod multiuser;
pub mod ofdm;
pub mod rng;
pub mod sparse;
pub mod spectral;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use model::{CascadedChannel, NarrowbandChannelSet, RisState, SystemConfig};
pub use training::{TrainingFamily, TrainingPlan};
