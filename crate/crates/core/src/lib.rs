//! Constructive-interference symbol-level precoding for the multiuser MISO
//! downlink: channel and symbol models, CI power minimization and SINR
//! balancing (direct conic, broadcast and dual gradient-projection paths),
//! conventional SINR-constrained baselines, worst-case robust variants and
//! a Monte Carlo harness.

pub mod ci;
pub mod conventional;
pub mod dual;
pub mod error;
pub mod harness;
pub mod model;
pub mod random;
pub mod robust;
pub mod validate;

pub use error::{HarnessError, ModelError, PrecodeError};
