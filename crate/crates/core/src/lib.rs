//! Quantum steering ellipsoids of two-qubit states.

pub mod discord;
pub mod ellipsoid;
pub mod error;
pub mod numerics;
pub mod io;
pub mod lorentz;
pub mod qstate;
pub mod reconstruct;
pub mod separability;
pub mod steering;
pub mod verify;

pub use error::{Error, Result};
