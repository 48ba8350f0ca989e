//! Port-Hamiltonian modelling and structure-preserving model reduction of a
//! coupled plate–cavity–plate system.
//!
//! Numerics are generic over [`Real`] (`f32`, `f64`); the aliases below fix
//! double precision.

pub mod basis;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod mtx;
pub mod ph;
pub mod reduce;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

use nalgebra::Complex;

/// Double-precision coupled second-order system.
pub type CoupledSystem = model::CoupledSecondOrderSystem<f64>;
pub type PhSystem = ph::PhDescriptorSystem<f64>;
pub type Trajectory = integrate::Trajectory<f64>;
pub type ComplexTrajectory = integrate::Trajectory<Complex<f64>>;
pub type Snapshots = basis::SnapshotMatrix<f64>;
pub type Basis = basis::ReducedBasis<f64>;
pub type Rom = reduce::ReducedSystem<f64>;
pub type ComplexRom = reduce::ReducedSystem<Complex<f64>>;
