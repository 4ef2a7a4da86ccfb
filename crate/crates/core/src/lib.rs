//! Boris-SDC: spectral deferred corrections with the Boris pusher as sweeper, for
//! charged particles in electric and magnetic fields.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::large_enum_variant)]

pub mod boris;
pub mod error;
pub mod exec;
pub mod fields;
pub mod harness;
pub mod integrators;
pub mod linear;
pub mod quadrature;
pub mod selftest;
pub mod summation;
pub mod verlet;

pub type Vec3 = nalgebra::Vector3<f64>;

pub use error::{Error, Result};
pub use exec::Execution;
pub use fields::{ForceModel, ParticleEnsemble, PenningParams, PenningTrap};
pub use integrators::{IterationMode, Method, ParticleState, Precision, StepConfig};
pub use quadrature::{NodeFamily, QuadratureRule};
pub use verlet::VerletMatrices;
