//! Finite-volume simulation of the two-dimensional Gross-Pitaevskii equation
//! on an annulus, with ground-state computation, Strang splitting in time,
//! vortex detection and radial-mode decomposition.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod field;
pub mod dynamics;
pub mod fv;
pub mod geometry;
pub mod harness;
pub mod ground_state;
pub mod linalg;
pub mod mesh;
pub mod output;
pub mod potentials;
pub mod spectral;
pub mod vortex;

pub use error::{Error, Result};
pub use field::{Field, RealField};
pub use fv::{BoundaryCondition, LaplacianOperator};
pub use geometry::Vec2;
pub use mesh::{MeshParams, RingMesh};
pub use config::{InitialState, Preset, RunConfig};
