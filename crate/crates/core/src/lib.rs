//! Three-stage discontinuous Petrov-Galerkin discretization of the
//! Reissner-Mindlin plate bending model.
//!
//! The shear force is split into an irrotational part (a P1 Poisson
//! problem), a solenoidal part solved together with rotations, bending
//! moments and skeleton traces by a DPG scheme with optimal test functions
//! on a broken degree-3 test space, and a final P1 Poisson problem that
//! recovers the deflection.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line front end and thread pools live in `rm-dpg-cli`.

#![no_std]
#![warn(rust_2018_idioms)]

extern crate alloc;

pub mod error;
pub mod estimator;
pub mod exec;
pub mod fespaces;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod poisson;
pub mod quadrature;
pub mod rates;
pub mod stages;
pub mod dpg;

pub use error::{Error, Result};
pub use mesh::{BcKind, Mesh};
pub use model::{MaterialTensor, ModelConfig};
