//! Numerical core of a three-dimensional implicit particle-in-cell engine.
//!
//! Everything in this crate is allocation-only (`no_std` + `alloc`): grid
//! geometry, structure-of-arrays particle storage, the fused implicit mover and
//! moment deposition kernel, the matrix-free Krylov field solver, and the
//! precision/diagnostic helpers. Threading, timing, and file formats live in the
//! `batchpic` companion crate.
//!
//! Floating-point precision is a type parameter throughout. Particle data uses
//! a `P: Real` and field data an `F: Real`; the three supported combinations are
//! double (`f64`/`f64`), single (`f32`/`f32`) and mixed (`f32` particles with
//! `f64` fields).
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod deck;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod mover;
pub mod particles;
pub mod real;
pub mod solver;

pub use deck::{
    FieldCoupling, InitKind, OutputConfig, SimulationDeck, SolverParams, SpeciesParams,
};
pub use error::{Error, Result};
pub use fields::{FieldGrid, MomentAccumulator, MomentGrid};
pub use grid::{Axis, Boundary, GridGeometry};
pub use particles::{BatchPlan, ParticleBuffer};
pub use real::{Precision, PrecisionMode, Real};
