//! Simulation and verification toolkit for three random geometric
//! subdivision chains:
//!
//! * [`quadchain`]: quadrilaterals cut by their midpoint lines, converging to
//!   parallelograms at a geometric rate;
//! * [`bisector`]: triangles cut by their angle bisectors, an average-contractive
//!   iterated function system on the simplex of angles;
//! * [`subtriangle`]: triangles replaced by the triangle on three uniform side
//!   points, which flatten exponentially fast.
//!
//! [`oracle`] holds the numerical integration used to check every closed form,
//! [`stats`] the estimators, and [`cli`] the command-line experiments.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bisector;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod quadchain;
pub mod report;
pub mod rng;
pub mod stats;
pub mod subtriangle;

pub use error::{Error, Result};
pub use geometry::{shape_from_vertices, simplex_distance, AngleTriple, Quadrilateral, ShapeCoord, UniformTriple, Vec2};
pub use rng::RandomSource;
