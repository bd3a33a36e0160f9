//! Tomographic reconstruction on a uniformly sampled polar (2D) or
//! cylindrical (3D) grid.
//!
//! Every ring `n` of the grid holds `4(2n - 1)` cells of equal area, so the
//! grid has exactly as many cells as the `N x N` Cartesian image it replaces
//! and maps onto it one-to-one. Rays are traced with binary coefficients:
//! the chord list of the first view is computed once and every other view is
//! obtained by rotating the cached azimuthal angles. The system is solved
//! with a row-action multiplicative ART.
//!
//! A Cartesian Siddon baseline is included for speed and memory comparisons.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod grid;
pub mod instrument;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod scan;
pub mod solver;
pub mod tracer;

pub use error::{Error, Result};
pub use geometry::{Point3, SegmentRecord};
pub use grid::{GridAddress, GridMode, GridSpec, RingLayout};
pub use scan::{ProjectionSet, ScanGeometry};
pub use solver::{ConvergenceReport, Field, SolverConfig, ZeroLinePolicy};
pub use tracer::{Angle, FirstViewCache, Span, TraceScratch};
