// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// tensor formulas read best with explicit indices
#![allow(clippy::needless_range_loop)]

pub mod analytic;
pub mod cli;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod monitors;
pub mod quadrature;
pub mod rescaling;
pub mod samples;
pub mod scenario;
pub mod support;
pub mod surface;
pub mod verify;

pub use analytic::{AnalyticKind, AnalyticSurface, ExactSolution};
pub use error::{Error, Result};
pub use grid::{DomainShape, Grid, NodeKind};
pub use samples::{SurfaceMeasure, SurfacePoint, SurfaceSamples, Topology};
pub use support::{SupportPatch, Vec3};
pub use surface::{GraphSurface, NodeGeometry, SurfaceGeometry};
