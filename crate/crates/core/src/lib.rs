//! Numerical lab for the subgradient method on stratifiable functions.
//!
//! The crate runs `x_{k+1} = x_k - γ_k v_k` on a catalog of functions with
//! analytic stratifications, assigns each iterate to a stratum through a
//! selection built from conical neighborhoods, and audits the resulting
//! descent inequalities numerically.

// Guards written as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod descent;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod neighborhoods;
pub mod selection;
pub mod stratification;
pub mod stratum;
pub mod svg;
pub mod verify;

pub use catalog::{CatalogFunction, Constants, Objective};
pub use descent::{run, RunMode, StepSchedule, Trajectory};
pub use error::{Error, Result};
pub use geometry::{DomainBox, LinearMap, Point, Vector};
pub use neighborhoods::{NeighborhoodParams, Neighborhoods, ValidationTier};
pub use selection::{build_selection, SelectionFunction};
pub use stratification::Stratification;
