//! Sunlight capture versus branched-transport cost for planar tree branches.
//!
//! The crate evaluates the payoff `S(μ) − c·I^α(μ)` of a leaf measure `μ` on the
//! closed upper half-plane:
//!
//! * [`measure`] holds piecewise-constant segment measures and their projection
//!   onto the line perpendicular to the light;
//! * [`sunlight`] integrates the saturating exposure `1 − e^{−Φ}` of that
//!   projection, for one or many light directions;
//! * [`irrigation`] computes fluxes and the Gilbert cost `Σ flux^α · length` on
//!   trees rooted at the origin, and finds optimal trees for a handful of sinks;
//! * [`closed_form`] builds the explicit optimal densities along the two
//!   optimal rays;
//! * [`theory`] exposes the scalar positivity functions and thresholds;
//! * [`optimizer`] maximizes the payoff numerically over a fan of rays;
//! * [`cli`] wires everything into the `branchlight` binary.
//!
//! Heavy sweeps run on rayon when the `parallel` feature is enabled (default)
//! and fall back to a plain loop otherwise; see [`exec::Exec`].

pub mod cli;
pub mod closed_form;
pub mod error;
pub mod exec;
pub mod irrigation;
pub mod measure;
pub mod numeric;
pub mod optimizer;
pub mod sunlight;
pub mod svg;
pub mod theory;

pub use error::{Error, Result};
pub use exec::Exec;
pub use measure::{Atom, Direction, Measure, Piece, Point, ProjectedDensity, Segment};
