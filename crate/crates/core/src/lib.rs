//! Streamflow on river-network trees driven by compound-Poisson rainfall.
//!
//! Each link `e` of a tree carries discharge `Q_e` and receives hillslope
//! runoff `R_e`. Both are linear reservoirs, and instantaneous storms raise
//! every `R_e` by `H_e a_e P_e`. The crate offers exact event-driven
//! simulation of that process, the Laplace transform of its invariant law
//! with numerical inversion to densities, invariant moments, and tail
//! asymptotics.
//!
//! All quantities are SI internally (seconds, metres, m², m³/s). The
//! [`units`] module converts to the hours / mm / km² / L/s used at the
//! command-line interface.

pub mod dynamics;
pub mod error;
pub mod invariant;
mod kernel;
pub mod linalg;
pub mod moments;
pub mod network;
pub mod pdmp_sim;
pub mod quadrature;
pub mod rainfall;
pub mod units;

pub use dynamics::{HydraulicParams, SystemMatrix};
pub use error::{Error, Result};
pub use invariant::TransformEvaluator;
pub use moments::MomentTable;
pub use network::{IncidenceMatrix, RiverNetwork};
pub use pdmp_sim::StatePath;
pub use rainfall::{MarkDistribution, RainfallModel, SpatialMode};
