//! Bayesian blocks for point data in one and two dimensions.
//!
//! The data space is tessellated into Voronoi cells (one per point), each cell
//! starts as its own constant-rate Poisson block, and adjacent blocks are merged
//! greedily while the marginal posterior of the partition increases. High
//! density blocks are then grouped into clusters.
//!
//! The pipeline stages live in separate modules:
//!
//! - [`geometry`]: point sets, tessellation, cell volumes in quanta, adjacency.
//! - [`posterior`]: the block posterior, merge factor and partition total.
//! - [`coalesce`]: the greedy merge engine and its iteration history.
//! - [`clusters`]: background estimation, cluster extraction, density maps.
//! - [`oracle`]: exact rational posteriors and exhaustive search for small inputs.
//! - [`io`], [`synth`], [`config`], [`pipeline`]: files, synthetic data and orchestration.

pub mod clusters;
pub mod coalesce;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod posterior;
pub mod synth;

pub use error::{Error, Result};
