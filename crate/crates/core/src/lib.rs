//! Simulation and estimation of the connection density `p` of a mean-field Hawkes
//! system on a Bernoulli interaction graph, from the event counts of `K` of its `N`
//! individuals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod graph;
pub mod kernel;
pub mod linalg;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{estimate_p, PEstimate, Regime};
pub use experiments::{ExperimentConfig, GraphPolicy};
pub use graph::{GraphMode, InteractionGraph};
pub use kernel::Kernel;
pub use simulator::{counts_on_grid, CountsGrid, EventLog, SimConfig};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
