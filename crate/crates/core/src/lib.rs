//! Pairwise fish interaction models and their validation battery.
//!
//! * [`geometry`]: arena, agent states and the instantaneous variables.
//! * [`ingest`]: loading and cleaning of tracked trajectories.
//! * [`abc`]: the kick-event burst-and-coast simulator.
//! * [`neural`]: dense/LSTM layers, Gaussian NLL, Adam.
//! * [`dli`]: the recurrent probabilistic interaction model and its training.
//! * [`engine`]: closed-loop rollouts of the trained model.
//! * [`metrics`]: PDFs, temporal correlations, summary tables, comparisons.
//! * [`cli`]: the `fishpair` command line.

pub mod abc;
pub mod cli;
pub mod dli;
pub mod engine;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod neural;
pub mod rng;
pub mod trajectory;

pub use error::*;
pub use exec::Exec;
pub use geometry::{AgentState, ArenaSpec, SystemState, Vec2};
pub use trajectory::{Segment, Trajectory};
